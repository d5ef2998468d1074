//! Direct-transcription certificate for the feedback law.
//!
//! Controls are piecewise constant on `N` equal segments. States are
//! propagated exactly across each segment with the matrix exponential
//! (variation of constants), the cost integral uses Simpson's rule on a
//! subgrid, and the resulting convex quadratic is minimized by conjugate
//! gradients with an exact discrete-adjoint gradient. Nothing here goes
//! through the Riccati or RK4 code paths.

use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{expm, simpson_weights, Matrix, Vector};

/// Subintervals per segment for the cost quadrature (even, for Simpson).
const SUBSTEPS: usize = 8;

/// Piecewise-constant control parameterization of a GLQ instance.
#[derive(Debug, Clone)]
pub struct TranscribedProblem {
    pub problem: GlqProblem,
    pub x0: Vector,
    pub horizon: f64,
    pub controls: Vec<Vector>,
}

impl TranscribedProblem {
    /// Zero initial controls on `segments` equal pieces.
    pub fn new(problem: &GlqProblem, x0: &Vector, horizon: f64, segments: usize) -> Result<Self> {
        if segments < 2 {
            return Err(Error::InvalidArgument(format!("need at least two segments, got {segments}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if x0.len() != problem.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "oracle initial state",
                expected: format!("length {}", problem.state_dim()),
                found: x0.len().to_string(),
            });
        }
        Ok(Self {
            problem: problem.clone(),
            x0: x0.clone(),
            horizon,
            controls: vec![Vector::zeros(problem.control_dim()); segments],
        })
    }

    pub fn segments(&self) -> usize {
        self.controls.len()
    }

    pub fn segment_length(&self) -> f64 {
        self.horizon / self.controls.len() as f64
    }

    pub fn with_controls(&self, controls: Vec<Vector>) -> Result<Self> {
        if controls.len() != self.segments() || controls.iter().any(|u| u.len() != self.problem.control_dim()) {
            return Err(Error::DimensionMismatch {
                context: "oracle controls",
                expected: format!("{} vectors of length {}", self.segments(), self.problem.control_dim()),
                found: format!("{} vectors", controls.len()),
            });
        }
        Ok(Self {
            controls,
            ..self.clone()
        })
    }

    /// Control value at time `t` (right-continuous, last segment closed).
    pub fn control_at(&self, t: f64) -> &Vector {
        let i = (t / self.segment_length()).floor().max(0.0) as usize;
        &self.controls[i.min(self.segments() - 1)]
    }
}

/// Exact flow maps of one segment evaluated on the quadrature subgrid:
/// `x(τ_j) = flow[j]·x + input[j]·u`.
struct SegmentMaps {
    flow: Vec<Matrix>,
    input: Vec<Matrix>,
    weights: Vec<f64>,
}

impl SegmentMaps {
    fn new(problem: &GlqProblem, segment: f64) -> Self {
        let (n, m) = (problem.state_dim(), problem.control_dim());
        let mut augmented = Matrix::zeros(n + m, n + m);
        augmented.view_mut((0, 0), (n, n)).copy_from(problem.a());
        augmented.view_mut((0, n), (n, m)).copy_from(problem.b());
        let sub = segment / SUBSTEPS as f64;
        let (flow, input) = (0..=SUBSTEPS)
            .map(|j| {
                let e = expm(&augmented, j as f64 * sub);
                (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
            })
            .unzip();
        Self {
            flow,
            input,
            weights: simpson_weights(SUBSTEPS + 1, sub),
        }
    }

    fn end_flow(&self) -> &Matrix {
        &self.flow[SUBSTEPS]
    }

    fn end_input(&self) -> &Matrix {
        &self.input[SUBSTEPS]
    }
}

/// Segment-boundary states and total cost of a transcribed problem.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub cost: f64,
}

struct Evaluator<'a> {
    problem: &'a GlqProblem,
    maps: SegmentMaps,
    ctc: Matrix,
    ktk: Matrix,
}

impl<'a> Evaluator<'a> {
    fn new(tp: &'a TranscribedProblem) -> Self {
        let p = &tp.problem;
        Self {
            problem: p,
            maps: SegmentMaps::new(p, tp.segment_length()),
            ctc: p.c().transpose() * p.c(),
            ktk: p.k().transpose() * p.k(),
        }
    }

    fn states(&self, x0: &Vector, controls: &[Vector]) -> Vec<Vector> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(x0.clone());
        for u in controls {
            let x = states.last().unwrap();
            states.push(self.maps.end_flow() * x + self.maps.end_input() * u);
        }
        states
    }

    fn cost(&self, x0: &Vector, controls: &[Vector]) -> (Vec<Vector>, f64) {
        let states = self.states(x0, controls);
        let mut cost = 0.0;
        for (x, u) in states.iter().zip(controls) {
            for j in 0..=SUBSTEPS {
                let xs = &self.maps.flow[j] * x + &self.maps.input[j] * u;
                cost += self.maps.weights[j] * self.problem.running_cost_unchecked(&xs, u).total;
            }
        }
        (states, cost)
    }

    /// Gradient of the discretized cost; `affine = false` drops `x0`, `z`, `v`
    /// and yields the Hessian action on `controls`.
    fn gradient(&self, x0: &Vector, controls: &[Vector], affine: bool) -> Vec<Vector> {
        let zero_x0 = Vector::zeros(x0.len());
        let start = if affine { x0 } else { &zero_x0 };
        let states = self.states(start, controls);
        let n = self.problem.state_dim();
        let mut costate = Vector::zeros(n);
        let mut grads = vec![Vector::zeros(self.problem.control_dim()); controls.len()];
        for k in (0..controls.len()).rev() {
            let (x, u) = (&states[k], &controls[k]);
            let mut gu_total = self.maps.end_input().transpose() * &costate;
            let mut next_costate = self.maps.end_flow().transpose() * &costate;
            let mut gu = &self.ktk * u * 2.0;
            if affine {
                gu += self.problem.v() * 2.0;
            }
            for j in 0..=SUBSTEPS {
                let w = self.maps.weights[j];
                let xs = &self.maps.flow[j] * x + &self.maps.input[j] * u;
                let mut gx = &self.ctc * xs * 2.0;
                if affine {
                    gx += self.problem.z() * 2.0;
                }
                gu_total += (self.maps.input[j].transpose() * &gx + &gu) * w;
                next_costate += self.maps.flow[j].transpose() * gx * w;
            }
            grads[k] = gu_total;
            costate = next_costate;
        }
        grads
    }
}

/// Exact segment propagation from `x0` under the stored controls.
pub fn simulate(tp: &TranscribedProblem) -> Simulation {
    let ev = Evaluator::new(tp);
    let (states, cost) = ev.cost(&tp.x0, &tp.controls);
    let h = tp.segment_length();
    Simulation {
        times: (0..states.len()).map(|i| i as f64 * h).collect(),
        states,
        cost,
    }
}

/// Gradient of the discretized cost with respect to each segment control.
pub fn gradient(tp: &TranscribedProblem) -> Vec<Vector> {
    Evaluator::new(tp).gradient(&tp.x0, &tp.controls, true)
}

/// Outcome of [`optimize`]; `converged = false` means the iteration budget
/// ran out and `controls` is the best iterate.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub controls: Vec<Vector>,
    pub cost: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cost_history: Vec<f64>,
}

fn dot(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn axpy(y: &mut [Vector], alpha: f64, x: &[Vector]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * alpha;
    }
}

/// Conjugate gradients on the discretized quadratic cost, starting from the
/// stored controls.
///
/// Each step is an exact line search along the search direction, so the
/// cost never increases even when rounding destroys conjugacy. The direction
/// update uses the Polak–Ribière coefficient clipped at zero and falls back
/// to steepest descent whenever the direction stops being a descent
/// direction.
pub fn optimize(tp: &TranscribedProblem, max_iter: usize, tol: f64) -> Result<OptimizeResult> {
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let ev = Evaluator::new(tp);
    let mut u = tp.controls.clone();
    let mut g = ev.gradient(&tp.x0, &u, true);
    let mut gg = dot(&g, &g);
    let mut dir: Vec<Vector> = g.iter().map(|x| -x).collect();
    let mut history = vec![ev.cost(&tp.x0, &u).1];
    let mut iterations = 0;
    while gg.sqrt() > tol && iterations < max_iter {
        let slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir = g.iter().map(|x| -x).collect();
            continue;
        }
        let hd = ev.gradient(&tp.x0, &dir, false);
        let curvature = dot(&dir, &hd);
        if !(curvature > 0.0) {
            break;
        }
        axpy(&mut u, -slope / curvature, &dir);
        let g_next = ev.gradient(&tp.x0, &u, true);
        let gg_next = dot(&g_next, &g_next);
        let beta = ((gg_next - dot(&g_next, &g)) / gg).max(0.0);
        for (d, gi) in dir.iter_mut().zip(&g_next) {
            *d = &*d * beta - gi;
        }
        g = g_next;
        gg = gg_next;
        iterations += 1;
        history.push(ev.cost(&tp.x0, &u).1);
    }
    Ok(OptimizeResult {
        cost: *history.last().unwrap(),
        gradient_norm: gg.sqrt(),
        converged: gg.sqrt() <= tol,
        iterations,
        controls: u,
        cost_history: history,
    })
}
