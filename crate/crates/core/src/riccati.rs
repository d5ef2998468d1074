//! Differential Riccati equation
//!
//! ```text
//! P' = AᵀP + PA − P B (KᵀK)⁻¹ Bᵀ P + CᵀC,   P(0) = 0
//! ```
//!
//! integrated forward in time. The optimal feedback on a horizon `T` reads
//! the solution backwards, as `P(T − t)`.

use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{expm, simpson_weights, symmetrize, Matrix, Vector};

/// Samples `P(i·step)` for `i = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    step: f64,
    values: Vec<Matrix>,
    /// Largest asymmetry `max |P − Pᵀ| / 2` removed by a symmetrization.
    pub symmetrization_drift: f64,
}

impl RiccatiSolution {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.time(i)).collect()
    }

    pub fn value(&self, index: usize) -> &Matrix {
        &self.values[index]
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    /// Grid index nearest to `t`, clamped to the stored range.
    pub fn index_of(&self, t: f64) -> usize {
        let i = (t / self.step).round();
        (i.max(0.0) as usize).min(self.values.len() - 1)
    }

    pub fn at(&self, t: f64) -> &Matrix {
        &self.values[self.index_of(t)]
    }

    pub fn last(&self) -> &Matrix {
        self.values.last().expect("solution holds P(0)")
    }
}

pub(crate) fn riccati_rhs(problem: &GlqProblem, p: &Matrix) -> Matrix {
    let a = problem.a();
    let c = problem.c();
    let ap = a.transpose() * p;
    ap.transpose() + ap - p * problem.gain_input() * p + c.transpose() * c
}

fn rk4_matrix_step(problem: &GlqProblem, p: &Matrix, h: f64) -> Matrix {
    let k1 = riccati_rhs(problem, p);
    let k2 = riccati_rhs(problem, &(p + &k1 * (0.5 * h)));
    let k3 = riccati_rhs(problem, &(p + &k2 * (0.5 * h)));
    let k4 = riccati_rhs(problem, &(p + &k3 * h));
    p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Number of uniform steps of size at most `dt` covering `horizon`.
pub(crate) fn step_count(horizon: f64, dt: f64) -> usize {
    let ratio = horizon / dt;
    let n = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    };
    (n as usize).max(1)
}

/// Advances `p` by `steps` RK4 steps of size `h`, symmetrizing after each
/// step. Every intermediate value is passed to `record`.
fn advance(
    problem: &GlqProblem,
    start: Matrix,
    t0: f64,
    steps: usize,
    h: f64,
    drift: &mut f64,
    mut record: impl FnMut(&Matrix),
) -> Result<Matrix> {
    let mut p = start;
    for i in 0..steps {
        let next = rk4_matrix_step(problem, &p, h);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState {
                time: t0 + (i + 1) as f64 * h,
                last_finite_time: t0 + i as f64 * h,
            });
        }
        *drift = drift.max(0.5 * (&next - next.transpose()).amax());
        p = symmetrize(&next);
        record(&p);
    }
    Ok(p)
}

/// RK4 integration of the Riccati flow on `[0, horizon]` with a uniform
/// step no larger than `dt`.
pub fn integrate_dre(problem: &GlqProblem, horizon: f64, dt: f64) -> Result<RiccatiSolution> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integrate_dre needs horizon > 0 and dt > 0 (horizon = {horizon}, dt = {dt})"
        )));
    }
    let steps = step_count(horizon, dt);
    let h = horizon / steps as f64;
    let n = problem.state_dim();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(Matrix::zeros(n, n));
    let mut drift = 0.0;
    advance(problem, Matrix::zeros(n, n), 0.0, steps, h, &mut drift, |p| values.push(p.clone()))?;
    Ok(RiccatiSolution {
        step: h,
        values,
        symmetrization_drift: drift,
    })
}

/// Residual of the integral (mild) form of the Riccati equation at the grid
/// time nearest `t`, applied to `x0`:
///
/// ```text
/// ‖P(t)x0 − ∫₀ᵗ e^{sAᵀ}CᵀC e^{sA}x0 ds + ∫₀ᵗ e^{(t−s)Aᵀ}P(s)B(KᵀK)⁻¹BᵀP(s)e^{(t−s)A}x0 ds‖
/// ```
pub fn mild_residual(problem: &GlqProblem, sol: &RiccatiSolution, t: f64, x0: &Vector) -> Result<f64> {
    let i = sol.index_of(t);
    if (sol.time(i) - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("t = {t} is not on the Riccati grid")));
    }
    if x0.len() != problem.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "mild_residual",
            expected: format!("length {}", problem.state_dim()),
            found: x0.len().to_string(),
        });
    }
    let n = problem.state_dim();
    let head = sol.value(i) * x0;
    if i == 0 {
        return Ok(head.norm());
    }
    let step = expm(problem.a(), sol.step());
    let mut powers = Vec::with_capacity(i + 1);
    powers.push(Matrix::identity(n, n));
    for j in 1..=i {
        let next = &powers[j - 1] * &step;
        powers.push(next);
    }
    let ctc = problem.c().transpose() * problem.c();
    let weights = simpson_weights(i + 1, sol.step());
    let mut source = Vector::zeros(n);
    let mut quadratic = Vector::zeros(n);
    for (j, w) in weights.iter().enumerate() {
        let e = &powers[j];
        source += (e.transpose() * (&ctc * (e * x0))) * *w;
        let back = &powers[i - j];
        let p = sol.value(j);
        quadratic += (back.transpose() * (p * (problem.gain_input() * (p * (back * x0))))) * *w;
    }
    Ok((head - source + quadratic).norm())
}

/// Integrates the Riccati flow in unit-time chunks until `‖P(t+1) − P(t)‖`
/// drops below `tol`, returning the stationary limit.
pub fn dre_limit(problem: &GlqProblem, dt: f64, tol: f64, t_max: f64) -> Result<Matrix> {
    if !(tol > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument("dre_limit needs tol > 0 and dt > 0".into()));
    }
    let steps = step_count(1.0, dt);
    let h = 1.0 / steps as f64;
    let n = problem.state_dim();
    let mut p = Matrix::zeros(n, n);
    let mut t = 0.0;
    let mut drift = 0.0;
    let mut increment = f64::INFINITY;
    while t < t_max {
        let next = advance(problem, p.clone(), t, steps, h, &mut drift, |_| {})?;
        increment = (&next - &p).norm();
        p = next;
        t += 1.0;
        if increment < tol {
            return Ok(p);
        }
    }
    Err(Error::NotConverged { t_max, increment })
}
