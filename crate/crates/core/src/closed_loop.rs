//! Optimal trajectories from the Riccati feedback law
//!
//! ```text
//! u*(t) = u_e − (KᵀK)⁻¹Bᵀ [P(T−t)(x*(t) − x_e) + p(T−t)]
//! ```
//!
//! where `p` solves `p' = (Aᵀ − P(s)B(KᵀK)⁻¹Bᵀ) p`, `p(0) = w`.
//!
//! The Riccati and adjoint arcs are stored at half the trajectory step, so
//! every RK4 stage of the state integration reads an exact grid sample.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{rk4_integrate, rk4_step, Matrix, Vector};
use crate::riccati::{integrate_dre, riccati_rhs, step_count, RiccatiSolution};
use crate::steady::{solve_steady, SteadyStateResult};

/// Samples `p(i·step)` of the adjoint arc, aligned with the Riccati grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointArc {
    step: f64,
    values: Vec<Vector>,
}

impl AdjointArc {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn index_of(&self, t: f64) -> usize {
        let i = (t / self.step).round();
        (i.max(0.0) as usize).min(self.values.len() - 1)
    }

    pub fn at(&self, t: f64) -> &Vector {
        &self.values[self.index_of(t)]
    }
}

/// Integrates the adjoint arc on `[0, horizon]` over the Riccati grid.
///
/// Each step advances `(P, p)` jointly with RK4 from the stored `P`, so the
/// adjoint sees Riccati values at the stage midpoints without interpolation.
pub fn integrate_adjoint(
    problem: &GlqProblem,
    riccati: &RiccatiSolution,
    w: &Vector,
    horizon: f64,
) -> Result<AdjointArc> {
    let h = riccati.step();
    let steps = (horizon / h).round() as usize;
    if steps >= riccati.len() || (steps as f64 * h - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "Riccati grid (step {h}, horizon {}) does not cover the adjoint horizon {horizon}",
            riccati.horizon()
        )));
    }
    let gain = problem.gain_input();
    let at = problem.a().transpose();
    let rhs = |p_mat: &Matrix, p: &Vector| &at * p - p_mat * (gain * p);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(w.clone());
    for i in 0..steps {
        let p0 = riccati.value(i);
        let q0 = &values[i];
        let k1p = riccati_rhs(problem, p0);
        let k1q = rhs(p0, q0);
        let p1 = p0 + &k1p * (0.5 * h);
        let q1 = q0 + &k1q * (0.5 * h);
        let k2p = riccati_rhs(problem, &p1);
        let k2q = rhs(&p1, &q1);
        let p2 = p0 + &k2p * (0.5 * h);
        let q2 = q0 + &k2q * (0.5 * h);
        let k3p = riccati_rhs(problem, &p2);
        let k3q = rhs(&p2, &q2);
        let p3 = p0 + &k3p * h;
        let q3 = q0 + &k3q * h;
        let k4q = rhs(&p3, &q3);
        let next = q0 + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState {
                time: (i + 1) as f64 * h,
                last_finite_time: i as f64 * h,
            });
        }
        values.push(next);
    }
    Ok(AdjointArc { step: h, values })
}

/// Sampled optimal pair on `[0, T]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub cost: f64,
    pub reference: SteadyStateResult,
    pub adjoint: Arc<AdjointArc>,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Feedback law for one `(problem, T, dt)`, reusable across initial states.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    problem: GlqProblem,
    horizon: f64,
    step: f64,
    reference: SteadyStateResult,
    riccati: Arc<RiccatiSolution>,
    adjoint: Arc<AdjointArc>,
}

impl FeedbackLaw {
    /// Solves for the steady reference, the Riccati flow and the adjoint arc.
    pub fn new(problem: &GlqProblem, horizon: f64, dt: f64) -> Result<Self> {
        let reference = if problem.is_lq() {
            SteadyStateResult::zero(problem.state_dim(), problem.control_dim())
        } else {
            solve_steady(problem)?
        };
        Self::with_reference(problem, reference, horizon, dt)
    }

    pub fn with_reference(
        problem: &GlqProblem,
        reference: SteadyStateResult,
        horizon: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need horizon > 0 and dt > 0 (horizon = {horizon}, dt = {dt})"
            )));
        }
        let steps = step_count(horizon, dt);
        let step = horizon / steps as f64;
        let riccati = integrate_dre(problem, horizon, 0.5 * step)?;
        let adjoint = integrate_adjoint(problem, &riccati, &reference.w, horizon)?;
        Ok(Self {
            problem: problem.clone(),
            horizon,
            step,
            reference,
            riccati: Arc::new(riccati),
            adjoint: Arc::new(adjoint),
        })
    }

    pub fn problem(&self) -> &GlqProblem {
        &self.problem
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Trajectory step; the Riccati grid uses half of it.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn reference(&self) -> &SteadyStateResult {
        &self.reference
    }

    pub fn riccati(&self) -> &RiccatiSolution {
        &self.riccati
    }

    pub fn adjoint(&self) -> &AdjointArc {
        &self.adjoint
    }

    /// `(KᵀK)⁻¹Bᵀ P(T−t)`.
    pub fn gain(&self, t: f64) -> Matrix {
        self.problem.weight_inverse() * self.problem.b().transpose() * self.riccati.at(self.horizon - t)
    }

    /// Optimal control at time `t` and state `x`.
    pub fn control(&self, t: f64, x: &Vector) -> Vector {
        let s = self.horizon - t;
        let p = self.riccati.at(s);
        let q = self.adjoint.at(s);
        let co = p * (x - &self.reference.x_e) + q;
        &self.reference.u_e - self.problem.weight_inverse() * (self.problem.b().transpose() * co)
    }

    /// Integrates the closed loop from `x0`.
    pub fn trajectory(&self, x0: &Vector) -> Result<Trajectory> {
        if x0.len() != self.problem.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "initial state",
                expected: format!("length {}", self.problem.state_dim()),
                found: x0.len().to_string(),
            });
        }
        let (a, b) = (self.problem.a(), self.problem.b());
        let arc = rk4_integrate(
            |t, x| a * x + b * self.control(t, x),
            x0,
            0.0,
            self.horizon,
            self.step,
        )?;
        let controls: Vec<Vector> = arc
            .times
            .iter()
            .zip(&arc.values)
            .map(|(t, x)| self.control(*t, x))
            .collect();
        let cost = self.problem.total_cost(&arc.times, &arc.values, &controls)?;
        Ok(Trajectory {
            times: arc.times,
            states: arc.values,
            controls,
            cost,
            reference: self.reference.clone(),
            adjoint: Arc::clone(&self.adjoint),
        })
    }
}

/// Optimal pair of the GLQ problem on `[0, horizon]`.
pub fn solve_glq(problem: &GlqProblem, x0: &Vector, horizon: f64, dt: f64) -> Result<Trajectory> {
    FeedbackLaw::new(problem, horizon, dt)?.trajectory(x0)
}

/// Optimal pair of the LQ problem obtained by dropping `z` and `v`.
pub fn solve_lq(problem: &GlqProblem, x0: &Vector, horizon: f64, dt: f64) -> Result<Trajectory> {
    solve_glq(&problem.lq_part(), x0, horizon, dt)
}

/// Checks the completion-of-squares identity of the LQ cost
///
/// ```text
/// J_T(x0, u) = ∫ ‖K(u + (KᵀK)⁻¹BᵀP(T−t)x)‖² dt + ⟨P(T)x0, x0⟩
/// ```
///
/// for a control that is constant on each step of the solver grid
/// (`controls[i]` acts on the i-th step). Returns the mismatch relative to
/// `1 + |J_T|`. The linear cost terms of `problem` are ignored.
pub fn cost_identity_residual(
    problem: &GlqProblem,
    x0: &Vector,
    controls: &[Vector],
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let lq = problem.lq_part();
    let law = FeedbackLaw::new(&lq, horizon, dt)?;
    let steps = step_count(horizon, dt);
    if controls.len() != steps {
        return Err(Error::DimensionMismatch {
            context: "cost_identity_residual controls",
            expected: format!("{steps} per-step values"),
            found: controls.len().to_string(),
        });
    }
    let n = lq.state_dim();
    let h = law.step();
    let (a, b, c, k) = (lq.a(), lq.b(), lq.c(), lq.k());
    let mut y = Vector::zeros(n + 2);
    y.rows_mut(0, n).copy_from(x0);
    for (i, u) in controls.iter().enumerate() {
        let mut rhs = |t: f64, y: &Vector| {
            let x = y.rows(0, n).into_owned();
            let mut dy = Vector::zeros(n + 2);
            dy.rows_mut(0, n).copy_from(&(a * &x + b * u));
            dy[n] = (c * &x).norm_squared() + (k * u).norm_squared();
            dy[n + 1] = (k * (u + law.gain(t) * &x)).norm_squared();
            dy
        };
        y = rk4_step(&mut rhs, i as f64 * h, &y, h);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState {
                time: (i + 1) as f64 * h,
                last_finite_time: i as f64 * h,
            });
        }
    }
    let cost = y[n];
    let square = y[n + 1];
    let terminal = x0.dot(&(law.riccati().last() * x0));
    Ok((cost - square - terminal).abs() / (1.0 + cost.abs()))
}
