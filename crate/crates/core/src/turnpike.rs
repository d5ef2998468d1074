//! Turnpike diagnostics: deviation from the optimal steady pair, time spent
//! outside an ε-tube, and two-sided exponential fits
//!
//! ```text
//! d(t) = ‖x*(t) − x_e‖ + ‖u*(t) − u_e‖ ≤ M (e^{−kt} + e^{−k(T−t)})
//! ```

use rayon::prelude::*;

use crate::closed_loop::{solve_lq, FeedbackLaw, Trajectory};
use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::Vector;
use crate::steady::{solve_steady, SteadyStateResult};
use crate::structure::unobservable_subspace;

/// Window of the exponential fit as fractions of the horizon.
pub const FIT_WINDOW: (f64, f64) = (0.1, 0.45);
/// Deviations below this make the log-linear fit meaningless.
pub const UNDERFLOW_FLOOR: f64 = 1e-14;

/// `d(t)` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DeviationCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "deviation curve needs matching grids with at least two samples ({} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        Ok(Self { times, values })
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `d` at the grid point nearest to `T/2`.
    pub fn midpoint(&self) -> f64 {
        let t0 = self.times[0];
        let i = ((0.5 * (self.horizon() - t0)) / self.step()).round() as usize;
        self.values[i.min(self.values.len() - 1)]
    }
}

/// Deviation of a trajectory from `reference`.
pub fn deviation_curve(traj: &Trajectory, reference: &SteadyStateResult) -> DeviationCurve {
    let values = traj
        .states
        .iter()
        .zip(&traj.controls)
        .map(|(x, u)| (x - &reference.x_e).norm() + (u - &reference.u_e).norm())
        .collect();
    DeviationCurve {
        times: traj.times.clone(),
        values,
    }
}

/// Lebesgue measure of `{t : d(t) > ε}` by the left-endpoint rule.
pub fn measure_outside(curve: &DeviationCurve, epsilon: f64) -> f64 {
    let intervals = curve.values.len() - 1;
    let count = curve.values[..intervals].iter().filter(|d| **d > epsilon).count();
    count as f64 * curve.step()
}

/// Result of fitting `M (e^{−kt} + e^{−k(T−t)})` to a deviation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentialFit {
    Fitted { rate: f64, amplitude: f64 },
    /// Some sample of the fit window fell below [`UNDERFLOW_FLOOR`]: the
    /// decay is faster than measurable.
    Underflow,
}

impl ExponentialFit {
    /// Fitted `k`, `+inf` on underflow.
    pub fn rate(&self) -> f64 {
        match self {
            Self::Fitted { rate, .. } => *rate,
            Self::Underflow => f64::INFINITY,
        }
    }

    /// Fitted `M`, `NaN` on underflow.
    pub fn amplitude(&self) -> f64 {
        match self {
            Self::Fitted { amplitude, .. } => *amplitude,
            Self::Underflow => f64::NAN,
        }
    }
}

/// Least-squares fit of `log d` on `[0.1T, 0.45T]`; `k` is minus the slope
/// and `M` the largest ratio `d(t) / (e^{−kt} + e^{−k(T−t)})` over all
/// samples.
pub fn fit_exponential(curve: &DeviationCurve, horizon: f64) -> Result<ExponentialFit> {
    if !(horizon > 4.0) {
        return Err(Error::InvalidArgument(format!("exponential fit needs T > 4, got {horizon}")));
    }
    let (lo, hi) = (FIT_WINDOW.0 * horizon, FIT_WINDOW.1 * horizon);
    let window: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, d)| (*t, *d))
        .collect();
    if window.len() < 2 {
        return Err(Error::InvalidArgument("fit window holds fewer than two samples".into()));
    }
    if window.iter().any(|(_, d)| !(*d >= UNDERFLOW_FLOOR)) {
        return Ok(ExponentialFit::Underflow);
    }
    let n = window.len() as f64;
    let mean_t = window.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = window.iter().map(|(_, d)| d.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, d) in &window {
        sxy += (t - mean_t) * (d.ln() - mean_y);
        sxx += (t - mean_t) * (t - mean_t);
    }
    let rate = -sxy / sxx;
    let amplitude = curve
        .times
        .iter()
        .zip(&curve.values)
        .map(|(t, d)| d / ((-rate * t).exp() + (-rate * (horizon - t)).exp()))
        .fold(0.0, f64::max);
    Ok(ExponentialFit::Fitted { rate, amplitude })
}

/// Outcome of one horizon of a scan.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanStatus {
    Ok,
    /// The state stopped being finite.
    BlowUp { last_finite_time: f64 },
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct HorizonEntry {
    pub horizon: f64,
    pub status: ScanStatus,
    /// `NaN` unless the solve succeeded.
    pub measure_outside: f64,
    pub midpoint_deviation: f64,
    /// `None` when the solve failed or `T ≤ 4`.
    pub fit: Option<ExponentialFit>,
    pub cost: f64,
    pub curve: Option<DeviationCurve>,
    pub trajectory: Option<Trajectory>,
}

impl HorizonEntry {
    fn failed(horizon: f64, err: Error) -> Self {
        let status = match err {
            Error::NonFiniteState { last_finite_time, .. } => ScanStatus::BlowUp { last_finite_time },
            other => ScanStatus::Failed(other.to_string()),
        };
        Self {
            horizon,
            status,
            measure_outside: f64::NAN,
            midpoint_deviation: f64::NAN,
            fit: None,
            cost: f64::NAN,
            curve: None,
            trajectory: None,
        }
    }

    pub fn rate(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.rate())
    }

    pub fn amplitude(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.amplitude())
    }
}

/// Turnpike statistics of one initial state over several horizons.
#[derive(Debug, Clone)]
pub struct TurnpikeReport {
    pub epsilon: f64,
    pub reference: SteadyStateResult,
    pub entries: Vec<HorizonEntry>,
}

impl TurnpikeReport {
    pub fn horizons(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.horizon).collect()
    }

    pub fn measure_outside(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.measure_outside).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.entries.iter().map(HorizonEntry::rate).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.entries.iter().map(HorizonEntry::amplitude).collect()
    }

    pub fn midpoint_deviations(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.midpoint_deviation).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.status == ScanStatus::Ok)
    }
}

fn scan_one(problem: &GlqProblem, reference: &SteadyStateResult, x0: &Vector, horizon: f64, dt: f64, epsilon: f64) -> HorizonEntry {
    let traj = match FeedbackLaw::with_reference(problem, reference.clone(), horizon, dt).and_then(|law| law.trajectory(x0)) {
        Ok(traj) => traj,
        Err(err) => return HorizonEntry::failed(horizon, err),
    };
    let curve = deviation_curve(&traj, reference);
    let fit = if horizon > 4.0 {
        fit_exponential(&curve, horizon).ok()
    } else {
        None
    };
    HorizonEntry {
        horizon,
        status: ScanStatus::Ok,
        measure_outside: measure_outside(&curve, epsilon),
        midpoint_deviation: curve.midpoint(),
        fit,
        cost: traj.cost,
        curve: Some(curve),
        trajectory: Some(traj),
    }
}

/// Solves the problem from `x0` on every horizon (in parallel) and collects
/// the turnpike statistics in horizon order. Failed solves become entries
/// with a non-`Ok` status.
pub fn horizon_scan(problem: &GlqProblem, x0: &Vector, horizons: &[f64], dt: f64, epsilon: f64) -> Result<TurnpikeReport> {
    if horizons.is_empty() || horizons.windows(2).any(|w| !(w[0] < w[1])) || !(horizons[0] > 0.0) {
        return Err(Error::InvalidArgument("horizons must be positive and strictly increasing".into()));
    }
    if !(epsilon > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need epsilon > 0 and dt > 0 (epsilon = {epsilon}, dt = {dt})")));
    }
    if x0.len() != problem.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: format!("length {}", problem.state_dim()),
            found: x0.len().to_string(),
        });
    }
    let reference = if problem.is_lq() {
        SteadyStateResult::zero(problem.state_dim(), problem.control_dim())
    } else {
        solve_steady(problem)?
    };
    let entries = horizons
        .par_iter()
        .map(|&horizon| scan_one(problem, &reference, x0, horizon, dt, epsilon))
        .collect();
    Ok(TurnpikeReport {
        epsilon,
        reference,
        entries,
    })
}

const INVARIANCE_MEMBERSHIP_TOL: f64 = 1e-8;

/// For `x0` in the unobservable subspace the optimal control does not depend
/// on how much of `x0` is present. Returns
/// `max_γ max_t ‖u*(t, γ x0) − u*(t, x0)‖`.
pub fn unobservable_control_invariance(
    problem: &GlqProblem,
    x0: &Vector,
    gammas: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let data = unobservable_subspace(problem.a(), problem.c())?;
    let distance = data.distance(x0);
    if distance > INVARIANCE_MEMBERSHIP_TOL * (1.0 + x0.norm()) {
        return Err(Error::InvalidArgument(format!(
            "initial state is {distance:e} away from the unobservable subspace"
        )));
    }
    let law = FeedbackLaw::new(problem, horizon, dt)?;
    let base = law.trajectory(x0)?;
    let mut worst: f64 = 0.0;
    for gamma in gammas {
        let other = law.trajectory(&(x0 * *gamma))?;
        for (u, w) in base.controls.iter().zip(&other.controls) {
            worst = worst.max((u - w).amax());
        }
    }
    Ok(worst)
}

/// The difference of two GLQ trajectories started `x0` apart is the LQ
/// trajectory from `x0`. Returns
/// `max_t ‖[x*(t, x_e + 2x0) − x*(t, x_e + x0)] − x_LQ(t, x0)‖`.
pub fn affine_difference_discrepancy(problem: &GlqProblem, x0: &Vector, horizon: f64, dt: f64) -> Result<f64> {
    let law = FeedbackLaw::new(problem, horizon, dt)?;
    let x_e = &law.reference().x_e;
    let far = law.trajectory(&(x_e + x0 * 2.0))?;
    let near = law.trajectory(&(x_e + x0))?;
    let lq = solve_lq(problem, x0, horizon, dt)?;
    let worst = far
        .states
        .iter()
        .zip(&near.states)
        .zip(&lq.states)
        .map(|((a, b), c)| (a - b - c).norm())
        .fold(0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_loop::solve_glq;
    use crate::numlin::Matrix;
    use crate::steady::steady_manifold;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, b: f64, c: f64, k: f64, z: f64, v: f64) -> GlqProblem {
        let m = |x| Matrix::from_element(1, 1, x);
        GlqProblem::new(m(a), m(b), m(c), m(k), Vector::from_element(1, z), Vector::from_element(1, v)).unwrap()
    }

    fn synthetic(horizon: f64, f: impl Fn(f64) -> f64) -> DeviationCurve {
        let n = (horizon / 0.01).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * 0.01).collect();
        let values = times.iter().map(|t| f(*t)).collect();
        DeviationCurve { times, values }
    }

    #[test]
    fn measure_of_trivial_curves() {
        assert_eq!(measure_outside(&synthetic(10.0, |_| 0.0), 0.1), 0.0);
        let full = measure_outside(&synthetic(10.0, |_| 0.2), 0.1);
        assert!((full - 10.0).abs() < 1e-9);
    }

    #[test]
    fn exact_two_sided_exponential() {
        let t_end = 20.0;
        let curve = synthetic(t_end, |t| (-t).exp() + (-(t_end - t)).exp());
        let ExponentialFit::Fitted { rate, amplitude } = fit_exponential(&curve, t_end).unwrap() else {
            panic!("fit underflowed");
        };
        assert!((rate - 1.0).abs() < 0.02);
        assert!((amplitude - 1.0).abs() < 0.05);
    }

    #[test]
    fn flat_curve_has_no_rate() {
        let fit = fit_exponential(&synthetic(10.0, |_| 1.0), 10.0).unwrap();
        assert!(fit.rate().abs() < 1e-12);
    }

    #[test]
    fn underflow_is_tagged() {
        let fit = fit_exponential(&synthetic(40.0, |t| (-3.0 * t).exp()), 40.0).unwrap();
        assert_eq!(fit, ExponentialFit::Underflow);
        assert_eq!(fit.rate(), f64::INFINITY);
    }

    #[test]
    fn short_horizon_cannot_be_fitted() {
        assert!(fit_exponential(&synthetic(3.0, |_| 1.0), 3.0).is_err());
    }

    #[test]
    fn zero_problem_scan_is_all_zero() {
        let p = GlqProblem::lq(
            -Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let report = horizon_scan(&p, &Vector::zeros(2), &[5.0, 10.0], 0.01, 0.1).unwrap();
        assert!(report.all_ok());
        for e in &report.entries {
            assert_eq!(e.measure_outside, 0.0);
            assert_eq!(e.midpoint_deviation, 0.0);
            assert_eq!(e.fit, Some(ExponentialFit::Underflow));
        }
    }

    #[test]
    fn deviation_starts_at_initial_offset() {
        let p = scalar(-1.0, 1.0, 1.0, 1.0, 1.0, 0.5);
        let traj = solve_glq(&p, &Vector::from_element(1, 2.0), 10.0, 0.01).unwrap();
        let curve = deviation_curve(&traj, &traj.reference);
        assert!(curve.values.iter().all(|d| *d >= 0.0));
        let state_part = (traj.states[0][0] - traj.reference.x_e[0]).abs();
        assert!(curve.values[0] >= state_part);
    }

    #[test]
    fn scalar_scan_is_a_turnpike() {
        let p = scalar(0.5, 1.0, 1.0, 1.0, 1.0, -0.5);
        let report = horizon_scan(&p, &Vector::from_element(1, 3.0), &[5.0, 10.0, 20.0, 40.0], 0.01, 0.1).unwrap();
        assert!(report.all_ok());
        let mids = report.midpoint_deviations();
        for w in mids.windows(2) {
            assert!(w[1] < w[0] || w[1] < 1e-12);
        }
        let measures = report.measure_outside();
        let (lo, hi) = measures.iter().fold((f64::MAX, 0.0_f64), |(l, h), m| (l.min(*m), h.max(*m)));
        assert!(hi - lo <= 0.05 * hi);
        for e in &report.entries {
            let curve = e.curve.as_ref().unwrap();
            if let Some(ExponentialFit::Fitted { rate, amplitude }) = e.fit {
                assert!(rate > 0.0);
                for (t, d) in curve.times.iter().zip(&curve.values) {
                    let bound = amplitude * ((-rate * t).exp() + (-rate * (e.horizon - t)).exp());
                    assert!(*d <= bound * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn blow_up_is_recorded_and_scan_continues() {
        let p = scalar(60.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        let report = horizon_scan(&p, &Vector::from_element(1, 1.0), &[1.0, 20.0], 0.01, 0.1).unwrap();
        assert_eq!(report.entries[0].status, ScanStatus::Ok);
        assert!(matches!(report.entries[1].status, ScanStatus::BlowUp { .. }));
        assert!(report.entries[1].measure_outside.is_nan());
    }

    #[test]
    fn midpoint_selects_the_optimal_steady_state() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, 0.3]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let p = GlqProblem::new(
            a,
            b,
            Matrix::identity(2, 2),
            Matrix::identity(1, 1),
            Vector::from_column_slice(&[0.4, -0.2]),
            Vector::from_element(1, 0.3),
        )
        .unwrap();
        let traj = solve_glq(&p, &Vector::from_column_slice(&[1.0, -1.0]), 30.0, 0.01).unwrap();
        let mid = &traj.states[traj.states.len() / 2];
        let own = (mid - &traj.reference.x_e).norm();
        let manifold = steady_manifold(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let coeffs = Vector::from_fn(manifold.ncols(), |_, _| rng.random_range(-2.0..2.0));
            let alt = &traj.reference.x_e + (&manifold * coeffs).rows(0, 2);
            let other = (mid - alt).norm();
            if other > 1e-6 {
                assert!(other >= 10.0 * own);
            }
        }
    }

    #[test]
    fn invariance_on_unobservable_states() {
        let p = GlqProblem::new(
            Matrix::from_diagonal(&Vector::from_column_slice(&[-1.0, -2.0])),
            Matrix::identity(2, 2),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::identity(2, 2),
            Vector::from_column_slice(&[0.3, -0.7]),
            Vector::from_column_slice(&[0.2, 0.5]),
        )
        .unwrap();
        let e2 = Vector::from_column_slice(&[0.0, 1.0]);
        assert_eq!(unobservable_control_invariance(&p, &e2, &[1.0], 5.0, 0.01).unwrap(), 0.0);
        let worst = unobservable_control_invariance(&p, &e2, &[2.0, -1.0, 0.5], 5.0, 0.01).unwrap();
        assert!(worst <= 1e-8, "discrepancy {worst}");
        let e1 = Vector::from_column_slice(&[1.0, 0.0]);
        assert!(unobservable_control_invariance(&p, &e1, &[2.0], 5.0, 0.01).is_err());
    }

    #[test]
    fn zero_state_has_zero_control_without_linear_terms() {
        let p = GlqProblem::lq(
            Matrix::from_diagonal(&Vector::from_column_slice(&[-1.0, -2.0])),
            Matrix::identity(2, 2),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let e2 = Vector::from_column_slice(&[0.0, 1.0]);
        assert_eq!(unobservable_control_invariance(&p, &e2, &[0.0], 5.0, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn affine_difference_identity() {
        let p = scalar(-1.0, 1.0, 1.0, 1.0, 1.0, 0.5);
        assert!(affine_difference_discrepancy(&p, &Vector::zeros(1), 10.0, 0.01).unwrap() < 1e-12);
        assert!(affine_difference_discrepancy(&p, &Vector::from_element(1, 1.0), 10.0, 0.01).unwrap() <= 1e-8);
    }

    #[test]
    fn affine_difference_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let mut draw = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            let a = draw(3, 3) - Matrix::identity(3, 3) * 1.5;
            let (b, c) = (draw(3, 2), draw(2, 3));
            let z = draw(3, 1).column(0).into_owned();
            let v = draw(2, 1).column(0).into_owned();
            let x0 = draw(3, 1).column(0).into_owned();
            let p = GlqProblem::new(a, b, c, Matrix::identity(2, 2), z, v).unwrap();
            assert!(affine_difference_discrepancy(&p, &x0, 10.0, 0.01).unwrap() <= 1e-7);
        }
    }
}
