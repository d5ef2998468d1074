//! Spectral Galerkin model of the controlled heat equation
//!
//! ```text
//! y_t = y_xx + c y + B u   on (0, π),   y(0) = y(π) = 0
//! ```
//!
//! in the sine basis `ψ_k(x) = √(2/π) sin(kx)`, where `A = diag(c − k²)`.
//! Two control operators act on a subinterval `ω = (a, b)`:
//!
//! * `B1`: distributed control on `ω`, truncated to the first `n` sine modes
//!   `φ_j(x) = √(2/L) sin(jπ(x − a)/L)` of `L²(ω)`, `L = b − a`;
//! * `B2`: a scalar control acting through the indicator of `ω`.
//!
//! Observation is `C = Bᵀ` and the control weight is `K = κI`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_loop::solve_glq;
use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{Matrix, Vector};
use crate::structure::{hautus_detectable, hautus_stabilizable, HautusReport, DEFAULT_GAP};
use crate::turnpike::{horizon_scan, TurnpikeReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatOperator {
    B1,
    B2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatConfig {
    pub c: f64,
    pub n_modes: usize,
    pub omega: (f64, f64),
    pub operator: HeatOperator,
    pub kappa: f64,
    /// Linear state cost in the sine basis; zero when `None`.
    pub z: Option<Vector>,
    /// Linear control cost; zero when `None`.
    pub v: Option<Vector>,
}

impl HeatConfig {
    pub fn new(c: f64, n_modes: usize, omega: (f64, f64), operator: HeatOperator) -> Self {
        Self {
            c,
            n_modes,
            omega,
            operator,
            kappa: 1.0,
            z: None,
            v: None,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self.operator {
            HeatOperator::B1 => self.n_modes,
            HeatOperator::B2 => 1,
        }
    }

    /// The same configuration with `n_modes` changed; `z` and `v` are
    /// truncated or padded with zeros.
    pub fn with_modes(&self, n_modes: usize) -> Self {
        let resize = |v: &Option<Vector>, len: usize| {
            v.as_ref()
                .map(|v| Vector::from_fn(len, |i, _| if i < v.len() { v[i] } else { 0.0 }))
        };
        let mut cfg = self.clone();
        cfg.n_modes = n_modes;
        cfg.z = resize(&self.z, n_modes);
        cfg.v = resize(&self.v, cfg.control_dim());
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.omega;
        if !(0.0 < a && a < b && b < PI) {
            return Err(Error::InvalidArgument(format!(
                "control region ({a}, {b}) must satisfy 0 < a < b < π"
            )));
        }
        if self.n_modes == 0 {
            return Err(Error::InvalidArgument("n_modes must be at least 1".into()));
        }
        if !(self.kappa > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need kappa > 0 and finite c (kappa = {}, c = {})",
                self.kappa, self.c
            )));
        }
        Ok(())
    }
}

/// `∫ₐᵇ cos(μx + β) dx`.
fn cos_integral(mu: f64, beta: f64, a: f64, b: f64) -> f64 {
    if mu.abs() < 1e-12 {
        beta.cos() * (b - a)
    } else {
        ((mu * b + beta).sin() - (mu * a + beta).sin()) / mu
    }
}

/// `∫_ω φ_j ψ_k dx` by product-to-sum.
pub fn b1_entry(k: usize, j: usize, omega: (f64, f64)) -> f64 {
    let (a, b) = omega;
    let len = b - a;
    let alpha = j as f64 * PI / len;
    let beta = -alpha * a;
    let k = k as f64;
    let scale = (2.0 / len).sqrt() * (2.0 / PI).sqrt();
    0.5 * scale * (cos_integral(alpha - k, beta, a, b) - cos_integral(alpha + k, beta, a, b))
}

/// `∫_ω ψ_k dx`.
pub fn b2_entry(k: usize, omega: (f64, f64)) -> f64 {
    let k = k as f64;
    (2.0 / PI).sqrt() * ((k * omega.0).cos() - (k * omega.1).cos()) / k
}

pub fn control_operator(cfg: &HeatConfig) -> Matrix {
    let n = cfg.n_modes;
    match cfg.operator {
        HeatOperator::B1 => Matrix::from_fn(n, n, |k, j| b1_entry(k + 1, j + 1, cfg.omega)),
        HeatOperator::B2 => Matrix::from_fn(n, 1, |k, _| b2_entry(k + 1, cfg.omega)),
    }
}

pub fn eigenvalues(c: f64, n_modes: usize) -> Vec<f64> {
    (1..=n_modes).map(|k| c - (k * k) as f64).collect()
}

pub fn build_system(cfg: &HeatConfig) -> Result<GlqProblem> {
    cfg.validate()?;
    let n = cfg.n_modes;
    let a = Matrix::from_diagonal(&Vector::from_vec(eigenvalues(cfg.c, n)));
    let b = control_operator(cfg);
    let m = b.ncols();
    let c = b.transpose();
    let k = Matrix::identity(m, m) * cfg.kappa;
    let z = cfg.z.clone().unwrap_or_else(|| Vector::zeros(n));
    let v = cfg.v.clone().unwrap_or_else(|| Vector::zeros(m));
    GlqProblem::new(a, b, c, k, z, v)
}

/// Region on which mode 2 is invisible to `B2`.
pub const COUNTEREXAMPLE_OMEGA: (f64, f64) = (PI / 4.0, 3.0 * PI / 4.0);
/// Reaction coefficient placing an eigenvalue at 1 on mode 2.
pub const COUNTEREXAMPLE_C: f64 = 5.0;

pub fn counterexample_config(n_modes: usize) -> HeatConfig {
    HeatConfig::new(COUNTEREXAMPLE_C, n_modes, COUNTEREXAMPLE_OMEGA, HeatOperator::B2)
}

/// Initial state `x_k = 1/k`.
pub fn harmonic_state(n_modes: usize) -> Vector {
    Vector::from_fn(n_modes, |k, _| 1.0 / (k + 1) as f64)
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub config: HeatConfig,
    /// `|b₂|`, the coupling of mode 2 to the control.
    pub mode2_coupling: f64,
    pub stabilizable: HautusReport,
    pub detectable: HautusReport,
    pub x0: Vector,
    /// Time at which mode-2 growth is sampled.
    pub probe_time: f64,
    /// `|x₂(probe_time)| / (e^{probe_time} |x₂(0)|)`.
    pub mode2_growth_ratio: f64,
    pub scan: TurnpikeReport,
}

/// The reaction-diffusion system with `c = 5`, `ω = (π/4, 3π/4)` and `B2`:
/// mode 2 (eigenvalue 1) is neither controllable nor observable and grows
/// freely.
pub fn demo_counterexample(n_modes: usize, horizons: &[f64], dt: f64, epsilon: f64) -> Result<CounterexampleReport> {
    if n_modes < 2 {
        return Err(Error::InvalidArgument("the counterexample needs at least two modes".into()));
    }
    let config = counterexample_config(n_modes);
    let problem = build_system(&config)?;
    let stabilizable = hautus_stabilizable(problem.a(), problem.b(), DEFAULT_GAP)?;
    let detectable = hautus_detectable(problem.a(), problem.c(), DEFAULT_GAP)?;
    let x0 = harmonic_state(n_modes);
    let probe_time = 3.0;
    let traj = solve_glq(&problem, &x0, probe_time, dt)?;
    let x2 = traj.states.last().expect("trajectory has samples")[1];
    let mode2_growth_ratio = x2.abs() / (probe_time.exp() * x0[1].abs());
    let scan = horizon_scan(&problem, &x0, horizons, dt, epsilon)?;
    Ok(CounterexampleReport {
        mode2_coupling: problem.b()[(1, 0)].abs(),
        config,
        stabilizable,
        detectable,
        x0,
        probe_time,
        mode2_growth_ratio,
        scan,
    })
}

/// Control region used by the stable demo.
pub const STABLE_OMEGA: (f64, f64) = (0.5, 2.0);

/// Stable configuration (`c = 0`) with seeded random linear costs.
pub fn stable_config(n_modes: usize, operator: HeatOperator, seed: u64) -> HeatConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = HeatConfig::new(0.0, n_modes, STABLE_OMEGA, operator);
    cfg.z = Some(Vector::from_fn(n_modes, |_, _| rng.random_range(-1.0..1.0)));
    cfg.v = Some(Vector::from_fn(cfg.control_dim(), |_, _| rng.random_range(-1.0..1.0)));
    cfg
}

#[derive(Debug, Clone)]
pub struct StableReport {
    pub config: HeatConfig,
    pub eigenvalues: Vec<f64>,
    /// Hautus results for `B1` and `B2` on the same region.
    pub b1_stabilizable: HautusReport,
    pub b1_detectable: HautusReport,
    pub b2_stabilizable: HautusReport,
    pub b2_detectable: HautusReport,
    pub x0: Vector,
    pub scan: TurnpikeReport,
}

/// The heat equation without reaction (`c = 0`), scanned from the zero
/// state with seeded random linear costs.
pub fn demo_stable(
    n_modes: usize,
    operator: HeatOperator,
    horizons: &[f64],
    dt: f64,
    epsilon: f64,
    seed: u64,
) -> Result<StableReport> {
    let config = stable_config(n_modes, operator, seed);
    let hautus = |op| -> Result<(HautusReport, HautusReport)> {
        let p = build_system(&HeatConfig::new(0.0, n_modes, STABLE_OMEGA, op))?;
        Ok((
            hautus_stabilizable(p.a(), p.b(), DEFAULT_GAP)?,
            hautus_detectable(p.a(), p.c(), DEFAULT_GAP)?,
        ))
    };
    let (b1_stabilizable, b1_detectable) = hautus(HeatOperator::B1)?;
    let (b2_stabilizable, b2_detectable) = hautus(HeatOperator::B2)?;
    let problem = build_system(&config)?;
    let x0 = Vector::zeros(n_modes);
    let scan = horizon_scan(&problem, &x0, horizons, dt, epsilon)?;
    Ok(StableReport {
        eigenvalues: eigenvalues(config.c, n_modes),
        config,
        b1_stabilizable,
        b1_detectable,
        b2_stabilizable,
        b2_detectable,
        x0,
        scan,
    })
}

#[derive(Debug, Clone)]
pub struct TruncationEntry {
    pub n_modes: usize,
    pub midpoint_deviation: f64,
    /// Fitted rate, `NaN` when the solve or fit failed.
    pub rate: f64,
    pub cost: f64,
}

/// Midpoint deviation and fitted rate as the number of modes grows, from
/// `x0` truncated or padded to each size.
pub fn truncation_study(
    cfg: &HeatConfig,
    x0: &Vector,
    n_list: &[usize],
    horizon: f64,
    dt: f64,
) -> Result<Vec<TruncationEntry>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("mode counts must be strictly increasing".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let sized = cfg.with_modes(n);
            let problem = build_system(&sized)?;
            let start = Vector::from_fn(n, |i, _| if i < x0.len() { x0[i] } else { 0.0 });
            let report = horizon_scan(&problem, &start, &[horizon], dt, 0.1)?;
            let entry = &report.entries[0];
            Ok(TruncationEntry {
                n_modes: n,
                midpoint_deviation: entry.midpoint_deviation,
                rate: entry.rate(),
                cost: entry.cost,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::solve_steady;
    use num_complex::Complex64;

    fn quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn eigenvalues_of_reaction_diffusion() {
        assert_eq!(eigenvalues(5.0, 4), vec![4.0, 1.0, -4.0, -11.0]);
        assert_eq!(eigenvalues(0.0, 3), vec![-1.0, -4.0, -9.0]);
        let p = build_system(&counterexample_config(4)).unwrap();
        assert_eq!(p.a().diagonal().as_slice(), &[4.0, 1.0, -4.0, -11.0]);
        assert_eq!(p.a().clone() - Matrix::from_diagonal(&p.a().diagonal()), Matrix::zeros(4, 4));
    }

    #[test]
    fn b2_closed_form_values() {
        let root = (2.0 / PI).sqrt();
        assert!(b2_entry(2, COUNTEREXAMPLE_OMEGA).abs() < 1e-15);
        assert!((b2_entry(1, COUNTEREXAMPLE_OMEGA) - root * 2f64.sqrt()).abs() < 1e-15);
        for k in 1..40 {
            let bk = b2_entry(k, (0.3, 2.2));
            assert!(bk.abs() <= root * 2.0 / k as f64);
            let numeric = quadrature(|x| root * (k as f64 * x).sin(), 0.3, 2.2);
            assert!((bk - numeric).abs() < 1e-10);
        }
    }

    #[test]
    fn b1_matches_quadrature() {
        for omega in [(0.5, 2.0), COUNTEREXAMPLE_OMEGA, (0.1, 3.0)] {
            let len = omega.1 - omega.0;
            for k in 1..=6 {
                for j in 1..=6 {
                    let f = |x: f64| {
                        (2.0 / len).sqrt()
                            * (j as f64 * PI * (x - omega.0) / len).sin()
                            * (2.0 / PI).sqrt()
                            * (k as f64 * x).sin()
                    };
                    let exact = b1_entry(k, j, omega);
                    assert!((exact - quadrature(f, omega.0, omega.1)).abs() < 1e-10, "k={k} j={j}");
                }
            }
        }
    }

    #[test]
    fn b1_resonant_entries() {
        // L = π/2 makes φ_1 and ψ_2 share the frequency 2
        let omega = (0.5, 0.5 + PI / 2.0);
        let f = |x: f64| (4.0 / PI).sqrt() * (2.0 * (x - 0.5)).sin() * (2.0 / PI).sqrt() * (2.0 * x).sin();
        assert!((b1_entry(2, 1, omega) - quadrature(f, omega.0, omega.1)).abs() < 1e-10);
    }

    #[test]
    fn counterexample_decouples_mode_two() {
        let p = build_system(&counterexample_config(6)).unwrap();
        assert!(p.b().row(1).amax() < 1e-15);
        assert!(p.c().column(1).amax() < 1e-15);
        let r = hautus_stabilizable(p.a(), p.b(), DEFAULT_GAP).unwrap();
        assert!(!r.holds);
        assert!((r.witness.unwrap().eigenvalue - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let r = hautus_detectable(p.a(), p.c(), DEFAULT_GAP).unwrap();
        assert!(!r.holds);
        assert!((r.witness.unwrap().eigenvalue.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counterexample_demo() {
        let r = demo_counterexample(4, &[5.0, 10.0], 0.01, 0.1).unwrap();
        assert!(r.mode2_coupling < 1e-15);
        assert!(!r.stabilizable.holds);
        assert!((r.mode2_growth_ratio - 1.0).abs() < 0.05);
        let m = r.scan.measure_outside();
        assert!(m[1] > m[0]);
        let fit = r.scan.entries[1].fit.unwrap();
        assert!(fit.rate() <= 0.0);
    }

    #[test]
    fn zero_input_gives_free_evolution() {
        let mut p = build_system(&stable_config(3, HeatOperator::B2, 1)).unwrap();
        p = GlqProblem::new(
            p.a().clone(),
            Matrix::zeros(3, 1),
            p.c().clone(),
            p.k().clone(),
            p.z().clone(),
            Vector::zeros(1),
        )
        .unwrap();
        let x0 = harmonic_state(3);
        let traj = solve_glq(&p, &x0, 2.0, 0.01).unwrap();
        let last = traj.states.last().unwrap();
        for k in 0..3 {
            let exact = x0[k] * (p.a()[(k, k)] * 2.0).exp();
            assert!((last[k] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn stable_demo_structure() {
        let r = demo_stable(3, HeatOperator::B2, &[5.0, 10.0], 0.01, 0.1, 3).unwrap();
        assert_eq!(r.eigenvalues, vec![-1.0, -4.0, -9.0]);
        assert!(r.b1_stabilizable.holds && r.b1_detectable.holds);
        assert!(r.b2_stabilizable.holds && r.b2_detectable.holds);
        assert!(r.scan.all_ok());
    }

    #[test]
    fn b1_restricted_modes_are_independent() {
        // with c = 5 the unstable modes 1 and 2 stay visible through B1
        let p = build_system(&HeatConfig::new(5.0, 6, STABLE_OMEGA, HeatOperator::B1)).unwrap();
        assert!(hautus_detectable(p.a(), p.c(), DEFAULT_GAP).unwrap().holds);
        assert!(hautus_stabilizable(p.a(), p.b(), DEFAULT_GAP).unwrap().holds);
    }

    #[test]
    fn single_mode_is_the_scalar_problem() {
        let mut cfg = HeatConfig::new(0.0, 1, (0.5, 2.0), HeatOperator::B2);
        cfg.z = Some(Vector::from_element(1, 0.4));
        cfg.v = Some(Vector::from_element(1, -0.3));
        let p = build_system(&cfg).unwrap();
        let b = b2_entry(1, (0.5, 2.0));
        // x = b u on the steady line, so minimize b⁴u² + u² + 2(zb + v)u
        let u = -(0.4 * b - 0.3) / (b.powi(4) + 1.0);
        let x = b * u;
        let s = solve_steady(&p).unwrap();
        assert!((s.u_e[0] - u).abs() < 1e-12);
        assert!((s.x_e[0] - x).abs() < 1e-12);
    }

    #[test]
    fn truncation_converges_for_stable_heat() {
        let cfg = stable_config(16, HeatOperator::B2, 7);
        let entries = truncation_study(&cfg, &Vector::zeros(16), &[4, 8, 16], 10.0, 0.005).unwrap();
        for w in entries.windows(2) {
            assert!((w[0].midpoint_deviation - w[1].midpoint_deviation).abs() <= 1e-3);
        }
    }
}
