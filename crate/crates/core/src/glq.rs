//! The generalized linear-quadratic problem: dynamics `x' = Ax + Bu` with
//! running cost `ℓ(x, u) = ‖Cx‖² + ‖Ku‖² + 2⟨z, x⟩ + 2⟨v, u⟩`.
//!
//! All spaces are real; the inner products are the Euclidean ones.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::numlin::{simpson_weights, Matrix, Vector};

const COERCIVITY_FLOOR: f64 = 1e-12;

/// Problem data `(A, B, C, K, z, v)` with cached control-weight factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GlqProblem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    k: Matrix,
    z: Vector,
    v: Vector,
    coercivity: f64,
    weight_inv: Matrix,
    gain_input: Matrix,
}

fn mismatch(context: &'static str, expected: String, found: String) -> Error {
    Error::DimensionMismatch {
        context,
        expected,
        found,
    }
}

fn shape(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Smallest eigenvalue of `KᵀK`; rejects non-coercive weights.
pub fn validate(k: &Matrix) -> Result<f64> {
    if k.nrows() != k.ncols() {
        return Err(mismatch("K", "square matrix".into(), shape(k)));
    }
    if !k.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteInput("K"));
    }
    if k.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let weight = k.transpose() * k;
    let min = SymmetricEigen::new(weight).eigenvalues.min();
    if min <= COERCIVITY_FLOOR {
        return Err(Error::NotCoercive { min_eigenvalue: min });
    }
    Ok(min)
}

impl GlqProblem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, k: Matrix, z: Vector, v: Vector) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(mismatch("A", "square matrix".into(), shape(&a)));
        }
        if b.nrows() != n {
            return Err(mismatch("B", format!("{n} rows"), shape(&b)));
        }
        let m = b.ncols();
        if c.ncols() != n {
            return Err(mismatch("C", format!("{n} columns"), shape(&c)));
        }
        if k.nrows() != m || k.ncols() != m {
            return Err(mismatch("K", format!("{m}x{m}"), shape(&k)));
        }
        if z.len() != n {
            return Err(mismatch("z", format!("length {n}"), z.len().to_string()));
        }
        if v.len() != m {
            return Err(mismatch("v", format!("length {m}"), v.len().to_string()));
        }
        for (name, finite) in [
            ("A", a.iter().all(|x| x.is_finite())),
            ("B", b.iter().all(|x| x.is_finite())),
            ("C", c.iter().all(|x| x.is_finite())),
            ("z", z.iter().all(|x| x.is_finite())),
            ("v", v.iter().all(|x| x.is_finite())),
        ] {
            if !finite {
                return Err(Error::NonFiniteInput(name));
            }
        }
        let coercivity = validate(&k)?;
        let weight = k.transpose() * &k;
        let weight_inv = weight
            .clone()
            .cholesky()
            .map(|ch| ch.inverse())
            .ok_or(Error::NotCoercive { min_eigenvalue: coercivity })?;
        let gain_input = &b * &weight_inv * b.transpose();
        Ok(Self {
            a,
            b,
            c,
            k,
            z,
            v,
            coercivity,
            weight_inv,
            gain_input,
        })
    }

    /// LQ problem with zero linear cost terms.
    pub fn lq(a: Matrix, b: Matrix, c: Matrix, k: Matrix) -> Result<Self> {
        let (n, m) = (a.nrows(), b.ncols());
        Self::new(a, b, c, k, Vector::zeros(n), Vector::zeros(m))
    }

    /// The same system and quadratic cost with `z = v = 0`.
    pub fn lq_part(&self) -> Self {
        Self {
            z: Vector::zeros(self.state_dim()),
            v: Vector::zeros(self.control_dim()),
            ..self.clone()
        }
    }

    pub fn with_linear_terms(&self, z: Vector, v: Vector) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), self.k.clone(), z, v)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn k(&self) -> &Matrix {
        &self.k
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    /// Coercivity certificate: smallest eigenvalue of `KᵀK`.
    pub fn coercivity(&self) -> f64 {
        self.coercivity
    }

    /// `(KᵀK)⁻¹`.
    pub fn weight_inverse(&self) -> &Matrix {
        &self.weight_inv
    }

    /// `B (KᵀK)⁻¹ Bᵀ`.
    pub fn gain_input(&self) -> &Matrix {
        &self.gain_input
    }

    pub fn is_lq(&self) -> bool {
        self.z.iter().all(|x| *x == 0.0) && self.v.iter().all(|x| *x == 0.0)
    }

    fn check_pair(&self, x: &Vector, u: &Vector) -> Result<()> {
        if x.len() != self.state_dim() || u.len() != self.control_dim() {
            return Err(mismatch(
                "state/control pair",
                format!("({}, {})", self.state_dim(), self.control_dim()),
                format!("({}, {})", x.len(), u.len()),
            ));
        }
        Ok(())
    }

    /// Running cost `ℓ(x, u)` split into its four terms.
    pub fn running_cost(&self, x: &Vector, u: &Vector) -> Result<CostBreakdown> {
        self.check_pair(x, u)?;
        Ok(self.running_cost_unchecked(x, u))
    }

    pub(crate) fn running_cost_unchecked(&self, x: &Vector, u: &Vector) -> CostBreakdown {
        let quadratic_state = (&self.c * x).norm_squared();
        let quadratic_control = (&self.k * u).norm_squared();
        let linear_state = 2.0 * self.z.dot(x);
        let linear_control = 2.0 * self.v.dot(u);
        CostBreakdown {
            quadratic_state,
            quadratic_control,
            linear_state,
            linear_control,
            total: quadratic_state + quadratic_control + linear_state + linear_control,
        }
    }

    /// `‖Ax + Bu‖`.
    pub fn steady_residual(&self, x: &Vector, u: &Vector) -> Result<f64> {
        self.check_pair(x, u)?;
        Ok((&self.a * x + &self.b * u).norm())
    }

    /// Cost integral `∫ ℓ(x(t), u(t)) dt` over samples on a uniform grid.
    pub fn total_cost(&self, times: &[f64], states: &[Vector], controls: &[Vector]) -> Result<f64> {
        let h = uniform_step(times)?;
        if states.len() != times.len() || controls.len() != times.len() {
            return Err(mismatch(
                "total_cost",
                format!("{} samples", times.len()),
                format!("{} states, {} controls", states.len(), controls.len()),
            ));
        }
        let weights = simpson_weights(times.len(), h);
        let mut total = 0.0;
        for ((w, x), u) in weights.iter().zip(states).zip(controls) {
            self.check_pair(x, u)?;
            total += w * self.running_cost_unchecked(x, u).total;
        }
        Ok(total)
    }
}

/// Step of a uniform grid with at least two samples.
pub(crate) fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let h = times[1] - times[0];
    let span = times[times.len() - 1] - times[0];
    let expected = h * (times.len() - 1) as f64;
    if !(h > 0.0) || (span - expected).abs() > 1e-9 * span.abs().max(1.0) {
        return Err(Error::InvalidArgument("samples are not on a uniform grid".into()));
    }
    Ok(h)
}

/// Terms of the running cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub quadratic_state: f64,
    pub quadratic_control: f64,
    pub linear_state: f64,
    pub linear_control: f64,
    pub total: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, k: f64, z: f64, v: f64) -> GlqProblem {
        let s = |x: f64| Matrix::from_element(1, 1, x);
        GlqProblem::new(s(a), s(b), s(c), s(k), Vector::from_element(1, z), Vector::from_element(1, v)).unwrap()
    }

    #[test]
    fn coercivity_certificates() {
        assert_eq!(validate(&Matrix::identity(2, 2)).unwrap(), 1.0);
        let k = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 3.0]));
        assert!((validate(&k).unwrap() - 4.0).abs() < 1e-12);
        let singular = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(validate(&singular), Err(Error::NotCoercive { .. })));
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = GlqProblem::new(
            Matrix::identity(2, 2),
            Matrix::zeros(3, 1),
            Matrix::identity(2, 2),
            Matrix::identity(1, 1),
            Vector::zeros(2),
            Vector::zeros(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { context: "B", .. }));
        let p = scalar(-1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        assert!(p.running_cost(&Vector::zeros(2), &Vector::zeros(1)).is_err());
    }

    #[test]
    fn running_cost_examples() {
        let p = scalar(0.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert_eq!(p.running_cost(&Vector::zeros(1), &Vector::zeros(1)).unwrap().total, 0.0);
        let c = p.running_cost(&Vector::from_element(1, 1.0), &Vector::zeros(1)).unwrap();
        assert_eq!(c.total, 3.0);
        assert_eq!(c.quadratic_state + c.quadratic_control + c.linear_state + c.linear_control, c.total);

        let p = GlqProblem::lq(
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(p.running_cost(&e1, &e1).unwrap().total, 2.0);
    }

    #[test]
    fn steady_residual_examples() {
        let p = scalar(-1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
        let one = Vector::from_element(1, 1.0);
        let zero = Vector::zeros(1);
        assert_eq!(p.steady_residual(&zero, &zero).unwrap(), 0.0);
        assert_eq!(p.steady_residual(&one, &one).unwrap(), 0.0);
        assert_eq!(p.steady_residual(&one, &zero).unwrap(), 1.0);
    }

    #[test]
    fn total_cost_of_constant_arc() {
        let p = scalar(-1.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let xs = vec![Vector::from_element(1, -0.5); times.len()];
        let us = vec![Vector::from_element(1, -0.5); times.len()];
        let ell = p.running_cost(&xs[0], &us[0]).unwrap().total;
        assert!((p.total_cost(&times, &xs, &us).unwrap() - 5.0 * ell).abs() < 1e-10);
        let zx = vec![Vector::zeros(1); times.len()];
        assert_eq!(p.total_cost(&times, &zx, &zx).unwrap(), 0.0);
    }

    #[test]
    fn total_cost_is_additive_over_pieces() {
        let p = scalar(-1.0, 1.0, 2.0, 1.0, 0.3, -0.2);
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let xs: Vec<Vector> = times.iter().map(|t| Vector::from_element(1, (-t).exp())).collect();
        let us: Vec<Vector> = times.iter().map(|t| Vector::from_element(1, t.sin())).collect();
        let whole = p.total_cost(&times, &xs, &us).unwrap();
        let left = p.total_cost(&times[..101], &xs[..101], &us[..101]).unwrap();
        let right = p.total_cost(&times[100..], &xs[100..], &us[100..]).unwrap();
        assert!((whole - left - right).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn problem() -> GlqProblem {
            GlqProblem::new(
                Matrix::from_row_slice(2, 2, &[0.1, 1.0, -0.4, -0.3]),
                Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
                Matrix::from_row_slice(1, 2, &[1.0, 0.5]),
                Matrix::from_element(1, 1, 1.5),
                Vector::from_vec(vec![0.7, -1.1]),
                Vector::from_element(1, 0.4),
            )
            .unwrap()
        }

        proptest! {
            #[test]
            fn running_cost_is_convex(
                a in prop::array::uniform3(-5.0f64..5.0),
                b in prop::array::uniform3(-5.0f64..5.0),
                t in 0.0f64..1.0,
            ) {
                let p = problem();
                let ell = |s: &[f64; 3]| p.running_cost(&Vector::from_vec(vec![s[0], s[1]]), &Vector::from_element(1, s[2])).unwrap().total;
                let mix = [0, 1, 2].map(|i| t * a[i] + (1.0 - t) * b[i]);
                prop_assert!(ell(&mix) <= t * ell(&a) + (1.0 - t) * ell(&b) + 1e-10);
            }

            #[test]
            fn running_cost_coercive_in_control(s in prop::array::uniform3(-10.0f64..10.0)) {
                let p = problem();
                let x = Vector::from_vec(vec![s[0], s[1]]);
                let u = Vector::from_element(1, s[2]);
                let ell = p.running_cost(&x, &u).unwrap().total;
                let bound = p.coercivity() * u.norm_squared() - 2.0 * p.v().norm() * u.norm() - 2.0 * p.z().norm() * x.norm();
                prop_assert!(ell >= bound - 1e-10);
            }
        }
    }
}
