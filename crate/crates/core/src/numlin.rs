//! Dense linear algebra and ODE kernels.
//!
//! System matrices are real. Complex arithmetic only appears in the spectral
//! routines (eigenvectors, Hautus rank checks).

use nalgebra::{ComplexField, DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-12;
const INVERSE_ITERATION_SWEEPS: usize = 3;

/// Solves `m y = b` by LU factorization with partial pivoting.
pub fn solve_linear(m: &Matrix, b: &Vector) -> Result<Vector> {
    let n = m.nrows();
    if m.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_linear",
            expected: format!("square {n}x{n} system with rhs of length {n}"),
            found: format!("{}x{} with rhs of length {}", m.nrows(), m.ncols(), b.len()),
        });
    }
    let scale = m.amax();
    let mut lu = m.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let (offset, pivot) = lu
            .view((col, col), (n - col, 1))
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        if pivot <= PIVOT_TOL * scale || pivot == 0.0 {
            return Err(Error::SingularMatrix { pivot, column: col });
        }
        let p = col + offset;
        if p != col {
            lu.swap_rows(col, p);
            rhs.swap_rows(col, p);
        }
        let diag = lu[(col, col)];
        for row in col + 1..n {
            let factor = lu[(row, col)] / diag;
            if factor == 0.0 {
                continue;
            }
            lu[(row, col)] = factor;
            for k in col + 1..n {
                lu[(row, k)] -= factor * lu[(col, k)];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut y = Vector::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= lu[(row, k)] * y[k];
        }
        y[row] = acc / lu[(row, row)];
    }
    Ok(y)
}

fn kernel_of<T>(m: &DMatrix<T>, tol: f64) -> Vec<DVector<T>>
where
    T: ComplexField<RealField = f64>,
{
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    let scale = m
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return (0..cols)
            .map(|i| DVector::from_fn(cols, |r, _| if r == i { T::one() } else { T::zero() }))
            .collect();
    }
    kernel_with_threshold(m, tol * scale)
}

fn kernel_with_threshold<T>(m: &DMatrix<T>, threshold: f64) -> Vec<DVector<T>>
where
    T: ComplexField<RealField = f64>,
{
    let cols = m.ncols();
    if cols == 0 {
        return Vec::new();
    }
    // Pad wide matrices so the SVD exposes a full right basis.
    let square = if m.nrows() < cols {
        let mut padded = DMatrix::<T>::zeros(cols, cols);
        padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < threshold)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect()
}

/// Kernel basis with an explicit absolute threshold on singular values.
pub fn kernel_basis_below(m: &Matrix, threshold: f64) -> Vec<Vector> {
    kernel_with_threshold(m, threshold)
}

/// Orthonormal basis of the numerical null space of `m`.
///
/// A right singular direction belongs to the kernel when its singular value
/// is below `tol` times the largest column norm. An empty list means the
/// kernel is trivial.
pub fn kernel_basis(m: &Matrix, tol: f64) -> Vec<Vector> {
    kernel_of(m, tol)
}

/// Complex counterpart of [`kernel_basis`].
pub fn complex_kernel_basis(m: &ComplexMatrix, tol: f64) -> Vec<ComplexVector> {
    kernel_of(m, tol)
}

/// Stacks the given basis vectors as matrix columns.
pub fn columns(basis: &[Vector], rows: usize) -> Matrix {
    Matrix::from_fn(rows, basis.len(), |r, c| basis[c][r])
}

pub fn to_complex(m: &Matrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues with unit-norm eigenvectors and their residuals `‖M v − λ v‖`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<ComplexVector>,
    pub residuals: Vec<f64>,
}

impl EigenDecomposition {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Largest real part of the spectrum (`-inf` for an empty matrix).
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Eigenvalues by Hessenberg reduction and shifted QR (real Schur form),
/// eigenvectors by inverse iteration.
///
/// Eigenvalues are ordered by decreasing real part, then decreasing
/// imaginary part.
pub fn eigen(m: &Matrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "eigen",
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: Vec::new(),
            residuals: Vec::new(),
        });
    }
    let budget = 200 * n;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, budget)
        .ok_or(Error::NoConvergence { sweeps: budget })?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

    let cm = to_complex(m);
    let mut eigenvectors: Vec<ComplexVector> = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        let cluster: Vec<&ComplexVector> = eigenvalues[..i]
            .iter()
            .zip(&eigenvectors)
            .filter(|(mu, _)| (**mu - lambda).norm() <= 1e-8 * (1.0 + lambda.norm()))
            .map(|(_, v)| v)
            .collect();
        let v = inverse_iteration(&cm, lambda, cluster.len(), &cluster);
        residuals.push((&cm * &v - &v * lambda).norm());
        eigenvectors.push(v);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        residuals,
    })
}

/// Inverse iteration for the eigenvector of `m` closest to `shift`, kept
/// orthogonal to `deflate` (previous vectors of a repeated eigenvalue).
pub fn inverse_iteration(
    m: &ComplexMatrix,
    shift: Complex64,
    seed: usize,
    deflate: &[&ComplexVector],
) -> ComplexVector {
    let n = m.nrows();
    let delta = 1e-10 * (1.0 + shift.norm()) * (1.0 + m.camax());
    let shifted = m - ComplexMatrix::identity(n, n) * (shift + Complex64::new(delta, 0.5 * delta));
    let lu = shifted.lu();
    let mut v = ComplexVector::from_fn(n, |r, _| {
        let base = Complex64::new(1.0 / (1.0 + r as f64), 0.1 * r as f64 / n as f64);
        if r == seed % n {
            base + Complex64::new(1.0, 0.0)
        } else {
            base
        }
    });
    orthonormalize(&mut v, deflate);
    for _ in 0..INVERSE_ITERATION_SWEEPS {
        match lu.solve(&v) {
            Some(next) if next.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => v = next,
            _ => break,
        }
        orthonormalize(&mut v, deflate);
    }
    normalize_phase(&mut v);
    v
}

fn orthonormalize(v: &mut ComplexVector, against: &[&ComplexVector]) {
    for q in against {
        let proj = q.dotc(v);
        *v -= *q * proj;
    }
    let norm = v.norm();
    if norm > 0.0 {
        *v /= Complex64::new(norm, 0.0);
    }
}

/// Rotates `v` so that its largest entry is real and positive.
pub(crate) fn normalize_phase(v: &mut ComplexVector) {
    if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            v.apply(|c| *c *= phase);
        }
    }
}

fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential `e^{tM}` by scaling and squaring with a truncated
/// Taylor series.
pub fn expm(m: &Matrix, t: f64) -> Matrix {
    let n = m.nrows();
    let a = m * t;
    let norm = inf_norm(&a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let mut sum = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / k as f64;
        sum += &term;
        if inf_norm(&term) <= 1e-18 * inf_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Samples of a vector-valued arc on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledArc {
    pub times: Vec<f64>,
    pub values: Vec<Vector>,
}

impl SampledArc {
    pub fn last(&self) -> &Vector {
        self.values.last().expect("arc has at least one sample")
    }
}

/// One classical Runge-Kutta step of size `h` from `(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &Vector, h: f64) -> Vector
where
    F: FnMut(f64, &Vector) -> Vector,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Uniform grid `t0, t0 + dt, ...` whose final step is shortened to land on `t1`.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let ratio = (t1 - t0) / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);
    let mut times: Vec<f64> = (0..steps).map(|i| t0 + i as f64 * dt).collect();
    times.push(t1);
    times
}

/// Integrates `y' = f(t, y)` with classical RK4 on [`uniform_grid`].
pub fn rk4_integrate<F>(mut f: F, y0: &Vector, t0: f64, t1: f64, dt: f64) -> Result<SampledArc>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "rk4 needs dt > 0 and t1 > t0 (dt = {dt}, t0 = {t0}, t1 = {t1})"
        )));
    }
    let times = uniform_grid(t0, t1, dt);
    let mut values = Vec::with_capacity(times.len());
    values.push(y0.clone());
    for w in times.windows(2) {
        let next = rk4_step(&mut f, w[0], values.last().unwrap(), w[1] - w[0]);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState {
                time: w[1],
                last_finite_time: w[0],
            });
        }
        values.push(next);
    }
    Ok(SampledArc { times, values })
}

/// Composite Simpson weights for `samples` equally spaced points with step
/// `h`. An odd number of intervals closes with a Simpson 3/8 panel; two
/// samples fall back to the trapezoid rule.
pub fn simpson_weights(samples: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; samples];
    if samples < 2 {
        return w;
    }
    let intervals = samples - 1;
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_intervals = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for i in (0..simpson_intervals).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if intervals % 2 == 1 {
        let s = simpson_intervals;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Integral of equally spaced samples with [`simpson_weights`].
pub fn simpson(values: &[f64], h: f64) -> f64 {
    simpson_weights(values.len(), h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(d: &EigenDecomposition) -> Vec<f64> {
        d.eigenvalues.iter().map(|l| l.re).collect()
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let y = solve_linear(&Matrix::identity(3, 3), &Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(y, Vector::from_vec(vec![1.0, 2.0, 3.0]));
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 4.0]));
        let y = solve_linear(&d, &Vector::from_vec(vec![2.0, 4.0])).unwrap();
        assert_eq!(y, Vector::from_vec(vec![1.0, 1.0]));
    }

    #[test]
    fn solve_rejects_singular() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let err = solve_linear(&m, &Vector::from_vec(vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { column: 1, .. }));
    }

    #[test]
    fn solve_residual_on_random_system() {
        let m = Matrix::from_row_slice(
            5,
            5,
            &[
                4.0, 1.0, -0.5, 0.2, 0.3, 0.7, 5.0, 0.1, -0.4, 0.9, -0.3, 0.8, 3.5, 0.6, -0.2,
                0.5, -0.9, 0.4, 6.0, 0.1, 0.2, 0.3, -0.7, 0.5, 4.5,
            ],
        );
        let b = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0, -1.5]);
        let y = solve_linear(&m, &b).unwrap();
        assert!((&m * &y - &b).norm() <= 1e-10 * (1.0 + b.norm()));
    }

    #[test]
    fn kernel_examples() {
        assert!(kernel_basis(&Matrix::identity(2, 2), DEFAULT_KERNEL_TOL).is_empty());
        let zero = kernel_basis(&Matrix::zeros(2, 2), DEFAULT_KERNEL_TOL);
        assert_eq!(zero.len(), 2);
        assert!((zero[0].dot(&zero[1])).abs() < 1e-14);
        let ones = kernel_basis(&Matrix::from_element(2, 2, 1.0), DEFAULT_KERNEL_TOL);
        assert_eq!(ones.len(), 1);
        let v = &ones[0];
        assert!((v[0] + v[1]).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let m = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let basis = kernel_basis(&m, DEFAULT_KERNEL_TOL);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!(v[0].abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_examples() {
        let d = eigen(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -2.0]))).unwrap();
        assert_eq!(sorted_re(&d), vec![1.0, -2.0]);
        assert!(d.eigenvalues.iter().all(|l| l.im == 0.0));

        let rot = eigen(&Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        assert!((rot.eigenvalues[0] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((rot.eigenvalues[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!(rot.max_residual() < 1e-10);

        let heat = eigen(&Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 1.0, -4.0, -11.0]))).unwrap();
        assert_eq!(sorted_re(&heat), vec![4.0, 1.0, -4.0, -11.0]);
    }

    #[test]
    fn eigen_repeated_eigenvalue_gives_independent_vectors() {
        let d = eigen(&Matrix::identity(3, 3)).unwrap();
        let v = ComplexMatrix::from_columns(&d.eigenvectors);
        assert!(v.determinant().norm() > 0.5);
        assert!(d.max_residual() < 1e-12);
    }

    #[test]
    fn eigen_residuals_on_nonsymmetric_matrix() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -3.0, 0.5, 1.0, 0.2, 0.0, -2.0]);
        let d = eigen(&m).unwrap();
        let total: f64 = d.residuals.iter().sum();
        assert!(total <= 1e-8 * m.norm(), "total residual {total}");
        for v in &d.eigenvectors {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expm_identities() {
        let m = Matrix::from_row_slice(2, 2, &[0.3, -1.2, 0.8, -0.5]);
        assert_eq!(expm(&m, 0.0), Matrix::identity(2, 2));
        let d = expm(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -3.0])), 2.0);
        assert!((d[(0, 0)] - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
        assert!((d[(1, 1)] - (-6f64).exp()).abs() < 1e-10 * (-6f64).exp());
        assert!(d[(0, 1)].abs() < 1e-15 && d[(1, 0)].abs() < 1e-15);
        let lhs = expm(&m, 1.7);
        let rhs = expm(&m, 0.4) * expm(&m, 1.3);
        assert!((lhs - rhs).amax() < 1e-9);
    }

    #[test]
    fn expm_rotation_matches_closed_form() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = expm(&m, 10.0);
        let expected = Matrix::from_row_slice(2, 2, &[10f64.cos(), 10f64.sin(), -10f64.sin(), 10f64.cos()]);
        assert!((e - expected).amax() < 1e-10);
    }

    #[test]
    fn rk4_examples() {
        let v = Vector::from_vec(vec![1.5, -2.0]);
        let arc = rk4_integrate(|_, y| y * 0.0, &v, 0.0, 1.0, 0.1).unwrap();
        assert!(arc.values.iter().all(|y| *y == v));

        let one = Vector::from_element(1, 1.0);
        let arc = rk4_integrate(|_, y| -y, &one, 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(arc.times.len(), 1001);
        assert!((arc.last()[0] - (-1f64).exp()).abs() < 1e-10);

        let a = Matrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.2]);
        let arc = rk4_integrate(|_, y| &a * y, &v, 0.0, 2.0, 1e-3).unwrap();
        assert!((arc.last() - expm(&a, 2.0) * &v).norm() < 1e-8);
    }

    #[test]
    fn rk4_shortens_final_step() {
        let arc = rk4_integrate(|_, y| y.clone(), &Vector::from_element(1, 1.0), 0.0, 1.0, 0.3).unwrap();
        assert_eq!(arc.times.len(), 5);
        assert_eq!(*arc.times.last().unwrap(), 1.0);
        assert!((arc.last()[0] - 1f64.exp()).abs() < 1e-3);
    }

    #[test]
    fn rk4_fourth_order() {
        let err = |dt: f64| {
            let arc = rk4_integrate(|_, y| -y, &Vector::from_element(1, 1.0), 0.0, 1.0, dt).unwrap();
            (arc.last()[0] - (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio >= 12.0, "ratio {ratio}");
    }

    #[test]
    fn rk4_reports_blow_up() {
        let err = rk4_integrate(|_, y| y.map(|x| x * x), &Vector::from_element(1, 1.0), 0.0, 2.0, 0.01)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        for samples in [3usize, 4, 5, 8, 11] {
            let h = 2.0 / (samples - 1) as f64;
            let values: Vec<f64> = (0..samples).map(|i| (i as f64 * h).powi(3)).collect();
            assert!((simpson(&values, h) - 4.0).abs() < 1e-12, "samples {samples}");
        }
    }
}
