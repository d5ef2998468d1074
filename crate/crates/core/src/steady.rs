//! Optimal steady state: minimize `ℓ(x, u)` subject to `Ax + Bu = 0`.
//!
//! The stationarity system is solved directly for `(x_e, u_e, w)`:
//!
//! ```text
//! CᵀC x − Aᵀ w = −z
//! KᵀK u − Bᵀ w = −v
//! A x + B u    = 0
//! ```
//!
//! so that `Aᵀw = z + CᵀC x_e` and `Bᵀw = v + KᵀK u_e`.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{columns, kernel_basis, solve_linear, Matrix, Vector, DEFAULT_KERNEL_TOL};

const RIDGE: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-8;

/// Optimal steady pair with its adjoint steady state `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub x_e: Vector,
    pub u_e: Vector,
    pub w: Vector,
    pub kkt_residual: f64,
    pub unique: bool,
}

impl SteadyStateResult {
    /// The trivial reference of an LQ problem.
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            x_e: Vector::zeros(n),
            u_e: Vector::zeros(m),
            w: Vector::zeros(n),
            kkt_residual: 0.0,
            unique: true,
        }
    }
}

fn kkt_system(problem: &GlqProblem) -> (Matrix, Vector) {
    let (n, m) = (problem.state_dim(), problem.control_dim());
    let dim = 2 * n + m;
    let (a, b, c, k) = (problem.a(), problem.b(), problem.c(), problem.k());
    let mut kkt = Matrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(c.transpose() * c));
    kkt.view_mut((0, n + m), (n, n)).copy_from(&(-a.transpose()));
    kkt.view_mut((n, n), (m, m)).copy_from(&(k.transpose() * k));
    kkt.view_mut((n, n + m), (m, n)).copy_from(&(-b.transpose()));
    kkt.view_mut((n + m, 0), (n, n)).copy_from(a);
    kkt.view_mut((n + m, n), (n, m)).copy_from(b);
    let mut rhs = Vector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-problem.z()));
    rhs.rows_mut(n, m).copy_from(&(-problem.v()));
    (kkt, rhs)
}

/// Residual of the optimality conditions at `(x, u, w)`.
pub fn kkt_residual(problem: &GlqProblem, x: &Vector, u: &Vector, w: &Vector) -> f64 {
    let (a, b, c, k) = (problem.a(), problem.b(), problem.c(), problem.k());
    let state = a.transpose() * w - problem.z() - c.transpose() * (c * x);
    let control = b.transpose() * w - problem.v() - k.transpose() * (k * u);
    let steady = a * x + b * u;
    state.norm() + control.norm() + steady.norm()
}

/// Solves the stationarity system. A singular but consistent system is
/// resolved by ridge-regularized least squares and flagged non-unique.
pub fn solve_steady(problem: &GlqProblem) -> Result<SteadyStateResult> {
    let (n, m) = (problem.state_dim(), problem.control_dim());
    let (kkt, rhs) = kkt_system(problem);
    let (solution, direct) = match solve_linear(&kkt, &rhs) {
        Ok(y) => (y, true),
        Err(Error::SingularMatrix { .. }) => {
            let normal = kkt.transpose() * &kkt;
            let ridge = RIDGE * normal.amax().max(1.0);
            let regularized = &normal + Matrix::identity(normal.nrows(), normal.ncols()) * ridge;
            let y = regularized
                .cholesky()
                .map(|ch| ch.solve(&(kkt.transpose() * &rhs)))
                .ok_or(Error::KktSingular { residual: f64::NAN })?;
            (y, false)
        }
        Err(e) => return Err(e),
    };
    let x_e = solution.rows(0, n).into_owned();
    let u_e = solution.rows(n, m).into_owned();
    let w = solution.rows(n + m, n).into_owned();
    let residual = kkt_residual(problem, &x_e, &u_e, &w);
    let scale = 1.0 + rhs.norm() + solution.norm() * kkt.amax();
    if !direct && residual > CONSISTENCY_TOL * scale {
        return Err(Error::KktSingular { residual });
    }
    Ok(SteadyStateResult {
        unique: direct && check_uniqueness(problem),
        x_e,
        u_e,
        w,
        kkt_residual: residual,
    })
}

/// True iff `ker A ∩ ker C = {0}`, i.e. the stacked matrix `[A; C]` has a
/// trivial numerical kernel.
pub fn check_uniqueness(problem: &GlqProblem) -> bool {
    let (a, c) = (problem.a(), problem.c());
    let n = problem.state_dim();
    let mut stacked = Matrix::zeros(a.nrows() + c.nrows(), n);
    stacked.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    stacked.view_mut((a.nrows(), 0), (c.nrows(), n)).copy_from(c);
    kernel_basis(&stacked, DEFAULT_KERNEL_TOL).is_empty()
}

/// Orthonormal basis of the steady manifold `V = ker [A B]`, as columns of
/// an `(n + m) × dim V` matrix.
pub fn steady_manifold(problem: &GlqProblem) -> Matrix {
    let (n, m) = (problem.state_dim(), problem.control_dim());
    let mut ab = Matrix::zeros(n, n + m);
    ab.view_mut((0, 0), (n, n)).copy_from(problem.a());
    ab.view_mut((0, n), (n, m)).copy_from(problem.b());
    columns(&kernel_basis(&ab, DEFAULT_KERNEL_TOL), n + m)
}

/// Smallest eigenvalue of the quadratic cost `diag(CᵀC, KᵀK)` restricted to
/// the steady manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSpectrum {
    pub min_eigenvalue: f64,
    /// Dimension of the steady manifold; zero means the value is a placeholder.
    pub manifold_dim: usize,
}

pub fn projected_operator_spectrum(problem: &GlqProblem) -> ProjectedSpectrum {
    let (n, m) = (problem.state_dim(), problem.control_dim());
    let q = steady_manifold(problem);
    if q.ncols() == 0 {
        return ProjectedSpectrum {
            min_eigenvalue: 0.0,
            manifold_dim: 0,
        };
    }
    let (c, k) = (problem.c(), problem.k());
    let mut quad = Matrix::zeros(n + m, n + m);
    quad.view_mut((0, 0), (n, n)).copy_from(&(c.transpose() * c));
    quad.view_mut((n, n), (m, m)).copy_from(&(k.transpose() * k));
    let projected = q.transpose() * quad * &q;
    ProjectedSpectrum {
        min_eigenvalue: SymmetricEigen::new(projected).eigenvalues.min(),
        manifold_dim: q.ncols(),
    }
}
