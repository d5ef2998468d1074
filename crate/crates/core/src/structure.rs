//! Structural tests: Hautus stabilizability and detectability, spectral
//! splitting, the unobservable subspace and stability on it.

use nalgebra::ComplexField;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{
    columns, complex_kernel_basis, eigen, inverse_iteration, kernel_basis_below, normalize_phase, to_complex, ComplexMatrix,
    ComplexVector, Matrix, Vector, DEFAULT_KERNEL_TOL,
};
use crate::riccati::dre_limit;

/// Default half-width of the band around the imaginary axis treated as zero.
pub const DEFAULT_GAP: f64 = 1e-7;

const SPECTRAL_RELIABILITY: f64 = 1e-6;
const STABILITY_MARGIN: f64 = 1e-9;

fn kernel_scale(a: &Matrix, c: &Matrix) -> f64 {
    a.amax().max(c.amax()).max(1.0)
}

/// The unobservable subspace with the restriction of `A` to it.
#[derive(Debug, Clone)]
pub struct ObservabilityData {
    /// Orthonormal basis vectors.
    pub unobservable_basis: Vec<Vector>,
    /// `QᵀAQ` for the basis matrix `Q`.
    pub restricted_a: Matrix,
    pub restricted_eigenvalues: Vec<Complex64>,
    pub stable_on_unobservable: bool,
}

impl ObservabilityData {
    pub fn dim(&self) -> usize {
        self.unobservable_basis.len()
    }

    /// `‖x − QQᵀx‖`: distance of `x` from the subspace.
    pub fn distance(&self, x: &Vector) -> f64 {
        let q = columns(&self.unobservable_basis, x.len());
        (x - &q * (q.transpose() * x)).norm()
    }
}

/// Largest `A`-invariant subspace of `ker C`, which in finite dimension is
/// the set of states with `C e^{tA} x = 0` for all `t ≥ 0`.
///
/// Starting from `ker C`, the basis is shrunk to `{x ∈ V : Ax ∈ V}` until it
/// stops changing. This is the kernel of the Kalman stack
/// `[C; CA; …; CA^{n−1}]` without forming powers of `A`.
pub fn unobservable_subspace(a: &Matrix, c: &Matrix) -> Result<ObservabilityData> {
    let n = a.nrows();
    let threshold = DEFAULT_KERNEL_TOL * kernel_scale(a, c);
    let mut q = if c.nrows() == 0 {
        Matrix::identity(n, n)
    } else {
        columns(&kernel_basis_below(c, threshold), n)
    };
    while q.ncols() > 0 {
        let aq = a * &q;
        let leak = &aq - &q * (q.transpose() * &aq);
        let keep = kernel_basis_below(&leak, threshold);
        if keep.len() == q.ncols() {
            break;
        }
        q = if keep.is_empty() {
            Matrix::zeros(n, 0)
        } else {
            &q * columns(&keep, q.ncols())
        };
    }
    let restricted_a = q.transpose() * a * &q;
    let restricted_eigenvalues = eigen(&restricted_a)?.eigenvalues;
    let stable_on_unobservable = restricted_eigenvalues.iter().all(|l| l.re < -STABILITY_MARGIN);
    Ok(ObservabilityData {
        unobservable_basis: q.column_iter().map(|c| c.into_owned()).collect(),
        restricted_a,
        restricted_eigenvalues,
        stable_on_unobservable,
    })
}

/// A spectrum point violating the Hautus condition and a kernel vector of
/// `[sI − A; C]` at it.
#[derive(Debug, Clone, PartialEq)]
pub struct HautusWitness {
    pub eigenvalue: Complex64,
    pub vector: ComplexVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HautusReport {
    pub holds: bool,
    pub witness: Option<HautusWitness>,
}

/// Hautus detectability test: `ker(sI − A) ∩ ker C = {0}` at every
/// eigenvalue `s` with `Re s ≥ −gap`.
pub fn hautus_detectable(a: &Matrix, c: &Matrix, gap: f64) -> Result<HautusReport> {
    let n = a.nrows();
    let spectrum = eigen(a)?;
    let reliability = SPECTRAL_RELIABILITY * (1.0 + a.amax());
    if spectrum.max_residual() > reliability {
        return Err(Error::SpectralUnreliable {
            residual: spectrum.max_residual(),
        });
    }
    let ca = to_complex(a);
    let cc = to_complex(c);
    for &s in spectrum.eigenvalues.iter().filter(|s| s.re >= -gap) {
        let mut stacked = ComplexMatrix::zeros(n + c.nrows(), n);
        let shifted = ComplexMatrix::identity(n, n) * s - &ca;
        stacked.view_mut((0, 0), (n, n)).copy_from(&shifted);
        stacked.view_mut((n, 0), (c.nrows(), n)).copy_from(&cc);
        let kernel = complex_kernel_basis(&stacked, DEFAULT_KERNEL_TOL);
        if let Some(mut vector) = kernel.into_iter().next() {
            normalize_phase(&mut vector);
            return Ok(HautusReport {
                holds: false,
                witness: Some(HautusWitness { eigenvalue: s, vector }),
            });
        }
    }
    Ok(HautusReport {
        holds: true,
        witness: None,
    })
}

/// Hautus stabilizability test, the detectability test for `(Aᵀ, Bᵀ)`.
pub fn hautus_stabilizable(a: &Matrix, b: &Matrix, gap: f64) -> Result<HautusReport> {
    hautus_detectable(&a.transpose(), &b.transpose(), gap)
}

/// Eigenvalues of one part of the spectrum with the spectral projector onto
/// their invariant subspace.
#[derive(Debug, Clone)]
pub struct SpectralGroup {
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<ComplexVector>,
    pub projector: Matrix,
}

impl SpectralGroup {
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Spectrum split by the sign of the real part, with tolerance `gap`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub negative: SpectralGroup,
    pub zero: SpectralGroup,
    pub positive: SpectralGroup,
    pub gap: f64,
}

fn group_projector(
    n: usize,
    right: &[ComplexVector],
    left: &[ComplexVector],
) -> Result<Matrix> {
    if right.is_empty() {
        return Ok(Matrix::zeros(n, n));
    }
    let v = ComplexMatrix::from_columns(right);
    let w = ComplexMatrix::from_columns(left);
    let pairing = w.adjoint() * &v;
    let inv = pairing.clone().try_inverse().ok_or(Error::SpectralUnreliable {
        residual: pairing.determinant().modulus(),
    })?;
    Ok((v * inv * w.adjoint()).map(|c| c.re))
}

/// Groups the eigenvalues of `a` into `Re < −gap`, `|Re| ≤ gap` and
/// `Re > gap`. Projectors are built from right and left eigenvectors, so
/// `a` must be diagonalizable.
pub fn spectral_split(a: &Matrix, gap: f64) -> Result<SpectralSplit> {
    let n = a.nrows();
    let spectrum = eigen(a)?;
    for l in &spectrum.eigenvalues {
        let r = l.re.abs();
        if (r - gap).abs() < 0.5 * gap && r > 1e-12 {
            return Err(Error::GapViolation { real: l.re });
        }
    }
    let at = to_complex(&a.transpose());
    let mut left: Vec<ComplexVector> = Vec::with_capacity(n);
    for (i, l) in spectrum.eigenvalues.iter().enumerate() {
        let cluster: Vec<&ComplexVector> = spectrum.eigenvalues[..i]
            .iter()
            .zip(&left)
            .filter(|(mu, _)| (**mu - l).norm() <= 1e-8 * (1.0 + l.norm()))
            .map(|(_, v)| v)
            .collect();
        let w = inverse_iteration(&at, l.conj(), cluster.len(), &cluster);
        left.push(w);
    }
    let mut groups: [(Vec<Complex64>, Vec<ComplexVector>, Vec<ComplexVector>); 3] = Default::default();
    for ((l, v), w) in spectrum.eigenvalues.iter().zip(&spectrum.eigenvectors).zip(&left) {
        let slot = if l.re < -gap {
            0
        } else if l.re <= gap {
            1
        } else {
            2
        };
        groups[slot].0.push(*l);
        groups[slot].1.push(v.clone());
        groups[slot].2.push(w.clone());
    }
    let [neg, zero, pos] = groups;
    let build = |(eigenvalues, right, left): (Vec<Complex64>, Vec<ComplexVector>, Vec<ComplexVector>)| {
        let projector = group_projector(n, &right, &left)?;
        Ok::<_, Error>(SpectralGroup {
            eigenvalues,
            eigenvectors: right,
            projector,
        })
    };
    Ok(SpectralSplit {
        negative: build(neg)?,
        zero: build(zero)?,
        positive: build(pos)?,
        gap,
    })
}

/// A stabilizing state feedback `F = −BᵀP∞` from the Riccati limit with
/// `C = I`, `K = I`.
#[derive(Debug, Clone)]
pub struct StabilizingFeedback {
    pub gain: Matrix,
    pub riccati_limit: Matrix,
    /// Largest real part of the spectrum of `A + BF`.
    pub closed_loop_abscissa: f64,
}

pub fn stabilizing_feedback(a: &Matrix, b: &Matrix, dt: f64, tol: f64) -> Result<StabilizingFeedback> {
    let report = hautus_stabilizable(a, b, DEFAULT_GAP)?;
    if let Some(w) = report.witness {
        return Err(Error::Unstabilizable {
            re: w.eigenvalue.re,
            im: w.eigenvalue.im,
        });
    }
    let (n, m) = (a.nrows(), b.ncols());
    let problem = GlqProblem::lq(a.clone(), b.clone(), Matrix::identity(n, n), Matrix::identity(m, m))?;
    let limit = dre_limit(&problem, dt, tol, 1e4)?;
    let gain = -(b.transpose() * &limit);
    let closed = eigen(&(a + b * &gain))?;
    let abscissa = closed.spectral_abscissa();
    if !(abscissa < -STABILITY_MARGIN) {
        let worst = closed.eigenvalues[0];
        return Err(Error::Unstabilizable {
            re: worst.re,
            im: worst.im,
        });
    }
    Ok(StabilizingFeedback {
        gain,
        riccati_limit: limit,
        closed_loop_abscissa: abscissa,
    })
}
