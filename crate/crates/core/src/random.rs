//! Seeded random test systems with prescribed structure.
//!
//! Systems are assembled in modal coordinates, `A = S D S⁻¹`, `B = S B̃`,
//! `C = C̃ S⁻¹`, where `D` is block diagonal with real eigenvalues and
//! complex-pair blocks. Zeroing the rows of `B̃` (columns of `C̃`) belonging
//! to a block makes that block uncontrollable (unobservable).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::glq::GlqProblem;
use crate::numlin::{eigen, to_complex, ComplexMatrix, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    /// Stabilizable and detectable; may contain stable hidden modes.
    Good,
    /// An unstable block is not reachable from the input.
    Unstabilizable,
    /// An unstable block is invisible in the output.
    Undetectable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemShape {
    pub max_state: usize,
    pub max_input: usize,
    pub max_output: usize,
    /// Draw nonzero `z` and `v`.
    pub linear_terms: bool,
    /// Range of `|Re λ|` for every eigenvalue.
    pub rate_range: (f64, f64),
    /// Range of `|Im λ|` for complex pairs.
    pub frequency_range: (f64, f64),
    /// Range of the magnitude of each initial-state entry.
    pub initial_range: (f64, f64),
    /// Smallest singular value required of `[sI − A, B]` and `[sI − A; C]`
    /// at unstable eigenvalues `s` that are meant to be controllable and
    /// observable. Draws below the margin are discarded.
    pub hautus_margin: f64,
}

impl Default for SystemShape {
    fn default() -> Self {
        Self {
            max_state: 4,
            max_input: 2,
            max_output: 2,
            linear_terms: true,
            rate_range: (0.5, 2.0),
            frequency_range: (0.2, 2.0),
            initial_range: (0.2, 1.0),
            hautus_margin: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub kind: SystemKind,
    pub problem: GlqProblem,
    pub x0: Vector,
    /// Eigenvalues of `A` as `(re, im)`, one entry per real eigenvalue or
    /// conjugate pair.
    pub blocks: Vec<(f64, f64)>,
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let magnitude = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn condition(m: &Matrix) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    s.max() / s.min()
}

fn similarity(rng: &mut ChaCha8Rng, n: usize) -> (Matrix, Matrix) {
    loop {
        let s = Matrix::identity(n, n) + Matrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
        if condition(&s) < 20.0 {
            let inv = s.clone().try_inverse().expect("well-conditioned matrix is invertible");
            return (s, inv);
        }
    }
}

/// Smallest singular value of `[sI − A, B]` over unstable eigenvalues `s`
/// (`+inf` when `A` is stable).
pub fn stabilizability_margin(a: &Matrix, b: &Matrix) -> Result<f64> {
    let n = a.nrows();
    let mut margin = f64::INFINITY;
    for s in eigen(a)?.eigenvalues.iter().filter(|s| s.re >= 0.0) {
        let mut pencil = ComplexMatrix::zeros(n, n + b.ncols());
        pencil
            .view_mut((0, 0), (n, n))
            .copy_from(&(ComplexMatrix::identity(n, n) * *s - to_complex(a)));
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(&to_complex(b));
        let sv = pencil.svd(false, false).singular_values;
        margin = margin.min(sv.min());
    }
    Ok(margin)
}

/// Draws one system of the requested kind. Unstable blocks meant to be
/// controllable (observable) are resampled until they clear
/// `shape.hautus_margin`.
pub fn random_system(rng: &mut ChaCha8Rng, kind: SystemKind, shape: SystemShape) -> Result<RandomSystem> {
    if shape.max_state == 0 || shape.max_input == 0 || shape.max_output == 0 {
        return Err(Error::InvalidArgument("system dimensions must be positive".into()));
    }
    let (lo, hi) = shape.rate_range;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::InvalidArgument(format!("invalid rate range ({lo}, {hi})")));
    }
    loop {
        let sys = draw(rng, kind, shape)?;
        let p = &sys.problem;
        let stab = stabilizability_margin(p.a(), p.b())?;
        let det = stabilizability_margin(&p.a().transpose(), &p.c().transpose())?;
        let ok = match kind {
            SystemKind::Good => stab >= shape.hautus_margin && det >= shape.hautus_margin,
            SystemKind::Unstabilizable => det >= shape.hautus_margin,
            SystemKind::Undetectable => stab >= shape.hautus_margin,
        };
        if ok {
            return Ok(sys);
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, kind: SystemKind, shape: SystemShape) -> Result<RandomSystem> {
    let (lo, hi) = shape.rate_range;
    let n = rng.random_range(1..=shape.max_state);
    let m = rng.random_range(1..=shape.max_input);
    let p = rng.random_range(1..=shape.max_output);

    // block sizes and spectra
    let mut blocks: Vec<(usize, f64, f64)> = Vec::new();
    let mut used = 0;
    while used < n {
        let pair = n - used >= 2 && rng.random_bool(0.4);
        let re = signed(rng, lo, hi);
        let im = if pair { rng.random_range(shape.frequency_range.0..shape.frequency_range.1) } else { 0.0 };
        blocks.push((used, re, im));
        used += if pair { 2 } else { 1 };
    }
    let flagged = if kind == SystemKind::Good {
        None
    } else {
        let pick = rng.random_range(0..blocks.len());
        blocks[pick].1 = blocks[pick].1.abs();
        Some(pick)
    };
    let size = |im: f64| if im == 0.0 { 1 } else { 2 };

    let mut d = Matrix::zeros(n, n);
    for &(start, re, im) in &blocks {
        d[(start, start)] = re;
        if im != 0.0 {
            d[(start + 1, start + 1)] = re;
            d[(start, start + 1)] = im;
            d[(start + 1, start)] = -im;
        }
    }
    let mut b_modal = Matrix::from_fn(n, m, |_, _| signed(rng, 0.5, 1.5));
    let mut c_modal = Matrix::from_fn(p, n, |_, _| signed(rng, 0.5, 1.5));
    for (i, &(start, re, im)) in blocks.iter().enumerate() {
        let rows = start..start + size(im);
        let hide_input = match kind {
            SystemKind::Unstabilizable => flagged == Some(i),
            _ => re < 0.0 && rng.random_bool(0.15),
        };
        let hide_output = match kind {
            SystemKind::Undetectable => flagged == Some(i),
            _ => re < 0.0 && rng.random_bool(0.15),
        };
        for r in rows {
            if hide_input {
                b_modal.row_mut(r).fill(0.0);
            }
            if hide_output {
                c_modal.column_mut(r).fill(0.0);
            }
        }
    }

    let (s, s_inv) = similarity(rng, n);
    let a = &s * d * &s_inv;
    let b = &s * b_modal;
    let c = c_modal * &s_inv;
    let k = Matrix::identity(m, m) + Matrix::from_fn(m, m, |_, _| rng.random_range(-0.2..0.2));
    let (z, v) = if shape.linear_terms {
        (
            Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)),
        )
    } else {
        (Vector::zeros(n), Vector::zeros(m))
    };
    let x0 = Vector::from_fn(n, |_, _| signed(rng, shape.initial_range.0, shape.initial_range.1));
    Ok(RandomSystem {
        kind,
        problem: GlqProblem::new(a, b, c, k, z, v)?,
        x0,
        blocks: blocks.iter().map(|&(_, re, im)| (re, im)).collect(),
    })
}

/// `count` systems cycling through `kinds`, reproducible from `seed`.
pub fn system_suite(seed: u64, count: usize, kinds: &[SystemKind], shape: SystemShape) -> Result<Vec<RandomSystem>> {
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("at least one system kind is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| random_system(&mut rng, kinds[i % kinds.len()], shape))
        .collect()
}
