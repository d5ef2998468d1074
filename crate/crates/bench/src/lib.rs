//! Fixtures shared by the benchmarks in `benches/`.

use turnpike_core::random::{system_suite, RandomSystem, SystemKind, SystemShape};
use turnpike_core::{GlqProblem, Matrix, Vector};

/// A seeded, stabilizable and detectable system with `n` states, two inputs
/// and two outputs.
pub fn system(n: usize) -> RandomSystem {
    let shape = SystemShape {
        max_state: n,
        ..SystemShape::default()
    };
    let suite = system_suite(n as u64, 64, &[SystemKind::Good], shape).expect("suite draws");
    suite
        .into_iter()
        .find(|s| s.problem.state_dim() == n)
        .expect("a system of the requested size")
}

/// A dense test matrix with moderate norm.
pub fn matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5)
}

/// The scalar problem `A = 0`, `B = C = K = 1` with linear terms.
pub fn scalar() -> (GlqProblem, Vector) {
    let s = |x: f64| Matrix::from_element(1, 1, x);
    let p = GlqProblem::new(s(0.0), s(1.0), s(1.0), s(1.0), Vector::from_element(1, 1.0), Vector::from_element(1, 0.5))
        .expect("valid problem");
    (p, Vector::from_element(1, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_requested_sizes() {
        for n in [2, 4] {
            assert_eq!(system(n).problem.state_dim(), n);
        }
        assert_eq!(matrix(3).nrows(), 3);
        assert_eq!(scalar().0.state_dim(), 1);
    }
}
