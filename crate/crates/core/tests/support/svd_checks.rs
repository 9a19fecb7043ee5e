//! Truncation-error identity and Moore-Penrose conditions on random
//! matrices.

use rand::Rng;
use recinfluence::linalg::{compact_svd, Matrix};
use recinfluence::seeding::{rng, Stream};

/// Random `m × n` matrix with `m ≤ 30`, `n ≤ 20`. Every third draw is a
/// product of thin factors, so rank-deficient inputs are covered.
pub fn random_matrix(draw: u64) -> Matrix {
    let mut r = rng(draw, Stream::Svd, &[0x7465_7374]);
    let m = r.gen_range(1..=30);
    let n = r.gen_range(1..=20);
    if draw % 3 == 2 {
        let k = r.gen_range(1..=m.min(n));
        let left = Matrix::from_fn(m, k, |_, _| r.gen_range(-1.0..1.0));
        let right = Matrix::from_fn(k, n, |_, _| r.gen_range(-1.0..1.0));
        left.matmul(&right).unwrap()
    } else {
        Matrix::from_fn(m, n, |_, _| r.gen_range(-2.0..2.0))
    }
}

/// Worst `| ‖A − A_k‖_F − sqrt(Σ_{i>k} σ_i²) |` over every valid `k`.
pub fn truncation_identity_error(a: &Matrix) -> f64 {
    let f = compact_svd(a).unwrap();
    let mut worst = 0.0f64;
    for k in 1..=f.rank {
        let ak = f.rank_k_approximation(k).unwrap();
        let lhs = a.sub(&ak).unwrap().frobenius_norm();
        let rhs = f.singular_values[k..].iter().map(|s| s * s).sum::<f64>().sqrt();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Worst entry of the four Penrose residuals
/// `AA⁺A − A`, `A⁺AA⁺ − A⁺`, `(AA⁺)ᵀ − AA⁺`, `(A⁺A)ᵀ − A⁺A`.
pub fn penrose_error(a: &Matrix) -> f64 {
    let p = compact_svd(a).unwrap().pseudoinverse();
    let ap = a.matmul(&p).unwrap();
    let pa = p.matmul(a).unwrap();
    [
        ap.matmul(a).unwrap().sub(a).unwrap().max_abs(),
        pa.matmul(&p).unwrap().sub(&p).unwrap().max_abs(),
        ap.transpose().sub(&ap).unwrap().max_abs(),
        pa.transpose().sub(&pa).unwrap().max_abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `(identity error, Penrose error)` maxima over `draws` random matrices.
pub fn run(draws: u64) -> (f64, f64) {
    (0..draws).fold((0.0f64, 0.0f64), |(e, p), d| {
        let a = random_matrix(d);
        (e.max(truncation_identity_error(&a)), p.max(penrose_error(&a)))
    })
}
