//! Compact SVD by one-sided (Hestenes) Jacobi rotations, plus a truncated
//! variant by subspace iteration for large matrices where only the leading
//! triplets are needed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{dot, Matrix};
use crate::error::{Error, Result};
use crate::seeding::{self, Stream};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(σ) Vᵀ` with only the non-zero singular values kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactorization {
    /// m × r, orthonormal columns.
    pub u_factors: Matrix,
    /// σ₁ ≥ … ≥ σ_r > 0.
    pub singular_values: Vec<f64>,
    /// n × r, orthonormal columns.
    pub v_factors: Matrix,
    pub rank: usize,
}

impl SvdFactorization {
    /// Shape (m, n) of the factorized matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.u_factors.rows(), self.v_factors.rows())
    }

    /// Leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdFactorization {
        let k = k.min(self.rank);
        let (m, n) = self.shape();
        SvdFactorization {
            u_factors: Matrix::from_fn(m, k, |i, j| self.u_factors[(i, j)]),
            singular_values: self.singular_values[..k].to_vec(),
            v_factors: Matrix::from_fn(n, k, |i, j| self.v_factors[(i, j)]),
            rank: k,
        }
    }

    /// `Σ_{i ≤ k} σ_i u_i v_iᵀ`, the best rank-k approximation in Frobenius
    /// norm.
    pub fn rank_k_approximation(&self, k: usize) -> Result<Matrix> {
        if k == 0 || k > self.rank {
            return Err(Error::invalid(format!(
                "rank {k} outside 1..={}",
                self.rank
            )));
        }
        let (m, n) = self.shape();
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let row = out.row_mut(i);
            for t in 0..k {
                let coef = self.singular_values[t] * self.u_factors[(i, t)];
                if coef == 0.0 {
                    continue;
                }
                for (j, o) in row.iter_mut().enumerate() {
                    *o += coef * self.v_factors[(j, t)];
                }
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self) -> Matrix {
        if self.rank == 0 {
            let (m, n) = self.shape();
            return Matrix::zeros(m, n);
        }
        self.rank_k_approximation(self.rank)
            .expect("rank is within range")
    }

    /// Moore–Penrose pseudoinverse `V Σ⁻¹ Uᵀ` (n × m).
    pub fn pseudoinverse(&self) -> Matrix {
        let (m, n) = self.shape();
        let mut out = Matrix::zeros(n, m);
        for t in 0..self.rank {
            let inv = 1.0 / self.singular_values[t];
            for i in 0..n {
                let coef = inv * self.v_factors[(i, t)];
                if coef == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, o) in row.iter_mut().enumerate() {
                    *o += coef * self.u_factors[(j, t)];
                }
            }
        }
        out
    }

    /// `sqrt(Σ_{i > k} σ_i²)`, the Frobenius error of the rank-k truncation.
    pub fn tail_energy(&self, k: usize) -> f64 {
        self.singular_values
            .iter()
            .skip(k)
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: SvdFactorization = serde_json::from_str(s)?;
        let (m, n) = f.shape();
        if f.singular_values.len() != f.rank
            || f.u_factors.cols() != f.rank
            || f.v_factors.cols() != f.rank
        {
            return Err(Error::Validation(format!(
                "inconsistent factorization: {m}x{n}, rank {}",
                f.rank
            )));
        }
        Ok(f)
    }
}

/// Compact SVD of any finite matrix.
pub fn compact_svd(a: &Matrix) -> Result<SvdFactorization> {
    if let Some((row, col)) = a.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let (m, n) = a.shape();
    // Rotate the shorter dimension's columns: fewer pairs per sweep.
    let transposed = m < n;
    let (len, count) = if transposed { (n, m) } else { (m, n) };
    let mut work: Vec<Vec<f64>> = (0..count)
        .map(|j| {
            if transposed {
                a.row(j).to_vec()
            } else {
                a.column(j)
            }
        })
        .collect();
    let mut basis: Vec<Vec<f64>> = (0..count)
        .map(|j| {
            let mut e = vec![0.0; count];
            e[j] = 1.0;
            e
        })
        .collect();
    one_sided_jacobi(&mut work, &mut basis, f64::EPSILON * len.max(1) as f64);

    let norms: Vec<f64> = work.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma_max = order.first().map_or(0.0, |&j| norms[j]);
    let threshold = sigma_max * f64::EPSILON * m.max(n) as f64;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&j| norms[j] > threshold && norms[j] > 0.0)
        .collect();
    let r = kept.len();

    // `work` columns are σ·(left vectors of the rotated side); `basis`
    // columns are the right vectors of the rotated side.
    let mut left = Matrix::zeros(len, r);
    let mut right = Matrix::zeros(count, r);
    let mut singular_values = Vec::with_capacity(r);
    for (t, &j) in kept.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        for i in 0..len {
            left[(i, t)] = work[j][i] / s;
        }
        for i in 0..count {
            right[(i, t)] = basis[j][i];
        }
    }
    let (mut u, mut v) = if transposed { (right, left) } else { (left, right) };
    canonicalize_signs(&mut u, &mut v);
    Ok(SvdFactorization {
        u_factors: u,
        singular_values,
        v_factors: v,
        rank: r,
    })
}

/// Orthogonalizes the columns of `work` by plane rotations, applying the same
/// rotations to `basis`.
fn one_sided_jacobi(work: &mut [Vec<f64>], basis: &mut [Vec<f64>], tol: f64) {
    let n = work.len();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&work[p], &work[q]);
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(work, p, q, c, s);
                rotate(basis, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (xp, xq) = (&mut head[p], &mut tail[0]);
    for (x, y) in xp.iter_mut().zip(xq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Flips each (u_t, v_t) pair so the largest-magnitude entry of v_t is
/// positive; the product u_t v_tᵀ is unchanged.
fn canonicalize_signs(u: &mut Matrix, v: &mut Matrix) {
    for t in 0..v.cols() {
        let mut best = 0.0f64;
        for i in 0..v.rows() {
            if v[(i, t)].abs() > best.abs() {
                best = v[(i, t)];
            }
        }
        if best < 0.0 {
            for i in 0..v.rows() {
                v[(i, t)] = -v[(i, t)];
            }
            for i in 0..u.rows() {
                u[(i, t)] = -u[(i, t)];
            }
        }
    }
}

const OVERSAMPLE: usize = 10;
const MAX_ITERATIONS: usize = 2000;
const CHECK_EVERY: usize = 10;

/// Leading `k` singular triplets.
///
/// Small problems go through [`compact_svd`]. Larger ones run block subspace
/// iteration with `k + 10` vectors on the Gram matrix of the shorter side,
/// followed by a Rayleigh–Ritz step against `A` itself; iteration stops once
/// every retained triplet satisfies `‖A v − σ u‖ ≤ tol · σ₁`.
pub fn truncated_svd(a: &Matrix, k: usize, tol: f64) -> Result<SvdFactorization> {
    if let Some((row, col)) = a.find_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    if k == 0 {
        return Err(Error::invalid("rank must be at least 1"));
    }
    let (m, n) = a.shape();
    let p = m.min(n);
    let width = k + OVERSAMPLE;
    if p <= 64 || 2 * width >= p {
        return Ok(compact_svd(a)?.truncate(k));
    }
    // Work with rows as the shorter side: W is p × q with p <= q.
    let transposed = m > n;
    let owned;
    let w = if transposed {
        owned = a.transpose();
        &owned
    } else {
        a
    };
    let (rows, cols) = w.shape();
    // G = W Wᵀ accumulated row by row from the columns of W; zero entries
    // (common after centering) are skipped.
    let wt = w.transpose();
    let mut gram = Matrix::zeros(rows, rows);
    for i in 0..rows {
        let gi = gram.row_mut(i);
        for (j, &x) in w.row(i).iter().enumerate() {
            if x != 0.0 {
                axpy(x, wt.row(j), gi);
            }
        }
    }
    let times_gram = |x: &[f64]| -> Vec<f64> { (0..rows).map(|i| dot(gram.row(i), x)).collect() };

    let mut rng = seeding::rng(0x5eed, Stream::Svd, &[m as u64, n as u64, k as u64]);
    let start: Vec<Vec<f64>> = (0..width)
        .map(|_| (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut q = orthonormalize(start.iter().map(|x| times_gram(x)).collect());

    let mut iteration = 0;
    loop {
        iteration += 1;
        if iteration % CHECK_EVERY == 0 || iteration >= MAX_ITERATIONS {
            // B = Qᵀ W, so Bᵀ = Wᵀ Q, built one row of Wᵀ at a time.
            let qrows = Matrix::from_fn(rows, q.len(), |i, c| q[c][i]);
            let mut bt = Matrix::zeros(cols, q.len());
            for j in 0..cols {
                let out = bt.row_mut(j);
                for (i, &x) in wt.row(j).iter().enumerate() {
                    if x != 0.0 {
                        axpy(x, qrows.row(i), out);
                    }
                }
            }
            let small = compact_svd(&bt)?;
            // Bᵀ = Ṽ Σ Ũᵀ, hence W ≈ (Q Ũ) Σ Ṽᵀ with Ũ = small.v, Ṽ = small.u.
            let r = small.rank.min(k);
            let mut u = Matrix::zeros(rows, r);
            for t in 0..r {
                for (c, qc) in q.iter().enumerate() {
                    let coef = small.v_factors[(c, t)];
                    for i in 0..rows {
                        u[(i, t)] += coef * qc[i];
                    }
                }
            }
            let v = Matrix::from_fn(cols, r, |j, t| small.u_factors[(j, t)]);
            let sigma = small.singular_values[..r].to_vec();
            let sigma_max = sigma.first().copied().unwrap_or(0.0);
            let converged = (0..r).all(|t| {
                let vt = v.column(t);
                let res = (0..rows)
                    .map(|i| (dot(w.row(i), &vt) - sigma[t] * u[(i, t)]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                res <= tol * sigma_max
            });
            if converged || iteration >= MAX_ITERATIONS || sigma_max == 0.0 {
                let (mut u, mut v) = if transposed { (v, u) } else { (u, v) };
                canonicalize_signs(&mut u, &mut v);
                return Ok(SvdFactorization {
                    u_factors: u,
                    singular_values: sigma,
                    v_factors: v,
                    rank: r,
                });
            }
        }
        q = orthonormalize(q.iter().map(|x| times_gram(x)).collect());
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass; numerically
/// dependent columns are dropped.
fn orthonormalize(mut cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut c in cols.drain(..) {
        let original = dot(&c, &c).sqrt();
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &out {
                let proj = dot(b, &c);
                for (x, y) in c.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm <= 1e-12 * original {
            continue;
        }
        for x in &mut c {
            *x /= norm;
        }
        out.push(c);
    }
    out
}
