//! Small dense linear algebra: Householder orthonormal completion,
//! Cholesky and triangular solves. Matrices are row-major `Vec<f64>`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormal bases for the row space of `rows` (k vectors of length n) and
/// for its orthogonal complement.
///
/// Returns `(row_basis, null_basis)` with `k` and `n - k` orthonormal vectors.
/// Fails if the rows are numerically rank deficient.
pub fn orthonormal_completion(rows: &[Vec<f64>], n: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let k = rows.len();
    if k > n {
        return Err(Error::InvalidArgument("more constraint rows than coordinates"));
    }
    // m holds A^T column by column: m[j] is column j (length n).
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    for r in &m {
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
    }
    let scale = m.iter().map(|r| norm(r)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let x = &m[j][j..];
        let xn = norm(x);
        if xn <= 1e-12 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let alpha = if x[0] >= 0.0 { -xn } else { xn };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vn = norm(&v);
        if vn > 0.0 {
            for vi in v.iter_mut() {
                *vi /= vn;
            }
        }
        for col in m.iter_mut().skip(j) {
            let seg = &mut col[j..];
            let p = 2.0 * dot(&v, seg);
            axpy(-p, &v, seg);
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{k-1}; build its columns by applying reflectors to e_i.
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    for col in q.iter_mut() {
        for (j, v) in reflectors.iter().enumerate().rev() {
            let seg = &mut col[j..];
            let p = 2.0 * dot(v, seg);
            axpy(-p, v, seg);
        }
    }
    // q[i] is currently Q e_i, i.e. column i of Q.
    let null = q.split_off(k);
    Ok((q, null))
}

/// Lower Cholesky factor of a symmetric positive-definite `d x d` matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for p in 0..j {
                s -= l[i * d + p] * l[j * d + p];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Solve `L x = b` in place for lower-triangular `L`.
pub fn solve_lower(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * d + p] * b[p];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solve `L^T x = b` in place.
pub fn solve_lower_transpose(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for p in i + 1..d {
            s -= l[p * d + i] * b[p];
        }
        b[i] = s / l[i * d + i];
    }
}

/// `L x` for lower-triangular `L`.
pub fn lower_mul(l: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    (0..d).map(|i| dot(&l[i * d..i * d + i + 1], &x[..=i])).collect()
}

/// `L^T x` for lower-triangular `L`.
pub fn lower_transpose_mul(l: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for i in 0..d {
        for p in 0..=i {
            out[p] += l[i * d + p] * x[i];
        }
    }
    out
}

/// Solve the SPD system `A x = b`.
pub fn spd_solve(a: &[f64], d: usize, b: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky(a, d)?;
    let mut x = b.to_vec();
    solve_lower(&l, d, &mut x);
    solve_lower_transpose(&l, d, &mut x);
    Ok(x)
}
