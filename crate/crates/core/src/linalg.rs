//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // needed without std, where f64 has no inherent math
use num_traits::Float;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Orthonormal basis (as columns) of the orthogonal complement of `span`
/// inside R^n, built by Gram-Schmidt against the standard basis so the
/// result is deterministic.
pub fn orthonormal_complement(span: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let mut fixed: Vec<Vec<f64>> = Vec::new();
    for v in span {
        let mut w = v.clone();
        for u in &fixed {
            let c = dot(&w, u);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= c * ui;
            }
        }
        let nw = norm(&w);
        if nw > 1e-12 {
            fixed.push(scale(&w, 1.0 / nw));
        }
    }
    let target = n - fixed.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(target);
    // Try the standard basis vectors in order of how little they overlap the
    // fixed span; this keeps the basis well conditioned.
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|i| (fixed.iter().map(|u| u[i] * u[i]).sum::<f64>(), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    for &(_, i) in &order {
        if out.len() == target {
            break;
        }
        let mut w = alloc::vec![0.0; n];
        w[i] = 1.0;
        for _ in 0..2 {
            for u in fixed.iter().chain(out.iter()) {
                let c = dot(&w, u);
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let nw = norm(&w);
        if nw > 1e-6 {
            out.push(scale(&w, 1.0 / nw));
        }
    }
    let mut m = DMatrix::zeros(n, out.len());
    for (j, v) in out.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = v[i];
        }
    }
    m
}

/// Minimum-norm least-squares solution through the SVD, treating singular
/// values below `rcond * s_max` as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    match svd.solve(b, eps) {
        Ok(x) => x,
        Err(_) => DVector::zeros(a.ncols()),
    }
}

/// Solves a square system by LU, falling back to the minimum-norm
/// least-squares solution when the matrix is numerically singular. Singular
/// values below 1e-8 of the largest are treated as integration noise.
pub fn solve_robust(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |m, s| m.min(*s));
    if a.is_square() && smin > 1e-8 * smax {
        if let Some(x) = a.clone().lu().solve(b) {
            return x;
        }
    }
    lstsq(a, b, 1e-8)
}

/// Unit vector spanning the (numerical) kernel of a wide `d x (d+1)` matrix.
pub fn kernel_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut sq = DMatrix::zeros(n, n);
    for i in 0..a.nrows().min(n) {
        for j in 0..n {
            sq[(i, j)] = a[(i, j)];
        }
    }
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (mut best, mut idx) = (f64::INFINITY, 0);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < best {
            best = *s;
            idx = i;
        }
    }
    let mut v: DVector<f64> = vt.row(idx).transpose();
    let nv = v.norm();
    if nv > 0.0 {
        v /= nv;
    }
    v
}

/// Radical-inverse Halton coordinate.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

pub fn is_prime(k: u32) -> bool {
    if k < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= k {
        if k % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let span = alloc::vec![alloc::vec![1.0, 2.0, 0.5, -1.0]];
        let b = orthonormal_complement(&span, 4);
        assert_eq!(b.ncols(), 3);
        let g = b.transpose() * &b;
        assert!((g - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        for j in 0..3 {
            assert!(dot(&column(&b, j), &span[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn lstsq_gives_min_norm_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&a, &DVector::from_column_slice(&[2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, -1.0]);
        let v = kernel_vector(&a);
        assert!((&a * &v).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn primes() {
        assert!(is_prime(2) && is_prime(3) && is_prime(13));
        assert!(!is_prime(1) && !is_prime(9) && !is_prime(0));
    }
}
