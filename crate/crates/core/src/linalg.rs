//! Small dense linear-algebra helpers shared by the space constructions.
//!
//! Everything here wraps faer decompositions on modest matrices (a few
//! hundred rows at most). Rank decisions use a relative singular-value
//! cutoff so all constrained spaces are built with one consistent rule.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

/// Relative singular-value cutoff used when splitting range and nullspace.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values of `a`, descending.
pub fn singular_values(a: &Mat<f64>) -> Vec<f64> {
    let svd = a.svd().expect("svd failed to converge");
    (0..a.nrows().min(a.ncols())).map(|i| svd.S()[i]).collect()
}

/// Numerical rank with a relative tolerance.
pub fn rank(a: &Mat<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal basis (columns) of the nullspace of `a`.
///
/// Returns the right singular vectors whose singular values fall below
/// `rel_tol` times the largest one; for a zero matrix the whole domain.
pub fn nullspace(a: &Mat<f64>, rel_tol: f64) -> Mat<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let svd = a.svd().expect("svd failed to converge");
    let k = a.nrows().min(n);
    let max = if k > 0 { svd.S()[0] } else { 0.0 };
    let rank = if max == 0.0 {
        0
    } else {
        (0..k).filter(|&i| svd.S()[i] > rel_tol * max).count()
    };
    let null_dim = n - rank;
    let v = svd.V();
    Mat::from_fn(n, null_dim, |i, j| v[(i, rank + j)])
}

/// Smallest singular value of `a` after scaling rows and columns to unit
/// 2-norm (rows first). A conditioning-free unisolvence measure.
pub fn scaled_min_singular_value(a: &Mat<f64>) -> f64 {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return 0.0;
    }
    let mut b = a.clone();
    for i in 0..m {
        let norm: f64 = (0..n).map(|j| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for j in 0..n {
                b[(i, j)] /= norm;
            }
        }
    }
    for j in 0..n {
        let norm: f64 = (0..m).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..m {
                b[(i, j)] /= norm;
            }
        }
    }
    let sv = singular_values(&b);
    sv.last().copied().unwrap_or(0.0)
}

/// Solve the square system `a x = rhs` for several right-hand sides.
pub fn solve_dense(a: &Mat<f64>, rhs: &Mat<f64>) -> Mat<f64> {
    a.partial_piv_lu().solve(rhs)
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
///
/// Returns the solution and the residual norm `|a x - b|`.
pub fn lstsq(a: &Mat<f64>, b: &[f64]) -> (Vec<f64>, f64) {
    let svd = a.svd().expect("svd failed to converge");
    let k = a.nrows().min(a.ncols());
    let max = if k > 0 { svd.S()[0] } else { 0.0 };
    let u = svd.U();
    let v = svd.V();
    let mut x = vec![0.0; a.ncols()];
    for i in 0..k {
        let s = svd.S()[i];
        if max == 0.0 || s <= RANK_TOL * max {
            continue;
        }
        let mut ub = 0.0;
        for r in 0..a.nrows() {
            ub += u[(r, i)] * b[r];
        }
        let c = ub / s;
        for r in 0..a.ncols() {
            x[r] += c * v[(r, i)];
        }
    }
    let mut res = 0.0f64;
    for r in 0..a.nrows() {
        let mut ax = 0.0;
        for c in 0..a.ncols() {
            ax += a[(r, c)] * x[c];
        }
        res += (ax - b[r]) * (ax - b[r]);
    }
    (x, res.sqrt())
}

/// Dense Cholesky factor L (lower) of a symmetric positive definite matrix.
pub fn cholesky_lower(a: &Mat<f64>) -> Option<Mat<f64>> {
    let n = a.nrows();
    let mut l = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solve L X = B for a lower-triangular L (columns of B independently).
pub fn solve_lower(l: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    x
}

/// Eigenvalues (ascending) of a symmetric matrix.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Vec<f64> {
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition failed");
    let mut vals: Vec<f64> = (0..a.nrows()).map(|i| eig.S()[i]).collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_divergence_like_map() {
        // 1x3 map (1, 1, 1): nullspace is the plane x+y+z=0
        let a = Mat::from_fn(1, 3, |_, _| 1.0);
        let ns = nullspace(&a, RANK_TOL);
        assert_eq!(ns.ncols(), 2);
        for j in 0..2 {
            let s: f64 = (0..3).map(|i| ns[(i, j)]).sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn rank_detects_deficiency() {
        let mut a = Mat::zeros(3, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = 1e-14;
        assert_eq!(rank(&a, RANK_TOL), 2);
    }

    #[test]
    fn lstsq_solves_consistent_system() {
        let a = Mat::from_fn(3, 2, |i, j| (i + j) as f64 + 1.0);
        let b = vec![3.0, 5.0, 7.0]; // x = (1, 1)
        let (x, res) = lstsq(&a, &b);
        assert!(res < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }
}
