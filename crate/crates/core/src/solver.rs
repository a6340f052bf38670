//! Direct sparse solution of the symmetric indefinite saddle-point system,
//! with a preconditioned MINRES fallback.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat, Side};

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::linalg;

/// Solution coefficients and the achieved relative residual.
#[derive(Debug, Clone)]
pub struct Solution {
    pub stress: Vec<f64>,
    pub displacement: Vec<f64>,
    pub residual: f64,
}

/// Size limit under which a failed factorization is diagnosed with a dense
/// rank estimate.
const DENSE_RANK_LIMIT: usize = 3000;

/// Solve [[M, B^T], [B, 0]] z = [rhs_sigma; load] to the requested relative
/// residual. Direct sparse LU first; preconditioned MINRES as fallback.
pub fn solve_saddle(sys: &SaddleSystem, tol: f64) -> Result<Solution> {
    assert!(tol >= 1e-12, "solver tolerance below floating-point floor");
    let n = sys.total_dim();
    let k = full_matrix(sys)?;
    let rhs: Vec<f64> = sys
        .rhs_sigma
        .iter()
        .chain(sys.load.iter())
        .copied()
        .collect();
    let rhs_norm = norm(&rhs);
    if rhs_norm == 0.0 {
        // the homogeneous well-posed system has the zero solution
        return Ok(split_solution(sys, vec![0.0; n], 0.0));
    }

    let direct = k.sp_lu();
    let mut z: Option<Vec<f64>> = None;
    if let Ok(lu) = &direct {
        let b = Col::<f64>::from_fn(n, |i| rhs[i]);
        let x = lu.solve(&b);
        let xv: Vec<f64> = (0..n).map(|i| x[i]).collect();
        if xv.iter().all(|v| v.is_finite()) {
            z = Some(xv);
        }
    }

    if let Some(zv) = z {
        let res = residual(&k, &zv, &rhs) / rhs_norm;
        if res <= tol {
            return Ok(split_solution(sys, zv, res));
        }
        // direct factorization lost too much accuracy; refine iteratively
        let (zi, res_i, history) = minres(sys, &k, &rhs, tol, 40 * n)?;
        if res_i <= tol {
            return Ok(split_solution(sys, zi, res_i));
        }
        return Err(Error::NoConvergence {
            residual: res_i,
            iterations: history.len(),
            history,
        });
    }

    // factorization failed outright: diagnose singularity
    let rank_estimate = if n <= DENSE_RANK_LIMIT {
        let dense = Mat::from_fn(n, n, |i, j| sparse_get(&k, i, j));
        Some(linalg::rank(&dense, 1e-12))
    } else {
        None
    };
    Err(Error::SingularSystem {
        size: n,
        rank_estimate,
    })
}

/// The full sparse block matrix [[M, B^T], [B, 0]].
pub fn full_matrix(sys: &SaddleSystem) -> Result<SparseColMat<usize, f64>> {
    let n_sigma = sys.n_sigma;
    let n = sys.total_dim();
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    push_block(&mut trips, &sys.m, 0, 0, false);
    push_block(&mut trips, &sys.b, n_sigma, 0, false);
    push_block(&mut trips, &sys.b, 0, n_sigma, true);
    SparseColMat::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::Assembly(format!("building the block matrix failed: {e:?}")))
}

fn push_block(
    trips: &mut Vec<Triplet<usize, usize, f64>>,
    m: &SparseColMat<usize, f64>,
    row_off: usize,
    col_off: usize,
    transpose: bool,
) {
    let rows = m.row_idx();
    let vals = m.val();
    for col in 0..m.ncols() {
        for k in m.col_range(col) {
            let (r, c) = if transpose {
                (col, rows[k])
            } else {
                (rows[k], col)
            };
            trips.push(Triplet::new(r + row_off, c + col_off, vals[k]));
        }
    }
}

fn sparse_get(m: &SparseColMat<usize, f64>, i: usize, j: usize) -> f64 {
    let rows = m.row_idx();
    let vals = m.val();
    m.col_range(j)
        .find(|&k| rows[k] == i)
        .map(|k| vals[k])
        .unwrap_or(0.0)
}

fn split_solution(sys: &SaddleSystem, z: Vec<f64>, residual: f64) -> Solution {
    Solution {
        stress: z[..sys.n_sigma].to_vec(),
        displacement: z[sys.n_sigma..].to_vec(),
        residual,
    }
}

fn residual(k: &SparseColMat<usize, f64>, z: &[f64], rhs: &[f64]) -> f64 {
    let mut r = rhs.to_vec();
    spmv(k, z, &mut r, -1.0);
    norm(&r)
}

/// r += s * K z
fn spmv(k: &SparseColMat<usize, f64>, z: &[f64], r: &mut [f64], s: f64) {
    let rows = k.row_idx();
    let vals = k.val();
    for col in 0..k.ncols() {
        let zc = z[col];
        if zc == 0.0 {
            continue;
        }
        for idx in k.col_range(col) {
            r[rows[idx]] += s * vals[idx] * zc;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Preconditioned MINRES with the block-diagonal preconditioner
/// diag(M, I): the stress block is solved with a sparse Cholesky of M.
fn minres(
    sys: &SaddleSystem,
    k: &SparseColMat<usize, f64>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let n = sys.total_dim();
    let n_sigma = sys.n_sigma;
    let chol = sys
        .m
        .sp_cholesky(Side::Lower)
        .map_err(|_| Error::Assembly("stress mass block not positive definite".into()))?;
    let apply_p_inv = |v: &[f64]| -> Vec<f64> {
        let b = Col::<f64>::from_fn(n_sigma, |i| v[i]);
        let x = chol.solve(&b);
        let mut out = Vec::with_capacity(n);
        out.extend((0..n_sigma).map(|i| x[i]));
        out.extend_from_slice(&v[n_sigma..]);
        out
    };

    let rhs_norm = norm(rhs);
    let mut x = vec![0.0; n];
    let mut v = rhs.to_vec();
    let mut v_old = vec![0.0; n];
    let mut z = apply_p_inv(&v);
    let mut gamma: f64 = dot(&v, &z).sqrt();
    if !(gamma > 0.0) {
        return Err(Error::NoConvergence {
            residual: f64::NAN,
            iterations: 0,
            history: vec![],
        });
    }
    let mut gamma_old = 1.0f64;
    let mut eta = gamma;
    let (mut s_old, mut s, mut c_old, mut c) = (0.0f64, 0.0f64, 1.0f64, 1.0f64);
    let mut w = vec![0.0; n];
    let mut w_old = vec![0.0; n];
    let mut history = Vec::new();
    let mut best = (x.clone(), f64::INFINITY);

    for it in 0..max_iter {
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        let mut az = vec![0.0; n];
        spmv(k, &z, &mut az, 1.0);
        let delta = dot(&z, &az);
        let mut v_new = az;
        for i in 0..n {
            v_new[i] -= (delta / gamma) * v[i] + (gamma / gamma_old) * v_old[i];
        }
        let z_new = apply_p_inv(&v_new);
        let gamma_next = dot(&v_new, &z_new).max(0.0).sqrt();

        let alpha0 = c * delta - c_old * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_next * gamma_next).sqrt();
        let alpha2 = s * delta + c_old * c * gamma;
        let alpha3 = s_old * gamma;
        c_old = c;
        s_old = s;
        c = alpha0 / alpha1;
        s = gamma_next / alpha1;
        let mut w_new = z.clone();
        for i in 0..n {
            w_new[i] = (w_new[i] - alpha3 * w_old[i] - alpha2 * w[i]) / alpha1;
            x[i] += c * eta * w_new[i];
        }
        eta *= -s;

        v_old = std::mem::replace(&mut v, v_new);
        w_old = std::mem::replace(&mut w, w_new);
        gamma_old = gamma;
        gamma = gamma_next;
        z = z_new;

        // check the true residual on the estimated one
        if eta.abs() <= 0.1 * tol * rhs_norm || it % 50 == 49 || it + 1 == max_iter {
            let res = residual(k, &x, rhs) / rhs_norm;
            history.push(res);
            if res < best.1 {
                best = (x.clone(), res);
            }
            if res <= tol {
                return Ok((x, res, history));
            }
        }
        if gamma <= f64::EPSILON * rhs_norm {
            break;
        }
    }
    let res = residual(k, &best.0, rhs) / rhs_norm;
    history.push(res);
    Ok((best.0, res, history))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
