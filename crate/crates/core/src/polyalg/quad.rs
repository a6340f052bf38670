//! Exact quadrature on simplices.
//!
//! Symmetric Grundmann-Moller rules carry the low and medium degrees used in
//! assembly; fully positive collapsed Gauss-Jacobi rules take over at high
//! degree where the alternating GM weights start to lose digits. Every rule
//! is checkable against the closed-form barycentric monomial integral.

use crate::error::{Error, Result};
use crate::mesh::CellGeom;

/// Highest exactness degree served before erroring out.
pub const MAX_DEGREE: usize = 60;

/// Degree above which collapsed Gauss rules replace Grundmann-Moller.
const GM_DEGREE_LIMIT: usize = 20;

/// A quadrature rule on one simplex: barycentric points with weights that
/// sum to the measure of the cell the rule was built for.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub degree: usize,
    /// Barycentric coordinates, n+1 entries per point.
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Map the barycentric points onto a cell.
    pub fn physical_points(&self, geom: &CellGeom) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|l| geom.point_from_barycentric(l))
            .collect()
    }

    /// Integrate a function given in physical coordinates.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, geom: &CellGeom, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * f(&geom.point_from_barycentric(l)))
            .sum()
    }
}

/// Quadrature rule exact for polynomials of total degree <= `degree` on the
/// given cell. Weights sum to the cell measure.
pub fn simplex_quadrature(degree: usize, geom: &CellGeom) -> Result<QuadRule> {
    let n = geom.dim();
    let measure = geom.measure();
    if measure == 0.0 || !measure.is_finite() {
        return Err(Error::Geometry("degenerate cell in quadrature".into()));
    }
    let mut rule = reference_rule(n, degree)?;
    let ref_measure = 1.0 / factorial(n);
    let scale = measure / ref_measure;
    rule.weights.iter_mut().for_each(|w| *w *= scale);
    Ok(rule)
}

/// Cached reference rules; DOF evaluation requests the same small rules
/// thousands of times per element.
pub fn cached_reference_rule(n: usize, degree: usize) -> Result<std::sync::Arc<QuadRule>> {
    use std::cell::RefCell;
    use std::collections::HashMap;
    use std::sync::Arc;
    thread_local! {
        static CACHE: RefCell<HashMap<(usize, usize), Arc<QuadRule>>> = RefCell::new(HashMap::new());
    }
    CACHE.with(|cache| {
        if let Some(rule) = cache.borrow().get(&(n, degree)) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(reference_rule(n, degree)?);
        cache.borrow_mut().insert((n, degree), Arc::clone(&rule));
        Ok(rule)
    })
}

/// Rule on the standard reference simplex; weights sum to 1/n!.
pub fn reference_rule(n: usize, degree: usize) -> Result<QuadRule> {
    if degree > MAX_DEGREE {
        return Err(Error::Quadrature(format!(
            "degree {degree} unsupported, max supported is {MAX_DEGREE}"
        )));
    }
    if n == 1 {
        let m = degree / 2 + 1;
        let (nodes, weights) = gauss_legendre_01(m);
        return Ok(QuadRule {
            degree,
            points: nodes.iter().map(|&s| vec![1.0 - s, s]).collect(),
            weights,
        });
    }
    if degree <= GM_DEGREE_LIMIT {
        Ok(grundmann_moller(n, degree))
    } else {
        collapsed_gauss(n, degree)
    }
}

/// Closed-form integral of a barycentric monomial over a cell:
/// int_K lambda^alpha dx = |K| n! prod(alpha_i!) / (|alpha| + n)!.
pub fn barycentric_monomial_integral(geom: &CellGeom, alpha: &[usize]) -> f64 {
    let n = geom.dim();
    let total: usize = alpha.iter().sum();
    let mut v = geom.measure() * factorial(n);
    for &a in alpha {
        v *= factorial(a);
    }
    v / factorial(total + n)
}

/// Symmetric Grundmann-Moller rule of the smallest index with exactness at
/// least `degree` (rules have odd degree 2s+1).
fn grundmann_moller(n: usize, degree: usize) -> QuadRule {
    let s = degree.saturating_sub(1).div_ceil(2);
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 0.25f64.powi(s as i32) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + n - i));
        let mut beta = vec![0usize; n + 1];
        compositions(s - i, 0, &mut beta, &mut |b| {
            points.push(b.iter().map(|&bj| (2 * bj + 1) as f64 / denom).collect());
            weights.push(w);
        });
    }
    QuadRule {
        degree: d,
        points,
        weights,
    }
}

fn compositions(total: usize, pos: usize, beta: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pos + 1 == beta.len() {
        beta[pos] = total;
        f(beta);
        return;
    }
    for v in 0..=total {
        beta[pos] = v;
        compositions(total - v, pos + 1, beta, f);
    }
}

/// Collapsed (Duffy) tensor-product Gauss rule with positive weights.
fn collapsed_gauss(n: usize, degree: usize) -> Result<QuadRule> {
    let m = degree / 2 + 1;
    match n {
        2 => {
            let (xi, wxi) = gauss_jacobi_01(m, 1);
            let (eta, weta) = gauss_legendre_01(m);
            let mut points = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            for (x, wx) in xi.iter().zip(&wxi) {
                for (e, we) in eta.iter().zip(&weta) {
                    let p1 = *x;
                    let p2 = e * (1.0 - x);
                    points.push(vec![1.0 - p1 - p2, p1, p2]);
                    weights.push(wx * we);
                }
            }
            Ok(QuadRule {
                degree,
                points,
                weights,
            })
        }
        3 => {
            let (xi, wxi) = gauss_jacobi_01(m, 2);
            let (eta, weta) = gauss_jacobi_01(m, 1);
            let (zeta, wzeta) = gauss_legendre_01(m);
            let mut points = Vec::with_capacity(m * m * m);
            let mut weights = Vec::with_capacity(m * m * m);
            for (x, wx) in xi.iter().zip(&wxi) {
                for (e, we) in eta.iter().zip(&weta) {
                    for (z, wz) in zeta.iter().zip(&wzeta) {
                        let p1 = *x;
                        let p2 = e * (1.0 - x);
                        let p3 = z * (1.0 - x) * (1.0 - e);
                        points.push(vec![1.0 - p1 - p2 - p3, p1, p2, p3]);
                        weights.push(wx * we * wz);
                    }
                }
            }
            Ok(QuadRule {
                degree,
                points,
                weights,
            })
        }
        _ => Err(Error::Quadrature(format!(
            "degree {degree} exceeds the symmetric-rule range {GM_DEGREE_LIMIT} in dimension {n}"
        ))),
    }
}

/// Gauss-Legendre nodes and weights on [0, 1]; exact to degree 2m-1.
pub fn gauss_legendre_01(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Newton from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    // ascending on [0, 1]
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    (
        idx.iter().map(|&i| nodes[i]).collect(),
        idx.iter().map(|&i| weights[i]).collect(),
    )
}

fn legendre_and_deriv(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Jacobi nodes and weights on [0, 1] for the weight (1-x)^alpha,
/// via the Golub-Welsch eigenvalue method; exact to degree 2m-1.
pub fn gauss_jacobi_01(m: usize, alpha: usize) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    // monic Jacobi (alpha, beta = 0) recurrence on [-1, 1]
    let diag: Vec<f64> = (0..m)
        .map(|k| {
            let kf = k as f64;
            -a * a / ((2.0 * kf + a) * (2.0 * kf + a + 2.0))
        })
        .collect();
    let offdiag: Vec<f64> = (1..m)
        .map(|k| {
            let kf = k as f64;
            let num = 2.0 * kf * (kf + a);
            (num * num / ((2.0 * kf + a).powi(2) * (2.0 * kf + a + 1.0) * (2.0 * kf + a - 1.0)))
                .sqrt()
        })
        .collect();
    let mu0 = 2.0f64.powi(alpha as i32 + 1) / (a + 1.0);

    let j = faer::Mat::from_fn(m, m, |r, c| {
        if r == c {
            diag[r]
        } else if r + 1 == c || c + 1 == r {
            offdiag[r.min(c)]
        } else {
            0.0
        }
    });
    let eig = j
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("Jacobi matrix eigendecomposition failed");
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&p, &q| eig.S()[p].partial_cmp(&eig.S()[q]).unwrap());
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for &i in &idx {
        let x = eig.S()[i];
        let v0 = eig.U()[(0, i)];
        let w = mu0 * v0 * v0;
        nodes.push(0.5 * (x + 1.0));
        weights.push(w * 0.5f64.powi(alpha as i32 + 1));
    }
    (nodes, weights)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::homogeneous_exponents;

    fn unit_triangle() -> CellGeom {
        CellGeom::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]])
    }

    fn unit_tet() -> CellGeom {
        CellGeom::new(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
    }

    fn check_rule_against_monomial_oracle(geom: &CellGeom, degree: usize) {
        let n = geom.dim();
        let rule = simplex_quadrature(degree, geom).unwrap();
        for d in 0..=degree {
            for alpha in homogeneous_exponents(n + 1, d) {
                let alpha: Vec<usize> = alpha.iter().map(|&a| a as usize).collect();
                let exact = barycentric_monomial_integral(geom, &alpha);
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(l, w)| {
                        let mut t = *w;
                        for (li, &ai) in l.iter().zip(&alpha) {
                            t *= li.powi(ai as i32);
                        }
                        t
                    })
                    .sum();
                assert!(
                    (approx - exact).abs() <= 1e-12 * exact.abs().max(geom.measure()),
                    "degree {degree} rule missed lambda^{alpha:?}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn measure_is_reproduced() {
        let tri = unit_triangle();
        for deg in [0, 1, 2, 8, 12, 25] {
            let rule = simplex_quadrature(deg, &tri).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-13, "degree {deg}");
        }
    }

    #[test]
    fn lambda_product_example() {
        // int lambda_1 lambda_2 over the unit triangle = 1/24
        let tri = unit_triangle();
        let rule = simplex_quadrature(2, &tri).unwrap();
        let v: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| w * l[1] * l[2])
            .sum();
        assert!((v - 1.0 / 24.0).abs() < 1e-15);
        assert!((barycentric_monomial_integral(&tri, &[0, 1, 1]) - 1.0 / 24.0).abs() < 1e-18);
    }

    #[test]
    fn triangle_rules_exact_low_and_high_degree() {
        let tri = unit_triangle();
        for deg in [1, 2, 4, 8, 12, 16] {
            check_rule_against_monomial_oracle(&tri, deg);
        }
        // collapsed Gauss branch
        for deg in [24, 32] {
            check_rule_against_monomial_oracle(&tri, deg);
        }
    }

    #[test]
    fn skewed_cell_rule_exact() {
        let geom = CellGeom::new(vec![vec![0.2, -0.1], vec![1.3, 0.4], vec![0.5, 1.9]]);
        check_rule_against_monomial_oracle(&geom, 9);
    }

    #[test]
    fn tet_rules_exact() {
        let tet = unit_tet();
        for deg in [2, 5, 8, 12] {
            check_rule_against_monomial_oracle(&tet, deg);
        }
        check_rule_against_monomial_oracle(&tet, 22);
    }

    #[test]
    fn unsupported_degree_lists_max() {
        let tri = unit_triangle();
        let err = simplex_quadrature(MAX_DEGREE + 1, &tri).unwrap_err();
        assert!(err.to_string().contains(&MAX_DEGREE.to_string()));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_01(6);
        for d in 0..=11usize {
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
            let exact = 1.0 / (d as f64 + 1.0);
            assert!((approx - exact).abs() < 1e-14, "degree {d}");
        }
    }

    #[test]
    fn gauss_jacobi_integrates_weighted_polynomials() {
        for alpha in [1usize, 2] {
            let (x, w) = gauss_jacobi_01(5, alpha);
            for d in 0..=9usize {
                let approx: f64 =
                    x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
                // int_0^1 (1-x)^alpha x^d dx = B(d+1, alpha+1)
                let exact = beta_int(d, alpha);
                assert!((approx - exact).abs() < 1e-14, "alpha {alpha} degree {d}");
            }
        }
    }

    fn beta_int(d: usize, alpha: usize) -> f64 {
        factorial(d) * factorial(alpha) / factorial(d + alpha + 1)
    }
}
