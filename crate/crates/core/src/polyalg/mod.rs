//! Polynomial algebra on simplices: multivariate polynomials in physical
//! Cartesian coordinates, symmetric-matrix-valued fields, rank-one edge
//! tensors, rigid motions and their L2-orthogonal complements.
//!
//! Polynomials are stored as coefficient tables over Cartesian multi-indices.
//! Basis generation is centered and scaled per cell to keep conditioning
//! uniform, but the stored variables are always the physical coordinates.

pub mod quad;

use std::collections::BTreeMap;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh::CellGeom;

/// A polynomial over Cartesian multi-indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0u8; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, 1.0);
        p
    }

    /// c0 + sum_i lin[i] x_i
    pub fn affine(nvars: usize, c0: f64, lin: &[f64]) -> Self {
        let mut p = Poly::constant(nvars, c0);
        for (i, &l) in lin.iter().enumerate() {
            if l != 0.0 {
                let mut e = vec![0u8; nvars];
                e[i] = 1;
                *p.terms.entry(e).or_insert(0.0) += l;
            }
        }
        p.prune();
        p
    }

    /// The scaled centered monomial prod_i ((x_i - c_i)/h)^alpha_i.
    pub fn scaled_monomial(center: &[f64], h: f64, alpha: &[u8]) -> Self {
        let nvars = center.len();
        let mut p = Poly::constant(nvars, 1.0);
        for (i, &a) in alpha.iter().enumerate() {
            let lin = Poly::affine(
                nvars,
                -center[i] / h,
                &(0..nvars)
                    .map(|j| if j == i { 1.0 / h } else { 0.0 })
                    .collect::<Vec<_>>(),
            );
            for _ in 0..a {
                p = p.mul(&lin);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&v| v as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_scaled_in_place(other, 1.0);
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        out.add_scaled_in_place(other, -1.0);
        out
    }

    pub fn add_scaled_in_place(&mut self, other: &Poly, s: f64) {
        for (e, c) in &other.terms {
            *self.terms.entry(e.clone()).or_insert(0.0) += s * c;
        }
        self.prune();
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= s);
        out.prune();
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        out.prune();
        out
    }

    pub fn deriv(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut de = e.clone();
            de[i] -= 1;
            *out.terms.entry(de).or_insert(0.0) += c * e[i] as f64;
        }
        out.prune();
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for (xi, &exp) in x.iter().zip(e) {
                if exp > 0 {
                    t *= xi.powi(exp as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Replace each variable by the given polynomial (over a new variable
    /// set). Used to restrict fields to facet parametrizations.
    pub fn substitute(&self, subs: &[Poly]) -> Poly {
        assert_eq!(subs.len(), self.nvars);
        let new_nvars = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut out = Poly::zero(new_nvars);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(new_nvars, *c);
            for (i, &exp) in e.iter().enumerate() {
                for _ in 0..exp {
                    term = term.mul(&subs[i]);
                }
            }
            out.add_scaled_in_place(&term, 1.0);
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }
}

/// All exponent tuples with |alpha| <= degree, in graded lexicographic order.
pub fn monomial_exponents(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for d in 0..=degree {
        out.extend(homogeneous_exponents(nvars, d));
    }
    out
}

/// All exponent tuples with |alpha| = degree exactly, lexicographic.
pub fn homogeneous_exponents(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; nvars];
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos == cur.len() - 1 {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v as u8;
            rec(pos + 1, left - v, cur, out);
        }
    }
    if nvars == 0 {
        if degree == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(0, degree, &mut cur, &mut out);
    out
}

/// A symmetric n x n matrix packed as the row-major upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    i * (2 * n - i + 1) / 2 + (j - i)
}

pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![0.0; sym_len(n)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Rank-one tensor t t^T.
    pub fn outer(t: &[f64]) -> Self {
        let n = t.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, t[i] * t[j]);
            }
        }
        m
    }

    /// Symmetrized outer product a b^T + b a^T.
    pub fn sym_outer(a: &[f64], b: &[f64]) -> Self {
        let n = a.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, a[i] * b[j] + b[i] * a[j]);
            }
        }
        m
    }

    pub fn from_packed(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), sym_len(n));
        SymMat { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[sym_index(self.n, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[sym_index(self.n, i, j)] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product A : B (off-diagonal entries count twice).
    pub fn frob(&self, other: &SymMat) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let m = if i == j { 1.0 } else { 2.0 };
                acc += m * self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn add_scaled(&mut self, other: &SymMat, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// A vector-valued polynomial field.
#[derive(Debug, Clone)]
pub struct VecPoly {
    pub comps: Vec<Poly>,
}

impl VecPoly {
    pub fn zero(n: usize) -> Self {
        VecPoly {
            comps: (0..n).map(|_| Poly::zero(n)).collect(),
        }
    }

    /// Zero field with `ncomps` components over `nvars` variables (used for
    /// fields living on facet parametrizations).
    pub fn zero_in_vars(ncomps: usize, nvars: usize) -> Self {
        VecPoly {
            comps: (0..ncomps).map(|_| Poly::zero(nvars)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    pub fn degree(&self) -> usize {
        self.comps.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn dot_poly(&self, other: &VecPoly) -> Poly {
        let mut out = Poly::zero(self.comps[0].nvars());
        for (a, b) in self.comps.iter().zip(&other.comps) {
            out.add_scaled_in_place(&a.mul(b), 1.0);
        }
        out
    }

    /// (grad v + grad v^T) / 2
    pub fn sym_grad(&self) -> SymMatPoly {
        let n = self.n();
        let mut comps = Vec::with_capacity(sym_len(n));
        for i in 0..n {
            for j in i..n {
                let mut p = self.comps[j].deriv(i);
                p.add_scaled_in_place(&self.comps[i].deriv(j), 1.0);
                comps.push(p.scale(0.5));
            }
        }
        SymMatPoly { n, comps }
    }

    pub fn add_scaled_in_place(&mut self, other: &VecPoly, s: f64) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.add_scaled_in_place(b, s);
        }
    }

    pub fn scale(&self, s: f64) -> VecPoly {
        VecPoly {
            comps: self.comps.iter().map(|p| p.scale(s)).collect(),
        }
    }
}

/// A symmetric-matrix-valued polynomial field, packed like [`SymMat`].
#[derive(Debug, Clone)]
pub struct SymMatPoly {
    n: usize,
    comps: Vec<Poly>,
}

impl SymMatPoly {
    pub fn zero(n: usize) -> Self {
        SymMatPoly {
            n,
            comps: (0..sym_len(n)).map(|_| Poly::zero(n)).collect(),
        }
    }

    /// The constant field equal to `m`, or a scalar polynomial times `m`.
    pub fn from_scalar_times_mat(p: &Poly, m: &SymMat) -> Self {
        let n = m.n();
        SymMatPoly {
            n,
            comps: m.packed().iter().map(|&c| p.scale(c)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn comp(&self, i: usize, j: usize) -> &Poly {
        &self.comps[sym_index(self.n, i, j)]
    }

    pub fn comp_mut(&mut self, i: usize, j: usize) -> &mut Poly {
        &mut self.comps[sym_index(self.n, i, j)]
    }

    pub fn packed_comps(&self) -> &[Poly] {
        &self.comps
    }

    pub fn degree(&self) -> usize {
        self.comps.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> SymMat {
        SymMat {
            n: self.n,
            data: self.comps.iter().map(|p| p.eval(x)).collect(),
        }
    }

    /// Row-wise divergence: (div tau)_i = sum_j d tau_ij / d x_j.
    pub fn div(&self) -> VecPoly {
        let n = self.n;
        let comps = (0..n)
            .map(|i| {
                let mut p = Poly::zero(n);
                for j in 0..n {
                    p.add_scaled_in_place(&self.comp(i, j).deriv(j), 1.0);
                }
                p
            })
            .collect();
        VecPoly { comps }
    }

    /// The vector polynomial tau(x) nu for a constant direction nu.
    pub fn normal_trace(&self, nu: &[f64]) -> VecPoly {
        let n = self.n;
        let comps = (0..n)
            .map(|i| {
                let mut p = Poly::zero(n);
                for j in 0..n {
                    p.add_scaled_in_place(self.comp(i, j), nu[j]);
                }
                p
            })
            .collect();
        VecPoly { comps }
    }

    /// Pointwise Frobenius product with a constant tensor, as a polynomial.
    pub fn frob_const(&self, s: &SymMat) -> Poly {
        let mut out = Poly::zero(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let m = if i == j { 1.0 } else { 2.0 };
                out.add_scaled_in_place(self.comp(i, j), m * s.get(i, j));
            }
        }
        out
    }

    /// Pointwise Frobenius product with another field.
    pub fn frob_poly(&self, other: &SymMatPoly) -> Poly {
        let mut out = Poly::zero(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let m = if i == j { 1.0 } else { 2.0 };
                out.add_scaled_in_place(&self.comp(i, j).mul(other.comp(i, j)), m);
            }
        }
        out
    }

    pub fn add_scaled_in_place(&mut self, other: &SymMatPoly, s: f64) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.add_scaled_in_place(b, s);
        }
    }

    pub fn scale(&self, s: f64) -> SymMatPoly {
        SymMatPoly {
            n: self.n,
            comps: self.comps.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |m, p| m.max(p.max_coeff()))
    }

    pub fn linear_combination(fields: &[SymMatPoly], coeffs: &[f64]) -> SymMatPoly {
        let n = fields[0].n;
        let mut out = SymMatPoly::zero(n);
        for (f, &c) in fields.iter().zip(coeffs) {
            if c != 0.0 {
                out.add_scaled_in_place(f, c);
            }
        }
        out
    }
}

/// Row-wise divergence of a symmetric matrix field.
pub fn sym_div(field: &SymMatPoly) -> VecPoly {
    field.div()
}

/// The rank-one tensors T_ij = t_ij t_ij^T built from unit tangents of all
/// edges x_i x_j (0 <= i < j <= n) of a simplex. They span the symmetric
/// matrices.
pub fn edge_rank_one_tensors(geom: &CellGeom) -> Result<Vec<SymMat>> {
    let n = geom.dim();
    let det = geom.det_jacobian();
    if det.abs() < 1e-14 * geom.diameter().powi(n as i32).max(1e-300) {
        return Err(Error::Geometry(
            "degenerate cell: edge tensors are rank deficient".into(),
        ));
    }
    let mut out = Vec::with_capacity(sym_len(n));
    for i in 0..=n {
        for j in (i + 1)..=n {
            let t = crate::mesh::sub(&geom.vertices[j], &geom.vertices[i]);
            let len = crate::mesh::norm(&t);
            if len == 0.0 {
                return Err(Error::Geometry("repeated vertices in cell".into()));
            }
            out.push(SymMat::outer(&crate::mesh::scale(&t, 1.0 / len)));
        }
    }
    // sanity: the Frobenius Gram matrix of the T_ij must be
    // nonsingular for a nondegenerate simplex.
    let k = out.len();
    let gram = Mat::from_fn(k, k, |a, b| out[a].frob(&out[b]));
    if linalg::rank(&gram, 1e-12) < k {
        return Err(Error::Geometry(
            "degenerate cell: edge tensors are rank deficient".into(),
        ));
    }
    Ok(out)
}

/// Basis of the rigid motion space R(K) in dimension n: translations plus
/// the infinitesimal rotations, n(n+1)/2 fields in total.
pub fn rigid_motion_basis(n: usize) -> Vec<VecPoly> {
    let mut out = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        let mut v = VecPoly::zero(n);
        v.comps[i] = Poly::constant(n, 1.0);
        out.push(v);
    }
    match n {
        1 => {}
        2 => {
            // (-x2, x1)
            let mut v = VecPoly::zero(2);
            v.comps[0] = Poly::var(2, 1).scale(-1.0);
            v.comps[1] = Poly::var(2, 0);
            out.push(v);
        }
        3 => {
            // (-x2, x1, 0), (-x3, 0, x1), (0, -x3, x2)
            for (neg, negvar, pos, posvar) in
                [(0usize, 1usize, 1usize, 0usize), (0, 2, 2, 0), (1, 2, 2, 1)]
            {
                let mut v = VecPoly::zero(3);
                v.comps[neg] = Poly::var(3, negvar).scale(-1.0);
                v.comps[pos] = Poly::var(3, posvar);
                out.push(v);
            }
        }
        _ => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut v = VecPoly::zero(n);
                    v.comps[i] = Poly::var(n, j).scale(-1.0);
                    v.comps[j] = Poly::var(n, i);
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Basis of R(K)^perp, the L2(K)-orthogonal complement of the rigid motions
/// inside P_{k-1}(K; R^n).
pub fn rperp_basis(geom: &CellGeom, k: usize) -> Result<Vec<VecPoly>> {
    assert!(k >= 1);
    let n = geom.dim();
    let candidates = vector_monomials(geom, k - 1);
    let rigid = rigid_motion_basis(n);
    let rule = quad::simplex_quadrature(2 * k, geom)?;
    let pts = rule.physical_points(geom);

    // constraint rows: (candidate, rigid)_K = 0
    let c = Mat::from_fn(rigid.len(), candidates.len(), |m, i| {
        pts.iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * crate::mesh::dot(&rigid[m].eval(x), &candidates[i].eval(x)))
            .sum()
    });
    let ns = linalg::nullspace(&c, linalg::RANK_TOL);
    let mut out = Vec::with_capacity(ns.ncols());
    for j in 0..ns.ncols() {
        let mut v = VecPoly::zero(n);
        for (i, cand) in candidates.iter().enumerate() {
            v.add_scaled_in_place(cand, ns[(i, j)]);
        }
        out.push(v);
    }
    Ok(out)
}

/// Centered, diameter-scaled monomial basis of P_degree(K; R^n).
pub fn vector_monomials(geom: &CellGeom, degree: usize) -> Vec<VecPoly> {
    let n = geom.dim();
    let center = geom.centroid();
    let h = geom.diameter();
    let mut out = Vec::new();
    for alpha in monomial_exponents(n, degree) {
        let base = Poly::scaled_monomial(&center, h, &alpha);
        for c in 0..n {
            let mut v = VecPoly::zero(n);
            v.comps[c] = base.clone();
            out.push(v);
        }
    }
    out
}

/// Centered, diameter-scaled monomial basis of P_degree(K; S).
pub fn symmetric_monomials(geom: &CellGeom, degree: usize) -> Vec<SymMatPoly> {
    let n = geom.dim();
    let center = geom.centroid();
    let h = geom.diameter();
    let mut out = Vec::new();
    for alpha in monomial_exponents(n, degree) {
        let base = Poly::scaled_monomial(&center, h, &alpha);
        for s in selector_tensors(n) {
            out.push(SymMatPoly::from_scalar_times_mat(&base, &s));
        }
    }
    out
}

/// Homogeneous part (in centered coordinates) of degree exactly `degree`.
pub fn symmetric_monomials_homogeneous(geom: &CellGeom, degree: usize) -> Vec<SymMatPoly> {
    let n = geom.dim();
    let center = geom.centroid();
    let h = geom.diameter();
    let mut out = Vec::new();
    for alpha in homogeneous_exponents(n, degree) {
        let base = Poly::scaled_monomial(&center, h, &alpha);
        for s in selector_tensors(n) {
            out.push(SymMatPoly::from_scalar_times_mat(&base, &s));
        }
    }
    out
}

/// The n(n+1)/2 unit symmetric tensors E_ii and (E_ij + E_ji), in packed
/// index order.
pub fn selector_tensors(n: usize) -> Vec<SymMat> {
    let mut out = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        for j in i..n {
            let mut m = SymMat::zeros(n);
            m.set(i, j, 1.0);
            out.push(m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SimplexMesh;

    fn unit_triangle() -> CellGeom {
        CellGeom::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]])
    }

    #[test]
    fn poly_mul_and_deriv() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.mul(&y).add(&x.mul(&x)); // x y + x^2
        assert_eq!(p.degree(), 2);
        assert!((p.eval(&[2.0, 3.0]) - 10.0).abs() < 1e-15);
        let dx = p.deriv(0); // y + 2x
        assert!((dx.eval(&[2.0, 3.0]) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn substitute_restricts_to_a_line() {
        // p(x, y) = x^2 y restricted to x = s, y = 1 - s
        let p = Poly::var(2, 0).mul(&Poly::var(2, 0)).mul(&Poly::var(2, 1));
        let s = Poly::var(1, 0);
        let one_minus_s = Poly::affine(1, 1.0, &[-1.0]);
        let r = p.substitute(&[s, one_minus_s]);
        assert!((r.eval(&[0.3]) - 0.09 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn sym_div_of_constant_is_zero() {
        let field = SymMatPoly::from_scalar_times_mat(&Poly::constant(2, 1.0), &SymMat::identity(2));
        assert!(sym_div(&field).comps.iter().all(|p| p.is_zero()));
    }

    #[test]
    fn sym_div_hand_example() {
        // tau = x1 * diag(1, 0): div = (1, 0)
        let mut field = SymMatPoly::zero(2);
        *field.comp_mut(0, 0) = Poly::var(2, 0);
        let d = sym_div(&field);
        assert!((d.comps[0].eval(&[0.3, 0.7]) - 1.0).abs() < 1e-15);
        assert!(d.comps[1].is_zero());
    }

    #[test]
    fn sym_div_product_rule_on_bubble_generator() {
        // tau = l1 l2 T with constant T: div tau = (l2 grad l1 + l1 grad l2) T
        let geom = unit_triangle();
        let grads = geom.barycentric_gradients().unwrap();
        let l1 = Poly::affine(2, 0.0, &grads[1]); // lambda_1 = x on the unit triangle
        let l2 = Poly::affine(2, 0.0, &grads[2]);
        let t = SymMat::outer(&[1.0 / 2.0f64.sqrt(), 1.0 / 2.0f64.sqrt()]);
        let tau = SymMatPoly::from_scalar_times_mat(&l1.mul(&l2), &t);
        let d = sym_div(&tau);
        assert_eq!(d.degree(), 1);
        let x = [0.25, 0.4];
        let expected: Vec<f64> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| {
                        t.get(i, j) * (l2.eval(&x) * grads[1][j] + l1.eval(&x) * grads[2][j])
                    })
                    .sum::<f64>()
            })
            .collect();
        let got = d.eval(&x);
        assert!((got[0] - expected[0]).abs() < 1e-14);
        assert!((got[1] - expected[1]).abs() < 1e-14);
    }

    #[test]
    fn edge_tensors_on_unit_triangle() {
        let ts = edge_rank_one_tensors(&unit_triangle()).unwrap();
        assert_eq!(ts.len(), 3);
        // edges: v0v1 -> (1,0), v0v2 -> (0,1), v1v2 -> (-1,1)/sqrt(2)
        assert!((ts[0].get(0, 0) - 1.0).abs() < 1e-15 && ts[0].get(1, 1).abs() < 1e-15);
        assert!((ts[1].get(1, 1) - 1.0).abs() < 1e-15 && ts[1].get(0, 0).abs() < 1e-15);
        assert!((ts[2].get(0, 0) - 0.5).abs() < 1e-15);
        assert!((ts[2].get(0, 1) + 0.5).abs() < 1e-15);
        let gram = Mat::from_fn(3, 3, |a, b| ts[a].frob(&ts[b]));
        assert!(linalg::rank(&gram, 1e-12) == 3);
    }

    #[test]
    fn edge_tensors_match_face_example_3d() {
        // face x1 x2 x3 of the worked 3D example, as a 2-simplex in R^3
        let face = CellGeom::new(vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        // treat the face itself as a degenerate-in-R3 object: build tensors
        // from its three edges directly
        let t01 = SymMat::outer(&[1.0, 0.0, 0.0]);
        let t02 = SymMat::outer(&[0.0, 1.0, 0.0]);
        let e12 = [-1.0 / 2.0f64.sqrt(), 1.0 / 2.0f64.sqrt(), 0.0];
        let t12 = SymMat::outer(&e12);
        // unit normalization halves the (1,-1,0) outer product
        assert!((t01.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((t02.get(1, 1) - 1.0).abs() < 1e-15);
        assert!((t12.get(0, 0) - 0.5).abs() < 1e-15 && (t12.get(0, 1) + 0.5).abs() < 1e-15);
        let _ = face;
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let geom = CellGeom::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(edge_rank_one_tensors(&geom).is_err());
    }

    #[test]
    fn edge_tensor_gram_nonsingular_random_simplices() {
        // spanning property over 500 random nondegenerate simplices
        let mut state = 42u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut tested = 0;
        for n in [2usize, 3] {
            let mut count = 0;
            while count < 250 {
                let verts: Vec<Vec<f64>> =
                    (0..=n).map(|_| (0..n).map(|_| rnd() * 2.0 - 1.0).collect()).collect();
                let geom = CellGeom::new(verts);
                let d = geom.det_jacobian().abs();
                if d < 0.05 {
                    continue;
                }
                count += 1;
                tested += 1;
                let ts = edge_rank_one_tensors(&geom).unwrap();
                let k = ts.len();
                let mut gram = Mat::from_fn(k, k, |a, b| ts[a].frob(&ts[b]));
                // normalize to make the smallest singular value scale-free
                let norm = (0..k).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
                for i in 0..k {
                    for j in 0..k {
                        gram[(i, j)] /= norm;
                    }
                }
                let sv = linalg::singular_values(&gram);
                assert!(
                    sv.last().unwrap() > &1e-8,
                    "near-singular Gram for a nondegenerate simplex"
                );
            }
        }
        assert_eq!(tested, 500);
    }

    #[test]
    fn rigid_motions_have_zero_symmetric_gradient() {
        for n in [2usize, 3] {
            let basis = rigid_motion_basis(n);
            assert_eq!(basis.len(), n * (n + 1) / 2);
            for v in &basis {
                let eps = v.sym_grad();
                for p in eps.packed_comps() {
                    assert!(p.max_coeff() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn rigid_motion_2d_matches_standard_form() {
        let basis = rigid_motion_basis(2);
        let rot = &basis[2];
        let v = rot.eval(&[0.3, 0.8]);
        assert!((v[0] + 0.8).abs() < 1e-15 && (v[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rperp_dimensions_2d() {
        let geom = unit_triangle();
        assert_eq!(rperp_basis(&geom, 1).unwrap().len(), 0);
        assert_eq!(rperp_basis(&geom, 2).unwrap().len(), 3);
        // n C(n+k-1, n) - n(n+1)/2 at n = 2, k = 3: 2 * 6 - 3 = 9
        assert_eq!(rperp_basis(&geom, 3).unwrap().len(), 9);
    }

    #[test]
    fn rperp_orthogonal_to_rigid_motions() {
        let mesh = SimplexMesh::generate_square_mesh(std::num::NonZeroU32::new(2).unwrap());
        let geom = mesh.cell_geom(4);
        let basis = rperp_basis(&geom, 2).unwrap();
        let rigid = rigid_motion_basis(2);
        let rule = quad::simplex_quadrature(4, &geom).unwrap();
        let pts = rule.physical_points(&geom);
        for v in &basis {
            let vnorm: f64 = pts
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| {
                    let val = v.eval(x);
                    w * crate::mesh::dot(&val, &val)
                })
                .sum::<f64>()
                .sqrt();
            for w in &rigid {
                let wnorm: f64 = pts
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, q)| {
                        let val = w.eval(x);
                        q * crate::mesh::dot(&val, &val)
                    })
                    .sum::<f64>()
                    .sqrt();
                let ip: f64 = pts
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, q)| q * crate::mesh::dot(&v.eval(x), &w.eval(x)))
                    .sum();
                assert!(ip.abs() < 1e-12 * vnorm * wnorm);
            }
        }
    }
}
