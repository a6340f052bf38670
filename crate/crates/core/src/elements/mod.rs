//! Local shape spaces and degree-of-freedom sets: interior bubble spaces,
//! the H(div)-conforming P_k stress element, the enriched auxiliary family
//! with its divergence-free tails, the M_k spaces, facet bubbles and the
//! explicit 3D face-bubble recipe.

pub mod bubbles;
pub mod face3d;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh::{facet_frame, CellGeom, FacetGeom, SimplexMesh};
use crate::polyalg::quad::simplex_quadrature;
use crate::polyalg::{
    monomial_exponents, rperp_basis, sym_len, symmetric_monomials, symmetric_monomials_homogeneous,
    Poly, SymMat, SymMatPoly,
};

pub use bubbles::{facet_bubbles, facet_bubbles_from_elements, BubbleVariant, FacetBubble};
pub use face3d::{face_bubble_3d, FaceBubbles3d};

/// Where a degree of freedom lives on the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attachment {
    /// Local vertex index.
    Vertex(usize),
    /// Local edge index (1-subsimplices of a 3D cell).
    Edge(usize),
    /// Local facet index, in opposite-vertex order.
    Facet(usize),
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    VertexValue,
    FacetMoment,
    InteriorMoment,
    CustomMoment,
}

/// One linear functional on symmetric-matrix fields over a cell.
#[derive(Debug, Clone)]
pub struct DofFunctional {
    pub kind: DofKind,
    pub attachment: Attachment,
    eval: DofEval,
}

#[derive(Debug, Clone)]
enum DofEval {
    /// tau(point) : selector
    PointValue { point: Vec<f64>, selector: SymMat },
    /// mean over the subsimplex of (left^T tau right) * weight(s), with the
    /// subsimplex parametrized over its sorted-global-order vertices.
    SubsimplexMoment {
        vertices: Vec<Vec<f64>>,
        left: Vec<f64>,
        right: Vec<f64>,
        weight: Poly,
    },
    /// (1/|K|) int_K tau : test
    InteriorMoment { geom: CellGeom, test: SymMatPoly },
}

impl DofFunctional {
    pub fn point_value(v: usize, point: Vec<f64>, selector: SymMat) -> Self {
        DofFunctional {
            kind: DofKind::VertexValue,
            attachment: Attachment::Vertex(v),
            eval: DofEval::PointValue { point, selector },
        }
    }

    pub fn subsimplex_moment(
        kind: DofKind,
        attachment: Attachment,
        vertices: Vec<Vec<f64>>,
        left: Vec<f64>,
        right: Vec<f64>,
        weight: Poly,
    ) -> Self {
        DofFunctional {
            kind,
            attachment,
            eval: DofEval::SubsimplexMoment {
                vertices,
                left,
                right,
                weight,
            },
        }
    }

    pub fn interior_moment(geom: CellGeom, test: SymMatPoly) -> Self {
        DofFunctional {
            kind: DofKind::InteriorMoment,
            attachment: Attachment::Cell,
            eval: DofEval::InteriorMoment { geom, test },
        }
    }

    /// Evaluate the functional on a field.
    pub fn apply(&self, tau: &SymMatPoly) -> f64 {
        match &self.eval {
            DofEval::PointValue { point, selector } => tau.eval(point).frob(selector),
            DofEval::SubsimplexMoment {
                vertices,
                left,
                right,
                weight,
            } => {
                let ell = vertices.len() - 1;
                let degree = weight.degree() + tau.degree();
                let rule = crate::polyalg::quad::cached_reference_rule(ell, degree)
                    .expect("facet rule degree in range");
                let ell_factorial: f64 = (1..=ell).map(|v| v as f64).product();
                let mut acc = 0.0;
                for (s, w) in rule.points.iter().zip(&rule.weights) {
                    // physical point from reference barycentric coordinates
                    let nphys = vertices[0].len();
                    let mut x = vec![0.0; nphys];
                    for (si, v) in s.iter().zip(vertices) {
                        for (xc, vc) in x.iter_mut().zip(v) {
                            *xc += si * vc;
                        }
                    }
                    let m = tau.eval(&x);
                    let val: f64 = (0..m.n())
                        .map(|i| {
                            left[i] * (0..m.n()).map(|j| m.get(i, j) * right[j]).sum::<f64>()
                        })
                        .sum();
                    // reference parameters s_1..s_ell
                    acc += w * val * weight.eval(&s[1..]);
                }
                // mean over the subsimplex = ell! * integral over the reference simplex
                acc * ell_factorial
            }
            DofEval::InteriorMoment { geom, test } => {
                let n = geom.dim();
                let degree = test.degree() + tau.degree();
                let rule = crate::polyalg::quad::cached_reference_rule(n, degree)
                    .expect("cell rule degree in range");
                // mean over the cell: n! times the reference-simplex integral
                let n_factorial: f64 = (1..=n).map(|v| v as f64).product();
                let mut acc = 0.0;
                for (l, w) in rule.points.iter().zip(&rule.weights) {
                    let x = geom.point_from_barycentric(l);
                    acc += w * tau.eval(&x).frob(&test.eval(&x));
                }
                acc * n_factorial
            }
        }
    }
}

/// A list of basis fields on one cell.
#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub fields: Vec<SymMatPoly>,
}

impl LocalSpace {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }
}

/// A local shape space together with a unisolvent DOF set and its dual basis.
#[derive(Debug, Clone)]
pub struct ElementDef {
    pub geom: CellGeom,
    pub space: LocalSpace,
    pub dofs: Vec<DofFunctional>,
    /// dual[i] is the field with dof_j(dual[i]) = delta_ij.
    pub dual: Vec<SymMatPoly>,
    pub min_scaled_singular_value: f64,
}

impl ElementDef {
    /// The scaled minimum singular value of the DOF matrix, without
    /// materializing the dual basis (used by the unisolvence sweeps).
    pub fn unisolvence_min_sv(
        space: &LocalSpace,
        dofs: &[DofFunctional],
    ) -> Result<f64> {
        let dim = space.dim();
        if dofs.len() != dim {
            return Err(Error::Unisolvence(format!(
                "{} DOFs for a space of dimension {dim}",
                dofs.len()
            )));
        }
        let v = Mat::from_fn(dim, dim, |i, j| dofs[i].apply(&space.fields[j]));
        Ok(linalg::scaled_min_singular_value(&v))
    }

    /// Invert the DOF matrix to obtain the nodal (dual) basis.
    pub fn dualize(geom: CellGeom, space: LocalSpace, dofs: Vec<DofFunctional>) -> Result<Self> {
        let dim = space.dim();
        if dofs.len() != dim {
            return Err(Error::Unisolvence(format!(
                "{} DOFs for a space of dimension {dim}",
                dofs.len()
            )));
        }
        let v = Mat::from_fn(dim, dim, |i, j| dofs[i].apply(&space.fields[j]));
        let min_sv = linalg::scaled_min_singular_value(&v);
        if min_sv < 1e-12 {
            return Err(Error::Unisolvence(format!(
                "DOF matrix numerically singular (scaled min singular value {min_sv:.3e})"
            )));
        }
        let inv = linalg::solve_dense(&v, &Mat::identity(dim, dim));
        let dual = (0..dim)
            .map(|k| {
                let coeffs: Vec<f64> = (0..dim).map(|j| inv[(j, k)]).collect();
                SymMatPoly::linear_combination(&space.fields, &coeffs)
            })
            .collect();
        Ok(ElementDef {
            geom,
            space,
            dofs,
            dual,
            min_scaled_singular_value: min_sv,
        })
    }

    /// Indices of the DOFs attached to a given local facet, in order.
    pub fn facet_dofs(&self, local_facet: usize) -> Vec<usize> {
        self.dofs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.attachment == Attachment::Facet(local_facet))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Barycentric coordinate functions of a cell as affine polynomials.
pub fn barycentric_polys(geom: &CellGeom) -> Result<Vec<Poly>> {
    let n = geom.dim();
    let grads = geom.barycentric_gradients()?;
    let x0 = &geom.vertices[0];
    let mut out = Vec::with_capacity(n + 1);
    for (i, nu) in grads.iter().enumerate() {
        let c0 = if i == 0 {
            1.0 - nu.iter().zip(x0).map(|(g, x)| g * x).sum::<f64>()
        } else {
            -nu.iter().zip(x0).map(|(g, x)| g * x).sum::<f64>()
        };
        out.push(Poly::affine(n, c0, nu));
    }
    Ok(out)
}

/// Interior bubble space: span of lambda_i lambda_j P_{k-2} T_ij over all
/// edges, every member with vanishing normal trace on the cell boundary.
/// Dimension C(k+n-2, n) n(n+1)/2; empty for k < 2.
pub fn bubble_space(geom: &CellGeom, k: usize) -> Result<LocalSpace> {
    if k < 2 {
        return Ok(LocalSpace { fields: vec![] });
    }
    let n = geom.dim();
    let lambdas = barycentric_polys(geom)?;
    let tensors = crate::polyalg::edge_rank_one_tensors(geom)?;
    let center = geom.centroid();
    let h = geom.diameter();
    let mut fields = Vec::new();
    let mut t_idx = 0;
    for i in 0..=n {
        for j in (i + 1)..=n {
            let pair = lambdas[i].mul(&lambdas[j]);
            for alpha in monomial_exponents(n, k - 2) {
                let m = Poly::scaled_monomial(&center, h, &alpha);
                let field =
                    SymMatPoly::from_scalar_times_mat(&pair.mul(&m), &tensors[t_idx]);
                fields.push(normalize(field));
            }
            t_idx += 1;
        }
    }
    Ok(LocalSpace { fields })
}

/// Rank report for the divergence image of the bubble space.
#[derive(Debug, Clone)]
pub struct DivImageReport {
    pub bubble_dim: usize,
    pub rank: usize,
    pub rperp_dim: usize,
    /// max over bubbles b and rigid motions w of |(div b, w)_K| scaled by norms
    pub max_rigid_pairing: f64,
}

/// Verify that the divergences of the bubble fields span exactly the
/// orthogonal complement of the rigid motions inside P_{k-1}(K; R^n).
pub fn bubble_div_image(geom: &CellGeom, k: usize) -> Result<DivImageReport> {
    let n = geom.dim();
    let bubbles = bubble_space(geom, k)?;
    let rperp = rperp_basis(geom, k)?;
    let tests = crate::polyalg::vector_monomials(geom, k.saturating_sub(1));
    let rule = simplex_quadrature(2 * k, geom)?;
    let pts = rule.physical_points(geom);

    let moments = Mat::from_fn(tests.len(), bubbles.dim(), |r, b| {
        let div = bubbles.fields[b].div();
        pts.iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * crate::mesh::dot(&tests[r].eval(x), &div.eval(x)))
            .sum()
    });
    let rank = linalg::rank(&moments, linalg::RANK_TOL);

    let rigid = crate::polyalg::rigid_motion_basis(n);
    let mut max_pairing = 0.0f64;
    for b in &bubbles.fields {
        let div = b.div();
        let div_norm: f64 = pts
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| {
                let v = div.eval(x);
                w * crate::mesh::dot(&v, &v)
            })
            .sum::<f64>()
            .sqrt();
        for w in &rigid {
            let wnorm: f64 = pts
                .iter()
                .zip(&rule.weights)
                .map(|(x, q)| {
                    let v = w.eval(x);
                    q * crate::mesh::dot(&v, &v)
                })
                .sum::<f64>()
                .sqrt();
            let ip: f64 = pts
                .iter()
                .zip(&rule.weights)
                .map(|(x, q)| q * crate::mesh::dot(&div.eval(x), &w.eval(x)))
                .sum();
            if div_norm > 0.0 && wnorm > 0.0 {
                max_pairing = max_pairing.max(ip.abs() / (div_norm * wnorm));
            }
        }
    }

    Ok(DivImageReport {
        bubble_dim: bubbles.dim(),
        rank,
        rperp_dim: rperp.len(),
        max_rigid_pairing: max_pairing,
    })
}

/// Divergence-free homogeneous tail of degrees k+1 .. k+n-1 (in centered
/// coordinates); the enrichment that turns P_k(K; S) into P_k*(K; S).
pub fn divfree_tail_space(geom: &CellGeom, k: usize) -> Result<LocalSpace> {
    assert!(k >= 2);
    let n = geom.dim();
    let mut candidates = Vec::new();
    for d in (k + 1)..=(k + n - 1) {
        candidates.extend(symmetric_monomials_homogeneous(geom, d));
    }
    if candidates.is_empty() {
        return Ok(LocalSpace { fields: vec![] });
    }
    // div tau = 0 as moments against a vector monomial test basis
    let tests = crate::polyalg::vector_monomials(geom, k + n - 2);
    let rule = simplex_quadrature(2 * (k + n - 1), geom)?;
    let pts = rule.physical_points(geom);
    let c = Mat::from_fn(tests.len(), candidates.len(), |r, j| {
        let div = candidates[j].div();
        pts.iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * crate::mesh::dot(&tests[r].eval(x), &div.eval(x)))
            .sum()
    });
    let ns = linalg::nullspace(&c, linalg::RANK_TOL);
    let mut fields = Vec::with_capacity(ns.ncols());
    for j in 0..ns.ncols() {
        let coeffs: Vec<f64> = (0..candidates.len()).map(|i| ns[(i, j)]).collect();
        let field = SymMatPoly::linear_combination(&candidates, &coeffs);
        let div_residual = field.div();
        for comp in &div_residual.comps {
            if comp.max_coeff() > 1e-9 * field.max_coeff().max(1.0) {
                return Err(Error::Construction(
                    "divergence-free tail field has nonzero divergence".into(),
                ));
            }
        }
        fields.push(normalize(field));
    }
    Ok(LocalSpace { fields })
}

/// M_k(K): divergence-free members of P_k*(K; S) with zero normal trace.
pub fn m_space(geom: &CellGeom, k: usize) -> Result<LocalSpace> {
    let n = geom.dim();
    let mut fields = symmetric_monomials(geom, k);
    fields.extend(divfree_tail_space(geom, k)?.fields);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    // divergence moments against P_{k-1} vector monomials
    let tests = crate::polyalg::vector_monomials(geom, k - 1);
    let rule = simplex_quadrature(2 * (k + n - 1), geom)?;
    let pts = rule.physical_points(geom);
    for t in &tests {
        rows.push(
            fields
                .iter()
                .map(|f| {
                    let div = f.div();
                    pts.iter()
                        .zip(&rule.weights)
                        .map(|(x, w)| w * crate::mesh::dot(&t.eval(x), &div.eval(x)))
                        .sum()
                })
                .collect(),
        );
    }
    // zero normal trace: all coefficients of tau nu restricted to each facet
    rows.extend(normal_trace_coefficient_rows(geom, &fields, k + n - 1)?);

    let c = Mat::from_fn(rows.len(), fields.len(), |r, j| rows[r][j]);
    let ns = linalg::nullspace(&c, linalg::RANK_TOL);
    let mut out = Vec::with_capacity(ns.ncols());
    for j in 0..ns.ncols() {
        let coeffs: Vec<f64> = (0..fields.len()).map(|i| ns[(i, j)]).collect();
        out.push(normalize(SymMatPoly::linear_combination(&fields, &coeffs)));
    }
    Ok(LocalSpace { fields: out })
}

/// Coefficient rows expressing "tau nu = 0 on every facet" for a list of
/// fields: one row per (facet, component, facet monomial up to `max_deg`).
pub fn normal_trace_coefficient_rows(
    geom: &CellGeom,
    fields: &[SymMatPoly],
    max_deg: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = geom.dim();
    let mesh = SimplexMesh::single_cell(geom.vertices.clone())?;
    let mut rows = Vec::new();
    for fid in 0..mesh.facets.len() {
        let fg = mesh.facet_geometry(fid)?;
        let param = facet_parametrization(&fg.vertices);
        let smon = monomial_exponents(n - 1, max_deg);
        let mut comp_rows: Vec<Vec<f64>> = vec![Vec::new(); n * smon.len()];
        for f in fields {
            let trace = f.normal_trace(&fg.normal);
            for (c, comp) in trace.comps.iter().enumerate() {
                let restricted = comp.substitute(&param);
                for (mi, alpha) in smon.iter().enumerate() {
                    comp_rows[c * smon.len() + mi].push(coeff_of(&restricted, alpha));
                }
            }
        }
        rows.extend(comp_rows);
    }
    Ok(rows)
}

/// The affine parametrization x_c(s) of a facet over the reference
/// (n-1)-simplex coordinates s, vertices in sorted-global order.
pub fn facet_parametrization(vertices: &[Vec<f64>]) -> Vec<Poly> {
    let nphys = vertices[0].len();
    let ell = vertices.len() - 1;
    (0..nphys)
        .map(|c| {
            let lin: Vec<f64> = (0..ell).map(|j| vertices[j + 1][c] - vertices[0][c]).collect();
            Poly::affine(ell, vertices[0][c], &lin)
        })
        .collect()
}

fn coeff_of(p: &Poly, alpha: &[u8]) -> f64 {
    p.terms()
        .find(|(e, _)| *e == alpha)
        .map(|(_, c)| c)
        .unwrap_or(0.0)
}

/// Component selectors S_ij with S_ij : tau = tau_ij (off-diagonals carry
/// one half on each symmetric entry).
pub fn component_selectors(n: usize) -> Vec<SymMat> {
    let mut out = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        for j in i..n {
            let mut m = SymMat::zeros(n);
            m.set(i, j, if i == j { 1.0 } else { 0.5 });
            out.push(m);
        }
    }
    out
}

/// Shifted Legendre polynomial of the given degree on [0, 1], in one variable.
pub fn shifted_legendre(degree: usize) -> Poly {
    // P_0 = 1, P_1 = 2s - 1, (k+1) P_{k+1} = (2k+1)(2s-1) P_k - k P_{k-1}
    let mut p0 = Poly::constant(1, 1.0);
    if degree == 0 {
        return p0;
    }
    let x = Poly::affine(1, -1.0, &[2.0]);
    let mut p1 = x.clone();
    for k in 1..degree {
        let kf = k as f64;
        let mut p2 = x.mul(&p1).scale((2.0 * kf + 1.0) / (kf + 1.0));
        p2.add_scaled_in_place(&p0, -kf / (kf + 1.0));
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Per-facet frames of a cell, in opposite-vertex order, taken from the mesh
/// facet table so that shared DOFs agree between neighbours.
pub fn cell_facet_frames(mesh: &SimplexMesh, cell_id: usize) -> Result<Vec<FacetGeom>> {
    mesh.facets_of_cell(cell_id)
        .iter()
        .map(|&fid| mesh.facet_geometry(fid))
        .collect()
}

/// Frames for a standalone cell (boundary conventions: outward normals).
pub fn single_cell_frames(geom: &CellGeom) -> Result<Vec<FacetGeom>> {
    let mesh = SimplexMesh::single_cell(geom.vertices.clone())?;
    // single_cell facet order is sorted by vertex ids, not opposite-vertex;
    // re-sort into opposite-vertex order
    let mut frames = Vec::with_capacity(geom.dim() + 1);
    for skip in 0..geom.vertices.len() {
        let mut key: Vec<usize> = (0..geom.vertices.len()).filter(|&v| v != skip).collect();
        key.sort_unstable();
        let fid = mesh
            .facets
            .iter()
            .position(|f| f.vertex_ids == key)
            .expect("facet exists");
        frames.push(mesh.facet_geometry(fid)?);
    }
    Ok(frames)
}

/// The H(div)-P_k stress element on a triangle: full tensor values at the
/// vertices, mean moments of degree <= k-2 of both components of tau nu per
/// edge, and interior moments against the bubble space.
pub fn hz_local_element(geom: &CellGeom, k: usize, frames: &[FacetGeom]) -> Result<ElementDef> {
    let n = geom.dim();
    if n != 2 {
        return Err(Error::Construction(
            "the P_k stress element with vertex/edge/bubble DOFs is built for n = 2".into(),
        ));
    }
    assert!(k >= 2);
    let space = LocalSpace {
        fields: symmetric_monomials(geom, k),
    };
    let mut dofs = vertex_value_dofs(geom);
    dofs.extend(facet_moment_dofs(geom, frames, k - 2));
    for beta in bubble_space(geom, k)?.fields {
        dofs.push(DofFunctional::interior_moment(geom.clone(), beta));
    }
    ElementDef::dualize(geom.clone(), space, dofs)
}

/// The auxiliary P_k*(K; S) element (full), or its simplified subspace with
/// div tau constrained to the rigid motions (k = 2 only).
pub fn aux_element(
    geom: &CellGeom,
    k: usize,
    simplified: bool,
    frames: &[FacetGeom],
) -> Result<ElementDef> {
    let n = geom.dim();
    assert!(k >= 2);
    if simplified && k != 2 {
        return Err(Error::Construction(
            "the simplified auxiliary element is defined for k = 2".into(),
        ));
    }

    let mut fields = symmetric_monomials(geom, k);
    fields.extend(divfree_tail_space(geom, k)?.fields);

    if simplified {
        // div tau in R(K): orthogonal to R^perp within P_{k-1}
        let rperp = rperp_basis(geom, k)?;
        let rule = simplex_quadrature(2 * (k + n - 1), geom)?;
        let pts = rule.physical_points(geom);
        let c = Mat::from_fn(rperp.len(), fields.len(), |r, j| {
            let div = fields[j].div();
            pts.iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * crate::mesh::dot(&rperp[r].eval(x), &div.eval(x)))
                .sum()
        });
        let ns = linalg::nullspace(&c, linalg::RANK_TOL);
        fields = (0..ns.ncols())
            .map(|j| {
                let coeffs: Vec<f64> = (0..c.ncols()).map(|i| ns[(i, j)]).collect();
                normalize(SymMatPoly::linear_combination(&fields, &coeffs))
            })
            .collect();
    }
    let space = LocalSpace { fields };

    let mut dofs = vertex_value_dofs(geom);
    if n == 3 {
        dofs.extend(edge_moment_dofs_3d(geom, k));
    }
    // facets are the ell = n-1 subsimplices: moment degree k + n - ell - 2
    dofs.extend(facet_moment_dofs(geom, frames, k - 1));
    if !simplified {
        if k == 2 {
            // averages of tau over K
            for s in component_selectors(n) {
                dofs.push(DofFunctional::interior_moment(
                    geom.clone(),
                    SymMatPoly::from_scalar_times_mat(&Poly::constant(n, 1.0), &s),
                ));
            }
        } else {
            // moments against eps(P_{k-1}), spanned by eps of an R^perp basis
            for v in rperp_basis(geom, k)? {
                dofs.push(DofFunctional::interior_moment(geom.clone(), v.sym_grad()));
            }
        }
    }
    for theta in m_space(geom, k)?.fields {
        dofs.push(DofFunctional::interior_moment(geom.clone(), theta));
    }
    ElementDef::dualize(geom.clone(), space, dofs)
}

fn vertex_value_dofs(geom: &CellGeom) -> Vec<DofFunctional> {
    let n = geom.dim();
    let selectors = component_selectors(n);
    let mut dofs = Vec::new();
    for (v, vert) in geom.vertices.iter().enumerate() {
        for s in &selectors {
            dofs.push(DofFunctional::point_value(v, vert.clone(), s.clone()));
        }
    }
    dofs
}

/// Facet moments of degree <= max_deg of the frame-resolved components of
/// tau nu: tangential components first, then the normal-normal one, each
/// against shifted Legendre weights on the sorted-vertex parametrization
/// (monomial weights on triangular faces).
fn facet_moment_dofs(geom: &CellGeom, frames: &[FacetGeom], max_deg: usize) -> Vec<DofFunctional> {
    let n = geom.dim();
    let mut dofs = Vec::new();
    for (f, frame) in frames.iter().enumerate() {
        let nu = frame.normal.clone();
        let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for t in &frame.tangents {
            pairs.push((t.clone(), nu.clone()));
        }
        pairs.push((nu.clone(), nu.clone()));
        for (left, right) in pairs {
            match n {
                2 => {
                    for d in 0..=max_deg {
                        dofs.push(DofFunctional::subsimplex_moment(
                            DofKind::FacetMoment,
                            Attachment::Facet(f),
                            frame.vertices.clone(),
                            left.clone(),
                            right.clone(),
                            shifted_legendre(d),
                        ));
                    }
                }
                3 => {
                    for alpha in monomial_exponents(2, max_deg) {
                        let mut w = Poly::constant(2, 1.0);
                        for (i, &a) in alpha.iter().enumerate() {
                            for _ in 0..a {
                                w = w.mul(&Poly::var(2, i));
                            }
                        }
                        dofs.push(DofFunctional::subsimplex_moment(
                            DofKind::FacetMoment,
                            Attachment::Facet(f),
                            frame.vertices.clone(),
                            left.clone(),
                            right.clone(),
                            w,
                        ));
                    }
                }
                _ => unreachable!("facet moments only built for n = 2, 3"),
            }
        }
    }
    dofs
}

/// Edge moments for 3D cells: components t^T tau nu_i and nu_i^T tau nu_j
/// with a deterministic edge frame, against moments of degree <= k+n-3 = k.
fn edge_moment_dofs_3d(geom: &CellGeom, k: usize) -> Vec<DofFunctional> {
    let max_deg = k; // k + n - ell - 2 with n = 3, ell = 1
    let nverts = geom.vertices.len();
    let mut dofs = Vec::new();
    let mut edge_idx = 0;
    for i in 0..nverts {
        for j in (i + 1)..nverts {
            let a = &geom.vertices[i];
            let b = &geom.vertices[j];
            let verts = vec![a.clone(), b.clone()];
            let (t, nu1, nu2) = edge_frame_3d(a, b);
            let pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![
                (t.clone(), nu1.clone()),
                (t.clone(), nu2.clone()),
                (nu1.clone(), nu1.clone()),
                (nu1.clone(), nu2.clone()),
                (nu2.clone(), nu2.clone()),
            ];
            for (left, right) in &pairs {
                for d in 0..=max_deg {
                    dofs.push(DofFunctional::subsimplex_moment(
                        DofKind::CustomMoment,
                        Attachment::Edge(edge_idx),
                        verts.clone(),
                        left.clone(),
                        right.clone(),
                        shifted_legendre(d),
                    ));
                }
            }
            edge_idx += 1;
        }
    }
    dofs
}

/// Deterministic orthonormal frame (t, nu1, nu2) of an edge in R^3, fixed by
/// the sorted endpoints alone so that all incident cells agree.
fn edge_frame_3d(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t = crate::mesh::sub(b, a);
    let t = crate::mesh::scale(&t, 1.0 / crate::mesh::norm(&t));
    let mut best_axis = 0;
    let mut best = f64::INFINITY;
    for axis in 0..3 {
        let overlap = t[axis].abs();
        if overlap < best {
            best = overlap;
            best_axis = axis;
        }
    }
    let mut e = vec![0.0; 3];
    e[best_axis] = 1.0;
    let proj = crate::mesh::dot(&e, &t);
    let mut nu1 = crate::mesh::sub(&e, &crate::mesh::scale(&t, proj));
    nu1 = crate::mesh::scale(&nu1, 1.0 / crate::mesh::norm(&nu1));
    let nu2 = crate::mesh::cross(&t, &nu1);
    (t, nu1, nu2)
}

fn normalize(field: SymMatPoly) -> SymMatPoly {
    let m = field.max_coeff();
    if m > 0.0 {
        field.scale(1.0 / m)
    } else {
        field
    }
}

/// Reference frames helper re-exported for standalone constructions.
pub fn reference_triangle() -> CellGeom {
    CellGeom::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]])
}

pub fn reference_tet() -> CellGeom {
    CellGeom::new(vec![
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ])
}

impl FacetGeom {
    /// Frame rebuilt from raw vertex coordinates with an outward-style normal
    /// supplied by the caller.
    pub fn from_vertices_with_normal(verts: &[Vec<f64>], normal: &[f64]) -> Result<FacetGeom> {
        facet_frame(verts, normal)
    }
}
