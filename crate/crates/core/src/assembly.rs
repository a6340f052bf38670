//! Global DOF numbering with conformity-preserving sharing, and assembly of
//! the mixed saddle-point system.
//!
//! Stress DOFs are shared through vertex values and facet moments built on
//! the mesh's global frames, so every shared functional evaluates
//! identically from both adjacent cells and the sign tables stay trivial.

use std::fmt;
use std::str::FromStr;

use faer::sparse::{SparseColMat, Triplet};

use crate::elements::{
    aux_element, cell_facet_frames, facet_bubbles_from_elements, hz_local_element,
    BubbleVariant, ElementDef,
};
use crate::error::{Error, Result};
use crate::mesh::SimplexMesh;
use crate::polyalg::quad::{gauss_legendre_01, simplex_quadrature};
use crate::polyalg::{selector_tensors, Poly, SymMat, SymMatPoly, VecPoly};

/// Isotropic material response: A sigma = (sigma - lambda/(2 mu + n lambda)
/// tr(sigma) I) / (2 mu).
#[derive(Debug, Clone, Copy)]
pub struct MaterialLaw {
    pub mu: f64,
    pub lambda: f64,
    pub n: usize,
}

impl MaterialLaw {
    pub fn new(mu: f64, lambda: f64, n: usize) -> Result<Self> {
        if !(mu > 0.0) || !(2.0 * mu + n as f64 * lambda > 0.0) {
            return Err(Error::Assembly(format!(
                "material law not positive definite (mu = {mu}, lambda = {lambda})"
            )));
        }
        Ok(MaterialLaw { mu, lambda, n })
    }

    /// The constants of the numerical experiment: mu = 1/2, lambda = 1.
    pub fn experiment_2d() -> Self {
        MaterialLaw {
            mu: 0.5,
            lambda: 1.0,
            n: 2,
        }
    }

    /// Apply the compliance tensor A.
    pub fn compliance_apply(&self, sigma: &SymMat) -> SymMat {
        let factor = self.lambda / (2.0 * self.mu + self.n as f64 * self.lambda);
        let tr = sigma.trace();
        let mut out = sigma.clone();
        for i in 0..self.n {
            out.set(i, i, sigma.get(i, i) - factor * tr);
        }
        out.scale(1.0 / (2.0 * self.mu))
    }

    /// Apply the inverse compliance (stiffness): 2 mu eps + lambda tr(eps) I.
    pub fn stiffness_apply(&self, eps: &SymMat) -> SymMat {
        let tr = eps.trace();
        let mut out = eps.scale(2.0 * self.mu);
        for i in 0..self.n {
            out.set(i, i, out.get(i, i) + self.lambda * tr);
        }
        out
    }
}

/// Apply the compliance tensor of a material law.
pub fn compliance_apply(material: &MaterialLaw, sigma: &SymMat) -> SymMat {
    material.compliance_apply(sigma)
}

/// The three solvable element families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementFamily {
    /// Bubble-enriched P2 stress with full discontinuous P1 displacement.
    Hz2Plus,
    /// The 21-DOF simplified auxiliary stress with rigid-motion displacement.
    Aw21,
    /// Continuous P1 stress enriched by edge bubbles, rigid-motion displacement.
    First1,
}

impl ElementFamily {
    pub const ALL: [ElementFamily; 3] =
        [ElementFamily::Hz2Plus, ElementFamily::Aw21, ElementFamily::First1];

    /// Closed-form global stress DOF count.
    pub fn stress_dof_count(&self, mesh: &SimplexMesh) -> usize {
        let (v, e, k) = (mesh.num_vertices(), mesh.facets.len(), mesh.num_cells());
        match self {
            ElementFamily::Hz2Plus => 3 * v + 3 * e + 3 * k,
            ElementFamily::Aw21 => 3 * v + 4 * e,
            ElementFamily::First1 => 3 * v + 3 * e,
        }
    }

    /// Closed-form global displacement DOF count.
    pub fn displacement_dof_count(&self, mesh: &SimplexMesh) -> usize {
        self.disp_per_cell() * mesh.num_cells()
    }

    pub fn disp_per_cell(&self) -> usize {
        match self {
            ElementFamily::Hz2Plus => 6,
            ElementFamily::Aw21 | ElementFamily::First1 => 3,
        }
    }

    fn edge_dofs_per_facet(&self) -> usize {
        match self {
            ElementFamily::Hz2Plus => 3, // two mean moments plus one bubble
            ElementFamily::Aw21 => 4,
            ElementFamily::First1 => 3, // three bubbles
        }
    }

    fn interior_dofs_per_cell(&self) -> usize {
        match self {
            ElementFamily::Hz2Plus => 3,
            _ => 0,
        }
    }
}

impl FromStr for ElementFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hz2plus" => Ok(ElementFamily::Hz2Plus),
            "aw21" => Ok(ElementFamily::Aw21),
            "first1" => Ok(ElementFamily::First1),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for ElementFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementFamily::Hz2Plus => "hz2plus",
            ElementFamily::Aw21 => "aw21",
            ElementFamily::First1 => "first1",
        };
        write!(f, "{s}")
    }
}

/// Global numbering: vertex blocks, then facet blocks, then cell interiors;
/// displacement DOFs are cellwise contiguous.
#[derive(Debug, Clone)]
pub struct GlobalDofMap {
    pub family: ElementFamily,
    pub n_sigma: usize,
    pub n_u: usize,
    /// Per cell: (global index, sign) for each local stress basis function.
    pub cell_stress: Vec<Vec<(usize, f64)>>,
    pub disp_per_cell: usize,
    pub vertex_block: usize,
    pub edge_block: usize,
    pub interior_block: usize,
}

impl GlobalDofMap {
    pub fn disp_global(&self, cell: usize, local: usize) -> usize {
        cell * self.disp_per_cell + local
    }
}

/// Build the global stress numbering for a family on a 2D mesh.
pub fn build_global_dof_map(mesh: &SimplexMesh, family: ElementFamily) -> Result<GlobalDofMap> {
    if mesh.dim != 2 {
        return Err(Error::Assembly("global assembly is two-dimensional".into()));
    }
    let nv = mesh.num_vertices();
    let ne = mesh.facets.len();
    let nk = mesh.num_cells();
    let per_edge = family.edge_dofs_per_facet();
    let per_cell = family.interior_dofs_per_cell();
    let vertex_block = 3 * nv;
    let edge_block = per_edge * ne;
    let interior_block = per_cell * nk;
    let n_sigma = vertex_block + edge_block + interior_block;
    debug_assert_eq!(n_sigma, family.stress_dof_count(mesh));

    let mut cell_stress = Vec::with_capacity(nk);
    for (cid, cell) in mesh.cells.iter().enumerate() {
        let mut locals = Vec::new();
        // vertex values, selector-major within each vertex
        for &gv in &cell.vertex_ids {
            for s in 0..3 {
                locals.push((3 * gv + s, 1.0));
            }
        }
        // facet blocks in opposite-vertex order
        for &fid in mesh.facets_of_cell(cid) {
            let base = vertex_block + per_edge * fid;
            match family {
                ElementFamily::Hz2Plus => {
                    // the two mean moments; the bubble coefficient comes after
                    // the interior block in local order, so it is pushed below
                    locals.push((base, 1.0));
                    locals.push((base + 1, 1.0));
                }
                ElementFamily::Aw21 => {
                    for d in 0..4 {
                        locals.push((base + d, 1.0));
                    }
                }
                ElementFamily::First1 => {
                    for d in 0..3 {
                        locals.push((base + d, 1.0));
                    }
                }
            }
        }
        // interior DOFs
        for m in 0..per_cell {
            locals.push((vertex_block + edge_block + per_cell * cid + m, 1.0));
        }
        // trailing bubble coefficients for the enriched family
        if family == ElementFamily::Hz2Plus {
            for &fid in mesh.facets_of_cell(cid) {
                locals.push((vertex_block + per_edge * fid + 2, 1.0));
            }
        }
        cell_stress.push(locals);
    }

    // first1 uses vertex hats, not vertex values of an element; the numbering
    // above already matches (3 per vertex then 3 bubbles per edge)
    if family == ElementFamily::First1 {
        for (cid, locals) in cell_stress.iter_mut().enumerate() {
            let _ = cid;
            debug_assert_eq!(locals.len(), 9 + 9);
        }
    }

    Ok(GlobalDofMap {
        family,
        n_sigma,
        n_u: family.displacement_dof_count(mesh),
        cell_stress,
        disp_per_cell: family.disp_per_cell(),
        vertex_block,
        edge_block,
        interior_block,
    })
}

/// Per-cell polynomial bases realizing the global stress and displacement
/// spaces.
#[derive(Debug, Clone)]
pub struct CellBases {
    pub stress: Vec<Vec<SymMatPoly>>,
    pub disp: Vec<Vec<VecPoly>>,
}

/// Build the local bases for every cell. The local ordering matches
/// [`build_global_dof_map`].
pub fn cell_bases(mesh: &SimplexMesh, family: ElementFamily) -> Result<CellBases> {
    let nk = mesh.num_cells();
    let mut stress: Vec<Vec<SymMatPoly>> = Vec::with_capacity(nk);
    let mut disp: Vec<Vec<VecPoly>> = Vec::with_capacity(nk);

    // auxiliary elements per cell (bubble carriers)
    let needs_aux = matches!(family, ElementFamily::Hz2Plus | ElementFamily::First1 | ElementFamily::Aw21);
    let simplified = matches!(family, ElementFamily::Aw21 | ElementFamily::First1);
    let mut aux: Vec<ElementDef> = Vec::with_capacity(nk);
    if needs_aux {
        for cid in 0..nk {
            let geom = mesh.cell_geom(cid);
            let frames = cell_facet_frames(mesh, cid)?;
            aux.push(aux_element(&geom, 2, simplified, &frames)?);
        }
    }

    // bubble restrictions per (facet, adjacent cell)
    let bubble_variant = match family {
        ElementFamily::Hz2Plus => Some(BubbleVariant::B2),
        ElementFamily::First1 => Some(BubbleVariant::Bhat),
        ElementFamily::Aw21 => None,
    };
    let mut facet_bubble_pieces: Vec<Vec<(usize, Vec<SymMatPoly>)>> = vec![Vec::new(); mesh.facets.len()];
    if let Some(variant) = bubble_variant {
        for fid in 0..mesh.facets.len() {
            let adj = &mesh.facets[fid].adjacent_cells;
            let elems: Vec<(usize, &ElementDef)> =
                adj.iter().map(|&cid| (cid, &aux[cid])).collect();
            let bubbles = facet_bubbles_from_elements(mesh, fid, variant, &elems)?;
            for &cid in adj {
                let pieces: Vec<SymMatPoly> = bubbles
                    .iter()
                    .map(|b| b.piece_for(cid).expect("piece exists").clone())
                    .collect();
                facet_bubble_pieces[fid].push((cid, pieces));
            }
        }
    }

    for cid in 0..nk {
        let geom = mesh.cell_geom(cid);
        let mut fields: Vec<SymMatPoly> = Vec::new();
        match family {
            ElementFamily::Hz2Plus => {
                let frames = cell_facet_frames(mesh, cid)?;
                let el = hz_local_element(&geom, 2, &frames)?;
                fields.extend(el.dual.iter().cloned());
                for &fid in mesh.facets_of_cell(cid) {
                    let pieces = facet_bubble_pieces[fid]
                        .iter()
                        .find(|(c, _)| *c == cid)
                        .map(|(_, p)| p)
                        .expect("bubble piece for adjacent cell");
                    fields.push(pieces[0].clone());
                }
            }
            ElementFamily::Aw21 => {
                fields.extend(aux[cid].dual.iter().cloned());
            }
            ElementFamily::First1 => {
                let lambdas = crate::elements::barycentric_polys(&geom)?;
                let selectors = selector_tensors(2);
                for l in lambdas.iter() {
                    for s in &selectors {
                        fields.push(SymMatPoly::from_scalar_times_mat(l, s));
                    }
                }
                for &fid in mesh.facets_of_cell(cid) {
                    let pieces = facet_bubble_pieces[fid]
                        .iter()
                        .find(|(c, _)| *c == cid)
                        .map(|(_, p)| p)
                        .expect("bubble piece for adjacent cell");
                    fields.extend(pieces.iter().cloned());
                }
            }
        }
        stress.push(fields);
        disp.push(displacement_basis(&geom, family));
    }

    Ok(CellBases { stress, disp })
}

/// Displacement basis on one cell, centered and scaled for conditioning.
pub fn displacement_basis(geom: &crate::mesh::CellGeom, family: ElementFamily) -> Vec<VecPoly> {
    let n = geom.dim();
    let c = geom.centroid();
    let h = geom.diameter();
    let rho: Vec<Poly> = (0..n)
        .map(|i| {
            Poly::affine(
                n,
                -c[i] / h,
                &(0..n)
                    .map(|j| if j == i { 1.0 / h } else { 0.0 })
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mut out = Vec::new();
    match family {
        ElementFamily::Hz2Plus => {
            for w in std::iter::once(Poly::constant(n, 1.0)).chain(rho.iter().cloned()) {
                for comp in 0..n {
                    let mut v = VecPoly::zero(n);
                    v.comps[comp] = w.clone();
                    out.push(v);
                }
            }
        }
        ElementFamily::Aw21 | ElementFamily::First1 => {
            for comp in 0..n {
                let mut v = VecPoly::zero(n);
                v.comps[comp] = Poly::constant(n, 1.0);
                out.push(v);
            }
            let mut rot = VecPoly::zero(n);
            rot.comps[0] = rho[1].scale(-1.0);
            rot.comps[1] = rho[0].clone();
            out.push(rot);
        }
    }
    out
}

/// The assembled block system [[M, B^T], [B, 0]] with its right-hand side.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub m: SparseColMat<usize, f64>,
    pub b: SparseColMat<usize, f64>,
    /// Natural boundary term on the stress test functions (zero in the pure
    /// displacement experiment).
    pub rhs_sigma: Vec<f64>,
    pub load: Vec<f64>,
    pub n_sigma: usize,
    pub n_u: usize,
}

impl SaddleSystem {
    pub fn total_dim(&self) -> usize {
        self.n_sigma + self.n_u
    }
}

/// Assemble the compliance and divergence blocks.
pub fn assemble_saddle(
    mesh: &SimplexMesh,
    family: ElementFamily,
    material: &MaterialLaw,
    quad_degree: usize,
) -> Result<SaddleSystem> {
    if quad_degree < 8 {
        return Err(Error::Assembly(format!(
            "assembly quadrature degree {quad_degree} below the exactness requirement 8"
        )));
    }
    let map = build_global_dof_map(mesh, family)?;
    let bases = cell_bases(mesh, family)?;

    let mut m_trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut b_trips: Vec<Triplet<usize, usize, f64>> = Vec::new();

    for cid in 0..mesh.num_cells() {
        let geom = mesh.cell_geom(cid);
        let rule = simplex_quadrature(quad_degree, &geom)?;
        let pts = rule.physical_points(&geom);
        let fields = &bases.stress[cid];
        let disp = &bases.disp[cid];

        // tabulate values once
        let values: Vec<Vec<SymMat>> =
            fields.iter().map(|f| pts.iter().map(|x| f.eval(x)).collect()).collect();
        let avalues: Vec<Vec<SymMat>> = values
            .iter()
            .map(|col| col.iter().map(|s| material.compliance_apply(s)).collect())
            .collect();
        let divs: Vec<Vec<Vec<f64>>> = fields
            .iter()
            .map(|f| {
                let d = f.div();
                pts.iter().map(|x| d.eval(x)).collect()
            })
            .collect();
        let dvals: Vec<Vec<Vec<f64>>> =
            disp.iter().map(|v| pts.iter().map(|x| v.eval(x)).collect()).collect();

        let locals = &map.cell_stress[cid];
        for i in 0..fields.len() {
            for j in i..fields.len() {
                let mut acc = 0.0;
                for (q, w) in rule.weights.iter().enumerate() {
                    acc += w * avalues[i][q].frob(&values[j][q]);
                }
                let (gi, si) = locals[i];
                let (gj, sj) = locals[j];
                let v = acc * si * sj;
                m_trips.push(Triplet::new(gi, gj, v));
                if i != j {
                    m_trips.push(Triplet::new(gj, gi, v));
                }
            }
            let (gi, si) = locals[i];
            for (r, dv) in dvals.iter().enumerate() {
                let mut acc = 0.0;
                for (q, w) in rule.weights.iter().enumerate() {
                    acc += w * crate::mesh::dot(&divs[i][q], &dv[q]);
                }
                b_trips.push(Triplet::new(map.disp_global(cid, r), gi, acc * si));
            }
        }
    }

    let m = SparseColMat::try_new_from_triplets(map.n_sigma, map.n_sigma, &m_trips)
        .map_err(|e| Error::Assembly(format!("building M failed: {e:?}")))?;
    let b = SparseColMat::try_new_from_triplets(map.n_u, map.n_sigma, &b_trips)
        .map_err(|e| Error::Assembly(format!("building B failed: {e:?}")))?;

    Ok(SaddleSystem {
        m,
        b,
        rhs_sigma: vec![0.0; map.n_sigma],
        load: vec![0.0; map.n_u],
        n_sigma: map.n_sigma,
        n_u: map.n_u,
    })
}

/// Load vector entries (f, v_r) by elevated quadrature.
pub fn assemble_load<F>(
    mesh: &SimplexMesh,
    family: ElementFamily,
    f: F,
    quad_degree: usize,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let map = build_global_dof_map(mesh, family)?;
    let mut load = vec![0.0; map.n_u];
    for cid in 0..mesh.num_cells() {
        let geom = mesh.cell_geom(cid);
        let rule = simplex_quadrature(quad_degree, &geom)?;
        let pts = rule.physical_points(&geom);
        let disp = displacement_basis(&geom, family);
        for (r, v) in disp.iter().enumerate() {
            let mut acc = 0.0;
            for (q, w) in rule.weights.iter().enumerate() {
                acc += w * crate::mesh::dot(&f(&pts[q]), &v.eval(&pts[q]));
            }
            load[map.disp_global(cid, r)] += acc;
        }
    }
    Ok(load)
}

/// Natural boundary term int_dOmega g . (tau nu) ds on the stress equations,
/// for solving with nonzero boundary displacement g.
pub fn assemble_boundary_term<G>(
    mesh: &SimplexMesh,
    family: ElementFamily,
    g: G,
    quad_points: usize,
) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let map = build_global_dof_map(mesh, family)?;
    let bases = cell_bases(mesh, family)?;
    let mut rhs = vec![0.0; map.n_sigma];
    let (nodes, weights) = gauss_legendre_01(quad_points);
    for (fid, facet) in mesh.facets.iter().enumerate() {
        if !facet.is_boundary() {
            continue;
        }
        let fg = mesh.facet_geometry(fid)?;
        let cid = facet.adjacent_cells[0];
        let a = &fg.vertices[0];
        let b = &fg.vertices[1];
        for (i, field) in bases.stress[cid].iter().enumerate() {
            let (gi, si) = map.cell_stress[cid][i];
            let mut acc = 0.0;
            for (s, w) in nodes.iter().zip(&weights) {
                let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect();
                let tn = field.eval(&x).mul_vec(&fg.normal);
                acc += w * fg.measure * crate::mesh::dot(&g(&x), &tn);
            }
            rhs[gi] += si * acc;
        }
    }
    Ok(rhs)
}

/// H(div) Gram matrix of the global stress basis and the L2 Gram matrix of
/// the displacement basis (for the inf-sup eigenproblem).
pub fn assemble_hdiv_and_disp_gram(
    mesh: &SimplexMesh,
    family: ElementFamily,
    quad_degree: usize,
) -> Result<(SparseColMat<usize, f64>, SparseColMat<usize, f64>)> {
    let map = build_global_dof_map(mesh, family)?;
    let bases = cell_bases(mesh, family)?;
    let mut x_trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut w_trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for cid in 0..mesh.num_cells() {
        let geom = mesh.cell_geom(cid);
        let rule = simplex_quadrature(quad_degree, &geom)?;
        let pts = rule.physical_points(&geom);
        let fields = &bases.stress[cid];
        let values: Vec<Vec<SymMat>> =
            fields.iter().map(|f| pts.iter().map(|x| f.eval(x)).collect()).collect();
        let divs: Vec<Vec<Vec<f64>>> = fields
            .iter()
            .map(|f| {
                let d = f.div();
                pts.iter().map(|x| d.eval(x)).collect()
            })
            .collect();
        let locals = &map.cell_stress[cid];
        for i in 0..fields.len() {
            for j in i..fields.len() {
                let mut acc = 0.0;
                for (q, w) in rule.weights.iter().enumerate() {
                    acc += w
                        * (values[i][q].frob(&values[j][q])
                            + crate::mesh::dot(&divs[i][q], &divs[j][q]));
                }
                let (gi, si) = locals[i];
                let (gj, sj) = locals[j];
                x_trips.push(Triplet::new(gi, gj, acc * si * sj));
                if i != j {
                    x_trips.push(Triplet::new(gj, gi, acc * si * sj));
                }
            }
        }
        let disp = &bases.disp[cid];
        let dvals: Vec<Vec<Vec<f64>>> =
            disp.iter().map(|v| pts.iter().map(|x| v.eval(x)).collect()).collect();
        for r in 0..disp.len() {
            for s in r..disp.len() {
                let mut acc = 0.0;
                for (q, w) in rule.weights.iter().enumerate() {
                    acc += w * crate::mesh::dot(&dvals[r][q], &dvals[s][q]);
                }
                let gr = map.disp_global(cid, r);
                let gs = map.disp_global(cid, s);
                w_trips.push(Triplet::new(gr, gs, acc));
                if r != s {
                    w_trips.push(Triplet::new(gs, gr, acc));
                }
            }
        }
    }
    let x = SparseColMat::try_new_from_triplets(map.n_sigma, map.n_sigma, &x_trips)
        .map_err(|e| Error::Assembly(format!("building the H(div) Gram failed: {e:?}")))?;
    let w = SparseColMat::try_new_from_triplets(map.n_u, map.n_u, &w_trips)
        .map_err(|e| Error::Assembly(format!("building the displacement Gram failed: {e:?}")))?;
    Ok((x, w))
}

/// Largest inter-element normal-trace jump over all interior facets and all
/// global stress basis functions, sampled at `samples` points per facet.
pub fn max_normal_jump(mesh: &SimplexMesh, family: ElementFamily, samples: usize) -> Result<f64> {
    let map = build_global_dof_map(mesh, family)?;
    let bases = cell_bases(mesh, family)?;
    let mut worst = 0.0f64;
    for (fid, facet) in mesh.facets.iter().enumerate() {
        if facet.is_boundary() {
            continue;
        }
        let fg = mesh.facet_geometry(fid)?;
        let (c0, c1) = (facet.adjacent_cells[0], facet.adjacent_cells[1]);
        // global index -> local field, per side
        let side = |cid: usize, g: usize| -> Option<usize> {
            map.cell_stress[cid].iter().position(|&(gi, _)| gi == g)
        };
        let globals: Vec<usize> = map.cell_stress[c0]
            .iter()
            .map(|&(g, _)| g)
            .chain(map.cell_stress[c1].iter().map(|&(g, _)| g))
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        for g in globals {
            if !seen.insert(g) {
                continue;
            }
            for k in 0..samples {
                let s = (k as f64 + 0.5) / samples as f64;
                let x: Vec<f64> = fg.vertices[0]
                    .iter()
                    .zip(&fg.vertices[1])
                    .map(|(p, q)| p + s * (q - p))
                    .collect();
                let eval_side = |cid: usize| -> Vec<f64> {
                    match side(cid, g) {
                        Some(loc) => {
                            let sgn = map.cell_stress[cid][loc].1;
                            bases.stress[cid][loc].eval(&x).mul_vec(&fg.normal)
                                .iter()
                                .map(|v| v * sgn)
                                .collect()
                        }
                        None => vec![0.0; mesh.dim],
                    }
                };
                let t0 = eval_side(c0);
                let t1 = eval_side(c1);
                for (a, b) in t0.iter().zip(&t1) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Largest L2 residual of div(phi) minus its projection onto the local
/// displacement space, over all cells and stress basis functions.
pub fn max_div_inclusion_residual(
    mesh: &SimplexMesh,
    family: ElementFamily,
    quad_degree: usize,
) -> Result<f64> {
    let bases = cell_bases(mesh, family)?;
    let mut worst = 0.0f64;
    for cid in 0..mesh.num_cells() {
        let geom = mesh.cell_geom(cid);
        let rule = simplex_quadrature(quad_degree, &geom)?;
        let pts = rule.physical_points(&geom);
        let disp = &bases.disp[cid];
        let dvals: Vec<Vec<Vec<f64>>> =
            disp.iter().map(|v| pts.iter().map(|x| v.eval(x)).collect()).collect();
        let gram = faer::Mat::from_fn(disp.len(), disp.len(), |r, s| {
            rule.weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * crate::mesh::dot(&dvals[r][q], &dvals[s][q]))
                .sum()
        });
        for field in &bases.stress[cid] {
            let d = field.div();
            let dv: Vec<Vec<f64>> = pts.iter().map(|x| d.eval(x)).collect();
            let rhs = faer::Mat::from_fn(disp.len(), 1, |r, _| {
                rule.weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * crate::mesh::dot(&dvals[r][q], &dv[q]))
                    .sum()
            });
            let coef = crate::linalg::solve_dense(&gram, &rhs);
            let resid: f64 = rule
                .weights
                .iter()
                .enumerate()
                .map(|(q, w)| {
                    let mut v = dv[q].clone();
                    for (r, dval) in dvals.iter().enumerate() {
                        for (vc, fc) in v.iter_mut().zip(&dval[q]) {
                            *vc -= coef[(r, 0)] * fc;
                        }
                    }
                    w * crate::mesh::dot(&v, &v)
                })
                .sum::<f64>()
                .sqrt();
            worst = worst.max(resid);
        }
    }
    Ok(worst)
}

/// Plain-text catalog of the local elements behind a family: DOF counts by
/// attachment kind, space dimensions and the closed-form global counts.
pub fn element_catalog(family: ElementFamily) -> Result<String> {
    use crate::elements::{Attachment, DofKind};
    use std::fmt::Write as _;

    let geom = crate::mesh::CellGeom::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    let frames = crate::elements::single_cell_frames(&geom)?;
    let mut out = String::new();
    writeln!(out, "element family: {family}").unwrap();

    let describe = |out: &mut String, name: &str, el: &ElementDef| {
        let mut vertex = 0;
        let mut facet = 0;
        let mut interior = 0;
        let mut custom = 0;
        for d in &el.dofs {
            match (&d.kind, &d.attachment) {
                (DofKind::VertexValue, _) => vertex += 1,
                (DofKind::FacetMoment, _) => facet += 1,
                (DofKind::InteriorMoment, Attachment::Cell) => interior += 1,
                _ => custom += 1,
            }
        }
        writeln!(out, "  {name}: dimension {}", el.space.dim()).unwrap();
        writeln!(
            out,
            "    dofs: {vertex} vertex values, {facet} facet moments, {interior} interior moments, {custom} other"
        )
        .unwrap();
        writeln!(
            out,
            "    dof matrix scaled min singular value: {:.3e}",
            el.min_scaled_singular_value
        )
        .unwrap();
    };

    match family {
        ElementFamily::Hz2Plus => {
            let el = hz_local_element(&geom, 2, &frames)?;
            describe(&mut out, "P2 stress element", &el);
            writeln!(out, "  plus one edge bubble per facet (3 per cell)").unwrap();
            writeln!(out, "  displacement: full P1, 6 per cell").unwrap();
            writeln!(out, "  global stress count: 3V + 3E + 3K").unwrap();
        }
        ElementFamily::Aw21 => {
            let el = aux_element(&geom, 2, true, &frames)?;
            describe(&mut out, "simplified auxiliary element", &el);
            writeln!(out, "  displacement: rigid motions, 3 per cell").unwrap();
            writeln!(out, "  global stress count: 3V + 4E").unwrap();
        }
        ElementFamily::First1 => {
            let el = aux_element(&geom, 2, true, &frames)?;
            describe(&mut out, "bubble carrier (simplified auxiliary)", &el);
            writeln!(out, "  stress: continuous P1 (3 per vertex) + 3 edge bubbles per edge").unwrap();
            writeln!(out, "  displacement: rigid motions, 3 per cell").unwrap();
            writeln!(out, "  global stress count: 3V + 3E").unwrap();
        }
    }
    let full = aux_element(&geom, 2, false, &frames)?;
    describe(&mut out, "full auxiliary element", &full);
    Ok(out)
}

/// Plain-text coordinate dump (row, col, value per line).
pub fn dump_matrix<W: std::io::Write>(
    m: &SparseColMat<usize, f64>,
    w: &mut W,
) -> std::io::Result<()> {
    for col in 0..m.ncols() {
        let range = m.col_range(col);
        let rows = m.row_idx();
        let vals = m.val();
        for k in range {
            writeln!(w, "{} {} {:.17e}", rows[k], col, vals[k])?;
        }
    }
    Ok(())
}
