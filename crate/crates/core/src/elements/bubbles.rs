//! Facet bubble fields: H(div)-conforming symmetric fields supported on the
//! cells sharing one facet, with normal trace on that facet constrained to
//! pair only with rigid-motion restrictions.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh::SimplexMesh;
use crate::polyalg::quad::reference_rule;
use crate::polyalg::{rigid_motion_basis, sym_len, Poly, SymMatPoly, VecPoly};

use super::{aux_element, cell_facet_frames, facet_parametrization, ElementDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BubbleVariant {
    /// Built on the full auxiliary space; trace pairs with all rigid motions.
    B1,
    /// Subspace of B1 with zero mean normal trace.
    B2,
    /// Built on the simplified auxiliary space (first-order element).
    Bhat,
}

impl BubbleVariant {
    pub fn expected_dim(&self, n: usize) -> usize {
        match self {
            BubbleVariant::B1 | BubbleVariant::Bhat => sym_len(n),
            BubbleVariant::B2 => (n - 1) * n / 2,
        }
    }

    fn simplified(&self) -> bool {
        matches!(self, BubbleVariant::Bhat)
    }
}

/// One bubble: a piecewise polynomial field over the cells adjacent to the
/// facet, zero elsewhere.
#[derive(Debug, Clone)]
pub struct FacetBubble {
    pub facet: usize,
    pub variant: BubbleVariant,
    /// (cell id, restriction to that cell)
    pub pieces: Vec<(usize, SymMatPoly)>,
    /// Facet moment coordinates in the element's facet-DOF order.
    pub moments: Vec<f64>,
}

impl FacetBubble {
    pub fn piece_for(&self, cell_id: usize) -> Option<&SymMatPoly> {
        self.pieces
            .iter()
            .find(|(c, _)| *c == cell_id)
            .map(|(_, f)| f)
    }
}

/// Build the bubble basis for one facet, constructing the auxiliary elements
/// on the adjacent cells on the fly.
pub fn facet_bubbles(
    mesh: &SimplexMesh,
    facet_id: usize,
    variant: BubbleVariant,
) -> Result<Vec<FacetBubble>> {
    let facet = &mesh.facets[facet_id];
    let mut elements = Vec::new();
    for &cid in &facet.adjacent_cells {
        let geom = mesh.cell_geom(cid);
        let frames = cell_facet_frames(mesh, cid)?;
        elements.push((cid, aux_element(&geom, 2, variant.simplified(), &frames)?));
    }
    let refs: Vec<(usize, &ElementDef)> = elements.iter().map(|(c, e)| (*c, e)).collect();
    facet_bubbles_from_elements(mesh, facet_id, variant, &refs)
}

/// Same construction with the adjacent elements supplied by the caller
/// (assembly caches one auxiliary element per cell).
pub fn facet_bubbles_from_elements(
    mesh: &SimplexMesh,
    facet_id: usize,
    variant: BubbleVariant,
    elements: &[(usize, &ElementDef)],
) -> Result<Vec<FacetBubble>> {
    let n = mesh.dim;
    let frame = mesh.facet_geometry(facet_id)?;
    let param = facet_parametrization(&frame.vertices);
    let ell = n - 1;

    // facet-F DOF indices on each adjacent element (identical functionals)
    let mut facet_dof_ids = Vec::new();
    for (cid, element) in elements {
        let local_f = mesh
            .facets_of_cell(*cid)
            .iter()
            .position(|&f| f == facet_id)
            .ok_or_else(|| Error::Construction("cell does not touch the facet".into()))?;
        facet_dof_ids.push(element.facet_dofs(local_f));
    }
    let n_f = facet_dof_ids[0].len();
    if facet_dof_ids.iter().any(|ids| ids.len() != n_f) {
        return Err(Error::Construction(
            "adjacent cells disagree on the facet DOF count".into(),
        ));
    }

    // orthogonal complement of the rigid-motion restrictions inside
    // P_1(F; R^n), as vector polynomials in the facet parameters
    let p_complement = rigid_complement_on_facet(n, &param)?;

    // pairing rows: int_F (tau_m nu) . p for every admissible-direction p,
    // evaluated through the first cell's dual fields
    let (_c0, e0) = elements[0];
    let rule = reference_rule(ell, 8)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let traces: Vec<VecPoly> = facet_dof_ids[0]
        .iter()
        .map(|&d| restrict_trace(&e0.dual[d], &frame.normal, &param))
        .collect();
    for p in &p_complement {
        rows.push(
            traces
                .iter()
                .map(|tr| integrate_dot(tr, p, &rule))
                .collect(),
        );
    }
    if variant == BubbleVariant::B2 {
        for c in 0..n {
            let mut e = VecPoly::zero_in_vars(n, ell);
            e.comps[c] = Poly::constant(ell, 1.0);
            rows.push(
                traces
                    .iter()
                    .map(|tr| integrate_dot(tr, &e, &rule))
                    .collect(),
            );
        }
    }

    let c = Mat::from_fn(rows.len(), n_f, |r, j| rows[r][j]);
    let ns = linalg::nullspace(&c, linalg::RANK_TOL);
    let expected = variant.expected_dim(n);
    if ns.ncols() != expected {
        return Err(Error::Construction(format!(
            "facet bubble constraint system has nullity {} (expected {expected})",
            ns.ncols()
        )));
    }

    let mut out = Vec::with_capacity(expected);
    for b in 0..expected {
        let mut moments: Vec<f64> = (0..n_f).map(|m| ns[(m, b)]).collect();
        let mut pieces = Vec::new();
        let mut max_value = 0.0f64;
        for ((cid, element), dof_ids) in elements.iter().zip(&facet_dof_ids) {
            let mut field = SymMatPoly::zero(n);
            for (m, &d) in dof_ids.iter().enumerate() {
                field.add_scaled_in_place(&element.dual[d], moments[m]);
            }
            max_value = max_value.max(max_sampled_value(&element.geom, &field));
            pieces.push((*cid, field));
        }
        // normalize by sampled values: coefficient normalization collapses
        // the value scale by powers of h on fine cells and wrecks the
        // conditioning of every Gram built from the bubbles
        if max_value > 0.0 {
            for (_, f) in pieces.iter_mut() {
                *f = f.scale(1.0 / max_value);
            }
            moments.iter_mut().for_each(|m| *m /= max_value);
        }
        out.push(FacetBubble {
            facet: facet_id,
            variant,
            pieces,
            moments,
        });
    }
    Ok(out)
}

/// Basis of (R(omega_F)|_F)^perp within P_1(F; R^n), in facet parameters.
fn rigid_complement_on_facet(n: usize, param: &[Poly]) -> Result<Vec<VecPoly>> {
    let ell = n - 1;
    // candidates: monomial weights {1, s_1, .., s_ell} times coordinate axes
    let mut candidates = Vec::new();
    for d in 0..=ell {
        let w = if d == 0 {
            Poly::constant(ell, 1.0)
        } else {
            Poly::var(ell, d - 1)
        };
        for c in 0..n {
            let mut v = VecPoly::zero_in_vars(n, ell);
            v.comps[c] = w.clone();
            candidates.push(v);
        }
    }
    // rigid motions restricted to the facet
    let rigid: Vec<VecPoly> = rigid_motion_basis(n)
        .iter()
        .map(|w| VecPoly {
            comps: w.comps.iter().map(|p| p.substitute(param)).collect(),
        })
        .collect();
    let rule = reference_rule(ell, 6)?;
    let c = Mat::from_fn(rigid.len(), candidates.len(), |r, j| {
        integrate_dot(&rigid[r], &candidates[j], &rule)
    });
    let ns = linalg::nullspace(&c, linalg::RANK_TOL);
    if ns.ncols() != n * (ell + 1) - sym_len(n) {
        return Err(Error::Construction(
            "rigid restriction on the facet is rank deficient".into(),
        ));
    }
    let mut out = Vec::with_capacity(ns.ncols());
    for j in 0..ns.ncols() {
        let mut v = VecPoly::zero_in_vars(n, ell);
        for (i, cand) in candidates.iter().enumerate() {
            v.add_scaled_in_place(cand, ns[(i, j)]);
        }
        out.push(v);
    }
    Ok(out)
}

/// Largest field entry magnitude over the cell's interior quadrature points.
fn max_sampled_value(geom: &crate::mesh::CellGeom, field: &SymMatPoly) -> f64 {
    let rule = crate::polyalg::quad::simplex_quadrature(6, geom).expect("sampling rule");
    let mut worst = 0.0f64;
    for x in rule.physical_points(geom) {
        for v in field.eval(&x).packed() {
            worst = worst.max(v.abs());
        }
    }
    worst
}

fn restrict_trace(field: &SymMatPoly, normal: &[f64], param: &[Poly]) -> VecPoly {
    let tr = field.normal_trace(normal);
    VecPoly {
        comps: tr.comps.iter().map(|p| p.substitute(param)).collect(),
    }
}

fn integrate_dot(a: &VecPoly, b: &VecPoly, rule: &crate::polyalg::quad::QuadRule) -> f64 {
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(s, w)| {
            let av = a.eval(&s[1..]);
            let bv = b.eval(&s[1..]);
            w * crate::mesh::dot(&av, &bv)
        })
        .sum()
}
