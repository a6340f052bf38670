//! Explicit construction of the six added face bubbles of a tetrahedron:
//! quartic Lagrange face bubbles times the out-of-plane rank-one tensors,
//! biorthogonalized against the rigid-motion restrictions on the face, then
//! corrected by an interior bubble so the divergence drops into P_1.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mesh::{CellGeom, SimplexMesh};
use crate::polyalg::quad::{reference_rule, simplex_quadrature};
use crate::polyalg::{
    rigid_motion_basis, sym_div, vector_monomials, Poly, SymMat, SymMatPoly, VecPoly,
};

use super::{barycentric_polys, bubble_space};

/// The artifacts of the construction on one (face, cell) pair.
///
/// `tau[0..6]` span the full bubble set; the subset `tau[3..6]` (the ones
/// dual to the rotational moments) is the reduced set used when k = n.
#[derive(Debug, Clone)]
pub struct FaceBubbles3d {
    pub tau: Vec<SymMatPoly>,
    pub tau_star: Vec<SymMatPoly>,
    pub t_perp: Vec<SymMat>,
    pub v_rigid: Vec<VecPoly>,
    pub v_perp: Vec<VecPoly>,
    pub phi: Vec<Poly>,
    pub face_normal: Vec<f64>,
    pub face_vertices: Vec<Vec<f64>>,
}

/// Run the construction for the face `facet_id` of cell `cell_id`.
pub fn face_bubble_3d(
    mesh: &SimplexMesh,
    facet_id: usize,
    cell_id: usize,
) -> Result<FaceBubbles3d> {
    if mesh.dim != 3 {
        return Err(Error::Construction(
            "face bubbles are a three-dimensional construction".into(),
        ));
    }
    let facet = &mesh.facets[facet_id];
    if !facet.adjacent_cells.contains(&cell_id) {
        return Err(Error::Construction("facet does not belong to the cell".into()));
    }
    let geom = mesh.cell_geom(cell_id);
    let frame = mesh.facet_geometry(facet_id)?;
    let nu = frame.normal.clone();
    let face_verts = frame.vertices.clone();

    // barycentric functions attached to the three face vertices
    let lambdas = barycentric_polys(&geom)?;
    let cell_vids = &mesh.cells[cell_id].vertex_ids;
    let mut face_lambda = Vec::with_capacity(3);
    for gv in &facet.vertex_ids {
        let local = cell_vids
            .iter()
            .position(|v| v == gv)
            .ok_or_else(|| Error::Construction("face vertex missing from cell".into()))?;
        face_lambda.push(lambdas[local].clone());
    }

    // phi_i = l1 l2 l3 (l_i - 1/4)
    let l123 = face_lambda[0].mul(&face_lambda[1]).mul(&face_lambda[2]);
    let phi: Vec<Poly> = (0..3)
        .map(|i| l123.mul(&face_lambda[i].sub(&Poly::constant(3, 0.25))))
        .collect();

    // in-plane frame from the first face edge and the normal
    let e12 = crate::mesh::sub(&face_verts[1], &face_verts[0]);
    let t1 = crate::mesh::scale(&e12, 1.0 / crate::mesh::norm(&e12));
    let t2 = crate::mesh::cross(&nu, &t1);

    let t_perp = vec![
        SymMat::outer(&nu),
        SymMat::sym_outer(&t1, &nu),
        SymMat::sym_outer(&t2, &nu),
    ];

    // rigid motion restrictions centered at the face centroid
    let mut center = vec![0.0; 3];
    for v in &face_verts {
        for (c, vc) in center.iter_mut().zip(v) {
            *c += vc / 3.0;
        }
    }
    let q: Vec<Poly> = (0..3)
        .map(|c| Poly::affine(3, -center[c], &unit_axis(c)))
        .collect();
    let mut v_rigid = Vec::with_capacity(6);
    for c in 0..3 {
        let mut v = VecPoly::zero(3);
        v.comps[c] = Poly::constant(3, 1.0);
        v_rigid.push(v);
    }
    // ((x2-c2), -(x1-c1), 0), (0, (x3-c3), -(x2-c2)), ((x3-c3), 0, -(x1-c1))
    let rot = [
        (0usize, 1usize, 1usize, 0usize),
        (1, 2, 2, 1),
        (0, 2, 2, 0),
    ];
    for (pos, posq, neg, negq) in rot {
        let mut v = VecPoly::zero(3);
        v.comps[pos] = q[posq].clone();
        v.comps[neg] = q[negq].scale(-1.0);
        v_rigid.push(v);
    }

    // complement basis: in-plane strain modes about the centroid
    let zeta1 = Poly::affine(3, -crate::mesh::dot(&t1, &center), &t1);
    let zeta2 = Poly::affine(3, -crate::mesh::dot(&t2, &center), &t2);
    let axis_field = |p: &Poly, dir: &[f64]| -> VecPoly {
        VecPoly {
            comps: (0..3).map(|c| p.scale(dir[c])).collect(),
        }
    };
    let mut v3 = axis_field(&zeta2, &t1);
    v3.add_scaled_in_place(&axis_field(&zeta1, &t2), 1.0);
    let v_perp = vec![axis_field(&zeta1, &t1), axis_field(&zeta2, &t2), v3];

    // biorthogonality system over span{phi_i T_perp_j}
    let gens: Vec<SymMatPoly> = (0..3)
        .flat_map(|i| {
            let phi_i = phi[i].clone();
            t_perp
                .iter()
                .map(move |t| SymMatPoly::from_scalar_times_mat(&phi_i, t))
                .collect::<Vec<_>>()
        })
        .collect();
    let face_rule = reference_rule(2, 9)?;
    let face_pts: Vec<Vec<f64>> = face_rule
        .points
        .iter()
        .map(|s| {
            let mut x = vec![0.0; 3];
            for (si, v) in s.iter().zip(&face_verts) {
                for (xc, vc) in x.iter_mut().zip(v) {
                    *xc += si * vc;
                }
            }
            x
        })
        .collect();
    // mean over F: reference weights sum to 1/2
    let mean_pair = |field: &SymMatPoly, v: &VecPoly| -> f64 {
        face_pts
            .iter()
            .zip(&face_rule.weights)
            .map(|(x, w)| {
                let tn = field.eval(x).mul_vec(&nu);
                2.0 * w * crate::mesh::dot(&tn, &v.eval(x))
            })
            .sum()
    };
    let mut a = Mat::zeros(9, 9);
    for (j, g) in gens.iter().enumerate() {
        for (r, v) in v_rigid.iter().enumerate() {
            a[(r, j)] = mean_pair(g, v);
        }
        for (r, v) in v_perp.iter().enumerate() {
            a[(6 + r, j)] = mean_pair(g, v);
        }
    }
    if linalg::rank(&a, 1e-12) < 9 {
        return Err(Error::Construction(
            "singular biorthogonality system for the face bubbles".into(),
        ));
    }
    let rhs = Mat::from_fn(9, 6, |r, c| if r == c { 1.0 } else { 0.0 });
    let coef = linalg::solve_dense(&a, &rhs);
    let tau_star: Vec<SymMatPoly> = (0..6)
        .map(|i| {
            let coeffs: Vec<f64> = (0..9).map(|j| coef[(j, i)]).collect();
            SymMatPoly::linear_combination(&gens, &coeffs)
        })
        .collect();

    // interior bubble correction: div(tau* + delta) lands in R(K) (subset of P_1)
    let bubbles = bubble_space(&geom, 4)?;
    let tests = vector_monomials(&geom, 3);
    let cell_rule = simplex_quadrature(8, &geom)?;
    let cell_pts = cell_rule.physical_points(&geom);
    let rigid = rigid_motion_basis(3);
    let pair_cell = |u: &VecPoly, v: &VecPoly| -> f64 {
        cell_pts
            .iter()
            .zip(&cell_rule.weights)
            .map(|(x, w)| w * crate::mesh::dot(&u.eval(x), &v.eval(x)))
            .sum()
    };
    let rigid_gram = Mat::from_fn(6, 6, |i, j| pair_cell(&rigid[i], &rigid[j]));
    let div_matrix = Mat::from_fn(tests.len(), bubbles.dim(), |r, b| {
        pair_cell(&tests[r], &bubbles.fields[b].div())
    });

    let mut tau = Vec::with_capacity(6);
    for ts in &tau_star {
        let div_ts = sym_div(ts);
        // projection of div tau* onto the rigid motions
        let rhs_r = Mat::from_fn(6, 1, |i, _| pair_cell(&rigid[i], &div_ts));
        let proj_coef = linalg::solve_dense(&rigid_gram, &rhs_r);
        let mut target = div_ts.clone();
        for i in 0..6 {
            target.add_scaled_in_place(&rigid[i], -proj_coef[(i, 0)]);
        }
        // solve div delta = -target over the bubble space, in moment form
        let rhs_m: Vec<f64> = tests.iter().map(|t| -pair_cell(t, &target)).collect();
        let (c, res) = linalg::lstsq(&div_matrix, &rhs_m);
        let scale = rhs_m.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if res > 1e-8 * scale {
            return Err(Error::Construction(format!(
                "face bubble divergence correction unsolvable (residual {res:.3e})"
            )));
        }
        let mut corrected = ts.clone();
        for (b, &cb) in bubbles.fields.iter().zip(&c) {
            if cb != 0.0 {
                corrected.add_scaled_in_place(b, cb);
            }
        }
        tau.push(corrected);
    }

    Ok(FaceBubbles3d {
        tau,
        tau_star,
        t_perp,
        v_rigid,
        v_perp,
        phi,
        face_normal: nu,
        face_vertices: face_verts,
    })
}

/// Geometry of the worked example: the tetrahedron whose face x1 x2 x3 is
/// the unit triangle in the plane x3 = 0 with outward normal (0, 0, 1).
pub fn example_tet() -> Result<(SimplexMesh, usize, usize)> {
    let mesh = SimplexMesh::single_cell(vec![
        vec![0.0, 0.0, -1.0],
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
    ])?;
    let facet_id = mesh
        .facets
        .iter()
        .position(|f| f.vertex_ids == vec![1, 2, 3])
        .expect("example face exists");
    Ok((mesh, facet_id, 0))
}

fn unit_axis(c: usize) -> Vec<f64> {
    let mut e = vec![0.0; 3];
    e[c] = 1.0;
    e
}

impl CellGeom {
    /// Convenience for tests: the four face ids of a single-cell tet mesh.
    pub fn as_single_cell_mesh(&self) -> Result<SimplexMesh> {
        SimplexMesh::single_cell(self.vertices.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::quad::reference_rule;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn example_t_perp_matches_expected_matrices() {
        let (mesh, fid, cid) = example_tet().unwrap();
        let fb = face_bubble_3d(&mesh, fid, cid).unwrap();
        // nu nu^T = E33
        let t1 = &fb.t_perp[0];
        for i in 0..3 {
            for j in i..3 {
                let expect = if (i, j) == (2, 2) { 1.0 } else { 0.0 };
                assert!(close(t1.get(i, j), expect, 1e-14));
            }
        }
        // e1 nu^T + nu e1^T
        let t2 = &fb.t_perp[1];
        for i in 0..3 {
            for j in i..3 {
                let expect = if (i, j) == (0, 2) { 1.0 } else { 0.0 };
                assert!(close(t2.get(i, j), expect, 1e-14));
            }
        }
        // e2 nu^T + nu e2^T
        let t3 = &fb.t_perp[2];
        for i in 0..3 {
            for j in i..3 {
                let expect = if (i, j) == (1, 2) { 1.0 } else { 0.0 };
                assert!(close(t3.get(i, j), expect, 1e-14));
            }
        }
    }

    #[test]
    fn example_v_perp_matches_expected_fields() {
        let (mesh, fid, cid) = example_tet().unwrap();
        let fb = face_bubble_3d(&mesh, fid, cid).unwrap();
        let probe = [
            vec![0.2, 0.3, 0.0],
            vec![0.7, 0.1, 0.0],
            vec![1.0 / 3.0, 1.0 / 3.0, 0.0],
        ];
        for x in &probe {
            let p = x[0] - 1.0 / 3.0;
            let q = x[1] - 1.0 / 3.0;
            let v1 = fb.v_perp[0].eval(x);
            assert!(close(v1[0], p, 1e-13) && close(v1[1], 0.0, 1e-13) && close(v1[2], 0.0, 1e-13));
            let v2 = fb.v_perp[1].eval(x);
            assert!(close(v2[0], 0.0, 1e-13) && close(v2[1], q, 1e-13) && close(v2[2], 0.0, 1e-13));
            let v3 = fb.v_perp[2].eval(x);
            assert!(close(v3[0], q, 1e-13) && close(v3[1], p, 1e-13) && close(v3[2], 0.0, 1e-13));
        }
    }

    #[test]
    fn biorthogonality_holds() {
        let (mesh, fid, cid) = example_tet().unwrap();
        let fb = face_bubble_3d(&mesh, fid, cid).unwrap();
        let rule = reference_rule(2, 12).unwrap();
        let verts = &fb.face_vertices;
        let mean_pair = |field: &SymMatPoly, v: &VecPoly| -> f64 {
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| {
                    let mut x = vec![0.0; 3];
                    for (si, vv) in s.iter().zip(verts) {
                        for (xc, vc) in x.iter_mut().zip(vv) {
                            *xc += si * vc;
                        }
                    }
                    let tn = field.eval(&x).mul_vec(&fb.face_normal);
                    2.0 * w * crate::mesh::dot(&tn, &v.eval(&x))
                })
                .sum()
        };
        for (i, ts) in fb.tau_star.iter().enumerate() {
            for (j, v) in fb.v_rigid.iter().enumerate() {
                let got = mean_pair(ts, v);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(close(got, expect, 1e-10), "pairing ({i},{j}) = {got:.3e}");
            }
            for vp in &fb.v_perp {
                assert!(mean_pair(ts, vp).abs() < 1e-10);
            }
            // the interior bubble correction must not disturb the face trace
            let tau = &fb.tau[i];
            for (j, v) in fb.v_rigid.iter().enumerate() {
                let got = mean_pair(tau, v);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(close(got, expect, 1e-10));
            }
        }
    }

    #[test]
    fn phi_vanishes_on_other_faces() {
        let (mesh, fid, cid) = example_tet().unwrap();
        let fb = face_bubble_3d(&mesh, fid, cid).unwrap();
        for &other in mesh.facets_of_cell(cid) {
            if other == fid {
                continue;
            }
            let g = mesh.facet_geometry(other).unwrap();
            // sample barycentric interior points of the face
            let rule = reference_rule(2, 4).unwrap();
            for s in &rule.points {
                let mut x = vec![0.0; 3];
                for (si, vv) in s.iter().zip(&g.vertices) {
                    for (xc, vc) in x.iter_mut().zip(vv) {
                        *xc += si * vc;
                    }
                }
                for phi in &fb.phi {
                    assert!(phi.eval(&x).abs() < 1e-13);
                }
                // the full bubbles also have zero normal trace off F
                for tau in &fb.tau {
                    let tn = tau.eval(&x).mul_vec(&g.normal);
                    assert!(crate::mesh::norm(&tn) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn divergence_drops_into_p1() {
        let (mesh, fid, cid) = example_tet().unwrap();
        let fb = face_bubble_3d(&mesh, fid, cid).unwrap();
        let geom = mesh.cell_geom(cid);
        let rule = simplex_quadrature(8, &geom).unwrap();
        let pts = rule.physical_points(&geom);
        let p1 = vector_monomials(&geom, 1);
        let gram = Mat::from_fn(p1.len(), p1.len(), |i, j| {
            pts.iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * crate::mesh::dot(&p1[i].eval(x), &p1[j].eval(x)))
                .sum()
        });
        for tau in &fb.tau {
            let d = sym_div(tau);
            let rhs = Mat::from_fn(p1.len(), 1, |i, _| {
                pts.iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * crate::mesh::dot(&p1[i].eval(x), &d.eval(x)))
                    .sum()
            });
            let coef = linalg::solve_dense(&gram, &rhs);
            // L2 norm of div tau minus its P1 projection
            let resid: f64 = pts
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| {
                    let mut v = d.eval(x);
                    for (i, f) in p1.iter().enumerate() {
                        let fv = f.eval(x);
                        for (vc, fc) in v.iter_mut().zip(&fv) {
                            *vc -= coef[(i, 0)] * fc;
                        }
                    }
                    w * crate::mesh::dot(&v, &v)
                })
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-10, "div projection residual {resid:.3e}");
        }
    }

    #[test]
    fn random_tets_pass() {
        let mut state = 99u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut count = 0;
        while count < 3 {
            let verts: Vec<Vec<f64>> =
                (0..4).map(|_| (0..3).map(|_| rnd() * 2.0 - 1.0).collect()).collect();
            let geom = CellGeom::new(verts.clone());
            if geom.det_jacobian().abs() < 0.2 {
                continue;
            }
            count += 1;
            let mesh = SimplexMesh::single_cell(verts).unwrap();
            let fb = face_bubble_3d(&mesh, 0, 0).unwrap();
            assert_eq!(fb.tau.len(), 6);
        }
    }
}
