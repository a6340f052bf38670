//! Quadrature-stability and projection-order oracles for the error norms.

use std::num::NonZeroU32;

use convlab::assembly::{
    assemble_load, assemble_saddle, build_global_dof_map, cell_bases, ElementFamily,
};
use convlab::convergence::{error_norms, manufactured_case};
use convlab::linalg::solve_dense;
use convlab::mesh::SimplexMesh;
use convlab::polyalg::quad::simplex_quadrature;
use convlab::solver::{solve_saddle, Solution};
use faer::Mat;

#[test]
fn doubling_quadrature_degree_leaves_reported_errors_alone() {
    let case = manufactured_case().unwrap();
    let family = ElementFamily::Hz2Plus;
    let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(2).unwrap());
    let mut sys = assemble_saddle(&mesh, family, &case.material, 8).unwrap();
    sys.load = assemble_load(&mesh, family, |x| case.body_force(x), 12).unwrap();
    let sol = solve_saddle(&sys, 1e-10).unwrap();
    let coarse = error_norms(&sol, &case, &mesh, family, 12).unwrap();
    let fine = error_norms(&sol, &case, &mesh, family, 24).unwrap();
    for (a, b) in [coarse.0, coarse.1, coarse.2].iter().zip(&[fine.0, fine.1, fine.2]) {
        assert!(
            (a - b).abs() <= 1e-4 * a.abs(),
            "error value moved from {a} to {b} under quadrature doubling"
        );
    }
}

/// Elementwise L2 projection of the exact stress onto the stress space: the
/// resulting error must fall by roughly 2^(k+1) = 8 per level.
#[test]
fn projection_error_has_order_k_plus_one() {
    let case = manufactured_case().unwrap();
    let family = ElementFamily::Hz2Plus;
    let mut errors = Vec::new();
    for level in 2..=4u32 {
        let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(level).unwrap());
        let bases = cell_bases(&mesh, family).unwrap();
        let mut err2 = 0.0;
        for cid in 0..mesh.num_cells() {
            let geom = mesh.cell_geom(cid);
            let rule = simplex_quadrature(12, &geom).unwrap();
            let pts = rule.physical_points(&geom);
            let fields = &bases.stress[cid];
            let vals: Vec<Vec<convlab::polyalg::SymMat>> = fields
                .iter()
                .map(|f| pts.iter().map(|x| f.eval(x)).collect())
                .collect();
            let gram = Mat::from_fn(fields.len(), fields.len(), |i, j| {
                rule.weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * vals[i][q].frob(&vals[j][q]))
                    .sum()
            });
            let rhs = Mat::from_fn(fields.len(), 1, |i, _| {
                rule.weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * vals[i][q].frob(&case.stress(&pts[q])))
                    .sum()
            });
            let coef = solve_dense(&gram, &rhs);
            for (q, w) in rule.weights.iter().enumerate() {
                let mut diff = case.stress(&pts[q]);
                for i in 0..fields.len() {
                    diff.add_scaled(&vals[i][q], -coef[(i, 0)]);
                }
                err2 += w * diff.frob(&diff);
            }
        }
        errors.push(err2.sqrt());
    }
    let order_23 = (errors[0] / errors[1]).log2();
    let order_34 = (errors[1] / errors[2]).log2();
    assert!(
        order_23 > 2.6 && order_34 > 2.6,
        "projection orders {order_23:.2}, {order_34:.2}"
    );
}

#[test]
fn level_two_matches_reference_values() {
    // reference values for the enriched element at level 2
    let case = manufactured_case().unwrap();
    let family = ElementFamily::Hz2Plus;
    let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(2).unwrap());
    let mut sys = assemble_saddle(&mesh, family, &case.material, 8).unwrap();
    sys.load = assemble_load(&mesh, family, |x| case.body_force(x), 12).unwrap();
    let sol = solve_saddle(&sys, 1e-10).unwrap();
    let (eu, es, ed) = error_norms(&sol, &case, &mesh, family, 12).unwrap();
    assert!((eu - 0.07432).abs() / 0.07432 < 0.02);
    assert!((es - 0.18054).abs() / 0.18054 < 0.02);
    assert!((ed - 2.13781130).abs() / 2.13781130 < 0.02);
}

#[test]
fn error_norms_reject_low_quadrature() {
    let case = manufactured_case().unwrap();
    let family = ElementFamily::Hz2Plus;
    let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(1).unwrap());
    let map = build_global_dof_map(&mesh, family).unwrap();
    let sol = Solution {
        stress: vec![0.0; map.n_sigma],
        displacement: vec![0.0; map.n_u],
        residual: 0.0,
    };
    assert!(error_norms(&sol, &case, &mesh, family, 8).is_err());
}
