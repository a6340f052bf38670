//! Algebraic certification suite: combinatorial identities in exact integer
//! arithmetic, dimension formulas against constructed spaces, bubble space
//! rank checks, unisolvence sweeps, the discrete inf-sup proxy, and the 3D
//! face-bubble construction.

use std::num::NonZeroU32;

use faer::Mat;
use serde::Serialize;

use crate::assembly::{assemble_hdiv_and_disp_gram, assemble_saddle, ElementFamily, MaterialLaw};
use crate::elements::{
    aux_element, bubble_div_image, bubble_space, divfree_tail_space, face3d::example_tet,
    face_bubble_3d, hz_local_element, m_space, normal_trace_coefficient_rows, single_cell_frames,
};
use crate::error::Result;
use crate::linalg;
use crate::mesh::{CellGeom, SimplexMesh};
use crate::polyalg::quad::simplex_quadrature;
use crate::polyalg::{sym_len, symmetric_monomials, vector_monomials, SymMatPoly};

/// Outcome of one verification check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub params: String,
    pub pass: bool,
    /// (label, computed, expected) triples backing the verdict.
    pub witnesses: Vec<(String, String, String)>,
}

impl CheckReport {
    fn new(name: &str, params: String) -> Self {
        CheckReport {
            name: name.to_string(),
            params,
            pass: true,
            witnesses: Vec::new(),
        }
    }

    fn claim_eq<T: PartialEq + std::fmt::Display>(&mut self, label: &str, got: T, expected: T) {
        if got != expected {
            self.pass = false;
        }
        self.witnesses
            .push((label.to_string(), got.to_string(), expected.to_string()));
    }

    fn claim_le(&mut self, label: &str, got: f64, bound: f64) {
        if !(got <= bound) {
            self.pass = false;
        }
        self.witnesses
            .push((label.to_string(), format!("{got:.3e}"), format!("<= {bound:.3e}")));
    }

    fn claim_ge(&mut self, label: &str, got: f64, bound: f64) {
        if !(got >= bound) {
            self.pass = false;
        }
        self.witnesses
            .push((label.to_string(), format!("{got:.6}"), format!(">= {bound:.6}")));
    }
}

/// Binomial coefficient with C(n, m) = 0 for n < m, in exact integers.
pub fn binomial(n: i64, m: i64) -> u128 {
    if m < 0 || n < m {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..m {
        acc = acc * (n - i) as u128 / (i as u128 + 1);
    }
    acc
}

/// The combinatorial identity behind the DOF counts and its variant, checked
/// in exact integer arithmetic.
pub fn check_chu_vandermonde(n: usize, k: usize) -> CheckReport {
    let mut report = CheckReport::new("chu_vandermonde", format!("n={n} k={k}"));
    let (n_i, k_i) = (n as i64, k as i64);
    let lhs: u128 = (0..=n_i)
        .map(|l| binomial(n_i + 1, l + 1) * binomial(k_i - 1, l))
        .sum();
    report.claim_eq("sum C(n+1,l+1) C(k-1,l)", lhs, binomial(n_i + k_i, n_i));
    let lhs_var: u128 = (0..=n_i)
        .map(|l| binomial(n_i + 1, l + 1) * binomial(k_i - 1, l) * binomial(l + 1, 2))
        .sum();
    let rhs_var = (n as u128 * (n as u128 + 1) / 2) * binomial(n_i + k_i - 2, n_i);
    report.claim_eq("variant with C(l+1,2)", lhs_var, rhs_var);
    report
}

fn fact(v: u128) -> u128 {
    (1..=v).product::<u128>().max(1)
}

/// Closed-form dimension of the divergence-free tail of P_k*(K; S).
pub fn tail_dimension_formula(n: usize, k: usize) -> i128 {
    let (n, k) = (n as u128, k as u128);
    let snn = n * (n + 1) / 2;
    let top = fact(k + 2 * n - 1) / (fact(n) * fact(k + n - 1));
    let pk = fact(n + k) / (fact(k) * fact(n));
    let c1 = fact(k + 2 * n - 2) / (fact(n) * fact(k + n - 2));
    let c2 = fact(n + k - 1) / (fact(n) * fact(k - 1));
    (top - pk) as i128 * snn as i128 - n as i128 * (c1 as i128 - c2 as i128)
}

/// Closed-form dimension of P_k*(K; S).
pub fn aux_dimension_formula(n: usize, k: usize) -> i128 {
    let (n_u, k_u) = (n as u128, k as u128);
    let snn = n_u * (n_u + 1) / 2;
    let top = fact(k_u + 2 * n_u - 1) / (fact(n_u) * fact(k_u + n_u - 1));
    let c1 = fact(k_u + 2 * n_u - 2) / (fact(n_u) * fact(k_u + n_u - 2));
    let c2 = fact(n_u + k_u - 1) / (fact(n_u) * fact(k_u - 1));
    top as i128 * snn as i128 - n_u as i128 * (c1 as i128 - c2 as i128)
}

/// Closed-form dimension of M_k(K).
pub fn m_dimension_formula(n: usize, k: usize) -> i128 {
    let (n_u, k_u) = (n as u128, k as u128);
    let snn = (n_u * (n_u + 1) / 2) as i128;
    let b = (fact(k_u + 2 * n_u - 3) / (fact(n_u) * fact(k_u + n_u - 3))) as i128;
    let r = (fact(k_u + 2 * n_u - 2) / (fact(n_u) * fact(k_u + n_u - 2))) as i128;
    b * snn + snn - n_u as i128 * r
}

/// Dimension formulas, with constructive confirmation on the reference
/// simplex for n in {2, 3}.
pub fn check_dimension_formulas(n: usize, k: usize) -> Result<CheckReport> {
    let mut report = CheckReport::new("dimension_formulas", format!("n={n} k={k}"));
    let snn = (n * (n + 1) / 2) as i128;
    let tail = tail_dimension_formula(n, k);
    let aux = aux_dimension_formula(n, k);
    let m = m_dimension_formula(n, k);
    let pk = (fact((n + k) as u128) / (fact(n as u128) * fact(k as u128))) as i128 * snn;
    report.claim_eq("P_k* = P_k + tail", aux, pk + tail);
    if k == 2 {
        match n {
            2 => {
                report.claim_eq("dim P_2* (2d)", aux, 24);
                report.claim_eq("simplified (2d)", aux - snn, 21);
                report.claim_eq("dim M_2 (2d)", m, 0);
            }
            3 => {
                report.claim_eq("dim P_2* (3d)", aux, 162);
                report.claim_eq("simplified (3d)", aux - snn, 156);
                report.claim_eq("dim M_2 (3d)", m, 6);
            }
            _ => {}
        }
    }

    if n <= 3 {
        let geom = reference_simplex(n);
        let constructed_tail = divfree_tail_space(&geom, k)?.dim() as i128;
        report.claim_eq("constructed tail dim", constructed_tail, tail);
        let constructed_m = m_space(&geom, k)?.dim() as i128;
        report.claim_eq("constructed M_k dim", constructed_m, m);
        if k == 2 {
            let frames = single_cell_frames(&geom)?;
            let simplified = aux_element(&geom, 2, true, &frames)?;
            report.claim_eq(
                "constructed simplified dim",
                simplified.space.dim() as i128,
                aux - snn,
            );
        }
        // rank of the assembled P_k* basis, through coefficient vectors to
        // avoid squaring the conditioning in a Gram matrix
        let mut fields = symmetric_monomials(&geom, k);
        fields.extend(divfree_tail_space(&geom, k)?.fields);
        let rank = coefficient_rank(&fields);
        report.claim_eq("constructed P_k* rank", rank as i128, aux);
    }
    Ok(report)
}

fn reference_simplex(n: usize) -> CellGeom {
    let mut verts = vec![vec![0.0; n]];
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        verts.push(v);
    }
    CellGeom::new(verts)
}

fn field_rank(geom: &CellGeom, fields: &[SymMatPoly], quad_degree: usize) -> Result<usize> {
    let rule = simplex_quadrature(quad_degree, geom)?;
    let pts = rule.physical_points(geom);
    let gram = Mat::from_fn(fields.len(), fields.len(), |i, j| {
        pts.iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * fields[i].eval(x).frob(&fields[j].eval(x)))
            .sum()
    });
    Ok(linalg::rank(&gram, linalg::RANK_TOL))
}

/// Rank of a field list through the matrix of monomial coefficients.
fn coefficient_rank(fields: &[SymMatPoly]) -> usize {
    use std::collections::BTreeMap;
    let mut col_of: BTreeMap<(usize, Vec<u8>), usize> = BTreeMap::new();
    for f in fields {
        for (c, p) in f.packed_comps().iter().enumerate() {
            for (e, _) in p.terms() {
                let key = (c, e.to_vec());
                let next = col_of.len();
                col_of.entry(key).or_insert(next);
            }
        }
    }
    let mut m = Mat::<f64>::zeros(fields.len(), col_of.len());
    for (r, f) in fields.iter().enumerate() {
        let scale = f.max_coeff().max(1e-300);
        for (c, p) in f.packed_comps().iter().enumerate() {
            for (e, v) in p.terms() {
                m[(r, col_of[&(c, e.to_vec())])] = v / scale;
            }
        }
    }
    linalg::rank(&m, linalg::RANK_TOL)
}

/// Bubble space identities: zero normal trace, agreement with the
/// full zero-trace constraint space, and the divergence image rank.
pub fn check_bubble_identities(n: usize, k: usize) -> Result<CheckReport> {
    let mut report = CheckReport::new("bubble_identities", format!("n={n} k={k}"));
    let geom = reference_simplex(n);
    let bubbles = bubble_space(&geom, k)?;
    let expected_dim = (binomial((k + n - 2) as i64, n as i64) * sym_len(n) as u128) as i128;
    report.claim_eq("constructed bubble dim", bubbles.dim() as i128, expected_dim);

    // (a) traces vanish
    let mut worst = 0.0f64;
    for field in &bubbles.fields {
        let rows = normal_trace_coefficient_rows(&geom, std::slice::from_ref(field), k)?;
        for row in rows {
            for v in row {
                worst = worst.max(v.abs());
            }
        }
    }
    report.claim_le("max trace coefficient", worst, 1e-10);

    // (b) the zero-trace constraint space inside P_k(K;S) has the same dim
    let pk_fields = symmetric_monomials(&geom, k);
    let rows = normal_trace_coefficient_rows(&geom, &pk_fields, k)?;
    let c = Mat::from_fn(rows.len(), pk_fields.len(), |r, j| rows[r][j]);
    let nullity = pk_fields.len() - linalg::rank(&c, linalg::RANK_TOL);
    report.claim_eq("zero-trace constraint nullity", nullity as i128, expected_dim);

    // (c) divergence image
    let image = bubble_div_image(&geom, k)?;
    let rperp_expected =
        n as i128 * binomial((n + k - 1) as i64, n as i64) as i128 - sym_len(n) as i128;
    report.claim_eq("div image rank", image.rank as i128, rperp_expected);
    report.claim_eq("R-perp dim", image.rperp_dim as i128, rperp_expected);
    report.claim_le("max rigid pairing", image.max_rigid_pairing, 1e-11);
    Ok(report)
}

/// Deterministic xorshift generator for the random-cell sweeps.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.max(1))
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Random nondegenerate simplex with a modest shape-regularity floor.
pub fn random_shape_regular_cell(rng: &mut Rng, n: usize) -> CellGeom {
    loop {
        let verts: Vec<Vec<f64>> = (0..=n)
            .map(|_| (0..n).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
            .collect();
        let geom = CellGeom::new(verts);
        let d = geom.det_jacobian().abs();
        let h = geom.diameter();
        // |det| / h^n is a scale-free sliver measure
        if d / h.powi(n as i32) > 0.1 {
            return geom;
        }
    }
}

/// Unisolvence sweep over random shape-regular cells, plus the boundary-DOF
/// rank mechanism: vanishing vertex and edge DOFs force a zero normal trace.
pub fn check_unisolvence(trials: usize) -> Result<CheckReport> {
    let mut report = CheckReport::new("unisolvence", format!("trials={trials}"));
    let mut rng = Rng::new(0xC0FFEE);

    // reference-cell elements
    let tri = reference_simplex(2);
    let frames = single_cell_frames(&tri)?;
    let aw_ref = aux_element(&tri, 2, true, &frames)?;
    report.claim_ge("aw21 reference min sv", aw_ref.min_scaled_singular_value, 1e-8);
    let tet = reference_simplex(3);
    let tet_frames = single_cell_frames(&tet)?;
    let aux3 = aux_element(&tet, 2, true, &tet_frames)?;
    report.claim_ge("3d simplified reference min sv", aux3.min_scaled_singular_value, 1e-9);

    let mut min_hz = f64::INFINITY;
    let mut min_full = f64::INFINITY;
    let mut min_simpl = f64::INFINITY;
    for _ in 0..trials {
        let geom = random_shape_regular_cell(&mut rng, 2);
        let frames = single_cell_frames(&geom)?;
        min_hz = min_hz.min(hz_local_element(&geom, 2, &frames)?.min_scaled_singular_value);
        min_full = min_full.min(aux_element(&geom, 2, false, &frames)?.min_scaled_singular_value);
        min_simpl = min_simpl.min(aux_element(&geom, 2, true, &frames)?.min_scaled_singular_value);
    }
    report.claim_ge("hz element min sv over sweep", min_hz, 1e-8);
    report.claim_ge("aux element min sv over sweep", min_full, 1e-8);
    report.claim_ge("aw21 element min sv over sweep", min_simpl, 1e-8);

    // 3D auxiliary element over random tetrahedra (construction cost keeps
    // this sweep shorter than the 2D one)
    let tet_trials = trials.min(25);
    let mut min_3d = f64::INFINITY;
    for _ in 0..tet_trials {
        let geom = random_shape_regular_cell(&mut rng, 3);
        let frames = single_cell_frames(&geom)?;
        let el = aux_element(&geom, 2, true, &frames)?;
        min_3d = min_3d.min(el.min_scaled_singular_value);
    }
    report.claim_ge("3d simplified element min sv over sweep", min_3d, 1e-9);

    // boundary DOFs of P_2(K; S) determine the normal trace on the boundary
    let pk_fields = symmetric_monomials(&tri, 2);
    let hz = hz_local_element(&tri, 2, &frames)?;
    let mut bdry_rows: Vec<Vec<f64>> = Vec::new();
    for (i, dof) in hz.dofs.iter().enumerate() {
        if i < 9 + 6 {
            bdry_rows.push(pk_fields.iter().map(|f| dof.apply(f)).collect());
        }
    }
    let bdry = Mat::from_fn(bdry_rows.len(), pk_fields.len(), |r, j| bdry_rows[r][j]);
    let rank_bdry = linalg::rank(&bdry, linalg::RANK_TOL);
    let trace_rows = normal_trace_coefficient_rows(&tri, &pk_fields, 2)?;
    let mut stacked = bdry_rows.clone();
    stacked.extend(trace_rows);
    let stacked_m = Mat::from_fn(stacked.len(), pk_fields.len(), |r, j| stacked[r][j]);
    report.claim_eq("boundary DOF rank", rank_bdry, 15);
    report.claim_eq(
        "trace rows add no rank",
        linalg::rank(&stacked_m, linalg::RANK_TOL),
        rank_bdry,
    );

    // direct sum: the 18 element fields plus the three edge bubble
    // restrictions have numerical rank 21 on a mesh cell
    let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(2).unwrap());
    let cid = 3;
    let bases = crate::assembly::cell_bases(&mesh, ElementFamily::Hz2Plus)?;
    let geom = mesh.cell_geom(cid);
    let rank = field_rank(&geom, &bases.stress[cid], 8)?;
    report.claim_eq("hz + edge bubbles direct sum rank", rank, 21);
    Ok(report)
}

/// Discrete inf-sup proxy: the smallest generalized singular value of B with
/// respect to the stress H(div) norm and the displacement L2 norm.
pub fn estimate_infsup(max_level: u32, family: ElementFamily) -> Result<CheckReport> {
    let mut report = CheckReport::new("inf_sup", format!("family={family} levels=1..{max_level}"));
    let material = MaterialLaw::experiment_2d();
    let mut betas = Vec::new();
    for level in 1..=max_level {
        let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(level).unwrap());
        let sys = assemble_saddle(&mesh, family, &material, 8)?;
        let (x, w) = assemble_hdiv_and_disp_gram(&mesh, family, 8)?;
        let beta = infsup_from_grams(&sys.b, &x, &w)?;
        report.claim_ge(&format!("beta level {level}"), beta, 1e-8);
        betas.push(beta);
    }
    for ell in [3usize, 4] {
        if betas.len() >= ell {
            report.claim_ge(
                &format!("beta({ell}) / beta({})", ell - 1),
                betas[ell - 1] / betas[ell - 2],
                0.9,
            );
        }
    }
    Ok(report)
}

/// beta = sqrt(lambda_min) of B X^-1 B^T z = lambda W z.
///
/// Forming the Schur complement through X^-1 amplifies the conditioning of
/// the H(div) Gram into O(1) spectral garbage on fine meshes, so the
/// smallest eigenpair is computed by block inverse subspace iteration: each
/// application of S^-1 is one backward-stable pivoted sparse LU solve with
/// the block matrix [[X, -B^T], [B, 0]], and Ritz values use S U = W V.
pub fn infsup_from_grams(
    b: &faer::sparse::SparseColMat<usize, f64>,
    x: &faer::sparse::SparseColMat<usize, f64>,
    w: &faer::sparse::SparseColMat<usize, f64>,
) -> Result<f64> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};
    let n_u = b.nrows();
    let n_sigma = b.ncols();
    let n = n_sigma + n_u;

    // block matrix [[X, -B^T], [B, 0]]
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    {
        let rows = x.row_idx();
        let vals = x.val();
        for col in 0..n_sigma {
            for k in x.col_range(col) {
                trips.push(Triplet::new(rows[k], col, vals[k]));
            }
        }
        let rows = b.row_idx();
        let vals = b.val();
        for col in 0..n_sigma {
            for k in b.col_range(col) {
                trips.push(Triplet::new(n_sigma + rows[k], col, vals[k]));
                trips.push(Triplet::new(col, n_sigma + rows[k], -vals[k]));
            }
        }
    }
    let kk = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| crate::error::Error::Assembly(format!("block matrix failed: {e:?}")))?;
    let lu = kk
        .sp_lu()
        .map_err(|_| crate::error::Error::Assembly("inf-sup block factorization failed".into()))?;

    let apply_w = |v: &Mat<f64>| -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(n_u, v.ncols());
        let rows = w.row_idx();
        let vals = w.val();
        for col in 0..n_u {
            for k in w.col_range(col) {
                for c in 0..v.ncols() {
                    out[(rows[k], c)] += vals[k] * v[(col, c)];
                }
            }
        }
        out
    };

    // deterministic starting block
    let block = 6.min(n_u);
    let mut v = Mat::<f64>::from_fn(n_u, block, |i, j| {
        let x = (i + 1) as f64 * (j + 1) as f64;
        1.0 + (x * 0.618).sin()
    });

    let mut theta_prev = f64::INFINITY;
    let max_iter = 400usize;
    for it in 0..max_iter {
        // W-orthonormalize V (modified Gram-Schmidt in the W inner product)
        let mut wv = apply_w(&v);
        for j in 0..block {
            for p in 0..j {
                let dot: f64 = (0..n_u).map(|i| v[(i, p)] * wv[(i, j)]).sum();
                for i in 0..n_u {
                    let val = v[(i, p)];
                    v[(i, j)] -= dot * val;
                }
            }
            // refresh W v_j after projections
            let mut wj = vec![0.0f64; n_u];
            {
                let rows = w.row_idx();
                let vals = w.val();
                for col in 0..n_u {
                    for k in w.col_range(col) {
                        wj[rows[k]] += vals[k] * v[(col, j)];
                    }
                }
            }
            let nrm: f64 = (0..n_u).map(|i| v[(i, j)] * wj[i]).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for i in 0..n_u {
                    v[(i, j)] /= nrm;
                    wj[i] /= nrm;
                }
            }
            for i in 0..n_u {
                wv[(i, j)] = wj[i];
            }
        }

        // U = S^-1 W V through the block solve
        let rhs = Mat::<f64>::from_fn(n, block, |i, c| {
            if i < n_sigma {
                0.0
            } else {
                wv[(i - n_sigma, c)]
            }
        });
        let sol = lu.solve(&rhs);
        let u = Mat::<f64>::from_fn(n_u, block, |i, c| sol[(n_sigma + i, c)]);

        // Ritz problem on span(U): S U = W V exactly, so U^T S U = U^T W V
        let wu = apply_w(&u);
        let a_small = {
            let m = u.transpose() * &wv; // U^T W V = U^T S U
            // symmetrize the rounding
            Mat::<f64>::from_fn(block, block, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
        };
        let b_small = {
            let m = u.transpose() * &wu;
            Mat::<f64>::from_fn(block, block, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
        };
        let l_small = linalg::cholesky_lower(&b_small).ok_or_else(|| {
            crate::error::Error::Assembly("inf-sup Ritz block degenerate".into())
        })?;
        let tmp = linalg::solve_lower(&l_small, &a_small);
        let g_small = linalg::solve_lower(&l_small, &tmp.transpose().to_owned());
        let eigs = linalg::sym_eigenvalues(&g_small);
        let theta = eigs.first().copied().unwrap_or(0.0).max(0.0);

        let converged = (theta - theta_prev).abs() <= 1e-9 * theta.abs().max(1e-30);
        theta_prev = theta;
        v = u;
        if converged && it >= 3 {
            break;
        }
    }
    Ok(theta_prev.sqrt())
}

/// The 3D face-bubble construction: exact reproduction of the worked
/// example plus property checks on random tetrahedra.
pub fn check_face_bubble_3d() -> Result<CheckReport> {
    let mut report = CheckReport::new("face_bubble_3d", "example + 20 random tets".into());

    let (mesh, fid, cid) = example_tet()?;
    let fb = face_bubble_3d(&mesh, fid, cid)?;
    // expected out-of-plane tensors on the reference face
    let expected_tperp: [[[f64; 3]; 3]; 3] = [
        [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
    ];
    let mut tperp_err = 0.0f64;
    for (t, exp) in fb.t_perp.iter().zip(&expected_tperp) {
        for i in 0..3 {
            for j in 0..3 {
                tperp_err = tperp_err.max((t.get(i, j) - exp[i][j]).abs());
            }
        }
    }
    report.claim_le("example T-perp deviation", tperp_err, 1e-13);

    // expected complement fields at sample points on the face
    let mut vperp_err = 0.0f64;
    for x in [[0.2, 0.3, 0.0], [0.6, 0.1, 0.0], [0.25, 0.55, 0.0]] {
        let p = x[0] - 1.0 / 3.0;
        let q = x[1] - 1.0 / 3.0;
        let expect = [[p, 0.0, 0.0], [0.0, q, 0.0], [q, p, 0.0]];
        for (v, e) in fb.v_perp.iter().zip(&expect) {
            let val = v.eval(&x);
            for c in 0..3 {
                vperp_err = vperp_err.max((val[c] - e[c]).abs());
            }
        }
    }
    report.claim_le("example v-perp deviation", vperp_err, 1e-13);
    check_face_bubble_properties(&mesh, fid, cid, &fb, &mut report, "example")?;

    let mut rng = Rng::new(0xFACE);
    for t in 0..20 {
        let geom = random_shape_regular_cell(&mut rng, 3);
        let mesh = SimplexMesh::single_cell(geom.vertices.clone())?;
        let fb = face_bubble_3d(&mesh, 0, 0)?;
        check_face_bubble_properties(&mesh, 0, 0, &fb, &mut report, &format!("tet {t}"))?;
    }
    report.claim_eq("B1 span size", fb.tau.len(), 6);
    Ok(report)
}

fn check_face_bubble_properties(
    mesh: &SimplexMesh,
    fid: usize,
    cid: usize,
    fb: &crate::elements::FaceBubbles3d,
    report: &mut CheckReport,
    tag: &str,
) -> Result<()> {
    let geom = mesh.cell_geom(cid);
    // residual thresholds scale with the bubble coefficients, which grow on
    // poorly shaped cells
    let scale = fb
        .tau
        .iter()
        .fold(1.0f64, |m, t| m.max(t.max_coeff()));
    // biorthogonality through the face rule
    let face_rule = crate::polyalg::quad::reference_rule(2, 12)?;
    let verts = &fb.face_vertices;
    let mean_pair = |field: &SymMatPoly, v: &crate::polyalg::VecPoly| -> f64 {
        face_rule
            .points
            .iter()
            .zip(&face_rule.weights)
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
    let mut ortho_err = 0.0f64;
    for (i, tau) in fb.tau.iter().enumerate() {
        for (j, v) in fb.v_rigid.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            ortho_err = ortho_err.max((mean_pair(tau, v) - expect).abs());
        }
    }
    report.claim_le(&format!("{tag}: biorthogonality"), ortho_err, 1e-9);

    // phi and tau nu vanish on the other faces
    let mut leak = 0.0f64;
    for &other in mesh.facets_of_cell(cid) {
        if other == fid {
            continue;
        }
        let g = mesh.facet_geometry(other)?;
        let rule = crate::polyalg::quad::reference_rule(2, 4)?;
        for s in &rule.points {
            let mut x = vec![0.0; 3];
            for (si, vv) in s.iter().zip(&g.vertices) {
                for (xc, vc) in x.iter_mut().zip(vv) {
                    *xc += si * vc;
                }
            }
            for phi in &fb.phi {
                leak = leak.max(phi.eval(&x).abs());
            }
            for tau in &fb.tau {
                let tn = tau.eval(&x).mul_vec(&g.normal);
                leak = leak.max(crate::mesh::norm(&tn));
            }
        }
    }
    report.claim_le(&format!("{tag}: off-face trace"), leak / scale, 1e-10);

    // div tau lies in P_1
    let rule = simplex_quadrature(8, &geom)?;
    let pts = rule.physical_points(&geom);
    let p1 = vector_monomials(&geom, 1);
    let gram = Mat::from_fn(p1.len(), p1.len(), |i, j| {
        pts.iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * crate::mesh::dot(&p1[i].eval(x), &p1[j].eval(x)))
            .sum()
    });
    let mut worst = 0.0f64;
    for tau in &fb.tau {
        let d = tau.div();
        let rhs = Mat::from_fn(p1.len(), 1, |i, _| {
            pts.iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * crate::mesh::dot(&p1[i].eval(x), &d.eval(x)))
                .sum()
        });
        let coef = linalg::solve_dense(&gram, &rhs);
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
        worst = worst.max(resid);
    }
    report.claim_le(&format!("{tag}: div projection onto P1"), worst / scale, 1e-10);
    Ok(())
}

/// Conformity checks on a solvable mesh family: trace jumps, divergence
/// inclusion, DOF counts.
pub fn check_conformity(family: ElementFamily, max_level: u32) -> Result<CheckReport> {
    let mut report = CheckReport::new("conformity", format!("family={family}"));
    for level in 1..=max_level {
        let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(level).unwrap());
        let jump = crate::assembly::max_normal_jump(&mesh, family, 10)?;
        report.claim_le(&format!("level {level} normal-trace jump"), jump, 1e-10);
        let resid = crate::assembly::max_div_inclusion_residual(&mesh, family, 8)?;
        report.claim_le(&format!("level {level} div inclusion"), resid, 1e-10);
    }
    for level in 1..=5u32 {
        let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(level).unwrap());
        let map = crate::assembly::build_global_dof_map(&mesh, family)?;
        report.claim_eq(
            &format!("level {level} stress DOF count"),
            map.n_sigma,
            family.stress_dof_count(&mesh),
        );
    }
    Ok(report)
}

/// Run the whole default certification grid, optionally filtered by name.
pub fn run_suite(filter: Option<&str>, unisolvence_trials: usize) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    let wanted = |name: &str| filter.map(|f| name.contains(f)).unwrap_or(true);

    if wanted("chu_vandermonde") {
        for n in 1..=6 {
            for k in 1..=6 {
                reports.push(check_chu_vandermonde(n, k));
            }
        }
    }
    if wanted("dimension_formulas") {
        for n in 2..=5 {
            for k in 2..=3 {
                reports.push(check_dimension_formulas(n, k)?);
            }
        }
    }
    if wanted("bubble_identities") {
        for n in 2..=3 {
            for k in 2..=4 {
                reports.push(check_bubble_identities(n, k)?);
            }
        }
    }
    if wanted("unisolvence") {
        reports.push(check_unisolvence(unisolvence_trials)?);
    }
    if wanted("conformity") {
        for family in ElementFamily::ALL {
            reports.push(check_conformity(family, 3)?);
        }
    }
    if wanted("inf_sup") {
        for family in ElementFamily::ALL {
            reports.push(estimate_infsup(4, family)?);
        }
    }
    if wanted("face_bubble_3d") {
        reports.push(check_face_bubble_3d()?);
    }
    Ok(reports)
}
