//! Manufactured-solution machinery, error norms, convergence orders, and
//! report emission.

use std::io::Write;
use std::num::NonZeroU32;

use crate::assembly::{
    assemble_load, assemble_saddle, build_global_dof_map, cell_bases, ElementFamily, MaterialLaw,
};
use crate::error::{Error, Result};
use crate::mesh::SimplexMesh;
use crate::polyalg::quad::simplex_quadrature;
use crate::polyalg::SymMat;
use crate::solver::{solve_saddle, Solution};

/// The pure displacement test problem on the unit square: a smooth exact
/// displacement vanishing on the boundary, with stress and body force
/// derived in closed form.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub material: MaterialLaw,
}

impl ManufacturedCase {
    /// u = (e^(x-y) x (1-x) y (1-y), sin(pi x) sin(pi y))
    pub fn displacement(&self, p: &[f64]) -> Vec<f64> {
        let (x, y) = (p[0], p[1]);
        let e = (x - y).exp();
        let g = x * (1.0 - x);
        let h = y * (1.0 - y);
        let pi = std::f64::consts::PI;
        vec![e * g * h, (pi * x).sin() * (pi * y).sin()]
    }

    /// Rows are gradients of the components: grad[i][j] = d u_i / d x_j.
    pub fn displacement_gradient(&self, p: &[f64]) -> [[f64; 2]; 2] {
        let (x, y) = (p[0], p[1]);
        let e = (x - y).exp();
        let g = x * (1.0 - x);
        let dg = 1.0 - 2.0 * x;
        let h = y * (1.0 - y);
        let dh = 1.0 - 2.0 * y;
        let pi = std::f64::consts::PI;
        let (sx, cx) = ((pi * x).sin(), (pi * x).cos());
        let (sy, cy) = ((pi * y).sin(), (pi * y).cos());
        [
            [e * h * (g + dg), e * g * (dh - h)],
            [pi * cx * sy, pi * sx * cy],
        ]
    }

    fn second_derivatives(&self, p: &[f64]) -> ([f64; 3], [f64; 3]) {
        // returns ((u1_xx, u1_xy, u1_yy), (u2_xx, u2_xy, u2_yy))
        let (x, y) = (p[0], p[1]);
        let e = (x - y).exp();
        let g = x * (1.0 - x);
        let dg = 1.0 - 2.0 * x;
        let h = y * (1.0 - y);
        let dh = 1.0 - 2.0 * y;
        let pi = std::f64::consts::PI;
        let (sx, cx) = ((pi * x).sin(), (pi * x).cos());
        let (sy, cy) = ((pi * y).sin(), (pi * y).cos());
        let u1_xx = e * h * (g + 2.0 * dg - 2.0);
        let u1_xy = e * (dh - h) * (g + dg);
        let u1_yy = e * g * (h - 2.0 * dh - 2.0);
        let u2_xx = -pi * pi * sx * sy;
        let u2_xy = pi * pi * cx * cy;
        let u2_yy = -pi * pi * sx * sy;
        ([u1_xx, u1_xy, u1_yy], [u2_xx, u2_xy, u2_yy])
    }

    pub fn strain(&self, p: &[f64]) -> SymMat {
        let g = self.displacement_gradient(p);
        let mut eps = SymMat::zeros(2);
        eps.set(0, 0, g[0][0]);
        eps.set(1, 1, g[1][1]);
        eps.set(0, 1, 0.5 * (g[0][1] + g[1][0]));
        eps
    }

    /// sigma = 2 mu eps(u) + lambda div(u) I (the inverse compliance).
    pub fn stress(&self, p: &[f64]) -> SymMat {
        self.material.stiffness_apply(&self.strain(p))
    }

    /// f = div sigma, in closed form.
    pub fn body_force(&self, p: &[f64]) -> Vec<f64> {
        let (mu, la) = (self.material.mu, self.material.lambda);
        let (d1, d2) = self.second_derivatives(p);
        let (u1_xx, u1_xy, u1_yy) = (d1[0], d1[1], d1[2]);
        let (u2_xx, u2_xy, u2_yy) = (d2[0], d2[1], d2[2]);
        vec![
            (2.0 * mu + la) * u1_xx + mu * u1_yy + (la + mu) * u2_xy,
            (la + mu) * u1_xy + mu * u2_xx + (2.0 * mu + la) * u2_yy,
        ]
    }
}

/// Build and validate the experiment's manufactured case against central
/// finite differences at 100 random interior points.
pub fn manufactured_case() -> Result<ManufacturedCase> {
    let case = ManufacturedCase {
        material: MaterialLaw::experiment_2d(),
    };
    validate_case(&case)?;
    Ok(case)
}

fn validate_case(case: &ManufacturedCase) -> Result<()> {
    // boundary values vanish
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        for p in [[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]] {
            let u = case.displacement(&p);
            if u[0].abs() > 1e-14 || u[1].abs() > 1e-14 {
                return Err(Error::Validation(format!(
                    "displacement does not vanish at ({}, {})",
                    p[0], p[1]
                )));
            }
        }
    }

    let mut state = 0x0123_4567_89AB_CDEFu64;
    let mut rnd = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let step = 1e-5;
    for _ in 0..100 {
        let p = [0.05 + 0.9 * rnd(), 0.05 + 0.9 * rnd()];

        // finite differences of u against the coded gradient
        let grad = case.displacement_gradient(&p);
        for j in 0..2 {
            let mut pf = p;
            let mut pb = p;
            pf[j] += step;
            pb[j] -= step;
            let uf = case.displacement(&pf);
            let ub = case.displacement(&pb);
            for i in 0..2 {
                let fd = (uf[i] - ub[i]) / (2.0 * step);
                let coded = grad[i][j];
                if (fd - coded).abs() > 1e-6 * coded.abs().max(1.0) {
                    return Err(Error::Validation(format!(
                        "du_{i}/dx_{j} mismatch at ({}, {}): fd {fd}, coded {coded}",
                        p[0], p[1]
                    )));
                }
            }
        }

        // A sigma recovers the strain exactly
        let sigma = case.stress(&p);
        let eps = case.strain(&p);
        let back = case.material.compliance_apply(&sigma);
        for i in 0..2 {
            for j in i..2 {
                if (back.get(i, j) - eps.get(i, j)).abs() > 1e-12 {
                    return Err(Error::Validation("A sigma != eps(u)".into()));
                }
            }
        }

        // finite differences of sigma against the coded body force
        let f = case.body_force(&p);
        for i in 0..2 {
            let mut fd = 0.0;
            for j in 0..2 {
                let mut pf = p;
                let mut pb = p;
                pf[j] += step;
                pb[j] -= step;
                fd += (case.stress(&pf).get(i, j) - case.stress(&pb).get(i, j)) / (2.0 * step);
            }
            if (fd - f[i]).abs() > 1e-6 * f[i].abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "div sigma component {i} mismatch: fd {fd}, coded {}",
                    f[i]
                )));
            }
        }
    }
    Ok(())
}

/// L2 errors of a discrete solution: (|u - u_h|, |sigma - sigma_h|,
/// |div(sigma - sigma_h)|).
pub fn error_norms(
    sol: &Solution,
    case: &ManufacturedCase,
    mesh: &SimplexMesh,
    family: ElementFamily,
    quad_degree: usize,
) -> Result<(f64, f64, f64)> {
    if quad_degree < 12 {
        return Err(Error::Quadrature(format!(
            "error norms need elevated quadrature (degree >= 12, got {quad_degree})"
        )));
    }
    let map = build_global_dof_map(mesh, family)?;
    let bases = cell_bases(mesh, family)?;
    let mut e_u2 = 0.0;
    let mut e_s2 = 0.0;
    let mut e_d2 = 0.0;
    for cid in 0..mesh.num_cells() {
        let geom = mesh.cell_geom(cid);
        let rule = simplex_quadrature(quad_degree, &geom)?;
        let pts = rule.physical_points(&geom);
        let stress_fields = &bases.stress[cid];
        let disp_fields = &bases.disp[cid];
        let locals = &map.cell_stress[cid];

        // local coefficient values
        let s_coef: Vec<f64> = locals.iter().map(|&(g, s)| s * sol.stress[g]).collect();
        let u_coef: Vec<f64> = (0..disp_fields.len())
            .map(|r| sol.displacement[map.disp_global(cid, r)])
            .collect();

        let divs: Vec<crate::polyalg::VecPoly> =
            stress_fields.iter().map(|f| f.div()).collect();

        for (q, w) in rule.weights.iter().enumerate() {
            let x = &pts[q];
            // discrete fields at x
            let mut sh = SymMat::zeros(2);
            let mut dh = [0.0; 2];
            for (f, (&c, d)) in stress_fields.iter().zip(s_coef.iter().zip(&divs)) {
                if c != 0.0 {
                    sh.add_scaled(&f.eval(x), c);
                    let dv = d.eval(x);
                    dh[0] += c * dv[0];
                    dh[1] += c * dv[1];
                }
            }
            let mut uh = [0.0; 2];
            for (v, &c) in disp_fields.iter().zip(&u_coef) {
                if c != 0.0 {
                    let vv = v.eval(x);
                    uh[0] += c * vv[0];
                    uh[1] += c * vv[1];
                }
            }
            // exact fields
            let u = case.displacement(x);
            let s = case.stress(x);
            let f = case.body_force(x);

            let du = (u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2);
            // the stress error norm counts each distinct component once
            // (sigma_11, sigma_12, sigma_22)
            let e11 = s.get(0, 0) - sh.get(0, 0);
            let e12 = s.get(0, 1) - sh.get(0, 1);
            let e22 = s.get(1, 1) - sh.get(1, 1);
            let dd = (f[0] - dh[0]).powi(2) + (f[1] - dh[1]).powi(2);
            e_u2 += w * du;
            e_s2 += w * (e11 * e11 + e12 * e12 + e22 * e22);
            e_d2 += w * dd;
        }
    }
    Ok((e_u2.sqrt(), e_s2.sqrt(), e_d2.sqrt()))
}

/// One level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: u32,
    pub n_sigma: usize,
    pub n_u: usize,
    pub err_u: f64,
    pub ord_u: f64,
    pub err_sigma: f64,
    pub ord_sigma: f64,
    pub err_div: f64,
    pub ord_div: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub family: ElementFamily,
    pub rows: Vec<ConvergenceRow>,
}

/// Options for a convergence run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub quad_degree_norms: usize,
    pub quad_degree_assembly: usize,
    pub solver_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            quad_degree_norms: 12,
            quad_degree_assembly: 8,
            solver_tol: 1e-10,
        }
    }
}

/// Solve the manufactured problem on levels 1..=max_level and report errors
/// and observed orders (level-1 orders are written as 0.0).
pub fn run_convergence(
    family: ElementFamily,
    max_level: u32,
    opts: &RunOptions,
) -> Result<ConvergenceReport> {
    assert!((1..=6).contains(&max_level), "levels 1..=6 supported");
    let case = manufactured_case()?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for level in 1..=max_level {
        let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(level).unwrap());
        let mut sys = assemble_saddle(&mesh, family, &case.material, opts.quad_degree_assembly)
            .map_err(|e| Error::AtLevel {
                level,
                source: Box::new(e),
            })?;
        sys.load = assemble_load(
            &mesh,
            family,
            |x| case.body_force(x),
            opts.quad_degree_norms,
        )?;
        let sol = solve_saddle(&sys, opts.solver_tol).map_err(|e| Error::AtLevel {
            level,
            source: Box::new(e),
        })?;
        let (err_u, err_sigma, err_div) =
            error_norms(&sol, &case, &mesh, family, opts.quad_degree_norms)?;
        let (ord_u, ord_sigma, ord_div) = match rows.last() {
            None => (0.0, 0.0, 0.0),
            Some(prev) => (
                (prev.err_u / err_u).log2(),
                (prev.err_sigma / err_sigma).log2(),
                (prev.err_div / err_div).log2(),
            ),
        };
        rows.push(ConvergenceRow {
            level,
            n_sigma: sys.n_sigma,
            n_u: sys.n_u,
            err_u,
            ord_u,
            err_sigma,
            ord_sigma,
            err_div,
            ord_div,
        });
    }
    Ok(ConvergenceReport { family, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::Validation(format!("unknown report format `{other}`"))),
        }
    }
}

/// Emit a report; numbers carry the table's printed precision (5 decimals
/// for the field errors, 8 for the divergence error, 1 for orders).
pub fn emit_report<W: Write>(
    report: &ConvergenceReport,
    format: ReportFormat,
    w: &mut W,
) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            writeln!(
                w,
                "level,n_sigma,n_u,err_u,ord_u,err_sigma,ord_sigma,err_div,ord_div"
            )?;
            for r in &report.rows {
                writeln!(
                    w,
                    "{},{},{},{:.5},{:.1},{:.5},{:.1},{:.8},{:.1}",
                    r.level,
                    r.n_sigma,
                    r.n_u,
                    r.err_u,
                    r.ord_u,
                    r.err_sigma,
                    r.ord_sigma,
                    r.err_div,
                    r.ord_div
                )?;
            }
        }
        ReportFormat::Markdown => {
            writeln!(w, "| level | n_sigma | n_u | err_u | ord | err_sigma | ord | err_div | ord |")?;
            writeln!(w, "|---|---|---|---|---|---|---|---|---|")?;
            for r in &report.rows {
                writeln!(
                    w,
                    "| {} | {} | {} | {:.5} | {:.1} | {:.5} | {:.1} | {:.8} | {:.1} |",
                    r.level,
                    r.n_sigma,
                    r.n_u,
                    r.err_u,
                    r.ord_u,
                    r.err_sigma,
                    r.ord_sigma,
                    r.err_div,
                    r.ord_div
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_case_validates() {
        let case = manufactured_case().unwrap();
        // A sigma = eps at a point, independent re-check
        let p = [0.37, 0.71];
        let eps = case.strain(&p);
        let back = case.material.compliance_apply(&case.stress(&p));
        for i in 0..2 {
            for j in i..2 {
                assert!((eps.get(i, j) - back.get(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_solution_gives_exact_field_norms() {
        let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(2).unwrap());
        let case = manufactured_case().unwrap();
        let family = ElementFamily::Hz2Plus;
        let map = build_global_dof_map(&mesh, family).unwrap();
        let sol = Solution {
            stress: vec![0.0; map.n_sigma],
            displacement: vec![0.0; map.n_u],
            residual: 0.0,
        };
        let (eu, es, ed) = error_norms(&sol, &case, &mesh, family, 12).unwrap();

        // independent quadrature of the exact fields
        let mut u2 = 0.0;
        let mut s2 = 0.0;
        let mut f2 = 0.0;
        for cid in 0..mesh.num_cells() {
            let geom = mesh.cell_geom(cid);
            let rule = simplex_quadrature(12, &geom).unwrap();
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.point_from_barycentric(l);
                let u = case.displacement(&x);
                let s = case.stress(&x);
                let f = case.body_force(&x);
                u2 += w * (u[0] * u[0] + u[1] * u[1]);
                s2 += w
                    * (s.get(0, 0) * s.get(0, 0)
                        + s.get(0, 1) * s.get(0, 1)
                        + s.get(1, 1) * s.get(1, 1));
                f2 += w * (f[0] * f[0] + f[1] * f[1]);
            }
        }
        assert!((eu - u2.sqrt()).abs() < 1e-12);
        assert!((es - s2.sqrt()).abs() < 1e-12);
        assert!((ed - f2.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_emission_is_deterministic() {
        let report = ConvergenceReport {
            family: ElementFamily::Hz2Plus,
            rows: vec![ConvergenceRow {
                level: 1,
                n_sigma: 33,
                n_u: 12,
                err_u: 0.274521234,
                ord_u: 0.0,
                err_sigma: 1.24637,
                ord_sigma: 0.0,
                err_div: 6.970077721,
                ord_div: 0.0,
            }],
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        emit_report(&report, ReportFormat::Csv, &mut a).unwrap();
        emit_report(&report, ReportFormat::Csv, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("level,n_sigma,n_u,err_u,ord_u,err_sigma,ord_sigma,err_div,ord_div\n"));
        assert!(text.contains("0.27452"));
        assert!(text.contains("6.97007772"));
    }
}
