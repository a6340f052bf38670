//! Property tests for the geometric and algebraic invariants.

use proptest::prelude::*;

use convlab::assembly::MaterialLaw;
use convlab::mesh::CellGeom;
use convlab::polyalg::quad::{barycentric_monomial_integral, simplex_quadrature};
use convlab::polyalg::{sym_div, Poly, SymMat, SymMatPoly};

fn nondegenerate_triangle() -> impl Strategy<Value = CellGeom> {
    (
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
    )
        .prop_map(|(a, b, c, d, e, f)| {
            CellGeom::new(vec![vec![a, b], vec![c, d], vec![e, f]])
        })
        .prop_filter("degenerate", |g| g.det_jacobian().abs() > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn barycentric_partition_of_unity_and_affine_reproduction(
        geom in nondegenerate_triangle(),
        px in -2.0f64..2.0,
        py in -2.0f64..2.0,
    ) {
        let p = vec![px, py];
        let l = geom.barycentric(&p).unwrap();
        let sum: f64 = l.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let back = geom.point_from_barycentric(&l);
        prop_assert!((back[0] - px).abs() < 1e-12 && (back[1] - py).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_monomial_oracle(
        geom in nondegenerate_triangle(),
        a in 0u8..6,
        b in 0u8..6,
        c in 0u8..6,
    ) {
        let alpha = [a as usize, b as usize, c as usize];
        let degree = alpha.iter().sum::<usize>();
        let rule = simplex_quadrature(degree, &geom).unwrap();
        let approx: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| {
                w * l[0].powi(alpha[0] as i32)
                    * l[1].powi(alpha[1] as i32)
                    * l[2].powi(alpha[2] as i32)
            })
            .sum();
        let exact = barycentric_monomial_integral(&geom, &alpha);
        prop_assert!((approx - exact).abs() <= 1e-12 * exact.abs().max(geom.measure()));
    }

    #[test]
    fn compliance_is_positive_definite(
        mu in 0.05f64..10.0,
        lambda in -0.01f64..10.0,
        s11 in -1.0f64..1.0,
        s12 in -1.0f64..1.0,
        s22 in -1.0f64..1.0,
    ) {
        prop_assume!(2.0 * mu + 2.0 * lambda > 1e-3);
        prop_assume!(s11.abs() + s12.abs() + s22.abs() > 1e-6);
        let law = MaterialLaw::new(mu, lambda, 2).unwrap();
        let mut s = SymMat::zeros(2);
        s.set(0, 0, s11);
        s.set(0, 1, s12);
        s.set(1, 1, s22);
        prop_assert!(law.compliance_apply(&s).frob(&s) > 0.0);
        // stiffness inverts compliance
        let back = law.stiffness_apply(&law.compliance_apply(&s));
        for i in 0..2 {
            for j in i..2 {
                prop_assert!((back.get(i, j) - s.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn divergence_drops_degree_by_one(
        c0 in -1.0f64..1.0,
        c1 in -1.0f64..1.0,
        c2 in -1.0f64..1.0,
        deg in 1u8..4,
    ) {
        // tau with a single degree-`deg` monomial in each component
        let mut field = SymMatPoly::zero(2);
        let mono = |coef: f64| {
            let mut p = Poly::constant(2, coef);
            for k in 0..deg {
                p = p.mul(&Poly::var(2, (k % 2) as usize));
            }
            p
        };
        *field.comp_mut(0, 0) = mono(c0);
        *field.comp_mut(0, 1) = mono(c1);
        *field.comp_mut(1, 1) = mono(c2);
        prop_assume!(field.degree() == deg as usize);
        let d = sym_div(&field);
        let nonzero = d.comps.iter().any(|p| !p.is_zero());
        if nonzero {
            prop_assert!(d.degree() == deg as usize - 1);
        }
    }
}
