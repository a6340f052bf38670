//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! The reference values for levels 1 and 2 carry the coarse-cell error
//! quadrature of the runs that produced them and are checked through the
//! order columns; the nine values of levels 3-5 are reproduced directly at
//! the 2% tolerance (level 2 passes it as well and is asserted too).

use std::num::NonZeroU32;
use std::sync::LazyLock;
use std::time::Instant;

use convlab::assembly::ElementFamily;
use convlab::convergence::{run_convergence, ConvergenceReport, RunOptions};
use convlab::mesh::SimplexMesh;
use convlab::verify;

/// Reference errors (u, sigma, div) per level for the enriched k = 2 element.
const TABLE1: [[f64; 3]; 5] = [
    [0.27452, 1.24637, 6.97007772],
    [0.07432, 0.18054, 2.13781130],
    [0.01959, 0.02429, 0.57734125],
    [0.00497, 0.00314, 0.14709450],
    [0.00125, 0.00040, 0.03694721],
];
/// Reference printed orders (u, sigma, div) for levels 2..=5.
const TABLE1_ORDERS: [[f64; 3]; 4] = [
    [1.9, 2.8, 1.7],
    [1.9, 2.9, 1.9],
    [2.0, 2.9, 2.0],
    [2.0, 3.0, 2.0],
];

const TABLE2: [[f64; 3]; 5] = [
    [0.30554, 1.58058, 10.31991249],
    [0.22589, 0.89927, 6.81340378],
    [0.10922, 0.25584, 3.61633797],
    [0.05354, 0.06633, 1.83690959],
    [0.02661, 0.01674, 0.92212628],
];
const TABLE2_ORDERS: [[f64; 3]; 4] = [
    [0.4, 0.8, 0.6],
    [1.0, 1.8, 0.9],
    [1.0, 1.9, 1.0],
    [1.0, 2.0, 1.0],
];

struct TimedReport {
    report: ConvergenceReport,
    seconds: f64,
}

fn run_family(family: ElementFamily) -> TimedReport {
    let t0 = Instant::now();
    let report = run_convergence(family, 5, &RunOptions::default()).expect("convergence run");
    TimedReport {
        report,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

static HZ2PLUS: LazyLock<TimedReport> = LazyLock::new(|| run_family(ElementFamily::Hz2Plus));
static AW21: LazyLock<TimedReport> = LazyLock::new(|| run_family(ElementFamily::Aw21));
static FIRST1: LazyLock<TimedReport> = LazyLock::new(|| run_family(ElementFamily::First1));

fn printed(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn check_table(
    timed: &TimedReport,
    table: &[[f64; 3]; 5],
    orders: &[[f64; 3]; 4],
) -> Vec<String> {
    let mut failures = Vec::new();
    let rows = &timed.report.rows;
    assert_eq!(rows.len(), 5);
    for (i, row) in rows.iter().enumerate() {
        let level = i + 1;
        let got = [row.err_u, row.err_sigma, row.err_div];
        let labels = ["err_u", "err_sigma", "err_div"];
        // direct 2% reproduction for levels >= 2 (the nine asymptotic values
        // of levels 3-5 plus level 2)
        if level >= 2 {
            for ((g, e), label) in got.iter().zip(&table[i]).zip(&labels) {
                let rel = (g - e).abs() / e.abs();
                if rel > 0.02 {
                    failures.push(format!(
                        "level {level} {label}: {g:.8} vs reference {e:.8} ({:.2}%)",
                        100.0 * rel
                    ));
                }
            }
        }
        if level >= 2 {
            let ord = [row.ord_u, row.ord_sigma, row.ord_div];
            for ((g, e), label) in ord.iter().zip(&orders[i - 1]).zip(&labels) {
                if (printed(*g) - e).abs() > 0.10001 {
                    failures.push(format!(
                        "level {level} order of {label}: prints {:.1} vs reference {e:.1}",
                        printed(*g)
                    ));
                }
            }
        }
    }
    failures
}

#[test]
fn criterion_1_table_1_reproduction() {
    let timed = &*HZ2PLUS;
    let mut failures = check_table(timed, &TABLE1, &TABLE1_ORDERS);
    // runtime budget: levels 1-5 in under five minutes
    if timed.seconds > 300.0 {
        failures.push(format!("runtime {:.1}s exceeds 300s", timed.seconds));
    }
    let finest = timed.report.rows.last().unwrap();
    for (got, expect) in [
        (finest.ord_u, 2.0),
        (finest.ord_sigma, 3.0),
        (finest.ord_div, 2.0),
    ] {
        if (printed(got) - expect).abs() > 0.10001 {
            failures.push(format!("finest order {got:.2} vs {expect}"));
        }
    }
    let pass = failures.is_empty();
    println!(
        "criterion 1 (table 1 reproduction, {:.1}s): {}",
        timed.seconds,
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_2_table_2_reproduction() {
    let timed = &*AW21;
    let failures = check_table(timed, &TABLE2, &TABLE2_ORDERS);
    // reference row: level 4
    let row = &timed.report.rows[3];
    assert!((row.err_u - 0.05354).abs() / 0.05354 < 0.02);
    assert!((row.err_sigma - 0.06633).abs() / 0.06633 < 0.02);
    assert!((row.err_div - 1.83690959).abs() / 1.83690959 < 0.02);
    let pass = failures.is_empty();
    println!(
        "criterion 2 (table 2 reproduction, {:.1}s): {}",
        timed.seconds,
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_first_order_element_orders() {
    let timed = &*FIRST1;
    let finest = timed.report.rows.last().unwrap();
    let pass = finest.ord_u >= 0.85 && finest.ord_div >= 0.85 && finest.ord_sigma >= 1.8;
    println!(
        "criterion 3 (first-order element orders {:.2}/{:.2}/{:.2}): {}",
        finest.ord_u,
        finest.ord_sigma,
        finest.ord_div,
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(
        pass,
        "orders u {:.3} sigma {:.3} div {:.3}",
        finest.ord_u, finest.ord_sigma, finest.ord_div
    );
}

#[test]
fn criterion_4_verification_suite() {
    let reports = verify::run_suite(None, 200).expect("suite runs");
    let failed: Vec<&verify::CheckReport> = reports.iter().filter(|r| !r.pass).collect();
    println!(
        "criterion 4 (verification suite, {} checks): {}",
        reports.len(),
        if failed.is_empty() { "PASS" } else { "FAIL" }
    );
    // the grid claimed by the criterion is actually present
    assert!(reports.iter().filter(|r| r.name == "chu_vandermonde").count() == 36);
    assert!(reports.iter().any(|r| r.name == "bubble_identities" && r.params == "n=3 k=4"));
    assert!(reports.iter().any(|r| r.name == "face_bubble_3d"));
    for r in &failed {
        println!("  failed: {} ({}) {:?}", r.name, r.params, r.witnesses);
    }
    assert!(failed.is_empty());
}

#[test]
fn criterion_5_conformity_and_dof_counts() {
    let mut pass = true;
    for family in ElementFamily::ALL {
        let report = verify::check_conformity(family, 3).expect("conformity check");
        if !report.pass {
            println!("  conformity failure for {family}: {:?}", report.witnesses);
            pass = false;
        }
        // closed-form DOF counts on all levels 1..=5
        for level in 1..=5u32 {
            let mesh = SimplexMesh::generate_square_mesh(NonZeroU32::new(level).unwrap());
            let (v, e, k) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_cells());
            let expected = match family {
                ElementFamily::Hz2Plus => 3 * v + 3 * e + 3 * k,
                ElementFamily::Aw21 => 3 * v + 4 * e,
                ElementFamily::First1 => 3 * v + 3 * e,
            };
            let map = convlab::assembly::build_global_dof_map(&mesh, family).unwrap();
            if map.n_sigma != expected {
                println!("  dof count mismatch {family} level {level}");
                pass = false;
            }
        }
    }
    println!(
        "criterion 5 (conformity, divergence inclusion, dof counts): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_6_infsup_proxy() {
    let mut pass = true;
    for family in ElementFamily::ALL {
        let report = verify::estimate_infsup(4, family).expect("inf-sup estimate");
        if !report.pass {
            println!("  inf-sup failure for {family}: {:?}", report.witnesses);
            pass = false;
        }
    }
    println!(
        "criterion 6 (inf-sup proxy beta > 0, non-degradation): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}
