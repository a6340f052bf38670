//! Convergence-lab CLI: run the manufactured-solution studies, the
//! verification suite, and element catalog dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convlab::assembly::{element_catalog, ElementFamily};
use convlab::convergence::{emit_report, run_convergence, ReportFormat, RunOptions};
use convlab::verify::run_suite;

#[derive(Parser)]
#[command(name = "convlab", version, about = "Mixed stress elements on simplicial grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and emit the error table.
    Run {
        /// Element family: hz2plus, aw21 or first1.
        #[arg(long)]
        element: String,
        /// Finest refinement level (1..=6).
        #[arg(long, default_value_t = 5)]
        levels: u32,
        /// Quadrature degree for error norms and loads (>= 12).
        #[arg(long, default_value_t = 12)]
        quad_degree: usize,
        /// Output format: csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the algebraic verification suite.
    Verify {
        /// Only run checks whose name contains this substring.
        #[arg(long)]
        filter: Option<String>,
        /// Write the full JSON report here.
        #[arg(long)]
        json: Option<String>,
    },
    /// Print the element catalog for a family.
    DumpElement {
        #[arg(long)]
        element: String,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() {
    let par = match std::env::var("CONVLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(0) | Some(1) | None => faer::Par::Seq,
        Some(n) => faer::Par::rayon(n),
    };
    faer::set_global_parallelism(par);
}

fn dispatch(cli: Cli) -> convlab::Result<ExitCode> {
    match cli.command {
        Command::Run {
            element,
            levels,
            quad_degree,
            format,
            out,
        } => {
            let family: ElementFamily = element.parse()?;
            let format: ReportFormat = format.parse()?;
            let opts = RunOptions {
                quad_degree_norms: quad_degree,
                ..RunOptions::default()
            };
            let report = run_convergence(family, levels, &opts)?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    emit_report(&report, format, &mut w)?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut w = stdout.lock();
                    emit_report(&report, format, &mut w)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { filter, json } => {
            let reports = run_suite(filter.as_deref(), 200)?;
            let mut failed = 0usize;
            for r in &reports {
                let status = if r.pass { "pass" } else { "FAIL" };
                println!("[{status}] {} ({})", r.name, r.params);
                if !r.pass {
                    failed += 1;
                    for (label, got, expected) in &r.witnesses {
                        println!("        {label}: {got} (expected {expected})");
                    }
                }
            }
            println!("{} checks, {} failed", reports.len(), failed);
            if let Some(path) = json {
                let mut w = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut w, &reports)
                    .map_err(|e| convlab::Error::Validation(format!("json write failed: {e}")))?;
                w.write_all(b"\n")?;
            }
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::DumpElement { element } => {
            let family: ElementFamily = element.parse()?;
            print!("{}", element_catalog(family)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
