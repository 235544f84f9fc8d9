//! Command-line front end: every quantity the library computes is exported
//! as CSV or JSON through one of the subcommands. All floats are printed
//! with 17 significant digits, CSV uses a single header row with `.` as the
//! decimal separator, and JSON reports carry a `schema_version` field, so
//! downstream plotting stays stable. Identical invocations (including
//! `--seed` and `--workers`) produce byte-identical output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss_map::{orbit, phi_monte_carlo_workers};
use crate::hurwitz::{q_bounds, q_constant};
use crate::kuzmin::{fit_decay_rate, grid_of_size, iterate_sequence, phi_iterate, IterateConfig};
use crate::measure::MapParams;
use crate::transfer::TruncationPolicy;
use crate::verify::{run_all, VerifyConfig};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "gauss-lab",
    version,
    about = "Numerical laboratory for generalized Gauss maps and their transfer operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker streams for parallel sections; part of the reproducibility
    /// contract, so outputs are comparable only at equal worker counts.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: u64,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rate constants Q_p with their sandwich bounds over a range of p.
    Rate {
        #[arg(long, default_value_t = 1)]
        p: u64,
        /// Inclusive end of the p range; defaults to --p.
        #[arg(long)]
        p_max: Option<u64>,
        /// Absolute tolerance for each Q_p.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Iterates phi_{p,n} against Phi_p, with a decay-rate fit appended.
    Iterate {
        #[arg(long, default_value_t = 1)]
        p: u64,
        #[arg(long, default_value_t = 20)]
        n_max: u32,
        /// Evaluation grid size (equispaced, endpoints included).
        #[arg(long, default_value_t = 33)]
        grid: usize,
        #[arg(long, default_value_t = 64)]
        degree: usize,
        /// Explicit branch summation bound; defaults to max(40p, 400).
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long, default_value_t = 3)]
        taylor_order: usize,
        #[arg(long, default_value_t = 1e-12)]
        tail_tol: f64,
        /// Residual floor below which iterates are excluded from the fit.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Monte Carlo estimates of phi_{p,n}(x) against the analytic path.
    Montecarlo {
        #[arg(long, default_value_t = 1)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Evaluation points (repeat or comma-separate).
        #[arg(long = "x", value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
        x: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Forward orbit of a point with its digit expansion.
    Orbit {
        #[arg(long, default_value_t = 1)]
        p: u64,
        /// Starting point in [0, 1].
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 32)]
        n: u32,
    },
    /// Run the full invariant suite; exit status reflects overall pass.
    Verify {
        /// Override the fixed-point residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Largest p for the rate-constant sandwich.
        #[arg(long)]
        p_max: Option<u64>,
    },
}

/// Rendered output plus the overall pass flag that drives the exit status.
pub struct Rendered {
    pub text: String,
    pub ok: bool,
}

/// Print a float with 17 significant digits.
fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV field quoting for free-text columns.
fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct JsonFormatter;

impl serde_json::ser::Formatter for JsonFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, JsonFormatter);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Serialize)]
struct RateRow {
    p: u64,
    q_p: f64,
    q_err: f64,
    lower: f64,
    upper: f64,
    pass: bool,
}

fn cmd_rate(p: u64, p_max: Option<u64>, tol: f64, format: Format) -> Result<Rendered> {
    let p_end = p_max.unwrap_or(p);
    if p_end < p {
        return Err(Error::InvalidPolicy(format!(
            "p_max = {p_end} below p = {p}"
        )));
    }
    let rows: Result<Vec<RateRow>> = (p..=p_end)
        .into_par_iter()
        .map(|pv| -> Result<RateRow> {
            let pm = MapParams::new(pv)?;
            let q = q_constant(pm, tol)?;
            let b = q_bounds(pv)?;
            let pass = b.lower < q.value - q.err && q.value + q.err < b.upper && b.upper < 1.0;
            Ok(RateRow {
                p: pv,
                q_p: q.value,
                q_err: q.err,
                lower: b.lower,
                upper: b.upper,
                pass,
            })
        })
        .collect();
    let rows = rows?;
    let ok = rows.iter().all(|r| r.pass);

    let text = match format {
        Format::Csv => {
            let mut s = String::from("p,q_p,q_err,lower,upper,pass\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.p,
                    sig17(r.q_p),
                    sig17(r.q_err),
                    sig17(r.lower),
                    sig17(r.upper),
                    u8::from(r.pass)
                );
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                schema_version: u32,
                command: &'static str,
                rows: &'a [RateRow],
            }
            let mut s = to_json(&Report {
                schema_version: SCHEMA_VERSION,
                command: "rate",
                rows: &rows,
            });
            s.push('\n');
            s
        }
    };
    Ok(Rendered { text, ok })
}

#[allow(clippy::too_many_arguments)]
fn cmd_iterate(
    p: u64,
    n_max: u32,
    grid_size: usize,
    degree: usize,
    k_max: Option<u64>,
    taylor_order: usize,
    tail_tol: f64,
    residual_floor: f64,
    format: Format,
) -> Result<Rendered> {
    let pm = MapParams::new(p)?;
    let mut cfg = IterateConfig::for_p(pm);
    cfg.degree = degree;
    cfg.residual_floor = residual_floor;
    cfg.truncation = TruncationPolicy {
        k_max: k_max.unwrap_or(cfg.truncation.k_max),
        taylor_order,
        tail_tol,
    };
    if grid_size < 2 {
        return Err(Error::InvalidGrid);
    }
    let grid = grid_of_size(grid_size);
    let seq = iterate_sequence(pm, n_max, &grid, &cfg)?;
    // A fit window with too few usable iterates is reported, not fatal.
    let report = if n_max >= 5 {
        match fit_decay_rate(pm, n_max, &grid, &cfg) {
            Ok(r) => Some(r),
            Err(Error::FitWindowTooSmall { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let text = match format {
        Format::Csv => {
            let mut s = String::from("n,sup_delta");
            for x in &grid {
                let _ = write!(s, ",phi@{x}");
            }
            for x in &grid {
                let _ = write!(s, ",delta@{x}");
            }
            s.push('\n');
            for rec in &seq {
                let _ = write!(s, "{},{}", rec.n, sig17(rec.sup_delta));
                for v in &rec.phi {
                    let _ = write!(s, ",{}", sig17(*v));
                }
                for v in &rec.delta {
                    let _ = write!(s, ",{}", sig17(*v));
                }
                s.push('\n');
            }
            s.push('\n');
            #[derive(Serialize)]
            struct Tail<'a> {
                schema_version: u32,
                rate_report: &'a Option<crate::kuzmin::RateReport>,
            }
            let _ = writeln!(
                s,
                "{}",
                to_json(&Tail {
                    schema_version: SCHEMA_VERSION,
                    rate_report: &report,
                })
            );
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                schema_version: u32,
                command: &'static str,
                rows: &'a [crate::kuzmin::IterateRecord],
                rate_report: &'a Option<crate::kuzmin::RateReport>,
            }
            let mut s = to_json(&Report {
                schema_version: SCHEMA_VERSION,
                command: "iterate",
                rows: &seq,
                rate_report: &report,
            });
            s.push('\n');
            s
        }
    };
    Ok(Rendered { text, ok: true })
}

#[derive(Serialize)]
struct McRow {
    x: f64,
    estimate: f64,
    analytic: f64,
    abs_diff: f64,
    tolerance: f64,
    pass: bool,
}

fn cmd_montecarlo(
    p: u64,
    n: u32,
    xs: &[f64],
    samples: u64,
    seed: u64,
    workers: u64,
    format: Format,
) -> Result<Rendered> {
    let pm = MapParams::new(p)?;
    let cfg = IterateConfig::for_p(pm);
    let tolerance = 4.0 / (samples as f64).sqrt();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in xs {
        let analytic = phi_iterate(pm, n, &[x], &cfg)?.phi[0];
        let estimate = phi_monte_carlo_workers(pm, n, x, samples, seed, workers)?;
        let abs_diff = (estimate - analytic).abs();
        rows.push(McRow {
            x,
            estimate,
            analytic,
            abs_diff,
            tolerance,
            pass: abs_diff <= tolerance,
        });
    }
    let ok = rows.iter().all(|r| r.pass);

    let text = match format {
        Format::Csv => {
            let mut s = String::from("x,estimate,analytic,abs_diff,tolerance,pass\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    sig17(r.x),
                    sig17(r.estimate),
                    sig17(r.analytic),
                    sig17(r.abs_diff),
                    sig17(r.tolerance),
                    u8::from(r.pass)
                );
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                schema_version: u32,
                command: &'static str,
                p: u64,
                n: u32,
                samples: u64,
                seed: u64,
                workers: u64,
                rows: &'a [McRow],
            }
            let mut s = to_json(&Report {
                schema_version: SCHEMA_VERSION,
                command: "montecarlo",
                p,
                n,
                samples,
                seed,
                workers,
                rows: &rows,
            });
            s.push('\n');
            s
        }
    };
    Ok(Rendered { text, ok })
}

fn cmd_orbit(p: u64, x0: f64, n: u32, format: Format) -> Result<Rendered> {
    let pm = MapParams::new(p)?;
    let rec = orbit(pm, x0, n)?;
    let text = match format {
        Format::Csv => {
            let mut s = String::from("i,point,digit\n");
            for (i, pt) in rec.points.iter().enumerate() {
                let digit = rec
                    .digits
                    .get(i)
                    .map(|d| d.to_string())
                    .unwrap_or_default();
                let _ = writeln!(s, "{},{},{}", i, sig17(*pt), digit);
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Report {
                schema_version: u32,
                command: &'static str,
                p: u64,
                x0: f64,
                points: Vec<f64>,
                digits: Vec<u64>,
            }
            let mut s = to_json(&Report {
                schema_version: SCHEMA_VERSION,
                command: "orbit",
                p,
                x0: rec.x0,
                points: rec.points,
                digits: rec.digits,
            });
            s.push('\n');
            s
        }
    };
    Ok(Rendered { text, ok: true })
}

fn cmd_verify(tol: Option<f64>, p_max: Option<u64>, format: Format) -> Result<Rendered> {
    let mut cfg = VerifyConfig::default();
    if let Some(t) = tol {
        cfg.fixed_point_tol = t;
    }
    if let Some(pm) = p_max {
        cfg.sandwich_p_max = pm;
    }
    let results = run_all(&cfg);
    let ok = results.iter().all(|r| r.pass);
    let text = match format {
        Format::Csv => {
            let mut s = String::from("name,pass,millis,detail\n");
            for r in &results {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    r.name,
                    u8::from(r.pass),
                    r.millis,
                    csv_quote(&r.detail)
                );
            }
            let _ = writeln!(s, "overall,{},,", u8::from(ok));
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                schema_version: u32,
                command: &'static str,
                overall_pass: bool,
                checks: &'a [crate::verify::CheckResult],
            }
            let mut s = to_json(&Report {
                schema_version: SCHEMA_VERSION,
                command: "verify",
                overall_pass: ok,
                checks: &results,
            });
            s.push('\n');
            s
        }
    };
    Ok(Rendered { text, ok })
}

/// Execute a parsed command; pure except for the work itself.
pub fn execute(cli: &Cli) -> Result<Rendered> {
    if cli.workers == 0 {
        return Err(Error::NoWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers as usize)
        .build()
        .map_err(|e| Error::InvalidPolicy(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Rate { p, p_max, tol } => cmd_rate(*p, *p_max, *tol, cli.format),
        Command::Iterate {
            p,
            n_max,
            grid,
            degree,
            k_max,
            taylor_order,
            tail_tol,
            tol,
        } => cmd_iterate(
            *p,
            *n_max,
            *grid,
            *degree,
            *k_max,
            *taylor_order,
            *tail_tol,
            *tol,
            cli.format,
        ),
        Command::Montecarlo {
            p,
            n,
            x,
            samples,
            seed,
        } => cmd_montecarlo(*p, *n, x, *samples, *seed, cli.workers, cli.format),
        Command::Orbit { p, x, n } => cmd_orbit(*p, *x, *n, cli.format),
        Command::Verify { tol, p_max } => cmd_verify(*tol, *p_max, cli.format),
    })
}

/// Entry point used by the binary: parse, run, write, map to exit status.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(rendered) => {
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, rendered.text.as_bytes()) {
                    eprintln!("gauss-lab: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                let mut stdout = std::io::stdout().lock();
                if stdout.write_all(rendered.text.as_bytes()).is_err() {
                    return ExitCode::from(2);
                }
            }
            if rendered.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("gauss-lab: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_has_17_significant_digits() {
        let s = sig17(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
    }

    #[test]
    fn json_floats_use_the_same_formatting() {
        #[derive(Serialize)]
        struct T {
            v: f64,
        }
        let s = to_json(&T { v: 0.1 });
        assert_eq!(s, "{\"v\":1.0000000000000001e-1}");
    }

    #[test]
    fn rate_command_emits_passing_rows() {
        let r = cmd_rate(1, Some(5), 1e-10, Format::Csv).unwrap();
        assert!(r.ok);
        let lines: Vec<&str> = r.text.lines().collect();
        assert_eq!(lines[0], "p,q_p,q_err,lower,upper,pass");
        assert_eq!(lines.len(), 6);
        // Default tolerance is 1e-10, so eleven significant digits are
        // stable in the Q_1 column.
        assert!(lines[1].starts_with("1,7.5917973947"));
        assert!(lines.iter().skip(1).all(|l| l.ends_with(",1")));
    }

    #[test]
    fn orbit_command_handles_terminating_orbits() {
        let r = cmd_orbit(2, 2.0 / 3.0, 5, Format::Csv).unwrap();
        let lines: Vec<&str> = r.text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",3"));
        assert!(lines[2].ends_with(","));
    }

    #[test]
    fn montecarlo_command_passes_at_default_tolerance() {
        let r = cmd_montecarlo(1, 1, &[0.25, 0.5], 100_000, 42, 1, Format::Csv).unwrap();
        assert!(r.ok, "{}", r.text);
    }
}
