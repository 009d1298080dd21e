//! Command-line front end: solve, scan, two-bus oracle queries, and
//! HELM-vs-Newton validation, with machine-readable JSON output by default.
//!
//! Exit codes: 0 converged/success, 2 no solution, 3 order budget
//! exhausted, 1 input or usage error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helm_core::caseio::{parse_case, write_pade_dump, write_report, write_series_dump};
use helm_core::network::Network;
use helm_core::oracle::{
    newton_raphson, twobus_branch_points, twobus_closed_form, twobus_pv_closed_form, Branch,
    NrOutcome, TwoBusCase,
};
use helm_core::series::EmbeddingKind;
use helm_core::solver::{
    largest_converged, scan, solve_detailed, ScanPoint, SolveOptions, SolveReport, SolveStatus,
};
use helm_core::num_complex::Complex64;

#[derive(Parser)]
#[command(
    name = "helm",
    version,
    about = "Power-flow solver based on holomorphic embedding and Padé continuation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbeddingArg {
    Minimal,
    Canonical,
}

impl From<EmbeddingArg> for EmbeddingKind {
    fn from(e: EmbeddingArg) -> Self {
        match e {
            EmbeddingArg::Minimal => EmbeddingKind::Minimal,
            EmbeddingArg::Canonical => EmbeddingKind::Canonical,
        }
    }
}

#[derive(Args)]
struct SolveFlags {
    /// Embedding of the power-flow equations
    #[arg(long, value_enum, default_value = "canonical")]
    embedding: EmbeddingArg,
    /// Highest series order before giving up
    #[arg(long, default_value_t = 60)]
    max_order: usize,
    /// Stopping tolerance of the Padé diagonal
    #[arg(long, default_value_t = 1e-10)]
    pade_tol: f64,
    /// Mismatch gate on the original equations
    #[arg(long, default_value_t = 1e-8)]
    mismatch_tol: f64,
}

impl SolveFlags {
    fn options(&self) -> SolveOptions<f64> {
        SolveOptions {
            embedding: self.embedding.into(),
            max_order: self.max_order,
            pade_tol: self.pade_tol,
            mismatch_tol: self.mismatch_tol,
            ..SolveOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a case file and emit a solution report
    Solve {
        case: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Write the voltage/Q series coefficients to a JSON file
        #[arg(long)]
        dump_series: Option<PathBuf>,
        /// Write the Padé diagonal sequences and pole estimates to a JSON file
        #[arg(long)]
        dump_pade: Option<PathBuf>,
        /// Write the report here instead of standard output
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Human-readable table instead of JSON
        #[arg(long)]
        pretty: bool,
    },
    /// Evaluate the continuation on a grid of s values in (0, 1]
    Scan {
        case: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        flags: SolveFlags,
        #[arg(long)]
        pretty: bool,
    },
    /// Closed-form two-bus oracle: branch values and branch points
    #[command(allow_negative_numbers = true)]
    Twobus {
        #[arg(long)]
        sigma_r: f64,
        #[arg(long)]
        sigma_i: f64,
        /// Embedding parameter to evaluate at
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long)]
        pretty: bool,
    },
    /// Closed-form lossless PV two-bus oracle
    #[command(allow_negative_numbers = true)]
    TwobusPv {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        vsp: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long)]
        pretty: bool,
    },
    /// Solve with the embedding method and cross-check against Newton-Raphson
    Validate {
        case: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        #[arg(long)]
        pretty: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {}", e.kind());
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_case(path: &PathBuf) -> Result<Network<f64>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_case::<f64>(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn status_exit(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::NoSolution => 2,
        SolveStatus::OrderBudgetExhausted => 3,
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_pair(z: Complex64) -> String {
    format!("[{},{}]", fmt_real(z.re), fmt_real(z.im))
}

fn fmt_opt(x: f64) -> String {
    if x.is_finite() {
        fmt_real(x)
    } else {
        "null".to_string()
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.cmd {
        Cmd::Solve { case, flags, dump_series, dump_pade, output, pretty } => {
            let net = load_case(&case)?;
            let (report, germ) =
                solve_detailed(&net, &flags.options()).map_err(|e| e.to_string())?;
            if let Some(path) = dump_series {
                fs::write(&path, write_series_dump(&germ, &net))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            if let Some(path) = dump_pade {
                fs::write(&path, write_pade_dump(&report))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let text = if pretty { pretty_report(&report) } else { write_report(&report) };
            match output {
                Some(path) => {
                    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => print!("{text}"),
            }
            Ok(status_exit(report.status))
        }
        Cmd::Scan { case, from, to, steps, flags, pretty } => {
            let net = load_case(&case)?;
            if steps == 0 {
                return Err("scan needs at least one step".into());
            }
            let grid: Vec<f64> = if steps == 1 {
                vec![from]
            } else {
                (0..steps).map(|k| from + (to - from) * k as f64 / (steps - 1) as f64).collect()
            };
            let points =
                scan(&net, &flags.options(), &grid).map_err(|e| e.to_string())?;
            print!("{}", if pretty { pretty_scan(&points) } else { scan_json(&net, &points) });
            Ok(0)
        }
        Cmd::Twobus { sigma_r, sigma_i, s, pretty } => {
            let case = TwoBusCase::<f64>::new(sigma_r, sigma_i);
            let (sm, sp) = twobus_branch_points(&case);
            let up = twobus_closed_form(&case, s, Branch::Plus);
            let um = twobus_closed_form(&case, s, Branch::Minus);
            if pretty {
                println!("sigma = {sigma_r} + {sigma_i}j at s = {s}");
                println!("discriminant  {:+.6}", case.discriminant(s));
                match (up, um) {
                    (Some(a), Some(b)) => {
                        println!("U(+) = {a}");
                        println!("U(-) = {b}");
                    }
                    _ => println!("no power-flow solution at this s"),
                }
                println!("branch points: s- = {sm}, s+ = {sp}");
                println!("feasible at s = 1: {}", sp >= 1.0);
            } else {
                let mut out = String::from("{\n");
                out.push_str(&format!(
                    "  \"sigma\": [{},{}],\n  \"s\": {},\n",
                    fmt_real(sigma_r),
                    fmt_real(sigma_i),
                    fmt_real(s)
                ));
                out.push_str(&format!("  \"discriminant\": {},\n", fmt_real(case.discriminant(s))));
                out.push_str(&format!(
                    "  \"u_plus\": {},\n  \"u_minus\": {},\n",
                    up.map(fmt_pair).unwrap_or_else(|| "null".into()),
                    um.map(fmt_pair).unwrap_or_else(|| "null".into())
                ));
                out.push_str(&format!(
                    "  \"s_minus\": {},\n  \"s_plus\": {},\n",
                    fmt_opt(sm),
                    fmt_opt(sp)
                ));
                out.push_str(&format!("  \"feasible\": {}\n}}\n", sp >= 1.0));
                print!("{out}");
            }
            Ok(0)
        }
        Cmd::TwobusPv { x, p, vsp, s, pretty } => {
            if s <= 0.0 || x <= 0.0 {
                return Err("twobus-pv requires s > 0 and x > 0".into());
            }
            let sol = twobus_pv_closed_form(x, p, vsp, s, Branch::Plus);
            let k = 1.0 + s * (vsp * vsp - 1.0);
            let radicand = k - x * x * s * s * p * p;
            if pretty {
                println!("lossless PV two-bus, x = {x}, P = {p}, vsp = {vsp}, s = {s}");
                match sol {
                    Some((u, q)) => {
                        println!("U = {u}");
                        println!("Q = {q}");
                    }
                    None => println!("no solution: K(s) - x^2 s^2 P^2 = {radicand} < 0"),
                }
            } else {
                let mut out = String::from("{\n");
                out.push_str(&format!(
                    "  \"x\": {}, \"p\": {}, \"vsp\": {}, \"s\": {},\n",
                    fmt_real(x),
                    fmt_real(p),
                    fmt_real(vsp),
                    fmt_real(s)
                ));
                out.push_str(&format!("  \"radicand\": {},\n", fmt_real(radicand)));
                match sol {
                    Some((u, q)) => {
                        out.push_str(&format!(
                            "  \"u\": {},\n  \"q\": {},\n  \"feasible\": true\n}}\n",
                            fmt_pair(u),
                            fmt_real(q)
                        ));
                    }
                    None => out.push_str("  \"u\": null,\n  \"q\": null,\n  \"feasible\": false\n}\n"),
                }
                print!("{out}");
            }
            Ok(0)
        }
        Cmd::Validate { case, flags, pretty } => {
            let net = load_case(&case)?;
            let (report, _) = solve_detailed(&net, &flags.options()).map_err(|e| e.to_string())?;
            let nr = newton_raphson(&net, true).map_err(|e| e.to_string())?;
            let (nr_ok, nr_iters, max_dev) = match &nr {
                NrOutcome::Converged { v, iterations } => {
                    let dev = report
                        .v
                        .iter()
                        .zip(v.iter())
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0f64, f64::max);
                    (true, Some(*iterations), Some(dev))
                }
                NrOutcome::NonConvergence => (false, None, None),
            };
            if pretty {
                println!("embedding method: {:?} at order {}", report.status, report.order_used);
                println!("mismatch norm: {:.3e}", report.mismatch_norm);
                match (nr_ok, nr_iters, max_dev) {
                    (true, Some(it), Some(dev)) => {
                        println!("newton-raphson: converged in {it} iterations");
                        println!("max voltage deviation: {dev:.3e}");
                    }
                    _ => println!("newton-raphson: did not converge from flat start"),
                }
            } else {
                let mut out = String::from("{\n");
                out.push_str(&format!(
                    "  \"helm_status\": \"{}\",\n  \"helm_order\": {},\n  \"helm_mismatch\": {},\n",
                    match report.status {
                        SolveStatus::Converged => "converged",
                        SolveStatus::NoSolution => "no_solution",
                        SolveStatus::OrderBudgetExhausted => "order_budget_exhausted",
                    },
                    report.order_used,
                    fmt_real(report.mismatch_norm)
                ));
                out.push_str(&format!("  \"nr_converged\": {nr_ok},\n"));
                out.push_str(&format!(
                    "  \"nr_iterations\": {},\n",
                    nr_iters.map(|n| n.to_string()).unwrap_or_else(|| "null".into())
                ));
                out.push_str(&format!(
                    "  \"max_voltage_deviation\": {}\n}}\n",
                    max_dev.map(fmt_real).unwrap_or_else(|| "null".into())
                ));
                print!("{out}");
            }
            Ok(status_exit(report.status))
        }
    }
}

fn pretty_report(report: &SolveReport<f64>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "status: {:?}   embedding: {:?}   order: {}   mismatch: {:.3e}\n",
        report.status, report.embedding, report.order_used, report.mismatch_norm
    ));
    out.push_str("bus        v_re          v_im          |v|        angle_deg\n");
    for (&id, v) in report.bus_ids.iter().zip(report.v.iter()) {
        out.push_str(&format!(
            "{id:<6} {:>13.9} {:>13.9} {:>10.6} {:>12.6}\n",
            v.re,
            v.im,
            v.norm(),
            v.arg().to_degrees()
        ));
    }
    if !report.pv_bus_ids.is_empty() {
        out.push_str("pv bus    q_injection\n");
        for (&id, q) in report.pv_bus_ids.iter().zip(report.q_pv.iter()) {
            out.push_str(&format!("{id:<6} {q:>14.9}\n"));
        }
    }
    if !report.pole_estimates.is_empty() {
        out.push_str("nearest pole estimates:\n");
        for p in report.pole_estimates.iter().take(4) {
            out.push_str(&format!("  {:.6} + {:.6}j\n", p.re, p.im));
        }
    }
    out
}

fn scan_json(net: &Network<f64>, points: &[ScanPoint<f64>]) -> String {
    let ids: Vec<u32> = net.buses().iter().map(|b| b.id).collect();
    let mut out = String::from("{\n  \"bus_ids\": [");
    for (k, id) in ids.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&id.to_string());
    }
    out.push_str("],\n  \"points\": [\n");
    for (k, p) in points.iter().enumerate() {
        out.push_str(&format!("    {{\"s\": {}, ", fmt_real(p.s)));
        match &p.values {
            Some(v) => {
                out.push_str("\"converged\": true, \"v\": [");
                for (j, z) in v.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    out.push_str(&fmt_pair(*z));
                }
                out.push_str("]}");
            }
            None => out.push_str("\"converged\": false, \"v\": null}"),
        }
        out.push_str(if k + 1 < points.len() { ",\n" } else { "\n" });
    }
    let largest = largest_converged(points);
    out.push_str(&format!(
        "  ],\n  \"largest_converged_s\": {}\n}}\n",
        largest.map(fmt_real).unwrap_or_else(|| "null".into())
    ));
    out
}

fn pretty_scan(points: &[ScanPoint<f64>]) -> String {
    let mut out = String::from("    s      converged   |v| per bus\n");
    for p in points {
        match &p.values {
            Some(v) => {
                let mags: Vec<String> = v.iter().map(|z| format!("{:.6}", z.norm())).collect();
                out.push_str(&format!("{:>7.3}   yes         {}\n", p.s, mags.join("  ")));
            }
            None => out.push_str(&format!("{:>7.3}   no\n", p.s)),
        }
    }
    if let Some(s) = largest_converged(points) {
        out.push_str(&format!("largest converged s: {s}\n"));
    }
    out
}
