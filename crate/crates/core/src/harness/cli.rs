//! Command-line front end. Exit codes: 0 success, 1 solver or check failure,
//! 2 configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use super::config::{ExampleSel, Mode, RunConfig};
use super::selftest::run_selftest;
use super::sweep::{build_case, rows_to_csv, run_case, write_sweep, write_text, Case};
use crate::error::{Error, Result};
use crate::fe::{vtk, FeFunction};
use crate::kkt::{recover_control, solve_kkt};
use crate::regpath::{run_path, PathReport};
use crate::state::{solve_state, NewtonReport, StateProblem};
use crate::stationarity::{run_all_checks, CheckTolerances, StationarityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nsctl", version, about = "Optimal control of -Δy + max(0, y) = u + f")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// 1, 2, or custom
    #[arg(long, global = true)]
    pub example: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Used when no subcommand is given
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Cells per side (repeatable, replaces the configured list)
    #[arg(long, global = true)]
    pub m: Vec<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Forward solve with the exact control of the example (zero for custom data)
    State,
    /// Semi-smooth Newton on the optimality system, with VTK output
    Kkt,
    /// Smoothing continuation compared with the direct solve
    Regpath,
    /// Stationarity diagnostics at the computed point
    Check,
    /// Results table as CSV
    Sweep,
    /// Built-in property checks
    Selftest,
}

impl Command {
    fn mode(self) -> Option<Mode> {
        match self {
            Command::State => Some(Mode::State),
            Command::Kkt => Some(Mode::Kkt),
            Command::Regpath => Some(Mode::Regpath),
            Command::Check => Some(Mode::Check),
            Command::Sweep => Some(Mode::Sweep),
            Command::Selftest => None,
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    if matches!(cli.command, Some(Command::Selftest)) {
        return selftest();
    }
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let result = match cfg.mode {
        Mode::State => state(&cfg),
        Mode::Kkt => kkt(&cfg),
        Mode::Regpath => regpath(&cfg),
        Mode::Check => check(&cfg),
        Mode::Sweep => sweep(&cfg),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Loads the configuration file (if any) and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
            other => other,
        })?,
        None => {
            let ex = cli
                .example
                .as_deref()
                .ok_or_else(|| Error::Config("either --config or --example is required".into()))?;
            RunConfig::for_example(ex.parse()?)
        }
    };
    if let Some(ex) = &cli.example {
        cfg.example = ex.parse::<ExampleSel>()?;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(mode) = cli.command.and_then(Command::mode).or(cli.mode) {
        cfg.mode = mode;
    }
    if !cli.m.is_empty() {
        cfg.m_list = cli.m.clone();
    }
    if !cli.alpha.is_empty() {
        cfg.alpha_list = cli.alpha.clone();
    }
    if !cli.gamma.is_empty() {
        cfg.gamma_list = Some(cli.gamma.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cases(cfg: &RunConfig) -> Result<Vec<Case>> {
    let mut out = Vec::new();
    for &m in &cfg.m_list {
        for &alpha in &cfg.alpha_list {
            for gamma in cfg.gammas() {
                out.push(build_case(cfg.example, cfg.custom, m, cfg.kkt_config(alpha, gamma)?)?);
            }
        }
    }
    Ok(out)
}

fn tag(case: &Case) -> String {
    let c = case.data.config;
    format!("m{}_a{:e}_g{:e}", case.data.ops.space().mesh().m(), c.alpha, c.gamma)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Solver(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

#[derive(Serialize)]
struct StateEntry {
    m: usize,
    report: NewtonReport,
    err_y_rel: Option<f64>,
}

fn state(cfg: &RunConfig) -> Result<bool> {
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for case in cases(cfg)? {
        let m = case.data.ops.space().mesh().m();
        if !seen.insert(m) {
            continue;
        }
        let prob = StateProblem::new(case.data.ops.clone(), case.data.f.clone())?;
        let u = match &case.example {
            Some(ex) => ex.u_exact.clone(),
            None => FeFunction::zeros(case.data.ops.space()),
        };
        let (y, report) = solve_state(&prob, &u)?;
        let err_y_rel = case.example.as_ref().map(|ex| {
            let ops = &case.data.ops;
            ops.l2_norm(&y.sub(&ex.y_exact).expect("same space")) / ops.l2_norm(&ex.y_exact)
        });
        println!(
            "state m={m}: converged={} iterations={} err_y_rel={}",
            report.converged,
            report.iterations,
            err_y_rel.map(|e| format!("{e:.6e}")).unwrap_or_else(|| "-".into())
        );
        vtk::write_fields(cfg.output_dir.join(format!("state_m{m}.vtk")), "state", &[("y", &y), ("u", &u)])?;
        entries.push(StateEntry { m, report, err_y_rel });
    }
    write_json(&cfg.output_dir.join("state_report.json"), &entries)?;
    Ok(entries.iter().all(|e| e.report.converged))
}

#[derive(Serialize)]
struct KktEntry {
    row: super::ExperimentRow,
    report: NewtonReport,
}

fn kkt(cfg: &RunConfig) -> Result<bool> {
    let mut entries = Vec::new();
    for case in cases(cfg)? {
        let (row, pt, report) = run_case(&case)?;
        println!("kkt {}: {}", tag(&case), row.csv_line());
        if report.converged {
            let u = recover_control(&case.data, &pt.p);
            vtk::write_fields(
                cfg.output_dir.join(format!("kkt_{}.vtk", tag(&case))),
                "kkt solution",
                &[("y", &pt.y), ("p", &pt.p), ("chi", &pt.chi), ("u", &u)],
            )?;
        }
        entries.push(KktEntry { row, report });
    }
    write_json(&cfg.output_dir.join("kkt_report.json"), &entries)?;
    let rows: Vec<_> = entries.iter().map(|e| e.row.clone()).collect();
    write_text(&cfg.output_dir.join("kkt.csv"), &rows_to_csv(&rows))?;
    Ok(entries.iter().all(|e| e.report.converged))
}

#[derive(Serialize)]
struct PathEntry {
    m: usize,
    alpha: f64,
    gamma: f64,
    path: PathReport,
    /// L² distances of the final path point to the direct solve, when it converges.
    distance_y: Option<f64>,
    distance_p: Option<f64>,
}

fn regpath(cfg: &RunConfig) -> Result<bool> {
    let rcfg = cfg.regpath_config();
    let mut entries = Vec::new();
    let mut csv = String::from("m,alpha,gamma,eps,converged,iterations,cold_restart,smoothed_residual,limit_residual\n");
    for case in cases(cfg)? {
        let (pt, path) = run_path(&case.data, &rcfg)?;
        let (direct, rep) = solve_kkt(&case.data)?;
        let ops = &case.data.ops;
        let (distance_y, distance_p) = if rep.converged {
            (
                Some(ops.l2_norm(&pt.y.sub(&direct.y)?)),
                Some(ops.l2_norm(&pt.p.sub(&direct.p)?)),
            )
        } else {
            (None, None)
        };
        let c = case.data.config;
        let m = ops.space().mesh().m();
        for s in &path.steps {
            csv.push_str(&format!(
                "{m},{},{},{},{},{},{},{},{}\n",
                super::fmt_float(c.alpha),
                super::fmt_float(c.gamma),
                super::fmt_float(s.eps),
                s.converged,
                s.iterations,
                s.cold_restart,
                s.smoothed_residual.map(super::fmt_float).unwrap_or_default(),
                super::fmt_float(s.limit_residual)
            ));
        }
        println!(
            "regpath {}: aborted={} final limit residual={:.3e} distance to direct solve y={} p={}",
            tag(&case),
            path.aborted,
            path.steps.last().map(|s| s.limit_residual).unwrap_or(f64::NAN),
            distance_y.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "-".into()),
            distance_p.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "-".into()),
        );
        entries.push(PathEntry {
            m,
            alpha: c.alpha,
            gamma: c.gamma,
            path,
            distance_y,
            distance_p,
        });
    }
    write_text(&cfg.output_dir.join("regpath.csv"), &csv)?;
    write_json(&cfg.output_dir.join("regpath_report.json"), &entries)?;
    Ok(entries.iter().all(|e| !e.path.aborted))
}

#[derive(Serialize)]
struct CheckEntry {
    m: usize,
    alpha: f64,
    gamma: f64,
    solver: NewtonReport,
    checks: Option<StationarityReport>,
}

fn check(cfg: &RunConfig) -> Result<bool> {
    let mut tol = CheckTolerances::default();
    let t = cfg.tolerances;
    tol.zero_tol = t.zero_tol.unwrap_or(tol.zero_tol);
    tol.sign_tol = t.sign_tol.unwrap_or(tol.sign_tol);
    tol.stationarity_tol = t.stationarity_tol.unwrap_or(tol.stationarity_tol);
    let mut entries = Vec::new();
    let mut ok = true;
    for case in cases(cfg)? {
        let (pt, solver) = solve_kkt(&case.data)?;
        let checks = if solver.converged {
            Some(run_all_checks(&case.data, &pt, tol)?)
        } else {
            None
        };
        let verdict = match &checks {
            None => "solver failed".to_string(),
            Some(r) => format!(
                "chi_admissible={} limit_residual={:.3e} strong_sign={} primal={} (min {:.3e})",
                r.chi_admissible.passed,
                r.limit_residual,
                r.strong_sign.passed,
                r.primal.passed,
                r.primal.min_value
            ),
        };
        println!("check {}: {verdict}", tag(&case));
        ok &= checks.as_ref().is_some_and(StationarityReport::all_passed);
        let c = case.data.config;
        entries.push(CheckEntry {
            m: case.data.ops.space().mesh().m(),
            alpha: c.alpha,
            gamma: c.gamma,
            solver,
            checks,
        });
    }
    write_json(&cfg.output_dir.join("check_report.json"), &entries)?;
    Ok(ok)
}

fn sweep(cfg: &RunConfig) -> Result<bool> {
    let (path, rows) = write_sweep(cfg)?;
    print!("{}", rows_to_csv(&rows));
    println!("wrote {}", path.display());
    Ok(true)
}

fn selftest() -> i32 {
    let outcomes = run_selftest();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
