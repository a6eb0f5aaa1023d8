use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::config::{CustomData, ExampleSel, RunConfig};
use super::{build_example, ManufacturedExample};
use crate::error::{Error, Result};
use crate::fe::{assemble_operators, interpolate, FeSpace};
use crate::kkt::{solve_kkt, KktConfig, KktPoint, ProblemData};
use crate::state::NewtonReport;

/// Problem data together with its manufactured solution, when there is one.
#[derive(Clone, Debug)]
pub struct Case {
    pub data: ProblemData,
    pub example: Option<ManufacturedExample>,
}

pub fn build_case(sel: ExampleSel, custom: Option<CustomData>, m: usize, config: KktConfig) -> Result<Case> {
    let space = FeSpace::unit_square(m)?;
    match sel {
        ExampleSel::Manufactured(id) => {
            let ex = build_example(id, &space, config)?;
            Ok(Case {
                data: ex.data.clone(),
                example: Some(ex),
            })
        }
        ExampleSel::Custom => {
            let c = custom.ok_or_else(|| Error::Config("custom data missing".into()))?;
            let ops = Arc::new(assemble_operators(&space)?);
            let f = interpolate(&space, |_, _| c.f)?;
            let y_d = interpolate(&space, |_, _| c.y_d)?;
            Ok(Case {
                data: ProblemData::new(ops, f, y_d, config)?,
                example: None,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    NoConv,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::NoConv => "no_conv",
        }
    }
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub m: usize,
    pub h: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub err_y_rel: Option<f64>,
    pub err_p: Option<f64>,
    pub err_chi_linf: Option<f64>,
    pub newton_iters: Option<usize>,
    pub status: RowStatus,
}

pub const CSV_HEADER: &str = "h,alpha,gamma,err_y_rel,err_p,err_chi_linf,newton_iters,status";

/// Fifteen significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.14e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

impl ExperimentRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt_float(self.h),
            fmt_float(self.alpha),
            fmt_float(self.gamma),
            cell(self.err_y_rel),
            cell(self.err_p),
            cell(self.err_chi_linf),
            self.newton_iters.map(|k| k.to_string()).unwrap_or_default(),
            self.status.as_str()
        )
    }
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::with_capacity(128 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Solves one case and turns the outcome into a table row.
pub fn run_case(case: &Case) -> Result<(ExperimentRow, KktPoint, NewtonReport)> {
    let cfg = case.data.config;
    let m = case.data.ops.space().mesh().m();
    let (pt, rep) = solve_kkt(&case.data)?;
    let mut row = ExperimentRow {
        m,
        h: 1.0 / m as f64,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        err_y_rel: None,
        err_p: None,
        err_chi_linf: None,
        newton_iters: None,
        status: RowStatus::NoConv,
    };
    if rep.converged {
        row.status = RowStatus::Ok;
        row.newton_iters = Some(rep.iterations);
        if let Some(ex) = &case.example {
            let e = ex.errors(&pt)?;
            row.err_y_rel = Some(e.err_y_rel);
            row.err_p = Some(e.err_p);
            row.err_chi_linf = e.err_chi_linf;
        }
    }
    Ok((row, pt, rep))
}

/// One row per `(m, α, γ)`, in configuration order. Non-convergence is a
/// row, not an error.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &m in &cfg.m_list {
        for &alpha in &cfg.alpha_list {
            for gamma in cfg.gammas() {
                let case = build_case(cfg.example, cfg.custom, m, cfg.kkt_config(alpha, gamma)?)?;
                rows.push(run_case(&case)?.0);
            }
        }
    }
    Ok(rows)
}

pub fn sweep_file_name(sel: ExampleSel) -> String {
    match sel {
        ExampleSel::Manufactured(id) => format!("table{id}.csv"),
        ExampleSel::Custom => "table_custom.csv".into(),
    }
}

/// Runs the sweep and writes its CSV into `cfg.output_dir`.
pub fn write_sweep(cfg: &RunConfig) -> Result<(PathBuf, Vec<ExperimentRow>)> {
    let rows = run_sweep(cfg)?;
    let path = cfg.output_dir.join(sweep_file_name(cfg.example));
    write_text(&path, &rows_to_csv(&rows))?;
    Ok((path, rows))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Least-squares slope of `log err` against `log h`.
pub fn estimate_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            found: err.len(),
        });
    }
    if h.len() < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    if h.iter().chain(err).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("entries must be positive and finite".into()));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_exact_power_laws() {
        let h = [0.1, 0.05, 0.025];
        let e2: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((estimate_order(&h, &e2).unwrap() - 2.0).abs() < 1e-12);
        assert!(estimate_order(&h, &[1.0, 1.0, 1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn order_rejects_bad_input() {
        assert!(estimate_order(&[0.1], &[1.0]).is_err());
        assert!(estimate_order(&[0.1, 0.2], &[1.0]).is_err());
        assert!(estimate_order(&[0.1, 0.2], &[1.0, 0.0]).is_err());
        assert!(estimate_order(&[0.1, -0.2], &[1.0, 2.0]).is_err());
        assert!(estimate_order(&[0.1, 0.1], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_formatting() {
        let row = ExperimentRow {
            m: 33,
            h: 1.0 / 33.0,
            alpha: 1e-4,
            gamma: 1e-2,
            err_y_rel: None,
            err_p: None,
            err_chi_linf: None,
            newton_iters: None,
            status: RowStatus::NoConv,
        };
        assert_eq!(
            row.csv_line(),
            "3.03030303030303e-2,1.00000000000000e-4,1.00000000000000e-2,,,,,no_conv"
        );
        let csv = rows_to_csv(&[row]);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn custom_case_has_no_errors() {
        let cfg = RunConfig::from_json(
            r#"{"example": "custom", "m_list": [6], "alpha_list": [1e-2], "gamma_list": [1e-3], "custom": {"f": 20, "y_d": 0.5}}"#,
        )
        .unwrap();
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, RowStatus::Ok);
        assert!(rows[0].err_y_rel.is_none());
    }
}
