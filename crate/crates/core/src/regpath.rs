//! Smoothed optimality systems and continuation in the smoothing parameter.
//!
//! For `ε > 0` the non-smooth `max` is replaced by the C¹ spline `max_ε`, and
//! the coupled system
//!
//! ```text
//! A y + D max_ε(y) + (1/α) M p = M f
//! A p + D (max_ε′(y) ∘ p)      = M (y − y_d)
//! ```
//!
//! is solved by Newton. Driving `ε → 0` with warm starts yields a point of
//! the limit system with `χ = max_ε′(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::FeFunction;
use crate::kkt::{residual_norm, KktPoint, ProblemData};
use crate::nonsmooth::{smoothed_max, smoothed_max_prime, smoothed_max_second, SmoothedMaxParams};
use crate::sparse::{assemble_block, norm2, BlockSpec, CsrMatrix, LuFactor};
use crate::state::{solve_state, solve_state_regularized, NewtonReport, StateProblem};

/// Stopping rule of each inner Newton solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerTolerances {
    pub tol_residual: f64,
    pub max_iter: usize,
}

impl Default for InnerTolerances {
    fn default() -> Self {
        Self {
            tol_residual: 1e-12,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegPathConfig {
    pub eps_schedule: Vec<f64>,
    #[serde(default)]
    pub inner: InnerTolerances,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn yes() -> bool {
    true
}

/// `1e-1, 1e-2, …, 1e-6`
pub fn default_schedule() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

impl Default for RegPathConfig {
    fn default() -> Self {
        Self {
            eps_schedule: default_schedule(),
            inner: InnerTolerances::default(),
            warm_start: true,
        }
    }
}

impl RegPathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty() {
            return Err(Error::InvalidParameter("empty eps schedule".into()));
        }
        if self.eps_schedule.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidParameter("eps values must be positive and finite".into()));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("eps schedule must be strictly decreasing".into()));
        }
        if !(self.inner.tol_residual > 0.0) {
            return Err(Error::InvalidParameter("inner tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// `χ_ε = max_ε′(y)` nodally.
pub fn chi_eps(y: &FeFunction, eps: f64) -> Result<FeFunction> {
    let p = SmoothedMaxParams::new(eps)?;
    Ok(y.map(|v| smoothed_max_prime(p, v)))
}

fn smoothed_residual(data: &ProblemData, prm: SmoothedMaxParams, y: &[f64], p: &[f64]) -> Vec<f64> {
    let ops = &data.ops;
    let n = data.n();
    let d = &ops.lumped;
    let alpha = data.config.alpha;
    let ay = ops.stiffness_times(y);
    let mp = ops.mass_times(p);
    let mf = ops.mass_times(data.f.coeffs());
    let ap = ops.stiffness_times(p);
    let diff: Vec<f64> = y.iter().zip(data.y_d.coeffs()).map(|(a, b)| a - b).collect();
    let md = ops.mass_times(&diff);
    let mut r = vec![0.0; 2 * n];
    for i in 0..n {
        r[i] = ay[i] + d[i] * smoothed_max(prm, y[i]) + mp[i] / alpha - mf[i];
        r[n + i] = ap[i] + d[i] * smoothed_max_prime(prm, y[i]) * p[i] - md[i];
    }
    r
}

fn smoothed_jacobian(data: &ProblemData, prm: SmoothedMaxParams, y: &[f64], p: &[f64]) -> Result<CsrMatrix> {
    let ops = &data.ops;
    let n = data.n();
    let d = &ops.lumped;
    let slope: Vec<f64> = (0..n).map(|i| d[i] * smoothed_max_prime(prm, y[i])).collect();
    let diag = ops.stiffness.add(&CsrMatrix::from_diagonal(&slope))?;
    let curv: Vec<f64> = (0..n).map(|i| d[i] * smoothed_max_second(prm, y[i]) * p[i]).collect();
    let lower = ops.mass.scaled(-1.0).add(&CsrMatrix::from_diagonal(&curv))?;
    let spec = BlockSpec::new(2, 2)
        .set(0, 0, &diag, 1.0)
        .set(0, 1, &ops.mass, 1.0 / data.config.alpha)
        .set(1, 0, &lower, 1.0)
        .set(1, 1, &diag, 1.0);
    assemble_block(&spec)
}

/// Newton on the smoothed system from `init = (y, p)`.
pub fn solve_regularized_kkt(
    data: &ProblemData,
    eps: f64,
    init: (&FeFunction, &FeFunction),
) -> Result<((FeFunction, FeFunction), NewtonReport)> {
    solve_regularized_kkt_with(data, eps, init, InnerTolerances::default())
}

pub fn solve_regularized_kkt_with(
    data: &ProblemData,
    eps: f64,
    init: (&FeFunction, &FeFunction),
    inner: InnerTolerances,
) -> Result<((FeFunction, FeFunction), NewtonReport)> {
    let prm = SmoothedMaxParams::new(eps)?;
    let n = data.n();
    if init.0.len() != n || init.1.len() != n || !init.0.same_space(&data.f) || !init.1.same_space(&data.f) {
        return Err(Error::SpaceMismatch);
    }
    let mut y = init.0.coeffs().to_vec();
    let mut p = init.1.coeffs().to_vec();
    let mut report = NewtonReport::default();
    loop {
        let r = smoothed_residual(data, prm, &y, &p);
        let res = norm2(&r);
        report.residual_history.push(res);
        if !res.is_finite() {
            report.failure_reason = Some("non-finite residual".into());
            break;
        }
        if res <= inner.tol_residual {
            report.converged = true;
            break;
        }
        if report.iterations >= inner.max_iter {
            report.failure_reason = Some(format!("no convergence in {} iterations", inner.max_iter));
            break;
        }
        let step = smoothed_jacobian(data, prm, &y, &p).and_then(|j| LuFactor::new(&j)?.solve(&r));
        match step {
            Ok(s) => {
                y.iter_mut().zip(&s[..n]).for_each(|(a, b)| *a -= b);
                p.iter_mut().zip(&s[n..]).for_each(|(a, b)| *a -= b);
            }
            Err(e) => {
                report.failure_reason = Some(format!("linear solve failed: {e}"));
                break;
            }
        }
        report.iterations += 1;
    }
    Ok(((data.f.with_coeffs(y)?, data.f.with_coeffs(p)?), report))
}

/// Telemetry of one schedule entry.
#[derive(Clone, Debug, Serialize)]
pub struct PathStep {
    pub eps: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Whether the warm-started solve failed and this entry was re-solved from zero.
    pub cold_restart: bool,
    pub smoothed_residual: Option<f64>,
    /// Residual of the non-smooth limit system at `(y, p, max_ε′(y))`.
    pub limit_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathReport {
    pub steps: Vec<PathStep>,
    /// Set when an entry failed after its cold restart.
    pub aborted: bool,
}

impl PathReport {
    pub fn limit_residuals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.limit_residual).collect()
    }

    /// Fraction of consecutive pairs along which the limit residual does not increase.
    pub fn monotone_fraction(&self) -> f64 {
        let r = self.limit_residuals();
        if r.len() < 2 {
            return 1.0;
        }
        let ok = r.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / (r.len() - 1) as f64
    }
}

/// Runs the schedule, packaging the last converged iterate as a limit point
/// `(y, p, max_ε′(y))`. A failed entry is retried once from zero; a second
/// failure ends the path.
pub fn run_path(data: &ProblemData, cfg: &RegPathConfig) -> Result<(KktPoint, PathReport)> {
    cfg.validate()?;
    let zero = FeFunction::zeros(data.ops.space());
    let mut current = (zero.clone(), zero.clone());
    let mut best: Option<KktPoint> = None;
    let mut steps = Vec::with_capacity(cfg.eps_schedule.len());
    let mut aborted = false;

    for &eps in &cfg.eps_schedule {
        let start = if cfg.warm_start { (&current.0, &current.1) } else { (&zero, &zero) };
        let (mut sol, mut rep) = solve_regularized_kkt_with(data, eps, start, cfg.inner)?;
        let mut cold_restart = false;
        if !rep.converged && cfg.warm_start {
            cold_restart = true;
            (sol, rep) = solve_regularized_kkt_with(data, eps, (&zero, &zero), cfg.inner)?;
        }
        let pt = KktPoint {
            chi: chi_eps(&sol.0, eps)?,
            y: sol.0.clone(),
            p: sol.1.clone(),
        };
        steps.push(PathStep {
            eps,
            converged: rep.converged,
            iterations: rep.iterations,
            cold_restart,
            smoothed_residual: rep.final_residual(),
            limit_residual: residual_norm(data, &pt)?,
        });
        if !rep.converged {
            aborted = true;
            break;
        }
        current = sol;
        best = Some(pt);
    }
    let point = best.unwrap_or_else(|| KktPoint::zeros(data));
    Ok((point, PathReport { steps, aborted }))
}

/// Fitted rate of `‖S_ε(u) − S(u)‖_{L²}` in `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaRate {
    pub eps: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Least-squares slope in log–log scale; `None` if some gap vanishes.
    pub slope: Option<f64>,
}

impl LemmaRate {
    pub fn degenerate(&self) -> bool {
        self.slope.is_none()
    }
}

pub fn verify_lemma_rate(prob: &StateProblem, u: &FeFunction, eps_list: &[f64]) -> Result<LemmaRate> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidParameter("need at least three eps values".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("eps values must be positive".into()));
    }
    let (lo, hi) = eps_list
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter("eps values must span at least two decades".into()));
    }
    let (y, rep) = solve_state(prob, u)?;
    if !rep.converged {
        return Err(Error::Solver("state solve did not converge".into()));
    }
    let mut gaps = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (ye, rep) = solve_state_regularized(prob, u, eps)?;
        if !rep.converged {
            return Err(Error::Solver(format!("smoothed state solve did not converge for eps = {eps}")));
        }
        gaps.push(prob.ops.l2_norm(&ye.sub(&y)?));
    }
    let slope = if gaps.iter().all(|&g| g > 0.0) {
        Some(crate::harness::estimate_order(eps_list, &gaps)?)
    } else {
        None
    };
    Ok(LemmaRate {
        eps: eps_list.to_vec(),
        gaps,
        slope,
    })
}
