//! Semi-smooth Newton for the discrete optimality system
//!
//! ```text
//! r1 = A y + D max(0, y) + (1/α) M p − M f
//! r2 = A p + D (χ ∘ p) − M (y − y_d)
//! r3 = D (y − prox_γ(y + γ χ))
//! ```
//!
//! The third equation is the proximal form of `χ ∈ ∂max(0, y)`. Newton
//! iterates on `(y, p, χ)` from zero without damping. Where `p_i` vanishes and
//! the prox argument sits in `[0, γ]` the Jacobian loses rank in the `χ_i`
//! column, so those rows are replaced by `Δχ_i = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{FeFunction, FeOperators};
use crate::nonsmooth::{max0, prox_active, prox_unchecked};
use crate::sparse::{assemble_block, norm2, BlockSpec, CsrMatrix, LuFactor};
use crate::state::NewtonReport;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KktConfig {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "default_tol_residual")]
    pub tol_residual: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol_p_critical")]
    pub tol_p_critical: f64,
}

fn default_tol_residual() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    25
}
fn default_tol_p_critical() -> f64 {
    1e-14
}

impl KktConfig {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        let c = Self {
            alpha,
            gamma,
            tol_residual: default_tol_residual(),
            max_iter: default_max_iter(),
            tol_p_critical: default_tol_p_critical(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("gamma", self.gamma)?;
        positive("tol_residual", self.tol_residual)?;
        if !(self.tol_p_critical >= 0.0) {
            return Err(Error::InvalidParameter("tol_p_critical must be >= 0".into()));
        }
        Ok(())
    }
}

/// Discretized data of one optimal control problem.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub ops: Arc<FeOperators>,
    pub f: FeFunction,
    pub y_d: FeFunction,
    pub config: KktConfig,
}

impl ProblemData {
    pub fn new(ops: Arc<FeOperators>, f: FeFunction, y_d: FeFunction, config: KktConfig) -> Result<Self> {
        config.validate()?;
        if f.len() != ops.n() || !f.same_space(&y_d) || **f.space() != **ops.space() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { ops, f, y_d, config })
    }

    pub fn n(&self) -> usize {
        self.ops.n()
    }

    /// Same data with different regularization parameters.
    pub fn with_config(&self, config: KktConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, ..self.clone() })
    }
}

/// State, adjoint, and multiplier.
#[derive(Clone, Debug)]
pub struct KktPoint {
    pub y: FeFunction,
    pub p: FeFunction,
    pub chi: FeFunction,
}

impl KktPoint {
    pub fn zeros(data: &ProblemData) -> Self {
        let z = FeFunction::zeros(data.ops.space());
        Self { y: z.clone(), p: z.clone(), chi: z }
    }

    /// Concatenation `[y; p; χ]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.y.len());
        v.extend_from_slice(self.y.coeffs());
        v.extend_from_slice(self.p.coeffs());
        v.extend_from_slice(self.chi.coeffs());
        v
    }

    fn check(&self, data: &ProblemData) -> Result<()> {
        let n = data.n();
        for g in [&self.y, &self.p, &self.chi] {
            if g.len() != n || !g.same_space(&data.f) {
                return Err(Error::SpaceMismatch);
            }
        }
        Ok(())
    }
}

/// The control `u = −p/α`.
pub fn recover_control(data: &ProblemData, p: &FeFunction) -> FeFunction {
    p.scaled(-1.0 / data.config.alpha)
}

/// Full residual `[r1; r2; r3]` of length `3n`.
pub fn residual(data: &ProblemData, pt: &KktPoint) -> Result<Vec<f64>> {
    pt.check(data)?;
    let n = data.n();
    let ops = &data.ops;
    let KktConfig { alpha, gamma, .. } = data.config;
    let (y, p, chi) = (pt.y.coeffs(), pt.p.coeffs(), pt.chi.coeffs());
    let d = &ops.lumped;

    let ay = ops.stiffness_times(y);
    let mp = ops.mass_times(p);
    let mf = ops.mass_times(data.f.coeffs());
    let ap = ops.stiffness_times(p);
    let diff: Vec<f64> = y.iter().zip(data.y_d.coeffs()).map(|(a, b)| a - b).collect();
    let mdiff = ops.mass_times(&diff);

    let mut r = vec![0.0; 3 * n];
    for i in 0..n {
        r[i] = ay[i] + d[i] * max0(y[i]) + mp[i] / alpha - mf[i];
        r[n + i] = ap[i] + d[i] * chi[i] * p[i] - mdiff[i];
        r[2 * n + i] = d[i] * (y[i] - prox_unchecked(gamma, y[i] + gamma * chi[i]));
    }
    Ok(r)
}

pub fn residual_norm(data: &ProblemData, pt: &KktPoint) -> Result<f64> {
    Ok(norm2(&residual(data, pt)?))
}

/// Index sets steering one Newton step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndexSets {
    /// `y_i > 0`
    pub positive: Vec<bool>,
    /// `y_i + γ χ_i ∉ [0, γ]`
    pub prox_active: Vec<bool>,
    /// Nodes with `|p_i| ≤ tol_p_critical` and inactive prox, in increasing order.
    pub critical: Vec<usize>,
}

pub fn index_sets(data: &ProblemData, pt: &KktPoint) -> IndexSets {
    let gamma = data.config.gamma;
    let tol = data.config.tol_p_critical;
    let (y, p, chi) = (pt.y.coeffs(), pt.p.coeffs(), pt.chi.coeffs());
    let positive = y.iter().map(|&v| v > 0.0).collect();
    let prox_active: Vec<bool> = y
        .iter()
        .zip(chi)
        .map(|(&yi, &ci)| prox_active(gamma, yi + gamma * ci))
        .collect();
    let critical = (0..y.len())
        .filter(|&i| !prox_active[i] && p[i].abs() <= tol)
        .collect();
    IndexSets { positive, prox_active, critical }
}

/// Generalized Jacobian of the residual, before the critical-row fix.
pub fn newton_matrix(data: &ProblemData, pt: &KktPoint, sets: &IndexSets) -> Result<CsrMatrix> {
    pt.check(data)?;
    let n = data.n();
    if sets.positive.len() != n || sets.prox_active.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: sets.positive.len() });
    }
    let ops = &data.ops;
    let d = &ops.lumped;
    let gamma = data.config.gamma;
    let ind = |b: bool| if b { 1.0 } else { 0.0 };

    let pos: Vec<f64> = (0..n).map(|i| d[i] * ind(sets.positive[i])).collect();
    let yy = ops.stiffness.add(&CsrMatrix::from_diagonal(&pos))?;
    let chi_d: Vec<f64> = (0..n).map(|i| d[i] * pt.chi.coeffs()[i]).collect();
    let pp = ops.stiffness.add(&CsrMatrix::from_diagonal(&chi_d))?;
    let p_d: Vec<f64> = (0..n).map(|i| d[i] * pt.p.coeffs()[i]).collect();
    let pc = CsrMatrix::from_diagonal(&p_d);
    let cy = CsrMatrix::from_diagonal(&(0..n).map(|i| d[i] * (1.0 - ind(sets.prox_active[i]))).collect::<Vec<_>>());
    let cc = CsrMatrix::from_diagonal(&(0..n).map(|i| -gamma * d[i] * ind(sets.prox_active[i])).collect::<Vec<_>>());

    let spec = BlockSpec::three_by_three()
        .set(0, 0, &yy, 1.0)
        .set(0, 1, &ops.mass, 1.0 / data.config.alpha)
        .set(1, 0, &ops.mass, -1.0)
        .set(1, 1, &pp, 1.0)
        .set(1, 2, &pc, 1.0)
        .set(2, 0, &cy, 1.0)
        .set(2, 2, &cc, 1.0);
    assemble_block(&spec)
}

/// Replaces the `χ` rows of critical nodes by `Δχ_i = 0`. The matching
/// right-hand side entries are zeroed.
pub fn apply_active_set_fix(
    jac: &CsrMatrix,
    rhs: &mut [f64],
    critical: &[usize],
    n: usize,
) -> Result<CsrMatrix> {
    if jac.n_rows() != 3 * n || rhs.len() != 3 * n {
        return Err(Error::DimensionMismatch { expected: 3 * n, found: rhs.len() });
    }
    let rows: Vec<(usize, usize)> = critical.iter().map(|&i| (2 * n + i, 2 * n + i)).collect();
    for &(r, _) in &rows {
        if r >= 3 * n {
            return Err(Error::IndexOutOfRange { row: r, col: r, n_rows: 3 * n, n_cols: 3 * n });
        }
        rhs[r] = 0.0;
    }
    jac.with_unit_rows(&rows)
}

/// Newton from `(0, 0, 0)`.
pub fn solve_kkt(data: &ProblemData) -> Result<(KktPoint, NewtonReport)> {
    solve_kkt_from(data, KktPoint::zeros(data))
}

/// Newton from a given point. Solver breakdowns and iteration exhaustion are
/// reported through [`NewtonReport`]; only malformed input is an `Err`.
pub fn solve_kkt_from(data: &ProblemData, start: KktPoint) -> Result<(KktPoint, NewtonReport)> {
    start.check(data)?;
    let n = data.n();
    let cfg = data.config;
    let mut pt = start;
    let mut report = NewtonReport::default();
    loop {
        let r = residual(data, &pt)?;
        let res = norm2(&r);
        report.residual_history.push(res);
        if !res.is_finite() {
            report.failure_reason = Some("non-finite residual".into());
            return Ok((pt, report));
        }
        if res < cfg.tol_residual {
            report.converged = true;
            return Ok((pt, report));
        }
        if report.iterations >= cfg.max_iter {
            report.failure_reason = Some(format!("no convergence in {} iterations", cfg.max_iter));
            return Ok((pt, report));
        }
        let sets = index_sets(data, &pt);
        let jac = newton_matrix(data, &pt, &sets)?;
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let jac = apply_active_set_fix(&jac, &mut rhs, &sets.critical, n)?;
        let step = match LuFactor::new(&jac).and_then(|lu| lu.solve(&rhs)) {
            Ok(s) => s,
            Err(e) => {
                report.failure_reason = Some(format!("linear solve failed: {e}"));
                return Ok((pt, report));
            }
        };
        let (dy, rest) = step.split_at(n);
        let (dp, dc) = rest.split_at(n);
        pt = KktPoint {
            y: add(&pt.y, dy)?,
            p: add(&pt.p, dp)?,
            chi: add(&pt.chi, dc)?,
        };
        report.iterations += 1;
    }
}

fn add(a: &FeFunction, d: &[f64]) -> Result<FeFunction> {
    a.with_coeffs(a.coeffs().iter().zip(d).map(|(x, y)| x + y).collect())
}
