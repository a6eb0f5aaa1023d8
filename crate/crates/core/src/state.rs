//! Discrete control-to-state map and its derivatives.
//!
//! All equations here have the form `A y + D φ(y) = b` with a componentwise,
//! monotone, piecewise smooth `φ`. They are solved by semi-smooth Newton with
//! the generalized Jacobian `A + D diag(φ′(y))`, started at zero.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::{FeFunction, FeOperators};
use crate::nonsmooth::{max0, smoothed_max, smoothed_max_prime, SmoothedMaxParams};
use crate::sparse::{norm2, CsrMatrix, LuFactor};

/// Absolute nodal band used to decide membership in `{y = 0}`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;
const MAX_ITER: usize = 50;
const REL_TOL: f64 = 1e-12;

/// The state equation `-Δy + max(0, y) = u + f` on a fixed discretization.
#[derive(Clone, Debug)]
pub struct StateProblem {
    pub ops: Arc<FeOperators>,
    pub f: FeFunction,
}

impl StateProblem {
    pub fn new(ops: Arc<FeOperators>, f: FeFunction) -> Result<Self> {
        if !Arc::ptr_eq(ops.space(), f.space()) && **ops.space() != **f.space() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { ops, f })
    }

    /// Problem with `f = 0`.
    pub fn homogeneous(ops: Arc<FeOperators>) -> Self {
        let f = FeFunction::zeros(ops.space());
        Self { ops, f }
    }

    fn check(&self, g: &FeFunction) -> Result<()> {
        self.f.check_same_space(g)
    }

    /// `M (u + f)`
    fn load(&self, u: &FeFunction) -> Vec<f64> {
        let s: Vec<f64> = u.coeffs().iter().zip(self.f.coeffs()).map(|(a, b)| a + b).collect();
        self.ops.mass_times(&s)
    }
}

/// Convergence telemetry of a Newton-type solve.
#[derive(Clone, Debug, Default, Serialize)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub failure_reason: Option<String>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}

/// Semi-smooth Newton for `A y + D φ(y) = b` where `phi(i, y_i)` returns the
/// pair `(φ_i(y_i), φ_i′(y_i))`.
fn newton_lumped(
    ops: &FeOperators,
    rhs: &[f64],
    phi: impl Fn(usize, f64) -> (f64, f64),
) -> (Vec<f64>, NewtonReport) {
    let n = ops.n();
    let tol = REL_TOL * norm2(rhs).max(1.0);
    let mut y = vec![0.0; n];
    let mut report = NewtonReport::default();
    let a = &ops.stiffness;
    let d = &ops.lumped;
    let mut r = vec![0.0; n];
    loop {
        a.spmv_into(&y, &mut r);
        let mut slope = vec![0.0; n];
        for i in 0..n {
            let (v, dv) = phi(i, y[i]);
            r[i] += d[i] * v - rhs[i];
            slope[i] = d[i] * dv;
        }
        let res = norm2(&r);
        report.residual_history.push(res);
        if res <= tol {
            report.converged = true;
            return (y, report);
        }
        if report.iterations == MAX_ITER {
            report.failure_reason = Some(format!("no convergence in {MAX_ITER} iterations"));
            return (y, report);
        }
        let jac = match a.add(&CsrMatrix::from_diagonal(&slope)) {
            Ok(j) => j,
            Err(e) => {
                report.failure_reason = Some(e.to_string());
                return (y, report);
            }
        };
        let step = LuFactor::new(&jac).and_then(|lu| lu.solve(&r));
        match step {
            Ok(dy) => y.iter_mut().zip(&dy).for_each(|(yi, di)| *yi -= di),
            Err(e) => {
                report.failure_reason = Some(e.to_string());
                return (y, report);
            }
        }
        report.iterations += 1;
    }
}

fn solved(space_of: &FeFunction, (y, report): (Vec<f64>, NewtonReport)) -> Result<(FeFunction, NewtonReport)> {
    Ok((space_of.with_coeffs(y)?, report))
}

/// Forward map `u ↦ y` solving `A y + D max(0, y) = M (u + f)`.
pub fn solve_state(prob: &StateProblem, u: &FeFunction) -> Result<(FeFunction, NewtonReport)> {
    prob.check(u)?;
    let rhs = prob.load(u);
    let out = newton_lumped(&prob.ops, &rhs, |_, y| {
        (max0(y), if y > 0.0 { 1.0 } else { 0.0 })
    });
    solved(u, out)
}

/// Smoothed forward map solving `A y + D max_ε(y) = M (u + f)`.
pub fn solve_state_regularized(
    prob: &StateProblem,
    u: &FeFunction,
    eps: f64,
) -> Result<(FeFunction, NewtonReport)> {
    prob.check(u)?;
    let p = SmoothedMaxParams::new(eps)?;
    let rhs = prob.load(u);
    let out = newton_lumped(&prob.ops, &rhs, |_, y| {
        (smoothed_max(p, y), smoothed_max_prime(p, y))
    });
    solved(u, out)
}

/// Directional derivative `δ = S′(u; h)` at the state `y = S(u)`:
/// `A δ + D (1_{y=0} max(0, δ) + 1_{y>0} δ) = M h`, with `{y = 0}` taken as
/// `|y_i| ≤ zero_tol`.
pub fn directional_derivative(
    prob: &StateProblem,
    y: &FeFunction,
    h: &FeFunction,
    zero_tol: f64,
) -> Result<(FeFunction, NewtonReport)> {
    prob.check(y)?;
    prob.check(h)?;
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("zero_tol must be >= 0, got {zero_tol}")));
    }
    let rhs = prob.ops.mass_times(h.coeffs());
    let yc = y.coeffs();
    let out = newton_lumped(&prob.ops, &rhs, |i, d| {
        if yc[i].abs() <= zero_tol {
            (max0(d), if d > 0.0 { 1.0 } else { 0.0 })
        } else if yc[i] > zero_tol {
            (d, 1.0)
        } else {
            (0.0, 0.0)
        }
    });
    solved(h, out)
}

/// Fraction of interior nodes in the zero band `|y_i| ≤ zero_tol`.
pub fn gateaux_zero_fraction(y: &FeFunction, zero_tol: f64) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let zeros = y.coeffs().iter().filter(|v| v.abs() <= zero_tol).count();
    zeros as f64 / y.len() as f64
}

/// Solution operator of `-Δη + χ η = h`, discretized as
/// `(A + D diag(χ)) η = M h`. Rejects `χ` outside `[0, 1]`.
pub fn apply_gchi(ops: &FeOperators, chi: &FeFunction, h: &FeFunction) -> Result<FeFunction> {
    chi.check_same_space(h)?;
    if chi.len() != ops.n() {
        return Err(Error::SpaceMismatch);
    }
    for (node, &c) in chi.coeffs().iter().enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InadmissibleChi { node, value: c });
        }
    }
    let d: Vec<f64> = ops.lumped.iter().zip(chi.coeffs()).map(|(a, b)| a * b).collect();
    let mat = ops.stiffness.add(&CsrMatrix::from_diagonal(&d))?;
    let eta = LuFactor::new(&mat)?.solve(&ops.mass_times(h.coeffs()))?;
    h.with_coeffs(eta)
}

/// Control producing a prescribed discrete state:
/// `u = M⁻¹ (A y + D max(0, y)) − f`.
pub fn control_for_state(prob: &StateProblem, y: &FeFunction) -> Result<FeFunction> {
    prob.check(y)?;
    let ops = &prob.ops;
    let mut lhs = ops.stiffness_times(y.coeffs());
    for (i, v) in lhs.iter_mut().enumerate() {
        *v += ops.lumped[i] * max0(y.coeffs()[i]);
    }
    let w = LuFactor::new(&ops.mass)?.solve(&lhs)?;
    y.with_coeffs(w.iter().zip(prob.f.coeffs()).map(|(a, b)| a - b).collect())
}

fn require_converged(what: &str, report: &NewtonReport) -> Result<()> {
    if report.converged {
        Ok(())
    } else {
        Err(Error::Solver(format!(
            "{what} did not converge: {}",
            report.failure_reason.as_deref().unwrap_or("unknown")
        )))
    }
}

/// Outcome of comparing difference quotients against the directional derivative.
#[derive(Clone, Debug, Serialize)]
pub struct FdReport {
    pub steps: Vec<f64>,
    /// `‖(S(u + t h) − S(u))/t − δ_h‖_{L²}` for each step.
    pub errors: Vec<f64>,
    pub derivative_norm: f64,
    /// Errors below this level count as converged when judging the trend.
    pub floor: f64,
    pub monotone: bool,
    pub final_within_tol: bool,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.final_within_tol
    }
}

/// Difference quotients of `S` along `h` for decreasing steps.
///
/// The trend is non-increasing if every error is at most 1.1 times its
/// predecessor, ignoring errors already below `1e-8 (1 + ‖δ‖)` where round-off
/// in the quotient dominates.
pub fn finite_difference_check(
    prob: &StateProblem,
    u: &FeFunction,
    h: &FeFunction,
    steps: &[f64],
) -> Result<FdReport> {
    if steps.is_empty() || steps.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("steps must be positive and non-empty".into()));
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("steps must be decreasing".into()));
    }
    let (y, rep) = solve_state(prob, u)?;
    require_converged("state solve", &rep)?;
    let (delta, rep) = directional_derivative(prob, &y, h, DEFAULT_ZERO_TOL)?;
    require_converged("derivative solve", &rep)?;
    let ops = &prob.ops;
    let derivative_norm = ops.l2_norm(&delta);

    let mut errors = Vec::with_capacity(steps.len());
    for &t in steps {
        let (yt, rep) = solve_state(prob, &u.axpy(t, h)?)?;
        require_converged("perturbed state solve", &rep)?;
        let q: Vec<f64> = yt
            .coeffs()
            .iter()
            .zip(y.coeffs())
            .zip(delta.coeffs())
            .map(|((a, b), d)| (a - b) / t - d)
            .collect();
        errors.push(ops.l2_norm(&y.with_coeffs(q)?));
    }
    let floor = 1e-8 * (1.0 + derivative_norm);
    let monotone = errors
        .windows(2)
        .all(|w| w[1] <= floor || w[1] <= 1.1 * w[0]);
    let final_within_tol = *errors.last().unwrap() <= 1e-4 * (1.0 + derivative_norm);
    Ok(FdReport {
        steps: steps.to_vec(),
        errors,
        derivative_norm,
        floor,
        monotone,
        final_within_tol,
    })
}

/// Whether `S′(u; h) = −S′(u; −h)` to `1e-8 (1 + ‖δ‖)`.
pub fn check_symmetric_derivative(
    prob: &StateProblem,
    u: &FeFunction,
    h: &FeFunction,
    zero_tol: f64,
) -> Result<bool> {
    let (y, rep) = solve_state(prob, u)?;
    require_converged("state solve", &rep)?;
    let (dp, rep) = directional_derivative(prob, &y, h, zero_tol)?;
    require_converged("derivative solve", &rep)?;
    let (dm, rep) = directional_derivative(prob, &y, &h.scaled(-1.0), zero_tol)?;
    require_converged("derivative solve", &rep)?;
    let sum = dp.axpy(1.0, &dm)?;
    Ok(prob.ops.l2_norm(&sum) <= 1e-8 * (1.0 + prob.ops.l2_norm(&dp)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{assemble_operators, interpolate, l2_error, FeSpace};
    use crate::sparse::solve_linear;
    use std::f64::consts::PI;

    fn ops(m: usize) -> Arc<FeOperators> {
        Arc::new(assemble_operators(&FeSpace::unit_square(m).unwrap()).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let prob = StateProblem::homogeneous(ops(5));
        let u = FeFunction::zeros(prob.ops.space());
        let (y, rep) = solve_state(&prob, &u).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        assert!(y.coeffs().iter().all(|&v| v == 0.0));
        let (y, rep) = solve_state_regularized(&prob, &u, 0.1).unwrap();
        assert!(rep.converged && y.max_abs() == 0.0);
    }

    #[test]
    fn negative_state_matches_poisson_solve() {
        let ops = ops(17);
        let prob = StateProblem::homogeneous(ops.clone());
        let space = ops.space();
        // y = -sin(πx)sin(πy) solves -Δy = -2π² sin sin with max(0, y) = 0
        let u = interpolate(space, |x, y| -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()).unwrap();
        let (y, rep) = solve_state(&prob, &u).unwrap();
        assert!(rep.converged);
        let poisson = solve_linear(&ops.stiffness, &ops.mass_times(u.coeffs())).unwrap();
        for (a, b) in y.coeffs().iter().zip(&poisson) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(y.coeffs().iter().all(|&v| v < 0.0));
        // smoothing is inactive on negative states
        let (ye, _) = solve_state_regularized(&prob, &u, 10.0).unwrap();
        for (a, b) in ye.coeffs().iter().zip(&poisson) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_meets_tolerance() {
        let ops = ops(20);
        let f = interpolate(ops.space(), |x, y| 30.0 * (3.0 * x).sin() * (y - 0.4)).unwrap();
        let prob = StateProblem::new(ops.clone(), f.clone()).unwrap();
        let u = FeFunction::zeros(ops.space());
        let (y, rep) = solve_state(&prob, &u).unwrap();
        assert!(rep.converged);
        let mut r = ops.stiffness_times(y.coeffs());
        let b = ops.mass_times(f.coeffs());
        for i in 0..r.len() {
            r[i] += ops.lumped[i] * max0(y.coeffs()[i]) - b[i];
        }
        assert!(norm2(&r) <= 1e-12 * norm2(&b).max(1.0));
    }

    #[test]
    fn derivative_in_linear_regime() {
        let ops = ops(9);
        let prob = StateProblem::homogeneous(ops.clone());
        let y = FeFunction::constant(ops.space(), 1.0);
        let h = interpolate(ops.space(), |x, y| x - y * y).unwrap();
        let (d, rep) = directional_derivative(&prob, &y, &h, DEFAULT_ZERO_TOL).unwrap();
        assert!(rep.converged);
        let mat = ops.stiffness.add(&ops.lumped_matrix()).unwrap();
        let direct = solve_linear(&mat, &ops.mass_times(h.coeffs())).unwrap();
        for (a, b) in d.coeffs().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        // G_χ with χ ≡ 1 is the same operator
        let eta = apply_gchi(&ops, &FeFunction::constant(ops.space(), 1.0), &h).unwrap();
        for (a, b) in eta.coeffs().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        let (z, _) = directional_derivative(&prob, &y, &FeFunction::zeros(ops.space()), 0.0).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn gchi_rejects_inadmissible_coefficients() {
        let ops = ops(4);
        let h = FeFunction::constant(ops.space(), 1.0);
        let mut chi = FeFunction::constant(ops.space(), 0.5);
        chi.coeffs_mut()[3] = 1.2;
        assert!(matches!(
            apply_gchi(&ops, &chi, &h),
            Err(Error::InadmissibleChi { node: 3, .. })
        ));
        chi.coeffs_mut()[3] = -0.1;
        assert!(apply_gchi(&ops, &chi, &h).is_err());
    }

    #[test]
    fn gchi_zero_is_poisson_with_second_order_error() {
        let mut errs = Vec::new();
        for m in [16, 32] {
            let ops = ops(m);
            let h = interpolate(ops.space(), |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()).unwrap();
            let eta = apply_gchi(&ops, &FeFunction::zeros(ops.space()), &h).unwrap();
            errs.push(l2_error(&eta, |x, y| (PI * x).sin() * (PI * y).sin()));
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
    }

    #[test]
    fn zero_fraction_examples() {
        let space = FeSpace::unit_square(4).unwrap();
        assert_eq!(gateaux_zero_fraction(&FeFunction::constant(&space, 1.0), 1e-12), 0.0);
        assert_eq!(gateaux_zero_fraction(&FeFunction::zeros(&space), 1e-12), 1.0);
    }

    #[test]
    fn symmetric_derivative_away_from_zero() {
        let ops = ops(9);
        let prob = StateProblem::homogeneous(ops.clone());
        let h = interpolate(ops.space(), |x, y| (x - 0.3) * (y + 0.1)).unwrap();
        let pos = interpolate(ops.space(), |x, y| 50.0 * (PI * x).sin() * (PI * y).sin()).unwrap();
        assert!(check_symmetric_derivative(&prob, &pos, &h, DEFAULT_ZERO_TOL).unwrap());
        assert!(check_symmetric_derivative(&prob, &pos.scaled(-1.0), &h, DEFAULT_ZERO_TOL).unwrap());
    }

    #[test]
    fn fd_check_rejects_bad_steps() {
        let ops = ops(4);
        let prob = StateProblem::homogeneous(ops.clone());
        let u = FeFunction::zeros(ops.space());
        assert!(finite_difference_check(&prob, &u, &u, &[]).is_err());
        assert!(finite_difference_check(&prob, &u, &u, &[1e-2, 1e-1]).is_err());
        assert!(finite_difference_check(&prob, &u, &u, &[1e-1, -1e-2]).is_err());
    }
}
