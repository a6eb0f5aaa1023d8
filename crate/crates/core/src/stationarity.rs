//! Diagnostics grading a candidate point against the stationarity hierarchy:
//! admissibility of the multiplier, the residual of the limit system, the
//! sign condition of strong stationarity, and sampled primal stationarity.
//!
//! Every report serializes to JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::{FeFunction, FeSpace};
use crate::kkt::{recover_control, residual_norm, KktPoint, ProblemData};
use crate::nonsmooth::subdiff_max_contains;
use crate::sparse::dot;
use crate::state::{directional_derivative, solve_state, StateProblem, DEFAULT_ZERO_TOL};

pub const DEFAULT_SIGN_TOL: f64 = 1e-10;
/// Slack allowed in `χ` itself, so that `χ = 1 ± 1e-13` after Newton counts as `1`.
pub const DEFAULT_CHI_TOL: f64 = 1e-8;
pub const DEFAULT_RANDOM_DIRECTIONS: usize = 20;
pub const DEFAULT_DIRECTION_SEED: u64 = 0x5eed;
const MAX_LISTED_NODES: usize = 32;

#[derive(Clone, Debug, Serialize)]
pub struct ChiAdmissibilityReport {
    pub n_nodes: usize,
    pub n_zero_band: usize,
    pub n_violations: usize,
    /// First few violating nodes.
    pub violating_nodes: Vec<usize>,
    /// Largest distance of `χ_i` from its admissible set.
    pub worst_distance: f64,
    pub passed: bool,
}

/// Distance of `g` to `∂max(x)` with `x` snapped to zero inside the band.
fn subdiff_distance(x: f64, g: f64, zero_tol: f64) -> f64 {
    if x.abs() <= zero_tol {
        if subdiff_max_contains(0.0, g) {
            0.0
        } else if g < 0.0 {
            -g
        } else {
            g - 1.0
        }
    } else if x > 0.0 {
        (g - 1.0).abs()
    } else {
        g.abs()
    }
}

pub fn check_chi_admissible(y: &FeFunction, chi: &FeFunction, zero_tol: f64) -> Result<ChiAdmissibilityReport> {
    check_chi_admissible_with(y, chi, zero_tol, DEFAULT_CHI_TOL)
}

/// Checks `χ_i ∈ ∂max(y_i)` node by node, treating `|y_i| ≤ zero_tol` as
/// `y_i = 0` and allowing `chi_tol` slack in `χ_i`.
pub fn check_chi_admissible_with(
    y: &FeFunction,
    chi: &FeFunction,
    zero_tol: f64,
    chi_tol: f64,
) -> Result<ChiAdmissibilityReport> {
    if !y.same_space(chi) {
        return Err(Error::SpaceMismatch);
    }
    let mut rep = ChiAdmissibilityReport {
        n_nodes: y.len(),
        n_zero_band: 0,
        n_violations: 0,
        violating_nodes: Vec::new(),
        worst_distance: 0.0,
        passed: true,
    };
    for (i, (&yi, &ci)) in y.coeffs().iter().zip(chi.coeffs()).enumerate() {
        if yi.abs() <= zero_tol {
            rep.n_zero_band += 1;
        }
        let d = subdiff_distance(yi, ci, zero_tol);
        if !(d <= chi_tol) {
            rep.n_violations += 1;
            if rep.violating_nodes.len() < MAX_LISTED_NODES {
                rep.violating_nodes.push(i);
            }
        }
        rep.worst_distance = rep.worst_distance.max(if d.is_nan() { f64::INFINITY } else { d });
    }
    rep.passed = rep.n_violations == 0;
    Ok(rep)
}

/// Euclidean norm of the full limit-system residual.
pub fn check_bouligand_residual(data: &ProblemData, pt: &KktPoint) -> Result<f64> {
    residual_norm(data, pt)
}

#[derive(Clone, Debug, Serialize)]
pub struct StrongSignReport {
    pub n_zero_band: usize,
    pub n_violations: usize,
    pub max_violation: f64,
    /// Violations as a fraction of zero-band nodes.
    pub violating_fraction: f64,
    pub violating_nodes: Vec<usize>,
    pub passed: bool,
}

/// Flags `p_i > sign_tol` on nodes with `|y_i| ≤ zero_tol`.
pub fn check_strong_sign(y: &FeFunction, p: &FeFunction, zero_tol: f64, sign_tol: f64) -> Result<StrongSignReport> {
    if !y.same_space(p) {
        return Err(Error::SpaceMismatch);
    }
    let mut rep = StrongSignReport {
        n_zero_band: 0,
        n_violations: 0,
        max_violation: 0.0,
        violating_fraction: 0.0,
        violating_nodes: Vec::new(),
        passed: true,
    };
    for (i, (&yi, &pi)) in y.coeffs().iter().zip(p.coeffs()).enumerate() {
        if yi.abs() > zero_tol {
            continue;
        }
        rep.n_zero_band += 1;
        if pi > sign_tol {
            rep.n_violations += 1;
            rep.max_violation = rep.max_violation.max(pi);
            if rep.violating_nodes.len() < MAX_LISTED_NODES {
                rep.violating_nodes.push(i);
            }
        }
    }
    if rep.n_zero_band > 0 {
        rep.violating_fraction = rep.n_violations as f64 / rep.n_zero_band as f64;
    }
    rep.passed = rep.n_violations == 0;
    Ok(rep)
}

/// Sampled test directions: `n_random` with i.i.d. uniform nodal values in
/// `[-1, 1]` from a fixed seed, then five structured ones (the constant and
/// nodal bumps at four spread-out nodes).
pub fn sample_directions(space: &std::sync::Arc<FeSpace>, n_random: usize, seed: u64) -> Vec<FeFunction> {
    let n = space.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<FeFunction> = (0..n_random)
        .map(|_| {
            let c = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            FeFunction::new(space, c).expect("length matches")
        })
        .collect();
    if n == 0 {
        return out;
    }
    out.push(FeFunction::constant(space, 1.0));
    for k in [n / 2, n / 4, (3 * n) / 4, n - 1 - n / 4] {
        let mut c = vec![0.0; n];
        c[k.min(n - 1)] = 1.0;
        out.push(FeFunction::new(space, c).expect("length matches"));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionValue {
    pub direction: usize,
    /// `+1` for `h`, `-1` for `−h`.
    pub sign: i8,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimalStationarityReport {
    /// Always true: finitely many directions stand in for all of L².
    pub sampled: bool,
    pub n_directions: usize,
    pub tol: f64,
    pub values: Vec<DirectionValue>,
    pub min_value: f64,
    pub n_negative: usize,
    pub passed: bool,
}

/// Evaluates `F′(u; ±h) = (y − y_d)ᵀ M δ_{±h} + α uᵀ M (±h)` with
/// `u = −p/α`, `y = pt.y` and `δ` the directional derivative of the state.
/// Values below `−tol` fail.
pub fn check_primal_stationarity(
    data: &ProblemData,
    pt: &KktPoint,
    directions: &[FeFunction],
    tol: f64,
) -> Result<PrimalStationarityReport> {
    let ops = &data.ops;
    let prob = StateProblem::new(ops.clone(), data.f.clone())?;
    let u = recover_control(data, &pt.p);
    let diff = pt.y.sub(&data.y_d)?;
    let m_diff = ops.mass_times(diff.coeffs());
    let m_u = ops.mass_times(u.coeffs());
    let alpha = data.config.alpha;

    let mut values = Vec::with_capacity(2 * directions.len());
    for (k, h) in directions.iter().enumerate() {
        for sign in [1i8, -1] {
            let hs = h.scaled(f64::from(sign));
            let (delta, rep) = directional_derivative(&prob, &pt.y, &hs, DEFAULT_ZERO_TOL)?;
            if !rep.converged {
                return Err(Error::Solver(format!("derivative solve failed for direction {k}")));
            }
            let value = dot(&m_diff, delta.coeffs()) + alpha * dot(&m_u, hs.coeffs());
            values.push(DirectionValue { direction: k, sign, value });
        }
    }
    let min_value = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let n_negative = values.iter().filter(|v| !(v.value >= -tol)).count();
    Ok(PrimalStationarityReport {
        sampled: true,
        n_directions: directions.len(),
        tol,
        values,
        min_value: if directions.is_empty() { 0.0 } else { min_value },
        n_negative,
        passed: n_negative == 0,
    })
}

/// The two terms of the reduced objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveParts {
    /// `½ (y − y_d)ᵀ M (y − y_d)`
    pub tracking: f64,
    /// `α/2 uᵀ M u`
    pub control: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.tracking + self.control
    }
}

pub fn reduced_objective_parts(data: &ProblemData, u: &FeFunction) -> Result<ObjectiveParts> {
    let prob = StateProblem::new(data.ops.clone(), data.f.clone())?;
    let (y, rep) = solve_state(&prob, u)?;
    if !rep.converged {
        return Err(Error::Solver("state solve did not converge".into()));
    }
    let diff = y.sub(&data.y_d)?;
    let ops = &data.ops;
    Ok(ObjectiveParts {
        tracking: 0.5 * dot(diff.coeffs(), &ops.mass_times(diff.coeffs())),
        control: 0.5 * data.config.alpha * dot(u.coeffs(), &ops.mass_times(u.coeffs())),
    })
}

/// `J_h(S_h(u), u)`
pub fn eval_reduced_objective(data: &ProblemData, u: &FeFunction) -> Result<f64> {
    Ok(reduced_objective_parts(data, u)?.total())
}

/// Tolerances of [`run_all_checks`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CheckTolerances {
    pub zero_tol: f64,
    pub sign_tol: f64,
    pub chi_tol: f64,
    pub residual_tol: f64,
    pub stationarity_tol: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            zero_tol: DEFAULT_ZERO_TOL,
            sign_tol: DEFAULT_SIGN_TOL,
            chi_tol: DEFAULT_CHI_TOL,
            residual_tol: 1e-10,
            stationarity_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub tolerances: CheckTolerances,
    pub chi_admissible: ChiAdmissibilityReport,
    pub limit_residual: f64,
    pub limit_residual_passed: bool,
    pub strong_sign: StrongSignReport,
    pub primal: PrimalStationarityReport,
    pub objective: ObjectiveParts,
}

impl StationarityReport {
    pub fn all_passed(&self) -> bool {
        self.chi_admissible.passed && self.limit_residual_passed && self.strong_sign.passed && self.primal.passed
    }
}

/// Runs every check with the default direction sample.
pub fn run_all_checks(data: &ProblemData, pt: &KktPoint, tol: CheckTolerances) -> Result<StationarityReport> {
    let chi_admissible = check_chi_admissible_with(&pt.y, &pt.chi, tol.zero_tol, tol.chi_tol)?;
    let limit_residual = check_bouligand_residual(data, pt)?;
    let strong_sign = check_strong_sign(&pt.y, &pt.p, tol.zero_tol, tol.sign_tol)?;
    let dirs = sample_directions(data.ops.space(), DEFAULT_RANDOM_DIRECTIONS, DEFAULT_DIRECTION_SEED);
    let primal = check_primal_stationarity(data, pt, &dirs, tol.stationarity_tol)?;
    let objective = reduced_objective_parts(data, &recover_control(data, &pt.p))?;
    Ok(StationarityReport {
        tolerances: tol,
        chi_admissible,
        limit_residual,
        limit_residual_passed: limit_residual <= tol.residual_tol,
        strong_sign,
        primal,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{assemble_operators, interpolate};
    use crate::kkt::KktConfig;
    use std::sync::Arc;

    #[test]
    fn indicator_chi_is_admissible() {
        let space = FeSpace::unit_square(6).unwrap();
        let y = interpolate(&space, |x, y| (x - 0.45) * (y + 0.1)).unwrap();
        let chi = y.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        assert!(check_chi_admissible(&y, &chi, 1e-12).unwrap().passed);
        let mut bad = chi.clone();
        let k = y.coeffs().iter().position(|&v| v > 0.1).unwrap();
        bad.coeffs_mut()[k] = 0.5;
        let r = check_chi_admissible(&y, &bad, 1e-12).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violating_nodes, vec![k]);
        assert!((r.worst_distance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_band_allows_any_value_in_unit_interval() {
        let space = FeSpace::unit_square(3).unwrap();
        let y = FeFunction::zeros(&space);
        let chi = FeFunction::new(&space, vec![0.0, 0.3, 1.0, 0.999]).unwrap();
        assert!(check_chi_admissible(&y, &chi, 0.0).unwrap().passed);
        let out = FeFunction::new(&space, vec![0.0, 0.3, 1.2, -0.1]).unwrap();
        assert_eq!(check_chi_admissible(&y, &out, 0.0).unwrap().n_violations, 2);
    }

    #[test]
    fn strong_sign_fault_injection() {
        let space = FeSpace::unit_square(3).unwrap();
        let y = FeFunction::new(&space, vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        let mut p = FeFunction::zeros(&space);
        assert!(check_strong_sign(&y, &p, 1e-12, 1e-10).unwrap().passed);
        p.coeffs_mut()[3] = 1.0;
        p.coeffs_mut()[1] = 5.0; // not on the zero set
        let r = check_strong_sign(&y, &p, 1e-12, 1e-10).unwrap();
        assert_eq!(r.n_violations, 1);
        assert_eq!(r.max_violation, 1.0);
        assert_eq!(r.violating_fraction, 0.5);
    }

    fn small_data(alpha: f64) -> ProblemData {
        let space = FeSpace::unit_square(5).unwrap();
        let ops = Arc::new(assemble_operators(&space).unwrap());
        let f = FeFunction::zeros(&space);
        let prob = StateProblem::homogeneous(ops.clone());
        let (y0, _) = solve_state(&prob, &f).unwrap();
        ProblemData::new(ops, f, y0, KktConfig::new(alpha, 1e-3).unwrap()).unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = small_data(0.1);
        let u = FeFunction::zeros(d.ops.space());
        assert_eq!(eval_reduced_objective(&d, &u).unwrap(), 0.0);
        let u = FeFunction::constant(d.ops.space(), 1.0);
        let a = reduced_objective_parts(&d, &u).unwrap();
        let d2 = d.with_config(KktConfig::new(0.2, 1e-3).unwrap()).unwrap();
        let b = reduced_objective_parts(&d2, &u).unwrap();
        assert_eq!(b.control, 2.0 * a.control);
        assert_eq!(b.tracking, a.tracking);
    }

    #[test]
    fn zero_direction_gives_zero_value() {
        let d = small_data(0.1);
        let pt = KktPoint::zeros(&d);
        let h = FeFunction::zeros(d.ops.space());
        let r = check_primal_stationarity(&d, &pt, &[h], 1e-8).unwrap();
        assert!(r.values.iter().all(|v| v.value == 0.0));
        assert!(r.passed);
    }

    #[test]
    fn direction_sample_is_deterministic() {
        let space = FeSpace::unit_square(7).unwrap();
        let a = sample_directions(&space, 20, 3);
        let b = sample_directions(&space, 20, 3);
        assert_eq!(a.len(), 25);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coeffs(), y.coeffs());
        }
    }
}
