//! Scalar non-smooth primitives: `max(0, ·)`, its convex subdifferential, the
//! proximal map of `max`, and a C¹ smoothing of `max`.

use serde::Serialize;

use crate::error::{Error, Result};

#[inline]
pub fn max0(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Whether `g ∈ ∂max(0, ·)(x)`: `{0}` for `x < 0`, `{1}` for `x > 0`, `[0, 1]` at 0.
pub fn subdiff_max_contains(x: f64, g: f64) -> bool {
    if x < 0.0 {
        g == 0.0
    } else if x > 0.0 {
        g == 1.0
    } else {
        (0.0..=1.0).contains(&g)
    }
}

/// Proximal map of `γ max(0, ·)`: `argmin_s max(0,s) + |s-x|²/(2γ)`.
pub fn prox(gamma: f64, x: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("prox needs gamma > 0, got {gamma}")));
    }
    Ok(prox_unchecked(gamma, x))
}

#[inline]
pub(crate) fn prox_unchecked(gamma: f64, x: f64) -> f64 {
    if x < 0.0 {
        x
    } else if x <= gamma {
        0.0
    } else {
        x - gamma
    }
}

/// Whether `z = prox_γ(z + γ g)`, which holds exactly when `g ∈ ∂max(0, ·)(z)`.
///
/// The comparison allows the few ulps of `|z| + γ|g|` that forming `z + γ g`
/// and subtracting `γ` can lose; for dyadic `γ` and test points it is exact.
pub fn prox_fixed_point(gamma: f64, z: f64, g: f64) -> Result<bool> {
    let r = z - prox(gamma, z + gamma * g)?;
    Ok(r.abs() <= 4.0 * f64::EPSILON * (z.abs() + gamma * g.abs()))
}

/// True where the prox has slope one, i.e. `x ∉ [0, γ]`. Both endpoints count
/// as inactive.
#[inline]
pub fn prox_active(gamma: f64, x: f64) -> bool {
    x < 0.0 || x > gamma
}

/// Smoothing width of the C¹ quadratic-spline approximation of `max(0, ·)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothedMaxParams {
    eps: f64,
}

impl SmoothedMaxParams {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self { eps })
        } else {
            Err(Error::InvalidParameter(format!("smoothing width must be positive, got {eps}")))
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// `0` on `(-∞, 0]`, `x²/(2ε)` on `(0, ε)`, `x - ε/2` on `[ε, ∞)`.
#[inline]
pub fn smoothed_max(p: SmoothedMaxParams, x: f64) -> f64 {
    let e = p.eps;
    if x <= 0.0 {
        0.0
    } else if x < e {
        x * x / (2.0 * e)
    } else {
        x - 0.5 * e
    }
}

#[inline]
pub fn smoothed_max_prime(p: SmoothedMaxParams, x: f64) -> f64 {
    let e = p.eps;
    if x <= 0.0 {
        0.0
    } else if x < e {
        x / e
    } else {
        1.0
    }
}

/// Second derivative where it exists: `1/ε` on `(0, ε)`, zero elsewhere.
#[inline]
pub fn smoothed_max_second(p: SmoothedMaxParams, x: f64) -> f64 {
    if x > 0.0 && x < p.eps {
        1.0 / p.eps
    } else {
        0.0
    }
}

/// A smoothing of `max(0, ·)` to be checked by [`verify_smoothing_assumptions`].
pub trait SmoothMax {
    fn eps(&self) -> f64;
    fn value(&self, x: f64) -> f64;
    fn prime(&self, x: f64) -> f64;
}

impl SmoothMax for SmoothedMaxParams {
    fn eps(&self) -> f64 {
        self.eps
    }

    fn value(&self, x: f64) -> f64 {
        smoothed_max(*self, x)
    }

    fn prime(&self, x: f64) -> f64 {
        smoothed_max_prime(*self, x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation found, zero when passed.
    pub worst: f64,
    /// Grid point of the largest violation.
    pub at: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    pub checks: Vec<CheckOutcome>,
    /// Checks whose precondition did not hold, with the reason.
    pub skipped: Vec<String>,
}

impl SmoothingReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const CONTINUITY_TOL: f64 = 1e-12;
const CONTINUITY_STEP: f64 = 1e-14;
const BOUND_SLACK: f64 = 1e-15;

fn check(name: &'static str, grid: &[f64], violation: impl Fn(f64) -> f64) -> CheckOutcome {
    let mut worst = 0.0;
    let mut at = None;
    for &x in grid {
        let v = violation(x);
        if v > worst {
            worst = v;
            at = Some(x);
        }
    }
    CheckOutcome {
        name,
        passed: at.is_none(),
        worst,
        at,
    }
}

/// Grid checks of the smoothing properties:
///
/// * `|max_ε − max(0,·)| ≤ ε/2`
/// * `0 ≤ max_ε′ ≤ 1`
/// * `max_ε′ = 1` on `[δ, ∞)` and `0` on `(-∞, -δ]`, asserted only when
///   `ε ≤ δ`; `δ` defaults to `ε`
/// * continuity of `max_ε′` across `0` and `ε`
pub fn verify_smoothing_assumptions(
    s: &impl SmoothMax,
    grid: &[f64],
    delta: Option<f64>,
) -> Result<SmoothingReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sample grid is empty".into()));
    }
    let eps = s.eps();
    let mut checks = vec![
        check("value_within_half_eps", grid, |x| {
            let d = (s.value(x) - max0(x)).abs() - 0.5 * eps;
            if d > BOUND_SLACK {
                d
            } else {
                0.0
            }
        }),
        check("prime_in_unit_interval", grid, |x| {
            let d = s.prime(x);
            if d < 0.0 {
                -d
            } else if d > 1.0 {
                d - 1.0
            } else {
                0.0
            }
        }),
    ];
    let mut skipped = Vec::new();
    let delta = delta.unwrap_or(eps);
    if eps <= delta {
        checks.push(check("prime_saturates", grid, |x| {
            if x >= delta {
                (1.0 - s.prime(x)).abs()
            } else if x <= -delta {
                s.prime(x).abs()
            } else {
                0.0
            }
        }));
    } else {
        skipped.push(format!(
            "prime_saturates: requires eps <= delta (eps = {eps}, delta = {delta})"
        ));
    }
    checks.push(check("prime_continuous_at_kinks", &[0.0, eps], |x| {
        let jump = (s.prime(x + CONTINUITY_STEP) - s.prime(x - CONTINUITY_STEP)).abs();
        if jump > CONTINUITY_TOL {
            jump
        } else {
            0.0
        }
    }));
    Ok(SmoothingReport { checks, skipped })
}
