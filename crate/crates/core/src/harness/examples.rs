//! Manufactured solutions with known optimal state, adjoint, and multiplier.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{assemble_operators, interpolate, l2_error, l2_norm_exact, linf_nodal_error, FeFunction, FeSpace};
use crate::kkt::{KktConfig, KktPoint, ProblemData};
use crate::nonsmooth::max0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExampleId {
    /// `y = sin(πx₁) sin(2πx₂)`, `p = 0`: a sign change across a curve.
    One,
    /// `y = p` vanishing on the right half of the square.
    Two,
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleId::One => "1",
            ExampleId::Two => "2",
        })
    }
}

/// `g(t) = t⁴ + t³/2` for `t < 0`, else 0.
fn g2(t: f64) -> f64 {
    if t < 0.0 {
        t.powi(4) + 0.5 * t.powi(3)
    } else {
        0.0
    }
}

fn g2_second(t: f64) -> f64 {
    if t < 0.0 {
        12.0 * t * t + 3.0 * t
    } else {
        0.0
    }
}

impl ExampleId {
    pub fn y(self, x1: f64, x2: f64) -> f64 {
        match self {
            ExampleId::One => (PI * x1).sin() * (2.0 * PI * x2).sin(),
            ExampleId::Two => g2(x1 - 0.5) * (PI * x2).sin(),
        }
    }

    pub fn p(self, x1: f64, x2: f64) -> f64 {
        match self {
            ExampleId::One => 0.0,
            ExampleId::Two => self.y(x1, x2),
        }
    }

    pub fn chi(self, x1: f64, x2: f64) -> f64 {
        match self {
            ExampleId::One => {
                if self.y(x1, x2) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ExampleId::Two => 0.0,
        }
    }

    pub fn u(self, x1: f64, x2: f64, alpha: f64) -> f64 {
        -self.p(x1, x2) / alpha
    }

    /// `Δy`
    pub fn laplacian_y(self, x1: f64, x2: f64) -> f64 {
        match self {
            ExampleId::One => -5.0 * PI * PI * self.y(x1, x2),
            ExampleId::Two => {
                let t = x1 - 0.5;
                (g2_second(t) - PI * PI * g2(t)) * (PI * x2).sin()
            }
        }
    }

    /// Source `f = −Δy + max(0, y) − u`.
    pub fn f(self, x1: f64, x2: f64, alpha: f64) -> f64 {
        -self.laplacian_y(x1, x2) + max0(self.y(x1, x2)) - self.u(x1, x2, alpha)
    }

    /// Target `y_d = y + Δp − χ p`.
    pub fn y_d(self, x1: f64, x2: f64) -> f64 {
        match self {
            ExampleId::One => self.y(x1, x2),
            ExampleId::Two => self.y(x1, x2) + self.laplacian_y(x1, x2),
        }
    }
}

/// Discretized example together with nodal interpolants of the exact fields.
#[derive(Clone, Debug)]
pub struct ManufacturedExample {
    pub id: ExampleId,
    pub data: ProblemData,
    pub y_exact: FeFunction,
    pub p_exact: FeFunction,
    pub chi_exact: FeFunction,
    pub u_exact: FeFunction,
}

/// Discretization errors of a computed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExampleErrors {
    pub err_y_rel: f64,
    /// Absolute for example 1 (where `p = 0`), relative for example 2.
    pub err_p: f64,
    /// Nodal maximum error; example 1 only, since `χ` is not unique in example 2.
    pub err_chi_linf: Option<f64>,
}

fn build(id: ExampleId, space: &Arc<FeSpace>, config: KktConfig) -> Result<ManufacturedExample> {
    config.validate()?;
    let alpha = config.alpha;
    let ops = Arc::new(assemble_operators(space)?);
    let f = interpolate(space, |x, y| id.f(x, y, alpha))?;
    let y_d = interpolate(space, |x, y| id.y_d(x, y))?;
    let data = ProblemData::new(ops, f, y_d, config)?;
    Ok(ManufacturedExample {
        id,
        data,
        y_exact: interpolate(space, |x, y| id.y(x, y))?,
        p_exact: interpolate(space, |x, y| id.p(x, y))?,
        chi_exact: interpolate(space, |x, y| id.chi(x, y))?,
        u_exact: interpolate(space, |x, y| id.u(x, y, alpha))?,
    })
}

/// Example 1 on a mesh with an odd number of cells per side, so that no node
/// lies on the line `x₂ = 1/2` where the exact state changes sign.
pub fn build_example1(space: &Arc<FeSpace>, config: KktConfig) -> Result<ManufacturedExample> {
    let m = space.mesh().m();
    if m % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "example 1 needs an odd number of cells per side, got {m}"
        )));
    }
    build(ExampleId::One, space, config)
}

pub fn build_example2(space: &Arc<FeSpace>, config: KktConfig) -> Result<ManufacturedExample> {
    build(ExampleId::Two, space, config)
}

pub fn build_example(id: ExampleId, space: &Arc<FeSpace>, config: KktConfig) -> Result<ManufacturedExample> {
    match id {
        ExampleId::One => build_example1(space, config),
        ExampleId::Two => build_example2(space, config),
    }
}

impl ManufacturedExample {
    /// Exact fields as a KKT point.
    pub fn exact_point(&self) -> KktPoint {
        KktPoint {
            y: self.y_exact.clone(),
            p: self.p_exact.clone(),
            chi: self.chi_exact.clone(),
        }
    }

    /// Errors of `pt` against the nodal interpolants of the exact fields,
    /// measured in the L² norm of the piecewise linear difference. This is
    /// the measure behind the reference error values.
    pub fn errors(&self, pt: &KktPoint) -> Result<ExampleErrors> {
        let ops = &self.data.ops;
        let ey = ops.l2_norm(&pt.y.sub(&self.y_exact)?) / ops.l2_norm(&self.y_exact);
        let ep = ops.l2_norm(&pt.p.sub(&self.p_exact)?);
        self.package(pt, ey, ep, ops.l2_norm(&self.p_exact))
    }

    /// Same quantities against the closed-form fields, integrated with the
    /// degree-4 rule. Includes the interpolation error of the exact solution.
    pub fn errors_against_exact(&self, pt: &KktPoint) -> Result<ExampleErrors> {
        let id = self.id;
        let space = self.data.ops.space();
        let ey = l2_error(&pt.y, |x, y| id.y(x, y)) / l2_norm_exact(space, |x, y| id.y(x, y));
        let ep = l2_error(&pt.p, |x, y| id.p(x, y));
        self.package(pt, ey, ep, l2_norm_exact(space, |x, y| id.p(x, y)))
    }

    fn package(&self, pt: &KktPoint, ey: f64, ep: f64, p_norm: f64) -> Result<ExampleErrors> {
        Ok(match self.id {
            ExampleId::One => ExampleErrors {
                err_y_rel: ey,
                err_p: ep,
                err_chi_linf: Some(linf_nodal_error(&pt.chi, &self.chi_exact)?),
            },
            ExampleId::Two => ExampleErrors {
                err_y_rel: ey,
                err_p: ep / p_norm,
                err_chi_linf: None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> KktConfig {
        KktConfig::new(1e-4, 1e-4).unwrap()
    }

    #[test]
    fn example1_rejects_even_meshes() {
        let space = FeSpace::unit_square(32).unwrap();
        assert!(build_example1(&space, cfg()).is_err());
        assert!(build_example2(&space, cfg()).is_ok());
    }

    #[test]
    fn example1_no_node_on_sign_change() {
        let space = FeSpace::unit_square(33).unwrap();
        let ex = build_example1(&space, cfg()).unwrap();
        assert!(ex.y_exact.coeffs().iter().all(|&v| v.abs() > 1e-3));
    }

    #[test]
    fn example1_source_formula() {
        let id = ExampleId::One;
        for (x, y) in [(0.3, 0.2), (0.7, 0.9)] {
            let ys = id.y(x, y);
            assert!((id.f(x, y, 1e-4) - (5.0 * PI * PI * ys + ys.max(0.0))).abs() < 1e-12);
            assert_eq!(id.y_d(x, y), ys);
        }
    }

    #[test]
    fn example2_profile() {
        let id = ExampleId::Two;
        assert_eq!(g2(-0.5), 0.0);
        assert_eq!(g2_second(0.0), 0.0);
        for i in 0..=50 {
            for j in 0..=10 {
                let (x, y) = (i as f64 / 50.0, j as f64 / 10.0);
                assert!(id.y(x, y) <= 0.0);
                if x >= 0.5 {
                    assert_eq!(id.y(x, y), 0.0);
                    assert_eq!(id.f(x, y, 1e-4), 0.0);
                }
            }
        }
        // second derivative of g against a central difference
        let t = -0.2;
        let k = 1e-4;
        let fd = (g2(t + k) - 2.0 * g2(t) + g2(t - k)) / (k * k);
        assert!((fd - g2_second(t)).abs() < 1e-6);
    }

    #[test]
    fn example2_zero_set_is_about_half() {
        let space = FeSpace::unit_square(33).unwrap();
        let ex = build_example2(&space, cfg()).unwrap();
        let frac = crate::state::gateaux_zero_fraction(&ex.y_exact, 0.0);
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
    }

    #[test]
    fn exact_point_has_zero_error_in_chi() {
        let space = FeSpace::unit_square(9).unwrap();
        let ex = build_example1(&space, cfg()).unwrap();
        let e = ex.errors(&ex.exact_point()).unwrap();
        assert_eq!(e.err_chi_linf, Some(0.0));
        assert_eq!(e.err_p, 0.0);
    }
}
