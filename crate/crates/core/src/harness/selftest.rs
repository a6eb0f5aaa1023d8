//! Fast property checks bundled into the binary.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{build_example1, build_example2};
use crate::error::Result;
use crate::fe::{assemble_operators, interpolate, vtk, FeFunction, FeSpace};
use crate::kkt::{solve_kkt, KktConfig};
use crate::nonsmooth::{prox_fixed_point, subdiff_max_contains, verify_smoothing_assumptions, SmoothedMaxParams};
use crate::sparse::{market, solve_linear, CsrMatrix, Triplet};
use crate::state::{control_for_state, finite_difference_check, solve_state, StateProblem};

#[derive(Clone, Debug, Serialize)]
pub struct SelfTestOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> SelfTestOutcome {
    match r {
        Ok((passed, detail)) => SelfTestOutcome { name, passed, detail },
        Err(e) => SelfTestOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn resolvent() -> Result<(bool, String)> {
    let mut bad = 0;
    let mut total = 0;
    for gamma in [1e-12, 1e-4, 1e-2, 0.5, 1.0, 10.0] {
        for z in [-1.0, -gamma, 0.0, gamma / 2.0, gamma, 2.0 * gamma] {
            for g in [0.0, 0.25, 1.0] {
                total += 1;
                if prox_fixed_point(gamma, z, g)? != subdiff_max_contains(z, g) {
                    bad += 1;
                }
            }
        }
    }
    Ok((bad == 0, format!("{bad} of {total} patterns disagree")))
}

fn smoothing() -> Result<(bool, String)> {
    let grid: Vec<f64> = (-1000..=1000).map(|k| k as f64 * 1e-3).collect();
    let rep = verify_smoothing_assumptions(&SmoothedMaxParams::new(0.1)?, &grid, None)?;
    let failed: Vec<_> = rep.failed().map(|c| c.name).collect();
    Ok((rep.all_passed(), format!("failed checks: {failed:?}")))
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn sparse_lu() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40;
    let mut t = Vec::new();
    for i in 0..n {
        t.push(Triplet::new(i, i, 5.0 + rng.gen::<f64>()));
        for _ in 0..3 {
            t.push(Triplet::new(i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
        }
    }
    let m = CsrMatrix::from_triplets(n, n, &t)?;
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = solve_linear(&m, &b)?;
    let y = dense_solve(m.to_dense(), b);
    let err = x.iter().zip(&y).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
    Ok((err < 1e-12, format!("max deviation from dense elimination {err:.2e}")))
}

fn small_kkt() -> Result<(bool, String)> {
    let space = FeSpace::unit_square(17)?;
    let ex = build_example1(&space, KktConfig::new(1e-4, 1e-4)?)?;
    let (_, rep) = solve_kkt(&ex.data)?;
    Ok((
        rep.converged && rep.iterations <= 6,
        format!("converged {} in {} iterations", rep.converged, rep.iterations),
    ))
}

fn derivative() -> Result<(bool, String)> {
    let space = FeSpace::unit_square(9)?;
    let ex = build_example2(&space, KktConfig::new(1e-4, 1e-12)?)?;
    let prob = StateProblem::new(ex.data.ops.clone(), ex.data.f.clone())?;
    let u = control_for_state(&prob, &ex.y_exact)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = FeFunction::new(&space, (0..space.n()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let rep = finite_difference_check(&prob, &u, &h, &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])?;
    Ok((rep.passed(), format!("errors {:?}", rep.errors)))
}

fn lipschitz() -> Result<(bool, String)> {
    let space = FeSpace::unit_square(9)?;
    let ops = Arc::new(assemble_operators(&space)?);
    let prob = StateProblem::homogeneous(ops.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = 1.0 / (SQRT_2 * PI);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mut draw = || FeFunction::new(&space, (0..space.n()).map(|_| rng.gen_range(-50.0..50.0)).collect());
        let (u1, u2) = (draw()?, draw()?);
        let (y1, _) = solve_state(&prob, &u1)?;
        let (y2, _) = solve_state(&prob, &u2)?;
        let lhs = ops.grad_norm(&y1.sub(&y2)?);
        let rhs = c * ops.l2_norm(&u1.sub(&u2)?);
        worst = worst.max(lhs - rhs);
    }
    Ok((worst <= 1e-12, format!("max excess {worst:.2e}")))
}

fn parsers() -> Result<(bool, String)> {
    let space = FeSpace::unit_square(4)?;
    let y = interpolate(&space, |x, y| (3.0 * x).sin() * y)?;
    let grid = vtk::parse(&vtk::render_fields("selftest", &[("y", &y)])?)?;
    let full = space.extend_by_zero(y.coeffs());
    let vtk_ok = grid.field("y") == Some(full.as_slice());
    let ops = assemble_operators(&space)?;
    let back = market::parse(&market::to_string(&ops.stiffness))?;
    let mm_ok = back == ops.stiffness;
    Ok((vtk_ok && mm_ok, format!("vtk {vtk_ok}, matrix market {mm_ok}")))
}

/// Runs every check; never panics on a failing check.
pub fn run_selftest() -> Vec<SelfTestOutcome> {
    vec![
        outcome("resolvent_identity", resolvent()),
        outcome("smoothing_assumptions", smoothing()),
        outcome("sparse_lu_vs_dense", sparse_lu()),
        outcome("kkt_example1_small", small_kkt()),
        outcome("directional_derivative", derivative()),
        outcome("lipschitz_bound", lipschitz()),
        outcome("parser_round_trips", parsers()),
    ]
}
