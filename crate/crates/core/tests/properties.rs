//! Property-based invariants.

use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, OnceLock};

use nonsmooth_control::fe::{assemble_operators, FeFunction, FeOperators, FeSpace};
use nonsmooth_control::harness::{build_case, CustomData, ExampleSel};
use nonsmooth_control::kkt::{residual_norm, solve_kkt, KktConfig};
use nonsmooth_control::nonsmooth::{
    max0, prox, prox_fixed_point, smoothed_max, smoothed_max_prime, subdiff_max_contains, SmoothedMaxParams,
};
use nonsmooth_control::regpath::chi_eps;
use nonsmooth_control::sparse::{solve_linear, CsrMatrix, Triplet};
use nonsmooth_control::state::{apply_gchi, directional_derivative, solve_state, solve_state_regularized, StateProblem};
use proptest::prelude::*;

const M: usize = 7;

fn ops() -> Arc<FeOperators> {
    static OPS: OnceLock<Arc<FeOperators>> = OnceLock::new();
    OPS.get_or_init(|| Arc::new(assemble_operators(&FeSpace::unit_square(M).unwrap()).unwrap()))
        .clone()
}

fn n() -> usize {
    (M - 1) * (M - 1)
}

fn field(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n())
}

fn fe(v: Vec<f64>) -> FeFunction {
    FeFunction::new(ops().space(), v).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn resolvent_identity_dyadic(k in -20i32..5, j in -8i32..=8, g4 in -2i32..=6) {
        let gamma = 2f64.powi(k);
        let z = gamma * f64::from(j) / 4.0;
        let g = f64::from(g4) / 4.0;
        let fixed = prox(gamma, z + gamma * g).unwrap() == z;
        prop_assert_eq!(fixed, subdiff_max_contains(z, g));
    }

    #[test]
    fn resolvent_identity_floats(lg in -12.0f64..2.0, t in prop_oneof![Just(0.0), -10.0f64..10.0], g in prop_oneof![Just(0.0), Just(1.0), -1.0f64..2.0]) {
        // z on the scale of γ: for |z| ≫ γ the shift γg is below one ulp of z
        // and no floating-point test can see it.
        let gamma = 10f64.powf(lg);
        let z = t * gamma;
        prop_assert_eq!(prox_fixed_point(gamma, z, g).unwrap(), subdiff_max_contains(z, g));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn prox_is_monotone_and_nonexpansive(lg in -6.0f64..1.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let gamma = 10f64.powf(lg);
        let (pa, pb) = (prox(gamma, a).unwrap(), prox(gamma, b).unwrap());
        prop_assert!((pa - pb).abs() <= (a - b).abs() * (1.0 + 1e-15) + 1e-15);
        if a <= b {
            prop_assert!(pa <= pb);
        }
    }

    #[test]
    fn smoothed_max_bounds(le in -6.0f64..0.0, x in -3.0f64..3.0) {
        let p = SmoothedMaxParams::new(10f64.powf(le)).unwrap();
        let s = smoothed_max(p, x);
        prop_assert!(s >= max0(x) - p.eps() / 2.0 - 1e-15 && s <= max0(x) + 1e-15);
        let d = smoothed_max_prime(p, x);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn chi_eps_is_a_valid_multiplier(v in field(-1.0, 1.0), le in -4.0f64..0.0) {
        let eps = 10f64.powf(le);
        let y = fe(v);
        let chi = chi_eps(&y, eps).unwrap();
        for (&yi, &ci) in y.coeffs().iter().zip(chi.coeffs()) {
            prop_assert!((0.0..=1.0).contains(&ci));
            if yi <= 0.0 { prop_assert_eq!(ci, 0.0); }
            if yi >= eps { prop_assert_eq!(ci, 1.0); }
        }
    }

    #[test]
    fn sparse_triplet_round_trip(entries in prop::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..30)) {
        let t: Vec<Triplet> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = CsrMatrix::from_triplets(6, 5, &t).unwrap();
        let back = CsrMatrix::from_triplets(6, 5, &m.to_triplets()).unwrap();
        prop_assert_eq!(back, m);
    }
}

fn random_system(diag: &[f64], off: &[(usize, usize, f64)], symmetric: bool) -> CsrMatrix {
    let n = diag.len();
    let mut t: Vec<Triplet> = diag.iter().enumerate().map(|(i, &d)| Triplet::new(i, i, d)).collect();
    for &(i, j, v) in off {
        let (i, j) = (i % n, j % n);
        t.push(Triplet::new(i, j, v));
        if symmetric {
            t.push(Triplet::new(j, i, v));
        }
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn solve_reproduces_rhs(
        diag in prop::collection::vec(prop_oneof![4.0f64..10.0, -10.0f64..-4.0], 12),
        off in prop::collection::vec((0usize..12, 0usize..12, -1.0f64..1.0), 0..30),
        b in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let m = random_system(&diag, &off, false);
        if let Ok(x) = solve_linear(&m, &b) {
            let r = m.spmv(&x).unwrap();
            let err = r.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-10 * nb.max(1e-300));
        }
    }

    #[test]
    fn inverse_of_symmetric_matrix_is_symmetric(
        diag in prop::collection::vec(6.0f64..10.0, 10),
        off in prop::collection::vec((0usize..10, 0usize..10, -1.0f64..1.0), 0..12),
        x in prop::collection::vec(-1.0f64..1.0, 10),
        y in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let m = random_system(&diag, &off, true);
        let (ax, ay) = (solve_linear(&m, &x).unwrap(), solve_linear(&m, &y).unwrap());
        prop_assert!((dot(&y, &ax) - dot(&x, &ay)).abs() <= 1e-12);
    }

    #[test]
    fn lumped_mass_counts_interior_vertices(m in 2usize..16) {
        let space = FeSpace::unit_square(m).unwrap();
        let ops = assemble_operators(&space).unwrap();
        let mesh = space.mesh();
        let expected: f64 = (0..mesh.triangles().len())
            .map(|t| {
                let k = mesh.triangles()[t].iter().filter(|&&v| !mesh.is_boundary_vertex(v)).count();
                mesh.signed_area(t).abs() * k as f64 / 3.0
            })
            .sum();
        let total: f64 = ops.lumped.iter().sum();
        prop_assert!((total - expected).abs() < 1e-13);
        prop_assert!(total <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lipschitz_bound(a in field(-1.0, 1.0), b in field(-1.0, 1.0), sa in -1.0f64..3.0, sb in -1.0f64..3.0) {
        let ops = ops();
        let prob = StateProblem::homogeneous(ops.clone());
        let u1 = fe(a).scaled(10f64.powf(sa));
        let u2 = fe(b).scaled(10f64.powf(sb));
        let (y1, r1) = solve_state(&prob, &u1).unwrap();
        let (y2, r2) = solve_state(&prob, &u2).unwrap();
        prop_assert!(r1.converged && r2.converged);
        let lhs = ops.grad_norm(&y1.sub(&y2).unwrap());
        let rhs = ops.l2_norm(&u1.sub(&u2).unwrap()) / (SQRT_2 * PI);
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn maximum_principle(u in field(0.0, 50.0), f in field(0.0, 50.0)) {
        let ops = ops();
        let prob = StateProblem::new(ops.clone(), fe(f)).unwrap();
        let (y, rep) = solve_state(&prob, &fe(u)).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(y.coeffs().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn gchi_is_self_adjoint(chi in field(0.0, 1.0), h1 in field(-1.0, 1.0), h2 in field(-1.0, 1.0)) {
        let ops = ops();
        let chi = fe(chi);
        let (h1, h2) = (fe(h1), fe(h2));
        let g1 = apply_gchi(&ops, &chi, &h1).unwrap();
        let g2 = apply_gchi(&ops, &chi, &h2).unwrap();
        let a = dot(&ops.mass_times(h2.coeffs()), g1.coeffs());
        let b = dot(&ops.mass_times(h1.coeffs()), g2.coeffs());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn gchi_rejects_values_outside_unit_interval(chi in field(0.0, 1.0), k in 0usize..36, bad in prop_oneof![-2.0f64..-1e-9, 1.0 + 1e-9..3.0]) {
        let ops = ops();
        let mut chi = chi;
        chi[k % n()] = bad;
        prop_assert!(apply_gchi(&ops, &fe(chi), &FeFunction::constant(ops.space(), 1.0)).is_err());
    }

    #[test]
    fn derivative_is_positively_homogeneous(
        y in field(-1.0, 1.0),
        zeros in prop::collection::vec(any::<bool>(), 36),
        h in field(-1.0, 1.0),
        s in 0.01f64..100.0,
    ) {
        let ops = ops();
        let prob = StateProblem::homogeneous(ops.clone());
        let y: Vec<f64> = y.iter().zip(&zeros).map(|(&v, &z)| if z { 0.0 } else { v }).collect();
        let y = fe(y);
        let h = fe(h);
        let (d1, r1) = directional_derivative(&prob, &y, &h, 1e-12).unwrap();
        let (ds, r2) = directional_derivative(&prob, &y, &h.scaled(s), 1e-12).unwrap();
        prop_assert!(r1.converged && r2.converged);
        let diff = ops.l2_norm(&ds.sub(&d1.scaled(s)).unwrap());
        prop_assert!(diff <= 1e-10 * (1.0 + ops.l2_norm(&ds)));
    }

    #[test]
    fn regularization_gap_is_linear_in_eps(u in field(-200.0, 200.0)) {
        let ops = ops();
        let prob = StateProblem::homogeneous(ops.clone());
        let u = fe(u);
        let (y, _) = solve_state(&prob, &u).unwrap();
        let gap = |eps: f64| {
            let (ye, rep) = solve_state_regularized(&prob, &u, eps).unwrap();
            assert!(rep.converged);
            ops.l2_norm(&ye.sub(&y).unwrap())
        };
        let (g1, g2, g3) = (gap(1e-2), gap(1e-3), gap(1e-4));
        // Monotonicity and the discrete Poincaré constant of the lumped
        // Laplacian give ‖y_ε − y‖ ≤ ε / (2 λ_h), since 0 ≤ max − max_ε ≤ ε/2.
        let h = 1.0 / M as f64;
        let lambda = 8.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        for (g, eps) in [(g1, 1e-2), (g2, 1e-3), (g3, 1e-4)] {
            prop_assert!(g <= eps / (2.0 * lambda) * (1.0 + 1e-9));
        }
        // The empirical constant from the two coarser values carries over,
        // with room for the pre-asymptotic drift of gap/ε.
        let c = (g1 / 1e-2).max(g2 / 1e-3);
        prop_assert!(g3 <= 2.0 * c * 1e-4 + 1e-14, "{} {} {}", g1, g2, g3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn newton_tail_is_quadratic(f in -60.0f64..60.0, y_d in -1.0f64..1.0, la in -3.0f64..-1.0, lg in -8.0f64..-3.0) {
        let cfg = KktConfig::new(10f64.powf(la), 10f64.powf(lg)).unwrap();
        let case = build_case(ExampleSel::Custom, Some(CustomData { f, y_d }), 9, cfg).unwrap();
        let (_, rep) = solve_kkt(&case.data).unwrap();
        if rep.converged {
            let h = &rep.residual_history;
            if h.len() >= 2 {
                let (prev, last) = (h[h.len() - 2], h[h.len() - 1]);
                prop_assert!(last <= 1e6 * prev * prev, "{:?}", h);
            }
        }
    }

    #[test]
    fn solutions_do_not_depend_on_gamma(f in -60.0f64..60.0, y_d in -1.0f64..1.0, lg1 in -10.0f64..-4.0, lg2 in -10.0f64..-4.0) {
        let c1 = KktConfig::new(1e-2, 10f64.powf(lg1)).unwrap();
        let c2 = KktConfig::new(1e-2, 10f64.powf(lg2)).unwrap();
        let case = build_case(ExampleSel::Custom, Some(CustomData { f, y_d }), 9, c1).unwrap();
        let other = case.data.with_config(c2).unwrap();
        let (p1, r1) = solve_kkt(&case.data).unwrap();
        let (p2, r2) = solve_kkt(&other).unwrap();
        prop_assume!(r1.converged && r2.converged);
        prop_assert!(residual_norm(&other, &p1).unwrap() < 1e-8);
        prop_assert!(residual_norm(&case.data, &p2).unwrap() < 1e-8);
    }
}
