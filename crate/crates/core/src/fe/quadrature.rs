use std::sync::Arc;

use super::{FeFunction, FeSpace};
use crate::error::{Error, Result};

/// Six-point rule on the reference triangle, exact for polynomials of degree
/// four. Entries are barycentric coordinates and weights summing to one.
const RULE: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_965;
    const B1: f64 = 0.108_103_018_168_070;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.091_576_213_509_771;
    const B2: f64 = 0.816_847_572_980_459;
    const W2: f64 = 0.109_951_743_655_322;
    [
        ([B1, A1, A1], W1),
        ([A1, B1, A1], W1),
        ([A1, A1, B1], W1),
        ([B2, A2, A2], W2),
        ([A2, B2, A2], W2),
        ([A2, A2, B2], W2),
    ]
};

/// Integrates `integrand(fe_value, x, y)` over the square, triangle by
/// triangle, with the FE function evaluated at each quadrature point.
fn integrate(space: &FeSpace, coeffs: &[f64], integrand: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let mesh = space.mesh();
    let full = space.extend_by_zero(coeffs);
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let vals = tri.map(|v| full[v]);
        let area = mesh.signed_area(t);
        let mut local = 0.0;
        for (bary, w) in RULE {
            let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
            let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
            let u = bary[0] * vals[0] + bary[1] * vals[1] + bary[2] * vals[2];
            local += w * integrand(u, x, y);
        }
        total += area * local;
    }
    total
}

/// `‖fe − exact‖_{L²(Ω)}`, integrated with the degree-4 rule.
pub fn l2_error(fe: &FeFunction, exact: impl Fn(f64, f64) -> f64) -> f64 {
    integrate(fe.space(), fe.coeffs(), |u, x, y| {
        let d = u - exact(x, y);
        d * d
    })
    .max(0.0)
    .sqrt()
}

/// `‖g‖_{L²(Ω)}` with the same rule, for forming relative errors.
pub fn l2_norm_exact(space: &Arc<FeSpace>, g: impl Fn(f64, f64) -> f64) -> f64 {
    let zero = vec![0.0; space.n()];
    integrate(space, &zero, |_, x, y| {
        let v = g(x, y);
        v * v
    })
    .max(0.0)
    .sqrt()
}

/// Load vector `(g, φ_i)` over the interior basis functions.
pub fn load_vector(space: &FeSpace, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mesh = space.mesh();
    let mut out = vec![0.0; space.n()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let dofs = tri.map(|v| space.dof_of_vertex(v));
        if dofs.iter().all(Option::is_none) {
            continue;
        }
        let area = mesh.signed_area(t);
        for (bary, w) in RULE {
            let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
            let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
            let gv = area * w * g(x, y);
            for k in 0..3 {
                if let Some(d) = dofs[k] {
                    out[d] += gv * bary[k];
                }
            }
        }
    }
    out
}

/// Maximum nodal difference over the interior nodes.
pub fn linf_nodal_error(fe: &FeFunction, exact_nodal: &FeFunction) -> Result<f64> {
    if !fe.same_space(exact_nodal) {
        return Err(Error::SpaceMismatch);
    }
    Ok(fe
        .coeffs()
        .iter()
        .zip(exact_nodal.coeffs())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::interpolate;
    use std::f64::consts::PI;

    #[test]
    fn rule_weights_sum_to_one() {
        let s: f64 = RULE.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rule_is_exact_for_quartics() {
        let space = FeSpace::unit_square(3).unwrap();
        let zero = vec![0.0; space.n()];
        let a = integrate(&space, &zero, |_, x, _| x.powi(4));
        let b = integrate(&space, &zero, |_, x, y| x.powi(3) * y);
        let c = integrate(&space, &zero, |_, x, y| x * x * y * y);
        assert!((b - 1.0 / 8.0).abs() < 1e-13);
        assert!((c - 1.0 / 9.0).abs() < 1e-13);
        assert!((a - 1.0 / 5.0).abs() < 1e-13);
    }

    #[test]
    fn constant_interpolant_has_no_error_inside() {
        // a constant is not in the Dirichlet space, so compare on a function
        // vanishing on the boundary that P1 reproduces exactly: zero
        let space = FeSpace::unit_square(5).unwrap();
        let f = interpolate(&space, |_, _| 0.0).unwrap();
        assert!(l2_error(&f, |_, _| 0.0) < 1e-14);
    }

    #[test]
    fn norm_of_sine_product() {
        let space = FeSpace::unit_square(64).unwrap();
        let zero = FeFunction::zeros(&space);
        let e = l2_error(&zero, |x, y| (PI * x).sin() * (PI * y).sin());
        assert!((e - 0.5).abs() < 1e-6, "{e}");
    }

    #[test]
    fn load_vector_of_one_sums_to_interior_mass() {
        // Σ_i (1, φ_i) = ∫ Σ_i φ_i, which equals the total lumped mass
        let space = FeSpace::unit_square(6).unwrap();
        let b = load_vector(&space, |_, _| 1.0);
        let total: f64 = b.iter().sum();
        let lumped = 25.0 * (1.0f64 / 36.0);
        assert!((total - lumped).abs() < 1e-14, "{total}");
    }

    #[test]
    fn nodal_linf() {
        let space = FeSpace::unit_square(3).unwrap();
        let a = FeFunction::new(&space, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = FeFunction::zeros(&space);
        assert_eq!(linf_nodal_error(&a, &b).unwrap(), 1.0);
        assert_eq!(linf_nodal_error(&a, &a).unwrap(), 0.0);
    }
}
