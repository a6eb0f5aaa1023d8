use std::sync::Arc;

use super::{FeFunction, FeSpace};
use crate::error::Result;
use crate::sparse::{CsrMatrix, LuFactor, Triplet};

/// Stiffness, consistent mass, and lumped mass matrices on the interior
/// unknowns of a [`FeSpace`].
#[derive(Clone, Debug)]
pub struct FeOperators {
    space: Arc<FeSpace>,
    /// Stiffness `(∇φ_i, ∇φ_j)`.
    pub stiffness: CsrMatrix,
    /// Consistent mass `(φ_i, φ_j)`.
    pub mass: CsrMatrix,
    /// Lumped mass diagonal `|supp φ_i| / 3`.
    pub lumped: Vec<f64>,
}

impl FeOperators {
    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    /// The lumped mass as a diagonal sparse matrix.
    pub fn lumped_matrix(&self) -> CsrMatrix {
        CsrMatrix::from_diagonal(&self.lumped)
    }

    /// `M v` for a coefficient vector.
    pub fn mass_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.mass.spmv_into(v, &mut out);
        out
    }

    pub fn stiffness_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.stiffness.spmv_into(v, &mut out);
        out
    }

    /// Discrete L² norm `sqrt(vᵀ M v)` of an FE function.
    pub fn l2_norm(&self, v: &FeFunction) -> f64 {
        crate::sparse::dot(v.coeffs(), &self.mass_times(v.coeffs())).max(0.0).sqrt()
    }

    /// `‖∇v‖_{L²} = sqrt(vᵀ A v)`.
    pub fn grad_norm(&self, v: &FeFunction) -> f64 {
        crate::sparse::dot(v.coeffs(), &self.stiffness_times(v.coeffs()))
            .max(0.0)
            .sqrt()
    }
}

/// L² projection of `g` onto the space: `M c = ((g, φ_i))_i`.
pub fn l2_projection(ops: &FeOperators, g: impl Fn(f64, f64) -> f64) -> Result<FeFunction> {
    let b = super::quadrature::load_vector(ops.space(), g);
    let c = LuFactor::new(&ops.mass)?.solve(&b)?;
    FeFunction::new(ops.space(), c)
}

/// Assembles `A`, `M`, and `D` element by element with exact P1 integrals.
pub fn assemble_operators(space: &Arc<FeSpace>) -> Result<FeOperators> {
    let mesh = space.mesh();
    let n = space.n();
    let mut stiff = Vec::with_capacity(9 * mesh.triangles().len());
    let mut mass = Vec::with_capacity(9 * mesh.triangles().len());
    let mut lumped = vec![0.0; n];

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let area = mesh.signed_area(t);
        // gradients of the barycentric coordinates: ∇λ_a = rot(p_c - p_b) / (2|T|)
        let grads: [[f64; 2]; 3] = std::array::from_fn(|a| {
            let b = p[(a + 1) % 3];
            let c = p[(a + 2) % 3];
            [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)]
        });
        let dofs = tri.map(|v| space.dof_of_vertex(v));
        for a in 0..3 {
            let Some(i) = dofs[a] else { continue };
            lumped[i] += area / 3.0;
            for b in 0..3 {
                let Some(j) = dofs[b] else { continue };
                let k = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                let mm = if a == b { area / 6.0 } else { area / 12.0 };
                stiff.push(Triplet::new(i, j, k));
                mass.push(Triplet::new(i, j, mm));
            }
        }
    }

    let mut stiffness = CsrMatrix::from_triplets(n, n, &stiff)?;
    // exact cancellations leave round-off sized entries on the diagonal
    // direction of the mesh; drop them so A is the clean five-point stencil
    stiffness = drop_tiny(&stiffness, 1e-12);
    Ok(FeOperators {
        space: Arc::clone(space),
        stiffness,
        mass: CsrMatrix::from_triplets(n, n, &mass)?,
        lumped,
    })
}

fn drop_tiny(m: &CsrMatrix, tol: f64) -> CsrMatrix {
    let kept: Vec<Triplet> = m
        .to_triplets()
        .into_iter()
        .filter(|t| t.value.abs() > tol)
        .collect();
    CsrMatrix::from_triplets(m.n_rows(), m.n_cols(), &kept).expect("indices already validated")
}
