//! P1 finite elements on a Friedrichs–Keller triangulation of the unit square.

mod assembly;
mod quadrature;
pub mod vtk;

pub use assembly::{assemble_operators, l2_projection, FeOperators};
pub use quadrature::{l2_error, l2_norm_exact, linf_nodal_error, load_vector};

use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform triangulation of `[0,1]²` with `m` cells per side, each cell cut
/// along its bottom-left to top-right diagonal.
///
/// Vertex `(i, j)` sits at `(i/m, j/m)` and has index `j (m+1) + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    m: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "mesh needs at least 2 subdivisions per side, got {m}"
            )));
        }
        let np = m + 1;
        let h = 1.0 / m as f64;
        let vertices = (0..np)
            .flat_map(|j| (0..np).map(move |i| [i as f64 * h, j as f64 * h]))
            .collect();
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let v00 = j * np + i;
                let v10 = v00 + 1;
                let v01 = v00 + np;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Ok(Self {
            m,
            vertices,
            triangles,
        })
    }

    /// Subdivisions per side.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Mesh size `1/m`.
    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Signed area of triangle `t`.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let (i, j) = (v % (self.m + 1), v / (self.m + 1));
        i == 0 || j == 0 || i == self.m || j == self.m
    }
}

/// Build the Friedrichs–Keller mesh with `m` subdivisions per side.
pub fn build_mesh(m: usize) -> Result<TriMesh> {
    TriMesh::new(m)
}

/// Homogeneous-Dirichlet P1 space: one unknown per interior vertex, ordered
/// row by row (`j` outer, `i` inner).
#[derive(Debug, PartialEq)]
pub struct FeSpace {
    mesh: TriMesh,
    interior_nodes: Vec<usize>,
    vertex_to_dof: Vec<Option<usize>>,
}

impl FeSpace {
    pub fn new(mesh: TriMesh) -> Arc<Self> {
        let mut vertex_to_dof = vec![None; mesh.n_vertices()];
        let mut interior_nodes = Vec::with_capacity((mesh.m() - 1).pow(2));
        for v in 0..mesh.n_vertices() {
            if !mesh.is_boundary_vertex(v) {
                vertex_to_dof[v] = Some(interior_nodes.len());
                interior_nodes.push(v);
            }
        }
        Arc::new(Self {
            mesh,
            interior_nodes,
            vertex_to_dof,
        })
    }

    /// Convenience: mesh plus space in one call.
    pub fn unit_square(m: usize) -> Result<Arc<Self>> {
        Ok(Self::new(TriMesh::new(m)?))
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Number of unknowns, `(m-1)²`.
    pub fn n(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.vertex_to_dof[v]
    }

    /// Coordinates of interior node `k`.
    pub fn node(&self, k: usize) -> [f64; 2] {
        self.mesh.vertices[self.interior_nodes[k]]
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.interior_nodes.iter().map(|&v| self.mesh.vertices[v])
    }

    /// Nodal values at every mesh vertex, zero on the boundary.
    pub fn extend_by_zero(&self, coeffs: &[f64]) -> Vec<f64> {
        self.vertex_to_dof
            .iter()
            .map(|d| d.map_or(0.0, |k| coeffs[k]))
            .collect()
    }
}

/// A P1 function given by its values at the interior nodes.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: &Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                found: coeffs.len(),
            });
        }
        Ok(Self {
            space: Arc::clone(space),
            coeffs,
        })
    }

    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self {
            space: Arc::clone(space),
            coeffs: vec![0.0; space.n()],
        }
    }

    pub fn constant(space: &Arc<FeSpace>, value: f64) -> Self {
        Self {
            space: Arc::clone(space),
            coeffs: vec![value; space.n()],
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// New function on the same space.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(&self.space, coeffs)
    }

    pub fn same_space(&self, other: &FeFunction) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    pub(crate) fn check_same_space(&self, other: &FeFunction) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|c| s * c)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &FeFunction) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: Arc::clone(&self.space),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &FeFunction) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Lagrange interpolation of `g` at the interior nodes.
pub fn interpolate(space: &Arc<FeSpace>, g: impl Fn(f64, f64) -> f64) -> Result<FeFunction> {
    let coeffs = space
        .nodes()
        .enumerate()
        .map(|(k, [x, y])| {
            let v = g(x, y);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { node: k })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FeFunction::new(space, coeffs)
}
