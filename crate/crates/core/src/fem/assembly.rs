use std::sync::Arc;

use nalgebra::Vector2;
use rayon::prelude::*;

use super::source::Source;
use super::sparse::{CsrMatrix, Pattern};
use crate::error::{Error, Result};
use crate::media::Medium;
use crate::mesh::Mesh;

/// P1 assembly on a fixed mesh.
///
/// Full matrices are node x node; the interior restriction keeps only rows
/// and columns of interior (dof) nodes. All matrices of one assembler share
/// their patterns.
#[derive(Debug, Clone)]
pub struct Assembler {
    mesh: Arc<Mesh>,
    full: Arc<Pattern>,
    elem_slots: Vec<[usize; 9]>,
    interior: Arc<Pattern>,
    interior_from_full: Vec<usize>,
    lumped: Vec<f64>,
}

impl Assembler {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mut rows = vec![Vec::new(); mesh.n_nodes()];
        for t in mesh.triangles() {
            for &a in t {
                rows[a].extend_from_slice(t);
            }
        }
        let full = Pattern::from_rows(rows);
        let elem_slots = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut s = [0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = full.slot(t[a], t[b]).expect("element entry in pattern");
                    }
                }
                s
            })
            .collect();

        let mut int_rows = Vec::with_capacity(mesh.n_interior());
        let mut interior_from_full = Vec::new();
        for &v in mesh.dof_nodes() {
            let mut row = Vec::new();
            for k in full.row_ptr[v]..full.row_ptr[v + 1] {
                if let Some(d) = mesh.node_dof(full.col[k]) {
                    row.push(d);
                    interior_from_full.push(k);
                }
            }
            int_rows.push(row);
        }
        // Columns of a full row are sorted by node index, and dof order follows
        // node order, so the interior rows are already sorted.
        let interior = Pattern::from_rows(int_rows);
        debug_assert_eq!(interior.nnz(), interior_from_full.len());

        let mut lumped = vec![0.0; mesh.n_nodes()];
        for (t, &area) in mesh.triangles().iter().zip(mesh.tri_area()) {
            for &a in t {
                lumped[a] += area / 3.0;
            }
        }
        Self { mesh, full: Arc::new(full), elem_slots, interior: Arc::new(interior), interior_from_full, lumped }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    fn scatter(&self, elems: &[[f64; 9]]) -> Vec<f64> {
        let mut values = vec![0.0; self.full.nnz()];
        for (slots, ke) in self.elem_slots.iter().zip(elems) {
            for (s, v) in slots.iter().zip(ke) {
                values[*s] += v;
            }
        }
        values
    }

    /// Full stiffness matrix `K_ij = sum_T area * grad(phi_i) . a(centroid, t) grad(phi_j)`.
    pub fn stiffness_full(&self, medium: &Medium, t: f64) -> Result<CsrMatrix> {
        let mesh = &*self.mesh;
        let elems: Vec<[f64; 9]> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|k| {
                let a = medium.on_triangle(mesh, k, t);
                if !a.is_spd() {
                    return Err(Error::NonSpdCoefficient { triangle: k, t });
                }
                let g = &mesh.tri_grad()[k];
                let area = mesh.tri_area()[k];
                let ag: [Vector2<f64>; 3] = std::array::from_fn(|b| a.matrix() * g[b]);
                let mut ke = [0.0; 9];
                for i in 0..3 {
                    for j in i..3 {
                        let v = area * g[i].dot(&ag[j]);
                        ke[3 * i + j] = v;
                        ke[3 * j + i] = v;
                    }
                }
                Ok(ke)
            })
            .collect::<Result<_>>()?;
        Ok(CsrMatrix::new(self.full.clone(), self.scatter(&elems), true))
    }

    /// Interior-dof stiffness matrix.
    pub fn stiffness(&self, medium: &Medium, t: f64) -> Result<CsrMatrix> {
        Ok(self.restrict(&self.stiffness_full(medium, t)?))
    }

    /// Consistent P1 mass matrix over all nodes.
    pub fn mass_full(&self) -> CsrMatrix {
        let elems: Vec<[f64; 9]> = self
            .mesh
            .tri_area()
            .iter()
            .map(|&area| {
                let (d, o) = (area / 6.0, area / 12.0);
                [d, o, o, o, d, o, o, o, d]
            })
            .collect();
        CsrMatrix::new(self.full.clone(), self.scatter(&elems), true)
    }

    pub fn mass(&self) -> CsrMatrix {
        self.restrict(&self.mass_full())
    }

    /// Row sums of the mass matrix: a third of the area of each adjacent triangle.
    pub fn lumped_mass_full(&self) -> &[f64] {
        &self.lumped
    }

    pub fn lumped_mass(&self) -> Vec<f64> {
        self.mesh.restrict_interior(&self.lumped)
    }

    /// Load vector from the vertex values of `g`, integrated exactly against
    /// the hats: `b_i = sum_T area/12 * (2 g_i + g_j + g_k)`. Exact for P1 `g`.
    pub fn load_full(&self, g: &Source, t: f64) -> Vec<f64> {
        let n = self.mesh.n_nodes();
        match g {
            Source::Zero => vec![0.0; n],
            Source::One => self.lumped.clone(),
            _ => {
                let nodal: Vec<f64> = self.mesh.nodes().iter().map(|p| g.eval(*p, t)).collect();
                let mut b = vec![0.0; n];
                for (tri, &area) in self.mesh.triangles().iter().zip(self.mesh.tri_area()) {
                    let s = nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]];
                    for &v in tri {
                        b[v] += area / 12.0 * (s + nodal[v]);
                    }
                }
                b
            }
        }
    }

    pub fn load(&self, g: &Source, t: f64) -> Vec<f64> {
        self.mesh.restrict_interior(&self.load_full(g, t))
    }

    /// Interior block of a full matrix.
    pub fn restrict(&self, full: &CsrMatrix) -> CsrMatrix {
        debug_assert!(Arc::ptr_eq(full.pattern(), &self.full));
        let values = self.interior_from_full.iter().map(|&k| full.values()[k]).collect();
        CsrMatrix::new(self.interior.clone(), values, full.is_symmetric())
    }

    /// Interior rows of `full * x` for a full nodal vector `x`.
    pub fn apply_restricted(&self, full: &CsrMatrix, x: &[f64]) -> Vec<f64> {
        self.mesh.dof_nodes().iter().map(|&v| full.row(v).map(|(j, a)| a * x[j]).sum()).collect()
    }

    pub fn full_pattern(&self) -> &Arc<Pattern> {
        &self.full
    }

    pub fn interior_pattern(&self) -> &Arc<Pattern> {
        &self.interior
    }
}

/// Interior-dof stiffness matrix `A(t)`.
pub fn assemble_stiffness(mesh: &Mesh, medium: &Medium, t: f64) -> Result<CsrMatrix> {
    Assembler::new(Arc::new(mesh.clone())).stiffness(medium, t)
}

/// Interior-dof consistent mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    Assembler::new(Arc::new(mesh.clone())).mass()
}

/// Interior-dof load vector.
pub fn assemble_load(mesh: &Mesh, g: &Source, t: f64) -> Vec<f64> {
    Assembler::new(Arc::new(mesh.clone())).load(g, t)
}
