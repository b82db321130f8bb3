//! Uniform conforming triangulations of the square (-1, 1)^2.

use std::io::Write;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::locate::{PointLocation, PointLocator};

pub type Point = Point2<f64>;

/// Lower and upper corner of the computational domain along each axis.
pub const DOMAIN_MIN: f64 = -1.0;
pub const DOMAIN_MAX: f64 = 1.0;
/// Area of the computational domain.
pub const DOMAIN_AREA: f64 = (DOMAIN_MAX - DOMAIN_MIN) * (DOMAIN_MAX - DOMAIN_MIN);

/// A P1 triangulation with precomputed element geometry.
///
/// Interior nodes are numbered as degrees of freedom in increasing node order;
/// boundary nodes carry homogeneous Dirichlet data and have no dof.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    tri_area: Vec<f64>,
    tri_grad: Vec<[Vector2<f64>; 3]>,
    node_dof: Vec<Option<usize>>,
    dof_node: Vec<usize>,
    subdivisions: usize,
}

impl Mesh {
    /// Uniform `n x n` grid of square cells over (-1, 1)^2, each cut along the
    /// lower-left to upper-right diagonal.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMesh("subdivision count must be at least 1".into()));
        }
        let h = (DOMAIN_MAX - DOMAIN_MIN) / n as f64;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push(Point::new(DOMAIN_MIN + i as f64 * h, DOMAIN_MIN + j as f64 * h));
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        // Pin the far edge exactly to the domain boundary.
        for p in nodes.iter_mut() {
            if (p.x - DOMAIN_MAX).abs() < 0.5 * h {
                p.x = DOMAIN_MAX;
            }
            if (p.y - DOMAIN_MAX).abs() < 0.5 * h {
                p.y = DOMAIN_MAX;
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
        Self::from_parts(nodes, triangles, boundary, n)
    }

    fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>, subdivisions: usize) -> Result<Self> {
        let mut tri_area = Vec::with_capacity(triangles.len());
        let mut tri_grad = Vec::with_capacity(triangles.len());
        for (k, tri) in triangles.iter().enumerate() {
            let (area, grad) = p1_geometry(&nodes, tri);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {k} has non-positive area {area}")));
            }
            tri_area.push(area);
            tri_grad.push(grad);
        }
        let mut node_dof = vec![None; nodes.len()];
        let mut dof_node = Vec::new();
        for (v, &b) in boundary.iter().enumerate() {
            if !b {
                node_dof[v] = Some(dof_node.len());
                dof_node.push(v);
            }
        }
        Ok(Self { nodes, triangles, boundary, tri_area, tri_grad, node_dof, dof_node, subdivisions })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn tri_area(&self) -> &[f64] {
        &self.tri_area
    }

    /// Gradients of the three barycentric (hat) functions of each triangle.
    pub fn tri_grad(&self) -> &[[Vector2<f64>; 3]] {
        &self.tri_grad
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_interior(&self) -> usize {
        self.dof_node.len()
    }

    /// Number of cells per side of the uniform grid.
    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    /// Grid spacing of the uniform mesh.
    pub fn spacing(&self) -> f64 {
        (DOMAIN_MAX - DOMAIN_MIN) / self.subdivisions as f64
    }

    pub fn node_dof(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    pub fn dof_nodes(&self) -> &[usize] {
        &self.dof_node
    }

    pub fn centroid(&self, tri: usize) -> Point {
        let [a, b, c] = self.triangles[tri];
        let s = self.nodes[a].coords + self.nodes[b].coords + self.nodes[c].coords;
        Point::from(s / 3.0)
    }

    /// Scatter interior dof values into a full nodal vector (zero on the boundary).
    pub fn extend_interior(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_nodes()];
        for (d, &v) in self.dof_node.iter().enumerate() {
            full[v] = interior[d];
        }
        full
    }

    /// Gather the interior dof values of a full nodal vector.
    pub fn restrict_interior(&self, full: &[f64]) -> Vec<f64> {
        self.dof_node.iter().map(|&v| full[v]).collect()
    }

    /// Constant gradient of a P1 field on triangle `tri`.
    pub fn gradient(&self, nodal: &[f64], tri: usize) -> Vector2<f64> {
        let g = &self.tri_grad[tri];
        let t = &self.triangles[tri];
        g[0] * nodal[t[0]] + g[1] * nodal[t[1]] + g[2] * nodal[t[2]]
    }

    pub fn locator(&self) -> PointLocator {
        PointLocator::new(self.nodes.clone(), self.triangles.clone())
    }

    /// Evaluates a nodal P1 field at a located point.
    pub fn interpolate(&self, nodal: &[f64], loc: &PointLocation) -> f64 {
        p1_interpolate(&self.triangles, nodal, loc)
    }

    /// Writes the mesh as a sectioned CSV (`nodes` then `triangles`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# nodes")?;
        writeln!(w, "id,x,y,boundary")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", p.x, p.y, self.boundary[i] as u8)?;
        }
        writeln!(w, "# triangles")?;
        writeln!(w, "id,n0,n1,n2")?;
        for (k, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{k},{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Evaluates `sum_k w_k * nodal[vertex_k]` for a point location.
pub fn p1_interpolate(triangles: &[[usize; 3]], nodal: &[f64], loc: &PointLocation) -> f64 {
    let t = &triangles[loc.triangle];
    (0..3).map(|k| loc.barycentric[k] * nodal[t[k]]).sum()
}

/// Signed area and barycentric gradients of a triangle.
pub(crate) fn p1_geometry(nodes: &[Point], tri: &[usize; 3]) -> (f64, [Vector2<f64>; 3]) {
    let (a, b, c) = (nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    let twice = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let area = 0.5 * twice;
    let grad = [
        Vector2::new(b.y - c.y, c.x - b.x) / twice,
        Vector2::new(c.y - a.y, a.x - c.x) / twice,
        Vector2::new(a.y - b.y, b.x - a.x) / twice,
    ];
    (area, grad)
}
