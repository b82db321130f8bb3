//! Harmonic coordinates `F = (F1, F2)`.
//!
//! Each component solves the medium's operator with `F_i = x_i` on the
//! boundary: elliptically for time-independent media, and by backward Euler
//! from the elliptic solution at `t = 0` otherwise. Unknowns are
//! `G_i = F_i - x_i`, which vanish on the boundary.

use std::io::Write;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fem::{pcg, Assembler, BackwardEuler, CsrMatrix, DEFAULT_TOLERANCE};
use crate::locate::{PointLocation, PointLocator};
use crate::media::Medium;
use crate::mesh::{Mesh, Point};

/// Nodal values of both components at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct MapLevel {
    pub t: f64,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl MapLevel {
    pub fn identity(mesh: &Mesh, t: f64) -> Self {
        Self { t, f1: mesh.nodes().iter().map(|p| p.x).collect(), f2: mesh.nodes().iter().map(|p| p.y).collect() }
    }

    pub fn image(&self, node: usize) -> Point {
        Point::new(self.f1[node], self.f2[node])
    }

    /// Jacobian with columns `grad F1`, `grad F2`, i.e. `J[(i, j)] = d_i F_j`.
    pub fn jacobian(&self, mesh: &Mesh, tri: usize) -> Matrix2<f64> {
        let g1 = mesh.gradient(&self.f1, tri);
        let g2 = mesh.gradient(&self.f2, tri);
        Matrix2::new(g1.x, g2.x, g1.y, g2.y)
    }

    pub fn dets(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.n_triangles()).map(|k| self.jacobian(mesh, k).determinant()).collect()
    }

    /// Smallest Jacobian determinant and the triangle where it occurs.
    pub fn min_det(&self, mesh: &Mesh) -> (f64, usize) {
        self.dets(mesh).into_iter().enumerate().fold((f64::INFINITY, 0), |(m, k), (j, d)| if d < m { (d, j) } else { (m, k) })
    }

    /// Largest `|F(x) - x|` over boundary nodes.
    pub fn boundary_defect(&self, mesh: &Mesh) -> f64 {
        (0..mesh.n_nodes()).filter(|&v| mesh.is_boundary(v)).map(|v| (self.image(v) - mesh.nodes()[v]).norm()).fold(0.0, f64::max)
    }
}

/// Recorded when a level of `F` has a triangle with `det grad F <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertibilityWarning {
    pub level: usize,
    pub t: f64,
    pub triangle: usize,
    pub det: f64,
}

/// Harmonic coordinates on a fine time grid.
#[derive(Debug, Clone)]
pub struct HarmonicMap {
    mesh: Arc<Mesh>,
    levels: Vec<MapLevel>,
    /// Time grid; for time-independent media every time shares `levels[0]`.
    times: Vec<f64>,
    time_independent: bool,
    warnings: Vec<InvertibilityWarning>,
}

impl HarmonicMap {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    pub fn level(&self, k: usize) -> &MapLevel {
        if self.time_independent {
            &self.levels[0]
        } else {
            &self.levels[k]
        }
    }

    pub fn last(&self) -> &MapLevel {
        self.level(self.n_levels() - 1)
    }

    pub fn warnings(&self) -> &[InvertibilityWarning] {
        &self.warnings
    }

    /// Smallest determinant over all stored levels.
    pub fn min_det(&self) -> f64 {
        self.levels.iter().map(|l| l.min_det(&self.mesh).0).fold(f64::INFINITY, f64::min)
    }

    /// Identity map (exact), for tests and the reduction checks.
    pub fn identity(mesh: Arc<Mesh>, times: Vec<f64>) -> Self {
        let level = MapLevel::identity(&mesh, 0.0);
        Self { mesh, levels: vec![level], times, time_independent: true, warnings: Vec::new() }
    }

    pub fn from_levels(mesh: Arc<Mesh>, levels: Vec<MapLevel>) -> Self {
        let times = levels.iter().map(|l| l.t).collect();
        let warnings = levels.iter().enumerate().filter_map(|(k, l)| invertibility_warning(&mesh, l, k)).collect();
        Self { mesh, levels, times, time_independent: false, warnings }
    }

    /// Writes `t,node_id,F1,F2` rows for every level.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,node_id,F1,F2")?;
        for (k, &t) in self.times.iter().enumerate() {
            let l = self.level(k);
            for v in 0..self.mesh.n_nodes() {
                writeln!(w, "{t},{v},{},{}", l.f1[v], l.f2[v])?;
            }
        }
        Ok(())
    }

    /// Writes `t,triangle_id,det` rows for every level.
    pub fn write_det_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,triangle_id,det")?;
        for (k, &t) in self.times.iter().enumerate() {
            for (j, d) in self.level(k).dets(&self.mesh).iter().enumerate() {
                writeln!(w, "{t},{j},{d}")?;
            }
        }
        Ok(())
    }
}

fn invertibility_warning(mesh: &Mesh, level: &MapLevel, k: usize) -> Option<InvertibilityWarning> {
    let (det, triangle) = level.min_det(mesh);
    (det <= 0.0).then(|| {
        log::warn!("det grad F = {det:e} on triangle {triangle} at t = {}", level.t);
        InvertibilityWarning { level: k, t: level.t, triangle, det }
    })
}

fn coordinate(mesh: &Mesh, axis: usize) -> Vec<f64> {
    mesh.nodes().iter().map(|p| p[axis]).collect()
}

/// A-harmonic extension of the boundary values of `data` (full nodal vector).
///
/// Interior entries only serve as the lift the correction is solved for, so a
/// `data` that is already discretely harmonic comes back unchanged up to rounding.
pub fn harmonic_extension(asm: &Assembler, stiffness_full: &CsrMatrix, data: &[f64]) -> Result<Vec<f64>> {
    let mesh = asm.mesh();
    let lift = data.to_vec();
    let a = asm.restrict(stiffness_full);
    let rhs: Vec<f64> = asm.apply_restricted(stiffness_full, &lift).into_iter().map(|v| -v).collect();
    let (g, _) = pcg(&a, &rhs, None, DEFAULT_TOLERANCE)?;
    let mut f = mesh.extend_interior(&g);
    for (fi, li) in f.iter_mut().zip(&lift) {
        *fi += li;
    }
    Ok(f)
}

/// Elliptic harmonic coordinates for the full stiffness matrix `stiffness_full`.
pub fn elliptic_from_stiffness(asm: &Assembler, stiffness_full: &CsrMatrix, t: f64) -> Result<MapLevel> {
    let mesh = asm.mesh();
    let solve = |axis: usize| harmonic_extension(asm, stiffness_full, &coordinate(mesh, axis));
    let (f1, f2) = rayon::join(|| solve(0), || solve(1));
    Ok(MapLevel { t, f1: f1?, f2: f2? })
}

/// Harmonic coordinates of the medium at time `t` (elliptic problem).
pub fn solve_elliptic_at(asm: &Assembler, medium: &Medium, t: f64) -> Result<MapLevel> {
    elliptic_from_stiffness(asm, &asm.stiffness_full(medium, t)?, t)
}

/// `F` for a time-independent medium; every time level is the same.
pub fn solve_f_elliptic(mesh: &Mesh, medium: &Medium) -> Result<HarmonicMap> {
    let mesh = Arc::new(mesh.clone());
    let asm = Assembler::new(mesh.clone());
    let level = solve_elliptic_at(&asm, medium, 0.0)?;
    let warnings = invertibility_warning(&mesh, &level, 0).into_iter().collect();
    Ok(HarmonicMap { mesh, levels: vec![level], times: vec![0.0], time_independent: true, warnings })
}

/// Initial harmonic coordinates: the elliptic solve with `a(., 0)`.
pub fn init_f0(mesh: &Mesh, medium: &Medium) -> Result<MapLevel> {
    let asm = Assembler::new(Arc::new(mesh.clone()));
    solve_elliptic_at(&asm, medium, 0.0)
}

/// Backward-Euler evolution of `F`, one fine step at a time.
#[derive(Debug, Clone)]
pub struct HarmonicEvolver {
    x: [Vec<f64>; 2],
    steppers: [BackwardEuler; 2],
    current: MapLevel,
}

impl HarmonicEvolver {
    pub fn new(asm: &Assembler, initial: MapLevel, dt: f64) -> Self {
        let mesh = asm.mesh();
        let x = [coordinate(mesh, 0), coordinate(mesh, 1)];
        let g = |f: &[f64], x: &[f64]| -> Vec<f64> { mesh.dof_nodes().iter().map(|&v| f[v] - x[v]).collect() };
        let steppers =
            [BackwardEuler::new(asm, dt).with_state(g(&initial.f1, &x[0])), BackwardEuler::new(asm, dt).with_state(g(&initial.f2, &x[1]))];
        Self { x, steppers, current: initial }
    }

    pub fn current(&self) -> &MapLevel {
        &self.current
    }

    /// Advances to the next level given the full stiffness matrix there.
    pub fn step(&mut self, asm: &Assembler, stiffness_full: &CsrMatrix) -> Result<&MapLevel> {
        let mesh = asm.mesh();
        let a = asm.restrict(stiffness_full);
        let [s1, s2] = &mut self.steppers;
        let [x1, x2] = &self.x;
        let advance = |s: &mut BackwardEuler, x: &[f64]| -> Result<Vec<f64>> {
            let load: Vec<f64> = asm.apply_restricted(stiffness_full, x).into_iter().map(|v| -v).collect();
            s.step_with(&a, &load)?;
            let mut f = mesh.extend_interior(s.state());
            for (fi, xi) in f.iter_mut().zip(x) {
                *fi += xi;
            }
            Ok(f)
        };
        let (f1, f2) = rayon::join(|| advance(s1, x1), || advance(s2, x2));
        self.current = MapLevel { t: self.steppers[0].time(), f1: f1?, f2: f2? };
        Ok(&self.current)
    }
}

/// Evolves `F` over `[0, T]` with `n_steps` backward-Euler steps, storing every level.
pub fn evolve_f(mesh: &Mesh, medium: &Medium, final_time: f64, n_steps: usize) -> Result<HarmonicMap> {
    if n_steps == 0 || !(final_time > 0.0) {
        return Err(Error::Config("evolution needs T > 0 and at least one step".into()));
    }
    let mesh = Arc::new(mesh.clone());
    let asm = Assembler::new(mesh.clone());
    let dt = final_time / n_steps as f64;
    let initial = solve_elliptic_at(&asm, medium, 0.0)?;
    let mut ev = HarmonicEvolver::new(&asm, initial.clone(), dt);
    let fixed = (!medium.is_time_dependent()).then(|| asm.stiffness_full(medium, 0.0)).transpose()?;
    let mut levels = vec![initial];
    for k in 1..=n_steps {
        let a = match &fixed {
            Some(a) => a.clone(),
            None => asm.stiffness_full(medium, k as f64 * dt)?,
        };
        levels.push(ev.step(&asm, &a)?.clone());
    }
    Ok(HarmonicMap::from_levels(mesh, levels))
}

/// The image triangulation `F(mesh)` with point location, used to evaluate `u o F^-1`.
#[derive(Debug, Clone)]
pub struct InverseMap {
    locator: PointLocator,
    source_nodes: Vec<Point>,
}

impl InverseMap {
    pub fn new(mesh: &Mesh, level: &MapLevel) -> Result<Self> {
        let (det, triangle) = level.min_det(mesh);
        if det <= 0.0 {
            return Err(Error::NonInvertible { triangle, det });
        }
        let image = (0..mesh.n_nodes()).map(|v| level.image(v)).collect();
        Ok(Self { locator: PointLocator::new(image, mesh.triangles().to_vec()), source_nodes: mesh.nodes().to_vec() })
    }

    /// Location of `y` in the image mesh.
    pub fn locate(&self, y: Point) -> Result<PointLocation> {
        self.locator.locate(y)
    }

    /// `F^-1(y)` for a located point.
    pub fn preimage(&self, loc: &PointLocation) -> Point {
        let t = self.locator.triangles()[loc.triangle];
        Point::from((0..3).fold(nalgebra::Vector2::zeros(), |acc, k| acc + self.source_nodes[t[k]].coords * loc.barycentric[k]))
    }

    /// `u o F^-1 (y)` for a nodal field `u` on the source mesh.
    pub fn compose(&self, nodal: &[f64], y: Point) -> Result<f64> {
        let loc = self.locate(y)?;
        Ok(crate::mesh::p1_interpolate(self.locator.triangles(), nodal, &loc))
    }

    pub fn image_locator(&self) -> &PointLocator {
        &self.locator
    }
}

/// Locates each query in the image mesh of `level`.
pub fn invert_map(mesh: &Mesh, level: &MapLevel, queries: &[Point]) -> Result<Vec<PointLocation>> {
    let inv = InverseMap::new(mesh, level)?;
    queries.iter().map(|&y| inv.locate(y)).collect()
}
