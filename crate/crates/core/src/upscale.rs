//! Coarse space of P1 hat functions composed with the harmonic coordinates,
//! its Galerkin reduction and the implicit coarse-step scheme.
//!
//! The basis matrix `Phi(t)` maps coarse interior coefficients to fine interior
//! nodal values: `Phi[j, i] = phi_i(F(x_j, t))`. Coefficients are held constant
//! over each coarse interval `(t_n, t_{n+1}]` while `Phi` follows the fine grid.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{Assembler, CsrMatrix, Source};
use crate::harmonic::{HarmonicMap, MapLevel};
use crate::locate::PointLocator;
use crate::media::Medium;
use crate::mesh::Mesh;

/// Tolerance for the partition-of-unity check on every basis row.
pub const PARTITION_TOLERANCE: f64 = 1e-12;

/// Sparse `Phi(t)`: at most three coarse entries per fine interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    t: f64,
    n_coarse: usize,
    row_ptr: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Basis {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_fine(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// `Phi c`.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        (0..self.n_fine()).map(|i| self.row(i).iter().map(|&(p, w)| w * c[p]).sum()).collect()
    }

    /// `Phi^T v`.
    pub fn apply_transpose(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_coarse);
        for (i, &vi) in v.iter().enumerate() {
            for &(p, w) in self.row(i) {
                out[p] += w * vi;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_fine(), self.n_coarse);
        for i in 0..self.n_fine() {
            for &(p, w) in self.row(i) {
                m[(i, p)] += w;
            }
        }
        m
    }
}

/// `A^T K B` for fine interior matrix `K`.
pub fn triple_product(a: &Basis, k: &CsrMatrix, b: &Basis) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(a.n_coarse, b.n_coarse);
    for i in 0..a.n_fine() {
        let ra = a.row(i);
        for (j, kij) in k.row(i) {
            for &(q, bq) in b.row(j) {
                let s = kij * bq;
                for &(p, ap) in ra {
                    g[(p, q)] += ap * s;
                }
            }
        }
    }
    g
}

/// Coarse mesh plus what is needed to evaluate `Phi(t)` for any level of `F`.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    fine: Arc<Mesh>,
    coarse: Arc<Mesh>,
    locator: PointLocator,
    mass: CsrMatrix,
}

impl CoarseSpace {
    /// Coarse space with `n_c` subdivisions over the fine assembler's mesh.
    pub fn new(asm: &Assembler, n_c: usize) -> Result<Self> {
        let coarse = Arc::new(Mesh::uniform(n_c)?);
        Ok(Self { fine: asm.mesh().clone(), locator: coarse.locator(), coarse, mass: asm.mass() })
    }

    pub fn fine_mesh(&self) -> &Arc<Mesh> {
        &self.fine
    }

    pub fn coarse_mesh(&self) -> &Arc<Mesh> {
        &self.coarse
    }

    /// Fine interior consistent mass matrix.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn n_dofs(&self) -> usize {
        self.coarse.n_interior()
    }

    /// `Phi` for one level of `F`: hat weights of the coarse triangle containing `F(x_j)`.
    pub fn basis(&self, level: &MapLevel) -> Result<Basis> {
        let mut row_ptr = Vec::with_capacity(self.fine.n_interior() + 1);
        let mut entries = Vec::with_capacity(3 * self.fine.n_interior());
        row_ptr.push(0);
        for &v in self.fine.dof_nodes() {
            let loc = self.locator.locate(level.image(v))?;
            let tri = self.coarse.triangles()[loc.triangle];
            let total: f64 = loc.barycentric.iter().sum();
            if (total - 1.0).abs() > PARTITION_TOLERANCE || loc.barycentric.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::Dimension(format!("basis row of fine node {v} breaks the partition of unity")));
            }
            for (k, &w) in loc.barycentric.iter().enumerate() {
                if let Some(p) = self.coarse.node_dof(tri[k]) {
                    if w != 0.0 {
                        entries.push((p, w));
                    }
                }
            }
            row_ptr.push(entries.len());
        }
        Ok(Basis { t: level.t, n_coarse: self.n_dofs(), row_ptr, entries })
    }

    /// Fine nodal field `Phi c` (zero on the fine boundary).
    pub fn reconstruct(&self, basis: &Basis, c: &[f64]) -> Vec<f64> {
        self.fine.extend_interior(&basis.apply(c))
    }
}

/// Coarse coefficients at the end of every coarse step (index 0 is `t = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseTrajectory {
    pub dt: f64,
    pub coefficients: Vec<DVector<f64>>,
}

impl CoarseTrajectory {
    pub fn new(dt: f64, n_dofs: usize) -> Self {
        Self { dt, coefficients: vec![DVector::zeros(n_dofs)] }
    }

    pub fn last(&self) -> &DVector<f64> {
        self.coefficients.last().expect("trajectory starts with c(0)")
    }

    pub fn n_steps(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Writes `coarse_step,dof_id,coefficient` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "coarse_step,dof_id,coefficient")?;
        for (n, c) in self.coefficients.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                writeln!(w, "{n},{i},{v}")?;
            }
        }
        Ok(())
    }
}

/// Squared `L^2` norms of the coarse solution across one coarse step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEnergy {
    /// `|v_n(t_n)|^2`.
    pub start: f64,
    /// `|v_{n+1}(t_{n+1})|^2`.
    pub end: f64,
}

/// Sums of the implicit coarse-step system over the fine levels of one coarse interval.
///
/// After `begin` with `Phi(t_n)`, each `push` with the next fine level `k` adds
/// `-(Phi_k - Phi_{k-1})^T M Phi_{k-1} + dt Phi_k^T A_k Phi_k` to the matrix and
/// `dt Phi_k^T b_k` to the load. `finish` solves
/// `(Phi_N^T M Phi_N + sums) c_{n+1} = Phi_n^T M Phi_n c_n + load`.
#[derive(Debug, Clone)]
pub struct IntervalAccumulator {
    start_mass: DMatrix<f64>,
    prev: Arc<Basis>,
    prev_mass: DMatrix<f64>,
    matrix: DMatrix<f64>,
    load: DVector<f64>,
    substeps: usize,
    cached_stiffness: Option<(Arc<Basis>, Arc<CsrMatrix>, DMatrix<f64>)>,
}

impl IntervalAccumulator {
    pub fn begin(space: &CoarseSpace, basis: Arc<Basis>) -> Self {
        let mass = triple_product(&basis, space.mass(), &basis);
        Self::with_mass(basis, mass)
    }

    fn with_mass(basis: Arc<Basis>, mass: DMatrix<f64>) -> Self {
        let n = basis.n_coarse();
        Self {
            start_mass: mass.clone(),
            prev: basis,
            prev_mass: mass,
            matrix: DMatrix::zeros(n, n),
            load: DVector::zeros(n),
            substeps: 0,
            cached_stiffness: None,
        }
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Adds fine level `k` given `Phi_k`, interior stiffness `A_k` and interior load `b_k`.
    pub fn push(&mut self, space: &CoarseSpace, basis: Arc<Basis>, stiffness: &Arc<CsrMatrix>, load: &[f64], dt: f64) {
        if !Arc::ptr_eq(&basis, &self.prev) {
            let cross = triple_product(&basis, space.mass(), &self.prev);
            self.matrix -= cross - &self.prev_mass;
            self.prev_mass = triple_product(&basis, space.mass(), &basis);
        }
        let reuse = matches!(&self.cached_stiffness, Some((b, a, _)) if Arc::ptr_eq(b, &basis) && Arc::ptr_eq(a, stiffness));
        if !reuse {
            let g = triple_product(&basis, stiffness, &basis);
            self.cached_stiffness = Some((basis.clone(), stiffness.clone(), g));
        }
        let (_, _, ac) = self.cached_stiffness.as_ref().expect("stiffness cached above");
        self.matrix += ac * dt;
        self.load += basis.apply_transpose(load) * dt;
        self.prev = basis;
        self.substeps += 1;
    }

    /// Solves for `c_{n+1}` and returns it with the energies and a fresh accumulator for the next interval.
    pub fn finish(self, c: &DVector<f64>) -> Result<(DVector<f64>, StepEnergy, IntervalAccumulator)> {
        let mut lhs = &self.prev_mass + &self.matrix;
        let mut rhs = &self.start_mass * c + &self.load;
        pin_unused_dofs(&mut lhs, &mut rhs);
        let next = lhs
            .lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::SingularSystem(format!("coarse step ending at t = {}", self.prev.t())))?;
        let energy = StepEnergy { start: c.dot(&(&self.start_mass * c)), end: next.dot(&(&self.prev_mass * &next)) };
        let mut following = Self::with_mass(self.prev, self.prev_mass);
        following.cached_stiffness = self.cached_stiffness;
        Ok((next, energy, following))
    }
}

/// Coarse dofs whose composed hat misses every fine interior node have an
/// all-zero row; they are fixed to zero so the remaining system stays solvable.
pub fn pin_unused_dofs(lhs: &mut DMatrix<f64>, rhs: &mut DVector<f64>) -> usize {
    let mut pinned = 0;
    for j in 0..lhs.nrows() {
        if lhs.row(j).iter().all(|&v| v == 0.0) {
            lhs[(j, j)] = 1.0;
            rhs[j] = 0.0;
            pinned += 1;
        }
    }
    pinned
}

/// One implicit coarse step over fine levels `n0..=N` given all operators explicitly.
///
/// `bases` has the `N - n0 + 1` levels of `Phi`; `stiffness[k]` and `loads[k]`
/// belong to `bases[k + 1]`.
pub fn implicit_coarse_step(
    space: &CoarseSpace,
    c: &DVector<f64>,
    bases: &[Arc<Basis>],
    stiffness: &[Arc<CsrMatrix>],
    loads: &[Vec<f64>],
    dt: f64,
) -> Result<DVector<f64>> {
    if bases.len() < 2 || stiffness.len() != bases.len() - 1 || loads.len() != bases.len() - 1 {
        return Err(Error::Dimension("implicit step needs N + 1 bases and N operators".into()));
    }
    let mut acc = IntervalAccumulator::begin(space, bases[0].clone());
    for k in 1..bases.len() {
        acc.push(space, bases[k].clone(), &stiffness[k - 1], &loads[k - 1], dt);
    }
    Ok(acc.finish(c)?.0)
}

/// Drives the coarse scheme one fine level at a time.
#[derive(Debug, Clone)]
pub struct CoarseDriver {
    space: CoarseSpace,
    substeps: usize,
    dt: f64,
    acc: Option<IntervalAccumulator>,
    trajectory: CoarseTrajectory,
    energies: Vec<StepEnergy>,
    bases: Vec<Arc<Basis>>,
}

impl CoarseDriver {
    /// `substeps` fine levels of size `dt` per coarse step, starting from `c = 0` with `Phi(0)`.
    pub fn new(space: CoarseSpace, initial: Arc<Basis>, substeps: usize, dt: f64) -> Self {
        let acc = IntervalAccumulator::begin(&space, initial.clone());
        let trajectory = CoarseTrajectory::new(dt * substeps as f64, space.n_dofs());
        Self { space, substeps, dt, acc: Some(acc), trajectory, energies: Vec::new(), bases: vec![initial] }
    }

    pub fn space(&self) -> &CoarseSpace {
        &self.space
    }

    pub fn trajectory(&self) -> &CoarseTrajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> CoarseTrajectory {
        self.trajectory
    }

    pub fn energies(&self) -> &[StepEnergy] {
        &self.energies
    }

    /// `Phi` at the start of the trajectory and at the end of every finished coarse step.
    pub fn bases(&self) -> &[Arc<Basis>] {
        &self.bases
    }

    /// Feeds the next fine level; returns the new coefficients when a coarse step completes.
    pub fn advance(&mut self, basis: Arc<Basis>, stiffness: &Arc<CsrMatrix>, load: &[f64]) -> Result<Option<&DVector<f64>>> {
        let acc = self.acc.as_mut().expect("accumulator present between steps");
        acc.push(&self.space, basis.clone(), stiffness, load, self.dt);
        if acc.substeps() < self.substeps {
            return Ok(None);
        }
        let acc = self.acc.take().expect("accumulator present between steps");
        let (c, energy, next) = acc.finish(self.trajectory.last())?;
        self.acc = Some(next);
        self.energies.push(energy);
        self.bases.push(basis);
        self.trajectory.coefficients.push(c);
        Ok(self.trajectory.coefficients.last())
    }
}

/// Interior stiffness and load of every fine level, shared when they do not change.
fn level_operators(asm: &Assembler, medium: &Medium, g: &Source, dt: f64, n: usize) -> Result<(Vec<Arc<CsrMatrix>>, Vec<Arc<Vec<f64>>>)> {
    let fixed_a = (!medium.is_time_dependent()).then(|| asm.stiffness(medium, 0.0).map(Arc::new)).transpose()?;
    let fixed_b = g.is_time_independent().then(|| Arc::new(asm.load(g, 0.0)));
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 1..=n {
        let t = k as f64 * dt;
        a.push(match &fixed_a {
            Some(m) => m.clone(),
            None => Arc::new(asm.stiffness(medium, t)?),
        });
        b.push(fixed_b.clone().unwrap_or_else(|| Arc::new(asm.load(g, t))));
    }
    Ok((a, b))
}

/// Runs `n_coarse` implicit coarse steps over the fine levels of `map`.
///
/// The map must hold `N_fine + 1` levels with `N_fine` a multiple of `n_coarse`
/// (or be time-independent, in which case `n_fine` sets the fine grid).
pub fn run_coarse_solver(
    space: &CoarseSpace,
    map: &HarmonicMap,
    medium: &Medium,
    g: &Source,
    final_time: f64,
    n_coarse: usize,
    n_fine: usize,
) -> Result<CoarseTrajectory> {
    if n_coarse == 0 || n_fine % n_coarse != 0 || !(final_time > 0.0) {
        return Err(Error::Config(format!("{n_fine} fine steps cannot be split into {n_coarse} coarse steps")));
    }
    if !map.is_time_independent() && map.n_levels() != n_fine + 1 {
        return Err(Error::Dimension(format!("map has {} levels, need {}", map.n_levels(), n_fine + 1)));
    }
    let asm = Assembler::new(space.fine_mesh().clone());
    let dt = final_time / n_fine as f64;
    let (a, b) = level_operators(&asm, medium, g, dt, n_fine)?;
    let shared = map.is_time_independent().then(|| space.basis(map.level(0)).map(Arc::new)).transpose()?;
    let basis_at = |k: usize| -> Result<Arc<Basis>> {
        match &shared {
            Some(b) => Ok(b.clone()),
            None => Ok(Arc::new(space.basis(map.level(k))?)),
        }
    };
    let mut driver = CoarseDriver::new(space.clone(), basis_at(0)?, n_fine / n_coarse, dt);
    for k in 1..=n_fine {
        driver.advance(basis_at(k)?, &a[k - 1], &b[k - 1])?;
    }
    Ok(driver.into_trajectory())
}

/// Galerkin-reduced backward Euler with a fixed basis and `n_sub` steps of `T / n_sub`.
pub fn solve_coarse_semidiscrete(
    space: &CoarseSpace,
    basis: &Basis,
    medium: &Medium,
    g: &Source,
    final_time: f64,
    n_sub: usize,
) -> Result<CoarseTrajectory> {
    if medium.is_time_dependent() {
        return Err(Error::Config("the semidiscrete coarse solve needs a time-independent medium".into()));
    }
    if n_sub == 0 || !(final_time > 0.0) {
        return Err(Error::Config("semidiscrete solve needs T > 0 and at least one step".into()));
    }
    let asm = Assembler::new(space.fine_mesh().clone());
    let dt = final_time / n_sub as f64;
    let mc = triple_product(basis, space.mass(), basis);
    let ac = triple_product(basis, &asm.stiffness(medium, 0.0)?, basis);
    let mut lhs = &mc + &ac * dt;
    let mut probe = DVector::zeros(space.n_dofs());
    pin_unused_dofs(&mut lhs, &mut probe);
    let lu = lhs.lu();
    if lu.is_invertible() {
        let fixed_b = g.is_time_independent().then(|| basis.apply_transpose(&asm.load(g, 0.0)));
        let mut traj = CoarseTrajectory::new(dt, space.n_dofs());
        for k in 1..=n_sub {
            let bc = fixed_b.clone().unwrap_or_else(|| basis.apply_transpose(&asm.load(g, k as f64 * dt)));
            let rhs = &mc * traj.last() + bc * dt;
            let c = lu.solve(&rhs).ok_or_else(|| Error::SingularSystem("coarse mass matrix".into()))?;
            traj.coefficients.push(c);
        }
        Ok(traj)
    } else {
        Err(Error::SingularSystem("coarse mass matrix is rank deficient".into()))
    }
}
