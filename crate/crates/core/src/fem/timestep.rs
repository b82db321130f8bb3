use std::io::Write;
use std::sync::Arc;

use super::assembly::Assembler;
use super::solver::{pcg, DEFAULT_TOLERANCE};
use super::source::Source;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::locate::PointLocator;
use crate::media::Medium;
use crate::mesh::{Mesh, Point};

/// Backward Euler on interior dofs: `(M + dt A) u1 = M u0 + dt b`.
///
/// Every step checks the discrete energy bound
/// `|u1|_M <= |u0|_M + 2 dt |b|_{ML^-1}`, which follows from testing with `u1`
/// and `M >= ML / 4` for P1 elements (`ML` the lumped mass).
#[derive(Debug, Clone)]
pub struct BackwardEuler {
    mass: CsrMatrix,
    lumped: Vec<f64>,
    dt: f64,
    tol: f64,
    t: f64,
    step: usize,
    state: Vec<f64>,
}

impl BackwardEuler {
    pub fn new(asm: &Assembler, dt: f64) -> Self {
        let n = asm.mesh().n_interior();
        Self { mass: asm.mass(), lumped: asm.lumped_mass(), dt, tol: DEFAULT_TOLERANCE, t: 0.0, step: 0, state: vec![0.0; n] }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_state(mut self, state: Vec<f64>) -> Self {
        self.state = state;
        self
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Interior values.
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Advances one step with the interior stiffness and load at the new time level.
    pub fn step_with(&mut self, stiffness: &CsrMatrix, load: &[f64]) -> Result<()> {
        let system = self.mass.combine(1.0, stiffness, self.dt);
        let mut rhs = self.mass.mul_vec(&self.state);
        for (r, b) in rhs.iter_mut().zip(load) {
            *r += self.dt * b;
        }
        let (next, _) = pcg(&system, &rhs, Some(&self.state), self.tol)?;

        let before = self.mass.bilinear(&self.state, &self.state).max(0.0).sqrt();
        let after = self.mass.bilinear(&next, &next).max(0.0).sqrt();
        let load_norm = load.iter().zip(&self.lumped).map(|(b, m)| b * b / m).sum::<f64>().sqrt();
        let bound = before + 2.0 * self.dt * load_norm;
        // Slack covers the solver's relative residual.
        if after > bound * (1.0 + 1e-7) + 1e-14 {
            return Err(Error::EnergyBound { step: self.step + 1, lhs: after, rhs: bound });
        }
        self.state = next;
        self.step += 1;
        self.t = self.step as f64 * self.dt;
        Ok(())
    }

    /// Assembles `A(t + dt)` and `b(t + dt)`, then steps.
    pub fn step(&mut self, asm: &Assembler, medium: &Medium, g: &Source) -> Result<()> {
        let t1 = (self.step + 1) as f64 * self.dt;
        let a = asm.stiffness(medium, t1)?;
        let b = asm.load(g, t1);
        self.step_with(&a, &b)
    }
}

/// Nodal snapshots of a fine solution on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    /// Full nodal vectors (boundary values included).
    pub fields: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.fields.last().expect("trajectory has the initial field")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,node_id,value")?;
        for (t, f) in self.times.iter().zip(&self.fields) {
            for (i, v) in f.iter().enumerate() {
                writeln!(w, "{t},{i},{v}")?;
            }
        }
        Ok(())
    }

    /// Fields resampled on an `m x m` grid over the domain.
    pub fn write_grid_csv<W: Write>(&self, mesh: &Mesh, m: usize, mut w: W) -> Result<()> {
        let loc = mesh.locator();
        let grid = sample_grid(&loc, m)?;
        writeln!(w, "t,x,y,u")?;
        for (t, f) in self.times.iter().zip(&self.fields) {
            for (p, l) in &grid {
                writeln!(w, "{t},{},{},{}", p.x, p.y, mesh.interpolate(f, l))?;
            }
        }
        Ok(())
    }
}

/// Uniform `m x m` grid points over the domain with their locations.
pub(crate) fn sample_grid(loc: &PointLocator, m: usize) -> Result<Vec<(Point, crate::locate::PointLocation)>> {
    let m = m.max(2);
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let p = Point::new(-1.0 + 2.0 * i as f64 / (m - 1) as f64, -1.0 + 2.0 * j as f64 / (m - 1) as f64);
            out.push((p, loc.locate(p)?));
        }
    }
    Ok(out)
}

/// Backward-Euler fine reference for `u_t = div(a grad u) + g`, `u = 0` on the
/// boundary and at `t = 0`. Records every time level.
pub fn fine_reference_solve(mesh: &Mesh, medium: &Medium, g: &Source, final_time: f64, n_steps: usize) -> Result<Trajectory> {
    if n_steps == 0 || !(final_time > 0.0) {
        return Err(Error::Config("fine solve needs T > 0 and at least one step".into()));
    }
    let asm = Assembler::new(Arc::new(mesh.clone()));
    let dt = final_time / n_steps as f64;
    let mut be = BackwardEuler::new(&asm, dt);
    let fixed = (!medium.is_time_dependent()).then(|| asm.stiffness(medium, 0.0)).transpose()?;
    let fixed_load = g.is_time_independent().then(|| asm.load(g, 0.0));
    let mut traj = Trajectory { dt, times: vec![0.0], fields: vec![vec![0.0; mesh.n_nodes()]] };
    for k in 1..=n_steps {
        let t = k as f64 * dt;
        let a = match &fixed {
            Some(a) => a.clone(),
            None => asm.stiffness(medium, t)?,
        };
        let b = fixed_load.clone().unwrap_or_else(|| asm.load(g, t));
        be.step_with(&a, &b)?;
        traj.times.push(t);
        traj.fields.push(mesh.extend_interior(be.state()));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solver::{dot, sparse_solve};

    fn mass_norm(m: &CsrMatrix, x: &[f64]) -> f64 {
        dot(x, &m.mul_vec(x)).max(0.0).sqrt()
    }

    fn rel_l2(m: &CsrMatrix, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        mass_norm(m, &d) / mass_norm(m, b)
    }

    #[test]
    fn zero_source_stays_zero() {
        let mesh = Mesh::uniform(8).unwrap();
        let tr = fine_reference_solve(&mesh, &Medium::trig_multiscale(), &Source::Zero, 0.1, 10).unwrap();
        assert_eq!(tr.times.len(), 11);
        assert!(tr.fields.iter().all(|f| f.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn long_time_limit_is_the_elliptic_solution() {
        let mesh = Mesh::uniform(16).unwrap();
        let asm = Assembler::new(Arc::new(mesh.clone()));
        let a = asm.stiffness(&Medium::identity(), 0.0).unwrap();
        let b = asm.load(&Source::One, 0.0);
        let steady = sparse_solve(&a, &b, 1e-12).unwrap();
        let tr = fine_reference_solve(&mesh, &Medium::identity(), &Source::One, 5.0, 500).unwrap();
        let u = mesh.restrict_interior(tr.last());
        assert!(rel_l2(&asm.mass(), &u, &steady) < 1e-4);
    }

    #[test]
    fn first_order_in_time() {
        let mesh = Mesh::uniform(8).unwrap();
        let asm = Assembler::new(Arc::new(mesh.clone()));
        let g = Source::TravellingSine;
        let finals: Vec<Vec<f64>> = [10, 20, 40, 80]
            .iter()
            .map(|&n| mesh.restrict_interior(fine_reference_solve(&mesh, &Medium::identity(), &g, 0.5, n).unwrap().last()))
            .collect();
        let m = asm.mass();
        let diffs: Vec<f64> = finals
            .windows(2)
            .map(|w| {
                let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
                mass_norm(&m, &d)
            })
            .collect();
        for w in diffs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn boundary_values_are_exactly_zero() {
        let mesh = Mesh::uniform(6).unwrap();
        let tr = fine_reference_solve(&mesh, &Medium::site_percolation(&mesh, 1), &Source::One, 0.2, 5).unwrap();
        for f in &tr.fields {
            for (i, v) in f.iter().enumerate() {
                if mesh.is_boundary(i) {
                    assert_eq!(*v, 0.0);
                }
            }
        }
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_layout() {
        let mesh = Mesh::uniform(2).unwrap();
        let tr = fine_reference_solve(&mesh, &Medium::identity(), &Source::One, 0.1, 1).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 9);
        assert!(text.starts_with("time,node_id,value\n0,0,0\n"));
        let mut grid = Vec::new();
        tr.write_grid_csv(&mesh, 3, &mut grid).unwrap();
        assert_eq!(String::from_utf8(grid).unwrap().lines().count(), 1 + 2 * 9);
    }
}
