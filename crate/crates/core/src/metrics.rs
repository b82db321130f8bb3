//! Relative L1 / L2 / Linf / H1-seminorm errors on the fine mesh and on
//! coarse nodal interpolants, plus convergence tables.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Assembler, CsrMatrix};
use crate::locate::PointLocation;
use crate::mesh::Mesh;

/// One value per norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorNorms {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
}

impl ErrorNorms {
    pub fn max_abs(&self) -> f64 {
        self.l1.max(self.l2).max(self.linf).max(self.h1)
    }
}

/// Norm evaluation for nodal P1 fields on one mesh.
#[derive(Debug, Clone)]
pub struct NormKit {
    mesh: Arc<Mesh>,
    mass: CsrMatrix,
}

impl NormKit {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mass = Assembler::new(mesh.clone()).mass_full();
        Self { mesh, mass }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Absolute norms: vertex-quadrature L1, exact L2 and H1 seminorm, nodal max.
    pub fn norms(&self, e: &[f64]) -> ErrorNorms {
        let mesh = &*self.mesh;
        let mut l1 = 0.0;
        let mut h1 = 0.0;
        for (k, t) in mesh.triangles().iter().enumerate() {
            let area = mesh.tri_area()[k];
            l1 += area / 3.0 * (e[t[0]].abs() + e[t[1]].abs() + e[t[2]].abs());
            h1 += area * mesh.gradient(e, k).norm_squared();
        }
        ErrorNorms { l1, l2: self.mass.bilinear(e, e).max(0.0).sqrt(), linf: e.iter().fold(0.0f64, |m, v| m.max(v.abs())), h1: h1.sqrt() }
    }

    /// `|u_ref - u_rec| / |u_ref|` in every norm.
    pub fn relative(&self, u_ref: &[f64], u_rec: &[f64]) -> Result<ErrorNorms> {
        let diff: Vec<f64> = u_ref.iter().zip(u_rec).map(|(a, b)| a - b).collect();
        let d = self.norms(&diff);
        let r = self.norms(u_ref);
        let div = |x: f64, y: f64, norm: &'static str| if y > 0.0 { Ok(x / y) } else { Err(Error::DegenerateReference { norm }) };
        Ok(ErrorNorms {
            l1: div(d.l1, r.l1, "L1")?,
            l2: div(d.l2, r.l2, "L2")?,
            linf: div(d.linf, r.linf, "Linf")?,
            h1: div(d.h1, r.h1, "H1")?,
        })
    }
}

/// Relative errors of two nodal fields on the same fine mesh.
pub fn relative_errors_fine(u_ref: &[f64], u_rec: &[f64], mesh: &Mesh) -> Result<ErrorNorms> {
    NormKit::new(Arc::new(mesh.clone())).relative(u_ref, u_rec)
}

/// Samples fine nodal fields at the nodes of a coarse mesh.
#[derive(Debug, Clone)]
pub struct CoarseSampler {
    kit: NormKit,
    locations: Vec<PointLocation>,
    fine_triangles: Vec<[usize; 3]>,
}

impl CoarseSampler {
    pub fn new(coarse: Arc<Mesh>, fine: &Mesh) -> Result<Self> {
        let loc = fine.locator();
        let locations = coarse.nodes().iter().map(|&p| loc.locate(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self { kit: NormKit::new(coarse), locations, fine_triangles: fine.triangles().to_vec() })
    }

    pub fn coarse_mesh(&self) -> &Arc<Mesh> {
        self.kit.mesh()
    }

    /// Nodal interpolant on the coarse mesh.
    pub fn sample(&self, fine: &[f64]) -> Vec<f64> {
        self.locations.iter().map(|l| crate::mesh::p1_interpolate(&self.fine_triangles, fine, l)).collect()
    }

    pub fn relative(&self, u_ref: &[f64], u_rec: &[f64]) -> Result<ErrorNorms> {
        self.kit.relative(&self.sample(u_ref), &self.sample(u_rec))
    }
}

/// Relative errors of the coarse nodal interpolants on the coarse mesh.
pub fn relative_errors_coarse(u_ref: &[f64], u_rec: &[f64], coarse: &Mesh, fine: &Mesh) -> Result<ErrorNorms> {
    CoarseSampler::new(Arc::new(coarse.clone()), fine)?.relative(u_ref, u_rec)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_c: usize,
    pub dof: usize,
    pub h: f64,
    pub errors: ErrorNorms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: ErrorNorms,
}

impl ConvergenceTable {
    /// Writes `dof,L1,Linf,L2,H1` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_table(&self.rows, &mut w)
    }
}

/// Writes rows in the `dof,L1,Linf,L2,H1` layout.
pub fn write_table<W: Write>(rows: &[ConvergenceRow], mut w: W) -> Result<()> {
    writeln!(w, "dof,L1,Linf,L2,H1")?;
    for r in rows {
        let e = r.errors;
        writeln!(w, "{},{},{},{},{}", r.dof, e.l1, e.linf, e.l2, e.h1)?;
    }
    Ok(())
}

/// Error-vs-`h` table with log-log slopes per norm, `h = 2 / n_c`.
pub fn convergence_table(rows: Vec<(usize, ErrorNorms)>) -> Result<ConvergenceTable> {
    if rows.len() < 2 {
        return Err(Error::Config("convergence table needs at least two levels".into()));
    }
    let rows: Vec<ConvergenceRow> =
        rows.into_iter().map(|(n_c, errors)| ConvergenceRow { n_c, dof: (n_c - 1) * (n_c - 1), h: 2.0 / n_c as f64, errors }).collect();
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let slope = |f: fn(&ErrorNorms) -> f64| loglog_slope(&h, &rows.iter().map(|r| f(&r.errors)).collect::<Vec<_>>());
    let slopes = ErrorNorms { l1: slope(|e| e.l1), l2: slope(|e| e.l2), linf: slope(|e| e.linf), h1: slope(|e| e.h1) };
    Ok(ConvergenceTable { rows, slopes })
}

/// Errors at a sequence of times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    pub errors: Vec<ErrorNorms>,
}

impl ErrorSeries {
    pub fn push(&mut self, t: f64, e: ErrorNorms) {
        self.times.push(t);
        self.errors.push(e);
    }

    /// Writes `t,L1,L2,Linf,H1` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,L1,L2,Linf,H1")?;
        for (t, e) in self.times.iter().zip(&self.errors) {
            writeln!(w, "{t},{},{},{},{}", e.l1, e.l2, e.linf, e.h1)?;
        }
        Ok(())
    }
}
