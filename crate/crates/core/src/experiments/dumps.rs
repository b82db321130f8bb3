//! Final-time fields resampled on a uniform grid.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::resample_grid;
use crate::error::Result;
use crate::harmonic::{InverseMap, MapLevel};
use crate::media::Medium;
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpKind {
    U,
    UComp,
    GradU,
    GradUComp,
    F,
    A,
}

impl DumpKind {
    pub fn file_name(self) -> &'static str {
        match self {
            DumpKind::U => "field_u.csv",
            DumpKind::UComp => "field_u_comp.csv",
            DumpKind::GradU => "field_grad_u.csv",
            DumpKind::GradUComp => "field_grad_u_comp.csv",
            DumpKind::F => "field_F.csv",
            DumpKind::A => "field_a.csv",
        }
    }

    fn header(self) -> &'static str {
        match self {
            DumpKind::U | DumpKind::UComp => "x,y,t,value",
            DumpKind::GradU | DumpKind::GradUComp => "x,y,t,dx,dy",
            DumpKind::F => "x,y,t,F1,F2",
            DumpKind::A => "x,y,t,a11,a12,a22",
        }
    }
}

/// Writes one field on the `m x m` grid into `dir` and returns the file name.
///
/// `u` is the full nodal field at `level.t`; composed fields are evaluated at `F^-1(y)`.
pub fn emit_field_dumps(mesh: &Mesh, medium: &Medium, u: &[f64], level: &MapLevel, kind: DumpKind, m: usize, dir: &Path) -> Result<String> {
    let t = level.t;
    let grid = resample_grid(m);
    let loc = mesh.locator();
    let mut out = Vec::new();
    writeln!(out, "{}", kind.header())?;
    let inverse = match kind {
        DumpKind::UComp | DumpKind::GradUComp => Some(InverseMap::new(mesh, level)?),
        _ => None,
    };
    for &p in &grid {
        write!(out, "{},{},{t}", p.x, p.y)?;
        match kind {
            DumpKind::U => writeln!(out, ",{}", mesh.interpolate(u, &loc.locate(p)?))?,
            DumpKind::UComp => writeln!(out, ",{}", inverse.as_ref().expect("built above").compose(u, p)?)?,
            DumpKind::GradU => {
                let g = mesh.gradient(u, loc.locate(p)?.triangle);
                writeln!(out, ",{},{}", g.x, g.y)?;
            }
            DumpKind::GradUComp => {
                let tri = inverse.as_ref().expect("built above").locate(p)?.triangle;
                let j = level.jacobian(mesh, tri);
                let g = j.try_inverse().map(|ji| ji * mesh.gradient(u, tri)).unwrap_or_default();
                writeln!(out, ",{},{}", g.x, g.y)?;
            }
            DumpKind::F => {
                let l = loc.locate(p)?;
                writeln!(out, ",{},{}", mesh.interpolate(&level.f1, &l), mesh.interpolate(&level.f2, &l))?;
            }
            DumpKind::A => {
                let a = medium.sample(p, t)?;
                writeln!(out, ",{},{},{}", a.a11, a.a12, a.a22)?;
            }
        }
    }
    fs::write(dir.join(kind.file_name()), out)?;
    Ok(kind.file_name().to_string())
}
