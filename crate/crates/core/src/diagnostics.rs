//! The transformed tensor `sigma = grad F^T a grad F`, Cordes-type
//! anisotropy statistics and the compensation (regularity gain) measurement.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{InverseMap, MapLevel};
use crate::media::{Medium, TensorSample};
use crate::mesh::{Mesh, Point, DOMAIN_MAX, DOMAIN_MIN};

/// Space dimension.
pub const DIM: f64 = 2.0;

/// Per-triangle `sigma` at a list of time levels.
#[derive(Debug, Clone, Default)]
pub struct SigmaField {
    pub times: Vec<f64>,
    pub values: Vec<Vec<TensorSample>>,
}

impl SigmaField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, sigma: Vec<TensorSample>) {
        self.times.push(t);
        self.values.push(sigma);
    }

    /// The same tensor on `n_triangles` triangles, one level.
    pub fn uniform(sample: TensorSample, n_triangles: usize) -> Self {
        Self { times: vec![0.0], values: vec![vec![sample; n_triangles]] }
    }

    fn iter(&self) -> impl Iterator<Item = (usize, usize, &TensorSample)> {
        self.values.iter().enumerate().flat_map(|(l, v)| v.iter().enumerate().map(move |(k, s)| (l, k, s)))
    }

    /// Writes `t,triangle_id,beta` rows.
    pub fn write_beta_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,triangle_id,beta")?;
        for (l, k, s) in self.iter() {
            writeln!(w, "{},{k},{}", self.times[l], local_beta(s))?;
        }
        Ok(())
    }
}

/// `sigma = J^T a J` with `J` the P1 Jacobian (columns `grad F_j`) on each triangle.
pub fn compute_sigma(mesh: &Mesh, medium: &Medium, level: &MapLevel) -> Vec<TensorSample> {
    (0..mesh.n_triangles())
        .map(|k| {
            let j = level.jacobian(mesh, k);
            let a = medium.on_triangle(mesh, k, level.t).matrix();
            TensorSample::from_matrix(&(j.transpose() * a * j))
        })
        .collect()
}

/// `n - (tr s)^2 / tr(s^T s)` for one tensor.
pub fn local_beta(s: &TensorSample) -> f64 {
    DIM - s.trace().powi(2) / s.frobenius_sq()
}

/// Cordes parameter: the largest local value over all triangles and levels.
pub fn cordes_beta(sigma: &SigmaField) -> f64 {
    sigma.iter().filter(|(_, _, s)| s.is_spd()).map(|(_, _, s)| local_beta(s)).fold(f64::NEG_INFINITY, f64::max)
}

/// Triangle and level where a maximum was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub t: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyStats {
    pub mu: f64,
    pub z: f64,
    pub y: f64,
}

/// Eigenvalue ratio `mu`, `z = n tr(s^T s)/(tr s)^2` and `y = max tr * max 1/tr`.
pub fn anisotropy_stats(sigma: &SigmaField) -> AnisotropyStats {
    let (mut mu, mut z, mut tr_max, mut inv_max) = (1.0f64, 1.0f64, 0.0f64, 0.0f64);
    for (_, _, s) in sigma.iter().filter(|(_, _, s)| s.is_spd()) {
        let (lo, hi) = s.eigenvalues();
        mu = mu.max(hi / lo);
        z = z.max(DIM * s.frobenius_sq() / s.trace().powi(2));
        tr_max = tr_max.max(s.trace());
        inv_max = inv_max.max(1.0 / s.trace());
    }
    AnisotropyStats { mu, z, y: tr_max * inv_max }
}

/// Full set of Cordes-type quantities with the condition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CordesReport {
    pub beta: f64,
    pub mu: f64,
    pub z: f64,
    pub y: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// `max (delta^2 tr(s^T s) + 1) / (delta tr s + 1)^2`.
    pub condition_lhs: f64,
    /// `1 / (n + epsilon)`.
    pub condition_rhs: f64,
    pub condition_satisfied: bool,
    /// `z <= 1 + epsilon / n`.
    pub proviso_satisfied: bool,
    pub worst_beta: Location,
    pub worst_mu: Location,
    pub worst_condition: Location,
    /// Triangles (over all levels) where `sigma` is not SPD; excluded above.
    pub degenerate: usize,
}

impl CordesReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Evaluates the parabolic Cordes-type condition with the proposed `delta` and `epsilon`.
pub fn check_condition_1_1(sigma: &SigmaField) -> Result<CordesReport> {
    let stats = anisotropy_stats(sigma);
    let spd = || sigma.iter().filter(|(_, _, s)| s.is_spd());
    let inv_max = spd().map(|(_, _, s)| 1.0 / s.trace()).fold(0.0f64, f64::max);
    if inv_max == 0.0 {
        return Err(Error::Dimension("sigma has no SPD triangle".into()));
    }
    let delta = DIM * inv_max;
    let y = stats.y;
    let epsilon = (2.0 * DIM * y - DIM) / (2.0 * DIM * y * y);
    let at = |l: usize, k: usize| Location { t: sigma.times[l], triangle: k };
    let argmax = |f: &dyn Fn(&TensorSample) -> f64| {
        spd().map(|(l, k, s)| (f(s), at(l, k))).fold((f64::NEG_INFINITY, at(0, 0)), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (beta, worst_beta) = argmax(&local_beta);
    let (_, worst_mu) = argmax(&|s: &TensorSample| {
        let (lo, hi) = s.eigenvalues();
        hi / lo
    });
    let (lhs, worst_condition) = argmax(&|s: &TensorSample| (delta * delta * s.frobenius_sq() + 1.0) / (delta * s.trace() + 1.0).powi(2));
    let rhs = 1.0 / (DIM + epsilon);
    Ok(CordesReport {
        beta,
        mu: stats.mu,
        z: stats.z,
        y,
        delta,
        epsilon,
        condition_lhs: lhs,
        condition_rhs: rhs,
        condition_satisfied: lhs <= rhs,
        proviso_satisfied: stats.z <= 1.0 + epsilon / DIM,
        worst_beta,
        worst_mu,
        worst_condition,
        degenerate: sigma.iter().filter(|(_, _, s)| !s.is_spd()).count(),
    })
}

/// Discrete H^2 seminorm energy of a grid function sampled on an `m x m`
/// uniform grid over the domain, skipping points within two cells of the boundary.
pub fn second_difference_energy(values: &[f64], m: usize) -> f64 {
    let h = (DOMAIN_MAX - DOMAIN_MIN) / (m - 1) as f64;
    let v = |i: usize, j: usize| values[j * m + i];
    let mut e = 0.0;
    for j in 3..m.saturating_sub(3) {
        for i in 3..m - 3 {
            let dxx = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (h * h);
            let dyy = (v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / (h * h);
            let dxy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h * h);
            e += (dxx * dxx + 2.0 * dxy * dxy + dyy * dyy) * h * h;
        }
    }
    e
}

/// Grid points of the `m x m` resampling grid, row by row.
pub fn resample_grid(m: usize) -> Vec<Point> {
    let h = (DOMAIN_MAX - DOMAIN_MIN) / (m - 1) as f64;
    let c = |i: usize| if i == m - 1 { DOMAIN_MAX } else { DOMAIN_MIN + i as f64 * h };
    (0..m).flat_map(|j| (0..m).map(move |i| Point::new(c(i), c(j)))).collect()
}

/// `u` and `u o F^-1` resampled on the `m x m` grid.
pub fn resample_pair(mesh: &Mesh, u: &[f64], level: &MapLevel, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let inverse = InverseMap::new(mesh, level)?;
    let loc = mesh.locator();
    let grid = resample_grid(m);
    let plain = grid.iter().map(|&p| Ok(mesh.interpolate(u, &loc.locate(p)?))).collect::<Result<Vec<_>>>()?;
    let composed = grid.iter().map(|&p| inverse.compose(u, p)).collect::<Result<Vec<_>>>()?;
    Ok((plain, composed))
}

/// Ratio of discrete H^2 energies `E(u o F^-1) / E(u)`.
pub fn compensation_ratio(mesh: &Mesh, u: &[f64], level: &MapLevel, m: usize) -> Result<f64> {
    if m < 8 {
        return Err(Error::Config(format!("resample resolution {m} leaves no interior points")));
    }
    let (plain, composed) = resample_pair(mesh, u, level, m)?;
    let e = second_difference_energy(&plain, m);
    if e == 0.0 {
        return Err(Error::DegenerateReference { norm: "H2" });
    }
    Ok(second_difference_energy(&composed, m) / e)
}
