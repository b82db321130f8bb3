//! Coefficient fields a(x, t) for the parabolic operator.
//!
//! Every family returns a symmetric 2x2 tensor. The random families are keyed
//! by cell or triangle index through [`CounterRng`], so a field is a pure
//! function of `(family parameters, seed)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, DOMAIN_MAX, DOMAIN_MIN};
use crate::rng::CounterRng;

/// Symmetric 2x2 conductivity tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorSample {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl TensorSample {
    pub const IDENTITY: Self = Self { a11: 1.0, a12: 0.0, a22: 1.0 };

    pub fn isotropic(c: f64) -> Self {
        Self { a11: c, a12: 0.0, a22: c }
    }

    pub fn diag(a11: f64, a22: f64) -> Self {
        Self { a11, a12: 0.0, a22 }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { a11: c * self.a11, a12: c * self.a12, a22: c * self.a22 }
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Frobenius norm squared, i.e. Trace(s^T s).
    pub fn frobenius_sq(&self) -> f64 {
        self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let r = (0.25 * (self.a11 - self.a22).powi(2) + self.a12 * self.a12).sqrt();
        (mean - r, mean + r)
    }

    pub fn is_spd(&self) -> bool {
        self.a11 > 0.0 && self.det() > 0.0 && self.a11.is_finite() && self.a22.is_finite() && self.a12.is_finite()
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a12, self.a22)
    }

    /// Symmetric part of a 2x2 matrix.
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self { a11: m[(0, 0)], a12: 0.5 * (m[(0, 1)] + m[(1, 0)]), a22: m[(1, 1)] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediumFamily {
    Percolation,
    TrigMultiscale,
    FourierModes,
    Fractal,
    Channel,
    Identity,
    Custom,
}

/// Axis-aligned polyline channel of high conductivity over a random background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    /// Polyline vertices; consecutive vertices share an x or a y coordinate.
    pub path: Vec<[f64; 2]>,
    /// Half of the channel width, measured in the max-norm from the polyline.
    pub half_width: f64,
    pub channel_value: f64,
    pub background_low: f64,
    pub background_high: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            path: vec![[-1.0, -0.5], [-0.375, -0.5], [-0.375, 0.5], [0.375, 0.5], [0.375, -0.25], [1.0, -0.25]],
            half_width: 1.0 / 64.0,
            channel_value: 100.0,
            background_low: 0.5,
            background_high: 1.5,
        }
    }
}

impl ChannelParams {
    pub fn contains(&self, p: Point) -> bool {
        self.path.windows(2).any(|seg| {
            let (a, b) = (seg[0], seg[1]);
            let (x0, x1) = (a[0].min(b[0]), a[0].max(b[0]));
            let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
            p.x >= x0 - self.half_width && p.x <= x1 + self.half_width && p.y >= y0 - self.half_width && p.y <= y1 + self.half_width
        })
    }
}

/// Serializable description of a medium, resolved into a [`Medium`] with a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MediumSpec {
    Identity,
    /// Isotropic constant `value * I`.
    Constant {
        value: f64,
    },
    Percolation {
        #[serde(default = "defaults::perc_low")]
        low: f64,
        #[serde(default = "defaults::perc_high")]
        high: f64,
        #[serde(default = "defaults::half")]
        probability: f64,
    },
    TrigMultiscale,
    FourierModes {
        #[serde(default = "defaults::fourier_radius")]
        radius: i32,
        #[serde(default = "defaults::fourier_amplitude")]
        amplitude: f64,
    },
    Fractal {
        #[serde(default = "defaults::fractal_layers")]
        layers: u32,
        #[serde(default = "defaults::fractal_low")]
        low: f64,
        #[serde(default = "defaults::fractal_high")]
        high: f64,
        #[serde(default = "defaults::fractal_time_unit")]
        time_unit: f64,
    },
    Channel(ChannelParams),
}

mod defaults {
    pub fn perc_low() -> f64 {
        1.0
    }
    pub fn perc_high() -> f64 {
        100.0
    }
    pub fn half() -> f64 {
        0.5
    }
    pub fn fourier_radius() -> i32 {
        4
    }
    pub fn fourier_amplitude() -> f64 {
        0.2
    }
    pub fn fractal_layers() -> u32 {
        6
    }
    pub fn fractal_low() -> f64 {
        0.7
    }
    pub fn fractal_high() -> f64 {
        1.0 / 0.7
    }
    pub fn fractal_time_unit() -> f64 {
        0.1
    }
}

impl MediumSpec {
    pub fn family(&self) -> MediumFamily {
        match self {
            MediumSpec::Identity => MediumFamily::Identity,
            MediumSpec::Constant { .. } => MediumFamily::Custom,
            MediumSpec::Percolation { .. } => MediumFamily::Percolation,
            MediumSpec::TrigMultiscale => MediumFamily::TrigMultiscale,
            MediumSpec::FourierModes { .. } => MediumFamily::FourierModes,
            MediumSpec::Fractal { .. } => MediumFamily::Fractal,
            MediumSpec::Channel(_) => MediumFamily::Channel,
        }
    }

    pub fn percolation() -> Self {
        MediumSpec::Percolation { low: 1.0, high: 100.0, probability: 0.5 }
    }

    pub fn fourier() -> Self {
        MediumSpec::FourierModes { radius: defaults::fourier_radius(), amplitude: defaults::fourier_amplitude() }
    }

    pub fn fractal() -> Self {
        MediumSpec::Fractal {
            layers: defaults::fractal_layers(),
            low: defaults::fractal_low(),
            high: defaults::fractal_high(),
            time_unit: defaults::fractal_time_unit(),
        }
    }

    /// Resolves the description on `mesh` (used by the per-triangle families).
    pub fn build(&self, mesh: &Mesh, seed: u64) -> Result<Medium> {
        Ok(match *self {
            MediumSpec::Identity => Medium::identity(),
            MediumSpec::Constant { value } => {
                if !(value > 0.0) {
                    return Err(Error::Config(format!("constant medium needs a positive value, got {value}")));
                }
                Medium::constant(value)
            }
            MediumSpec::Percolation { low, high, probability } => Medium::percolation_with(mesh, seed, low, high, probability),
            MediumSpec::TrigMultiscale => Medium::trig_multiscale(),
            MediumSpec::FourierModes { radius, amplitude } => Medium::random_fourier_with(seed, radius, amplitude),
            MediumSpec::Fractal { layers, low, high, time_unit } => Medium::random_fractal_with(seed, layers, low, high, time_unit),
            MediumSpec::Channel(ref p) => Medium::channel_with(mesh, seed, p.clone()),
        })
    }
}

type TensorFn = dyn Fn(Point, f64) -> TensorSample + Send + Sync;

#[derive(Clone)]
enum Field {
    Constant(TensorSample),
    /// Isotropic scalar per triangle of a uniform `n x n` mesh.
    PerTriangle {
        n: usize,
        values: Arc<Vec<f64>>,
    },
    Trig,
    Fourier {
        modes: Vec<FourierMode>,
    },
    Fractal {
        rng: CounterRng,
        layers: u32,
        low: f64,
        high: f64,
        time_unit: f64,
    },
    Custom(Arc<TensorFn>),
}

#[derive(Debug, Clone, Copy)]
struct FourierMode {
    k: [i32; 2],
    sin_coef: f64,
    cos_coef: f64,
}

/// A coefficient field, immutable once generated.
#[derive(Clone)]
pub struct Medium {
    family: MediumFamily,
    seed: u64,
    time_dependent: bool,
    field: Field,
}

impl fmt::Debug for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Medium")
            .field("family", &self.family)
            .field("seed", &self.seed)
            .field("time_dependent", &self.time_dependent)
            .finish_non_exhaustive()
    }
}

const TRIG_EPS: [f64; 5] = [1.0 / 5.0, 1.0 / 13.0, 1.0 / 17.0, 1.0 / 31.0, 1.0 / 65.0];

/// Scalar value of the multiscale trigonometric medium.
pub fn trig_multiscale_value(x: f64, y: f64, t: f64) -> f64 {
    let xp = x + SQRT_2 * t;
    let yp = y - SQRT_2 * t;
    let ratio: f64 = TRIG_EPS.iter().map(|eps| (1.1 + (2.0 * PI * xp / eps).sin()) / (1.1 + (2.0 * PI * yp / eps).sin())).sum();
    (ratio + (4.0 * xp * xp * yp * yp).sin() + 1.0) / 6.0
}

impl Medium {
    pub fn identity() -> Self {
        Self { family: MediumFamily::Identity, seed: 0, time_dependent: false, field: Field::Constant(TensorSample::IDENTITY) }
    }

    pub fn constant(c: f64) -> Self {
        Self { family: MediumFamily::Custom, seed: 0, time_dependent: false, field: Field::Constant(TensorSample::isotropic(c)) }
    }

    /// User-supplied tensor field.
    pub fn custom<F>(time_dependent: bool, f: F) -> Self
    where
        F: Fn(Point, f64) -> TensorSample + Send + Sync + 'static,
    {
        Self { family: MediumFamily::Custom, seed: 0, time_dependent, field: Field::Custom(Arc::new(f)) }
    }

    /// Values 1 or 100 with probability 1/2 on each triangle.
    pub fn site_percolation(mesh: &Mesh, seed: u64) -> Self {
        Self::percolation_with(mesh, seed, 1.0, 100.0, 0.5)
    }

    fn percolation_with(mesh: &Mesh, seed: u64, low: f64, high: f64, probability: f64) -> Self {
        let rng = CounterRng::new(seed).split(1);
        let values = (0..mesh.n_triangles()).map(|k| if rng.uniform(k as u64) < probability { high } else { low }).collect();
        Self {
            family: MediumFamily::Percolation,
            seed,
            time_dependent: false,
            field: Field::PerTriangle { n: mesh.subdivisions(), values: Arc::new(values) },
        }
    }

    /// Deterministic multiscale trigonometric medium translated in time.
    pub fn trig_multiscale() -> Self {
        Self { family: MediumFamily::TrigMultiscale, seed: 0, time_dependent: true, field: Field::Trig }
    }

    /// `exp(h)` with `h` a random trigonometric polynomial of max-norm degree 4.
    /// Each frequency enters once: `k` and `-k` span the same sin/cos pair.
    pub fn random_fourier(seed: u64) -> Self {
        Self::random_fourier_with(seed, defaults::fourier_radius(), defaults::fourier_amplitude())
    }

    fn random_fourier_with(seed: u64, radius: i32, amplitude: f64) -> Self {
        let rng = CounterRng::new(seed).split(2);
        let mut modes = Vec::new();
        let mut idx = 0u64;
        for k1 in -radius..=radius {
            for k2 in -radius..=radius {
                // One representative per frequency pair {k, -k}.
                if k1 < 0 || (k1 == 0 && k2 <= 0) {
                    continue;
                }
                let sin_coef = rng.uniform_in(idx, -amplitude, amplitude);
                let cos_coef = rng.uniform_in(idx + 1, -amplitude, amplitude);
                idx += 2;
                modes.push(FourierMode { k: [k1, k2], sin_coef, cos_coef });
            }
        }
        Self { family: MediumFamily::FourierModes, seed, time_dependent: true, field: Field::Fourier { modes } }
    }

    /// Product of dyadic layers, piecewise constant in space and time.
    pub fn random_fractal(seed: u64) -> Self {
        Self::random_fractal_with(
            seed,
            defaults::fractal_layers(),
            defaults::fractal_low(),
            defaults::fractal_high(),
            defaults::fractal_time_unit(),
        )
    }

    fn random_fractal_with(seed: u64, layers: u32, low: f64, high: f64, time_unit: f64) -> Self {
        Self {
            family: MediumFamily::Fractal,
            seed,
            time_dependent: true,
            field: Field::Fractal { rng: CounterRng::new(seed).split(3), layers, low, high, time_unit },
        }
    }

    /// High-conductivity channel over a random O(1) background.
    pub fn channel(mesh: &Mesh, seed: u64) -> Self {
        Self::channel_with(mesh, seed, ChannelParams::default())
    }

    fn channel_with(mesh: &Mesh, seed: u64, params: ChannelParams) -> Self {
        let rng = CounterRng::new(seed).split(4);
        let values = (0..mesh.n_triangles())
            .map(|k| {
                if params.contains(mesh.centroid(k)) {
                    params.channel_value
                } else {
                    rng.uniform_in(k as u64, params.background_low, params.background_high)
                }
            })
            .collect();
        Self {
            family: MediumFamily::Channel,
            seed,
            time_dependent: false,
            field: Field::PerTriangle { n: mesh.subdivisions(), values: Arc::new(values) },
        }
    }

    pub fn family(&self) -> MediumFamily {
        self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Per-triangle scalar values, for families defined on a mesh.
    pub fn triangle_values(&self) -> Option<&[f64]> {
        match &self.field {
            Field::PerTriangle { values, .. } => Some(values),
            _ => None,
        }
    }

    /// Tensor at `(x, t)`. Per-triangle families return the value of the
    /// triangle of their generating mesh that contains `x`.
    pub fn sample(&self, x: Point, t: f64) -> Result<TensorSample> {
        let slack = 1e-9;
        if !(x.x >= DOMAIN_MIN - slack && x.x <= DOMAIN_MAX + slack && x.y >= DOMAIN_MIN - slack && x.y <= DOMAIN_MAX + slack) {
            return Err(Error::OutOfDomain { x: x.x, y: x.y });
        }
        Ok(self.eval(x, t))
    }

    /// Tensor used for triangle `tri` of `mesh` at time `t` (centroid rule).
    pub fn on_triangle(&self, mesh: &Mesh, tri: usize, t: f64) -> TensorSample {
        match &self.field {
            Field::PerTriangle { n, values } if *n == mesh.subdivisions() && values.len() == mesh.n_triangles() => {
                TensorSample::isotropic(values[tri])
            }
            _ => self.eval(mesh.centroid(tri), t),
        }
    }

    fn eval(&self, x: Point, t: f64) -> TensorSample {
        match &self.field {
            Field::Constant(s) => *s,
            Field::PerTriangle { n, values } => TensorSample::isotropic(values[uniform_triangle_at(*n, x)]),
            Field::Trig => TensorSample::isotropic(trig_multiscale_value(x.x, x.y, t)),
            Field::Fourier { modes } => TensorSample::isotropic(fourier_exponent(modes, x, t).exp()),
            Field::Fractal { rng, layers, low, high, time_unit } => {
                TensorSample::isotropic(fractal_value(rng, *layers, *low, *high, *time_unit, x, t))
            }
            Field::Custom(f) => f(x, t),
        }
    }
}

/// Triangle of the uniform `n x n` mesh containing `x` (arithmetic lookup).
fn uniform_triangle_at(n: usize, x: Point) -> usize {
    let h = (DOMAIN_MAX - DOMAIN_MIN) / n as f64;
    let cell = |v: f64| {
        let f = (v - DOMAIN_MIN) / h;
        let i = (f.floor().max(0.0) as usize).min(n - 1);
        (i, f - i as f64)
    };
    let (i, lx) = cell(x.x);
    let (j, ly) = cell(x.y);
    2 * (j * n + i) + usize::from(ly > lx)
}

fn fourier_exponent(modes: &[FourierMode], x: Point, t: f64) -> f64 {
    let xp = x.x + SQRT_2 * t;
    let yp = x.y - SQRT_2 * t;
    let ex = Complex::new(0.0, 2.0 * PI * xp).exp();
    let ey = Complex::new(0.0, 2.0 * PI * yp).exp();
    let pow = |base: Complex<f64>, k: i32| if k >= 0 { base.powi(k) } else { base.conj().powi(-k) };
    modes
        .iter()
        .map(|m| {
            let e = pow(ex, m.k[0]) * pow(ey, m.k[1]);
            m.sin_coef * e.im + m.cos_coef * e.re
        })
        .sum()
}

fn fractal_value(rng: &CounterRng, layers: u32, low: f64, high: f64, time_unit: f64, x: Point, t: f64) -> f64 {
    // Unit-square coordinates of the domain.
    let sx = (x.x - DOMAIN_MIN) / (DOMAIN_MAX - DOMAIN_MIN);
    let sy = (x.y - DOMAIN_MIN) / (DOMAIN_MAX - DOMAIN_MIN);
    let mut value = 1.0;
    for i in 1..=layers {
        let cells = 1u64 << i;
        let idx = |s: f64| ((s * cells as f64).floor().max(0.0) as u64).min(cells - 1);
        let (p, q) = (idx(sx), idx(sy));
        let dt = time_unit / 4f64.powi(i as i32);
        let k = (t / dt).floor().max(0.0) as u64;
        let stream = rng.split(i as u64);
        value *= stream.uniform_in(k * cells * cells + p * cells + q, low, high);
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> impl Iterator<Item = Point> {
        (0..m).flat_map(move |j| {
            (0..m).map(move |i| Point::new(-1.0 + 2.0 * i as f64 / (m - 1) as f64, -1.0 + 2.0 * j as f64 / (m - 1) as f64))
        })
    }

    fn ratio<I: Iterator<Item = f64>>(values: I) -> f64 {
        let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi / lo
    }

    #[test]
    fn percolation_values_and_balance() {
        let mesh = Mesh::uniform(128).unwrap();
        let a = Medium::site_percolation(&mesh, 2024);
        let vals = a.triangle_values().unwrap();
        assert!(vals.iter().all(|&v| v == 1.0 || v == 100.0));
        let frac = vals.iter().filter(|&&v| v == 100.0).count() as f64 / vals.len() as f64;
        assert!((0.47..=0.53).contains(&frac), "fraction {frac}");
        let b = Medium::site_percolation(&mesh, 2024);
        assert_eq!(vals, b.triangle_values().unwrap());
        assert!(!a.is_time_dependent());
    }

    #[test]
    fn per_triangle_sample_matches_centroid() {
        let mesh = Mesh::uniform(16).unwrap();
        let a = Medium::site_percolation(&mesh, 5);
        for k in 0..mesh.n_triangles() {
            let s = a.sample(mesh.centroid(k), 0.3).unwrap();
            assert_eq!(s, TensorSample::isotropic(a.triangle_values().unwrap()[k]));
            assert_eq!(a.on_triangle(&mesh, k, 0.0), s);
        }
    }

    #[test]
    fn trig_value_at_origin_is_one() {
        assert!((trig_multiscale_value(0.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let a = Medium::trig_multiscale();
        assert!((a.sample(Point::origin(), 0.0).unwrap().a11 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trig_is_a_rigid_translation() {
        for p in grid(17) {
            for t in [0.01, 0.05, 0.1] {
                let moved = trig_multiscale_value(p.x + SQRT_2 * t, p.y - SQRT_2 * t, 0.0);
                assert!((trig_multiscale_value(p.x, p.y, t) - moved).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trig_contrast_is_about_one_hundred() {
        let r = ratio(grid(513).map(|p| trig_multiscale_value(p.x, p.y, 0.0)));
        assert!((30.0..=300.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn fourier_zero_amplitude_is_identity() {
        let a = Medium::random_fourier_with(3, 4, 0.0);
        for p in grid(9) {
            assert_eq!(a.sample(p, 0.07).unwrap(), TensorSample::IDENTITY);
        }
    }

    #[test]
    fn fourier_matches_direct_trig_sum() {
        let a = Medium::random_fourier(11);
        let Field::Fourier { modes } = &a.field else { unreachable!() };
        assert_eq!(modes.len(), 40);
        for p in grid(7) {
            let t = 0.031;
            let (xp, yp) = (p.x + SQRT_2 * t, p.y - SQRT_2 * t);
            let direct: f64 = modes
                .iter()
                .map(|m| {
                    let th = 2.0 * PI * (m.k[0] as f64 * xp + m.k[1] as f64 * yp);
                    m.sin_coef * th.sin() + m.cos_coef * th.cos()
                })
                .sum();
            assert!((fourier_exponent(modes, p, t) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_contrast_and_reproducibility() {
        let a = Medium::random_fourier(1);
        let r = ratio(grid(257).map(|p| a.sample(p, 0.0).unwrap().a11));
        assert!((20.0..=500.0).contains(&r), "ratio {r}");
        let b = Medium::random_fourier(1);
        for p in grid(11) {
            assert_eq!(a.sample(p, 0.2).unwrap(), b.sample(p, 0.2).unwrap());
        }
    }

    #[test]
    #[ignore]
    fn contrast_survey() {
        for seed in 0..20 {
            let a = Medium::random_fourier(seed);
            let f = Medium::random_fractal(seed);
            let rf = ratio(grid(257).map(|p| a.sample(p, 0.0).unwrap().a11));
            let rr = ratio((0..=20).flat_map(|k| {
                let t = 0.1 * k as f64 / 20.0;
                let f = f.clone();
                grid(129).map(move |p| f.sample(p, t).unwrap().a11)
            }));
            println!("seed {seed}: fourier {rf:.1} fractal {rr:.1}");
        }
    }

    #[test]
    fn fractal_unit_layers_and_piecewise_constancy() {
        let ones = Medium::random_fractal_with(4, 6, 1.0, 1.0, 0.1);
        assert_eq!(ones.sample(Point::new(0.3, -0.2), 0.05).unwrap().a11, 1.0);

        let a = Medium::random_fractal(4);
        // Deepest cell: side 2/64 in domain units, duration 0.1/4096.
        let base = Point::new(-1.0 + 5.0 * 2.0 / 64.0, -1.0 + 9.0 * 2.0 / 64.0);
        let t0 = 3.0 * 0.1 / 4096.0;
        let v0 = a.sample(base + nalgebra::Vector2::new(1e-4, 1e-4), t0 + 1e-7).unwrap();
        let v1 = a.sample(base + nalgebra::Vector2::new(0.03, 0.02), t0 + 0.9 * 0.1 / 4096.0).unwrap();
        assert_eq!(v0, v1);
    }

    #[test]
    fn fractal_contrast_over_space_time() {
        let a = Medium::random_fractal(1);
        let r = ratio((0..=20).flat_map(|k| {
            let t = 0.1 * k as f64 / 20.0;
            let a = a.clone();
            grid(129).map(move |p| a.sample(p, t).unwrap().a11)
        }));
        assert!((30.0..=600.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn channel_geometry() {
        let mesh = Mesh::uniform(128).unwrap();
        let a = Medium::channel(&mesh, 8);
        assert_eq!(a.sample(Point::new(-0.7, -0.5), 0.0).unwrap().a11, 100.0);
        assert_eq!(a.sample(Point::new(-0.375, 0.1), 0.0).unwrap().a11, 100.0);
        let far = a.sample(Point::new(0.8, 0.8), 0.0).unwrap().a11;
        assert!((0.5..=1.5).contains(&far));
        let vals = a.triangle_values().unwrap();
        let frac = vals.iter().filter(|&&v| v == 100.0).count() as f64 / vals.len() as f64;
        assert!(frac > 0.0 && frac < 0.1, "fraction {frac}");
    }

    #[test]
    fn every_family_is_spd_and_time_flag_is_honored() {
        let mesh = Mesh::uniform(32).unwrap();
        let media = [
            Medium::identity(),
            Medium::site_percolation(&mesh, 1),
            Medium::trig_multiscale(),
            Medium::random_fourier(1),
            Medium::random_fractal(1),
            Medium::channel(&mesh, 1),
        ];
        let rng = CounterRng::new(77);
        for a in &media {
            for i in 0..20_000u64 {
                let p = Point::new(rng.uniform_in(3 * i, -1.0, 1.0), rng.uniform_in(3 * i + 1, -1.0, 1.0));
                let t = rng.uniform_in(3 * i + 2, 0.0, 1.0);
                let s = a.sample(p, t).unwrap();
                assert!(s.is_spd() && s.eigenvalues().0 > 0.0, "{:?} at {p:?}", a.family());
                if !a.is_time_dependent() {
                    assert_eq!(s, a.sample(p, 0.5 * t).unwrap());
                }
            }
        }
    }

    #[test]
    fn out_of_domain_sample_is_rejected() {
        let a = Medium::identity();
        assert!(matches!(a.sample(Point::new(1.5, 0.0), 0.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn eigenvalues_of_tensor() {
        let s = TensorSample { a11: 2.0, a12: 1.0, a22: 2.0 };
        let (lo, hi) = s.eigenvalues();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        assert_eq!(s.frobenius_sq(), 10.0);
    }
}
