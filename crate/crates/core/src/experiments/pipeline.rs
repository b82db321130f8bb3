//! Streaming driver: fine reference, harmonic coordinates and every coarse
//! solver advance together one fine level at a time.

use std::sync::Arc;
use std::time::Instant;

use crate::diagnostics::{compute_sigma, SigmaField};
use crate::error::Result;
use crate::fem::{Assembler, BackwardEuler, CsrMatrix, Source, DEFAULT_TOLERANCE};
use crate::harmonic::{elliptic_from_stiffness, HarmonicEvolver, InvertibilityWarning, MapLevel};
use crate::media::Medium;
use crate::mesh::Mesh;
use crate::metrics::{CoarseSampler, ErrorNorms, ErrorSeries, NormKit};
use crate::upscale::{Basis, CoarseDriver, CoarseSpace, CoarseTrajectory, StepEnergy};

/// One coarse solve: `n_c` subdivisions and `coarse_steps` steps over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseRun {
    pub n_c: usize,
    pub coarse_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationInput {
    pub mesh: Arc<Mesh>,
    pub medium: Medium,
    pub source: Source,
    pub final_time: f64,
    pub fine_steps: usize,
    pub runs: Vec<CoarseRun>,
    /// Record errors against the reference at the end of every coarse step.
    pub record_series: bool,
    /// Collect `sigma` every this many fine levels (and at level 0).
    pub sigma_stride: Option<usize>,
    pub tolerance: f64,
}

impl SimulationInput {
    pub fn new(mesh: Arc<Mesh>, medium: Medium, source: Source, final_time: f64, fine_steps: usize) -> Self {
        Self {
            mesh,
            medium,
            source,
            final_time,
            fine_steps,
            runs: Vec::new(),
            record_series: false,
            sigma_stride: None,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn with_runs(mut self, runs: Vec<CoarseRun>) -> Self {
        self.runs = runs;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CoarseRunResult {
    pub run: CoarseRun,
    pub trajectory: CoarseTrajectory,
    /// `|v|^2` at both ends of every coarse step.
    pub energies: Vec<StepEnergy>,
    /// `int |g|^2 dx dt` over every coarse step.
    pub source_energy: Vec<f64>,
    /// Reconstructed fine field at `T`.
    pub final_field: Vec<f64>,
    pub final_fine: ErrorNorms,
    pub final_coarse: ErrorNorms,
    pub series_fine: ErrorSeries,
    pub series_coarse: ErrorSeries,
}

impl CoarseRunResult {
    /// Largest per-step `(|v_{n+1}|^2 - |v_n|^2) * lambda_min / int |g|^2`.
    pub fn stability_ratio(&self, lambda_min: f64) -> f64 {
        self.energies
            .iter()
            .zip(&self.source_energy)
            .filter(|(_, &g)| g > 0.0)
            .map(|(e, g)| (e.end - e.start) * lambda_min / g)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageTimes {
    pub reference: f64,
    pub harmonic: f64,
    pub coarse: f64,
    pub errors: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub dt: f64,
    pub reference_final: Vec<f64>,
    pub map_final: MapLevel,
    pub min_det: f64,
    pub warnings: Vec<InvertibilityWarning>,
    /// Smallest eigenvalue of `a` over all triangles and fine levels.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub sigma: SigmaField,
    pub runs: Vec<CoarseRunResult>,
    pub times: StageTimes,
}

struct RunState {
    driver: CoarseDriver,
    sampler: CoarseSampler,
    space_index: usize,
    source_energy: Vec<f64>,
    pending_g: f64,
    series_fine: ErrorSeries,
    series_coarse: ErrorSeries,
}

fn eigen_range(mesh: &Mesh, medium: &Medium, t: f64) -> (f64, f64) {
    (0..mesh.n_triangles()).fold((f64::INFINITY, 0.0f64), |(lo, hi), k| {
        let (a, b) = medium.on_triangle(mesh, k, t).eigenvalues();
        (lo.min(a), hi.max(b))
    })
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

/// Runs the fine reference, the harmonic coordinates and all coarse runs to `T`.
pub fn simulate(input: &SimulationInput) -> Result<Simulation> {
    let mesh = input.mesh.clone();
    let medium = &input.medium;
    let n = input.fine_steps;
    let dt = input.final_time / n as f64;
    let asm = Assembler::new(mesh.clone());
    let mass_full = asm.mass_full();
    let norms = NormKit::new(mesh.clone());
    let mut times = StageTimes::default();
    let time_dependent = medium.is_time_dependent();

    let fixed = if time_dependent {
        None
    } else {
        let full = Arc::new(asm.stiffness_full(medium, 0.0)?);
        let interior = Arc::new(asm.restrict(&full));
        Some((full, interior))
    };
    let stiffness_at = |t: f64| -> Result<(Arc<CsrMatrix>, Arc<CsrMatrix>)> {
        match &fixed {
            Some((f, i)) => Ok((f.clone(), i.clone())),
            None => {
                let full = Arc::new(asm.stiffness_full(medium, t)?);
                let interior = Arc::new(asm.restrict(&full));
                Ok((full, interior))
            }
        }
    };
    let fixed_load = input.source.is_time_independent().then(|| Arc::new(asm.load(&input.source, 0.0)));
    let g_energy = |t: f64| -> f64 {
        let g: Vec<f64> = mesh.nodes().iter().map(|&p| input.source.eval(p, t)).collect();
        mass_full.bilinear(&g, &g)
    };
    let fixed_g_energy = input.source.is_time_independent().then(|| g_energy(0.0));

    let (a0_full, _) = stiffness_at(0.0)?;
    let level0 = timed(&mut times.harmonic, || elliptic_from_stiffness(&asm, &a0_full, 0.0))?;
    let mut evolver = time_dependent.then(|| HarmonicEvolver::new(&asm, level0.clone(), dt));
    let mut warnings = Vec::new();
    let mut min_det = f64::INFINITY;
    let check_level = |k: usize, level: &MapLevel, warnings: &mut Vec<InvertibilityWarning>, min_det: &mut f64| {
        let (d, tri) = level.min_det(&mesh);
        *min_det = min_det.min(d);
        if d <= 0.0 {
            log::warn!("det grad F = {d:e} on triangle {tri} at t = {}", level.t);
            warnings.push(InvertibilityWarning { level: k, t: level.t, triangle: tri, det: d });
        }
    };
    check_level(0, &level0, &mut warnings, &mut min_det);

    let (mut lambda_min, mut lambda_max) = eigen_range(&mesh, medium, 0.0);
    let mut sigma = SigmaField::new();
    if input.sigma_stride.is_some() {
        sigma.push(0.0, compute_sigma(&mesh, medium, &level0));
    }

    // One coarse space (and current basis) per distinct n_c.
    let mut n_cs: Vec<usize> = input.runs.iter().map(|r| r.n_c).collect();
    n_cs.sort_unstable();
    n_cs.dedup();
    let spaces = n_cs.iter().map(|&nc| CoarseSpace::new(&asm, nc)).collect::<Result<Vec<_>>>()?;
    let mut bases: Vec<Arc<Basis>> =
        timed(&mut times.coarse, || spaces.iter().map(|s| s.basis(&level0).map(Arc::new)).collect::<Result<Vec<_>>>())?;

    let mut states = Vec::with_capacity(input.runs.len());
    for run in &input.runs {
        if run.coarse_steps == 0 || n % run.coarse_steps != 0 {
            return Err(crate::Error::Config(format!("{n} fine steps cannot be split into {} coarse steps", run.coarse_steps)));
        }
        let si = n_cs.iter().position(|&c| c == run.n_c).expect("n_c collected above");
        states.push(RunState {
            driver: CoarseDriver::new(spaces[si].clone(), bases[si].clone(), n / run.coarse_steps, dt),
            sampler: CoarseSampler::new(spaces[si].coarse_mesh().clone(), &mesh)?,
            space_index: si,
            source_energy: Vec::new(),
            pending_g: 0.0,
            series_fine: ErrorSeries::default(),
            series_coarse: ErrorSeries::default(),
        });
    }

    let mut be = BackwardEuler::new(&asm, dt).with_tolerance(input.tolerance);
    let mut level = level0;
    for k in 1..=n {
        let t = k as f64 * dt;
        let (a_full, a_int) = timed(&mut times.reference, || stiffness_at(t))?;
        let b = fixed_load.clone().unwrap_or_else(|| Arc::new(asm.load(&input.source, t)));
        timed(&mut times.reference, || be.step_with(&a_int, &b))?;
        if time_dependent {
            let (lo, hi) = eigen_range(&mesh, medium, t);
            lambda_min = lambda_min.min(lo);
            lambda_max = lambda_max.max(hi);
            let ev = evolver.as_mut().expect("evolver exists for time-dependent media");
            level = timed(&mut times.harmonic, || ev.step(&asm, &a_full).cloned())?;
            check_level(k, &level, &mut warnings, &mut min_det);
            bases = timed(&mut times.coarse, || spaces.iter().map(|s| s.basis(&level).map(Arc::new)).collect::<Result<Vec<_>>>())?;
            if let Some(stride) = input.sigma_stride {
                if k % stride == 0 {
                    sigma.push(t, compute_sigma(&mesh, medium, &level));
                }
            }
        }
        let g_sq = fixed_g_energy.unwrap_or_else(|| g_energy(t)) * dt;
        let mut u_full: Option<Vec<f64>> = None;
        for st in states.iter_mut() {
            st.pending_g += g_sq;
            let basis = bases[st.space_index].clone();
            let done = timed(&mut times.coarse, || st.driver.advance(basis.clone(), &a_int, &b))?.cloned();
            if let Some(c) = done {
                st.source_energy.push(std::mem::take(&mut st.pending_g));
                if input.record_series || k == n {
                    let u = u_full.get_or_insert_with(|| mesh.extend_interior(be.state()));
                    let rec = st.driver.space().reconstruct(&basis, c.as_slice());
                    timed(&mut times.errors, || -> Result<()> {
                        st.series_fine.push(t, norms.relative(u, &rec)?);
                        st.series_coarse.push(t, st.sampler.relative(u, &rec)?);
                        Ok(())
                    })?;
                }
            }
        }
    }

    let reference_final = mesh.extend_interior(be.state());
    let runs = states
        .into_iter()
        .zip(&input.runs)
        .map(|(st, &run)| {
            let basis = st.driver.bases().last().expect("final basis recorded").clone();
            let final_field = st.driver.space().reconstruct(&basis, st.driver.trajectory().last().as_slice());
            let final_fine = *st.series_fine.errors.last().expect("final errors recorded");
            let final_coarse = *st.series_coarse.errors.last().expect("final errors recorded");
            CoarseRunResult {
                run,
                energies: st.driver.energies().to_vec(),
                trajectory: st.driver.into_trajectory(),
                source_energy: st.source_energy,
                final_field,
                final_fine,
                final_coarse,
                series_fine: st.series_fine,
                series_coarse: st.series_coarse,
            }
        })
        .collect();

    Ok(Simulation {
        dt,
        reference_final,
        map_final: MapLevel { t: input.final_time, ..level },
        min_det,
        warnings,
        lambda_min,
        lambda_max,
        sigma,
        runs,
        times,
    })
}
