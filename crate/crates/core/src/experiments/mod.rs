//! Configuration-driven experiment runner and the canonical experiment suite.

mod dumps;
mod pipeline;
mod studies;
mod suite;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{check_condition_1_1, compensation_ratio, CordesReport};
use crate::error::{Error, Result};
use crate::fem::{Source, SourceKind, DEFAULT_TOLERANCE};
use crate::media::MediumSpec;
use crate::mesh::Mesh;
use crate::metrics::{convergence_table, write_table, ConvergenceRow, ErrorNorms};
use crate::upscale::solve_coarse_semidiscrete;

pub use dumps::{emit_field_dumps, DumpKind};
pub use pipeline::{simulate, CoarseRun, CoarseRunResult, Simulation, SimulationInput, StageTimes};
pub use studies::{time_step_study, TimeStepStudy};
pub use suite::{canonical_configs, run_suite, SuiteEntry, SuiteName, SuiteSummary};

/// Fine time step at `n = 128`; scaled with `h` on other meshes.
pub const REFERENCE_FINE_DT: f64 = 1.2e-4;
/// Fine steps per coarse step when neither count is given.
pub const DEFAULT_STEP_RATIO: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticToggles {
    pub cordes: bool,
    pub compensation: bool,
    pub det_check: bool,
}

impl Default for DiagnosticToggles {
    fn default() -> Self {
        Self { cordes: false, compensation: false, det_check: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative residual target of the fine reference solves.
    pub tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE }
    }
}

fn default_source() -> SourceKind {
    SourceKind::One
}

/// One experiment: medium, meshes, time grid, source and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub medium: MediumSpec,
    #[serde(default)]
    pub seed: u64,
    pub fine_n: usize,
    pub coarse_n: Vec<usize>,
    pub final_time: f64,
    #[serde(default)]
    pub fine_steps: Option<usize>,
    #[serde(default)]
    pub coarse_steps: Option<usize>,
    #[serde(default = "default_source")]
    pub source: SourceKind,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub diagnostics: DiagnosticToggles,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub dumps: Vec<DumpKind>,
    /// Resolution of field dumps and the compensation resample; defaults to `fine_n + 1`.
    #[serde(default)]
    pub resample: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// `(N_fine, M)`. Defaults keep `dt_fine` proportional to `h` and 20 fine steps per coarse step.
    pub fn time_grid(&self) -> (usize, usize) {
        let default_fine = || {
            let dt = REFERENCE_FINE_DT * 128.0 / self.fine_n.max(1) as f64;
            let steps = (self.final_time / dt).ceil().max(1.0) as usize;
            steps.div_ceil(DEFAULT_STEP_RATIO) * DEFAULT_STEP_RATIO
        };
        match (self.fine_steps, self.coarse_steps) {
            (Some(n), Some(m)) => (n, m),
            (Some(n), None) => (n, (n / DEFAULT_STEP_RATIO).max(1)),
            (None, Some(m)) => {
                let f = default_fine();
                (f.div_ceil(m) * m, m)
            }
            (None, None) => {
                let f = default_fine();
                (f, f / DEFAULT_STEP_RATIO)
            }
        }
    }

    pub fn resample_resolution(&self) -> usize {
        self.resample.unwrap_or(self.fine_n + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.fine_n == 0 {
            return bad("fine_n must be positive".into());
        }
        if self.coarse_n.is_empty() {
            return bad("coarse_n must list at least one coarse mesh".into());
        }
        if let Some(&nc) = self.coarse_n.iter().find(|&&nc| nc < 2 || self.fine_n % nc != 0) {
            return bad(format!("coarse_n = {nc} must be at least 2 and divide fine_n = {}", self.fine_n));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return bad(format!("final_time must be positive, got {}", self.final_time));
        }
        let (n, m) = self.time_grid();
        if n == 0 || m == 0 || m > n || n % m != 0 {
            return bad(format!("{n} fine steps cannot be split into {m} coarse steps"));
        }
        if self.source == SourceKind::Zero {
            return bad("relative errors need a nonzero source".into());
        }
        if !(self.solver.tolerance > 0.0) {
            return bad("solver tolerance must be positive".into());
        }
        if self.resample_resolution() < 8 {
            return bad("resample resolution must be at least 8".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub name: String,
    pub family: String,
    pub seed: u64,
    pub fine_n: usize,
    pub fine_dofs: usize,
    pub coarse_n: Vec<usize>,
    pub final_time: f64,
    pub fine_steps: usize,
    pub coarse_steps: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    pub dof: usize,
    pub factor: f64,
}

/// `(N_fine * fine dofs) / (M * coarse dofs)`.
pub fn compression_factor(fine_steps: usize, fine_dofs: usize, coarse_steps: usize, coarse_dofs: usize) -> f64 {
    (fine_steps as f64 * fine_dofs as f64) / (coarse_steps as f64 * coarse_dofs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub dof: usize,
    pub max_ratio: f64,
}

/// Results of one experiment at the final time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: RunMetadata,
    pub coarse_errors: Vec<ConvergenceRow>,
    pub fine_errors: Vec<ConvergenceRow>,
    /// Log-log slopes against `h`; present with two or more coarse meshes.
    pub coarse_slopes: Option<ErrorNorms>,
    pub fine_slopes: Option<ErrorNorms>,
    /// Fine-mesh errors of the fixed-basis semidiscrete solve (time-independent media).
    pub semidiscrete_fine_errors: Option<Vec<ConvergenceRow>>,
    pub compression: Vec<Compression>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub min_det: f64,
    pub invertibility_warnings: usize,
    pub stability: Vec<StabilityRecord>,
    pub cordes: Option<CordesReport>,
    pub compensation_ratio: Option<f64>,
    pub diagnostics_error: Option<String>,
}

impl ExperimentReport {
    pub fn fine(&self, n_c: usize) -> Option<&ErrorNorms> {
        self.fine_errors.iter().find(|r| r.n_c == n_c).map(|r| &r.errors)
    }

    pub fn coarse(&self, n_c: usize) -> Option<&ErrorNorms> {
        self.coarse_errors.iter().find(|r| r.n_c == n_c).map(|r| &r.errors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Medium,
    Simulation,
    Semidiscrete,
    Diagnostics,
    Output,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub reference: f64,
    pub harmonic: f64,
    pub coarse: f64,
    pub errors: f64,
    pub diagnostics: f64,
    pub total: f64,
}

/// Everything needed to reproduce and audit one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub status: String,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_times: WallTimes,
    pub files: Vec<String>,
}

/// Failure with the stage where it happened; the manifest is still written.
#[derive(Debug)]
pub struct ExperimentFailure {
    pub stage: Stage,
    pub error: Error,
}

impl std::fmt::Display for ExperimentFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for ExperimentFailure {}

/// In-memory outcome of a successful run.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub simulation: Simulation,
    pub manifest: Manifest,
}

struct Outputs {
    dir: Option<PathBuf>,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        if let Some(dir) = &self.dir {
            let mut buf = Vec::new();
            f(&mut buf)?;
            fs::write(dir.join(name), buf)?;
            self.files.push(name.to_string());
        }
        Ok(())
    }
}

/// Pipeline: medium, fine reference, harmonic coordinates, coarse solves,
/// reconstruction, errors, diagnostics and artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentOutcome, ExperimentFailure> {
    let started = Instant::now();
    let mut outputs = Outputs { dir: config.output_dir.clone(), files: Vec::new() };
    let mut wall = WallTimes::default();
    let mut manifest = Manifest {
        name: config.name.clone(),
        status: "failed".into(),
        failed_stage: None,
        error: None,
        config: config.clone(),
        config_hash: config.hash(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_times: WallTimes::default(),
        files: Vec::new(),
    };
    let result = execute(config, &mut outputs, &mut wall);
    wall.total = started.elapsed().as_secs_f64();
    manifest.wall_times = wall;
    match result {
        Ok((report, simulation)) => {
            manifest.status = "ok".into();
            let written = outputs.write("report.json", |b| Ok(serde_json::to_writer_pretty(b, &report)?)).and_then(|_| {
                outputs.files.push("manifest.json".into());
                manifest.files = outputs.files.clone();
                write_manifest(config, &manifest)
            });
            match written {
                Ok(()) => Ok(ExperimentOutcome { report, simulation, manifest }),
                Err(error) => Err(ExperimentFailure { stage: Stage::Output, error }),
            }
        }
        Err(failure) => {
            manifest.failed_stage = Some(failure.stage);
            manifest.error = Some(failure.error.to_string());
            outputs.files.push("manifest.json".into());
            manifest.files = outputs.files.clone();
            if let Err(e) = write_manifest(config, &manifest) {
                log::error!("could not write failure manifest: {e}");
            }
            Err(failure)
        }
    }
}

fn write_manifest(config: &ExperimentConfig, manifest: &Manifest) -> Result<()> {
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(manifest)?)?;
    }
    Ok(())
}

fn at(stage: Stage) -> impl Fn(Error) -> ExperimentFailure {
    move |error| ExperimentFailure { stage, error }
}

fn execute(
    config: &ExperimentConfig,
    outputs: &mut Outputs,
    wall: &mut WallTimes,
) -> std::result::Result<(ExperimentReport, Simulation), ExperimentFailure> {
    config.validate().map_err(at(Stage::Config))?;
    if let Some(dir) = &outputs.dir {
        fs::create_dir_all(dir).map_err(|e| ExperimentFailure { stage: Stage::Output, error: e.into() })?;
    }
    let mesh = Arc::new(Mesh::uniform(config.fine_n).map_err(at(Stage::Medium))?);
    let medium = config.medium.build(&mesh, config.seed).map_err(at(Stage::Medium))?;
    let source: Source = config.source.into();
    let (fine_steps, coarse_steps) = config.time_grid();
    log::info!("{}: n = {}, {} fine / {} coarse steps", config.name, config.fine_n, fine_steps, coarse_steps);

    let mut coarse_n = config.coarse_n.clone();
    coarse_n.sort_unstable();
    coarse_n.dedup();
    let runs = coarse_n.iter().map(|&n_c| CoarseRun { n_c, coarse_steps }).collect();
    let mut input = SimulationInput::new(mesh.clone(), medium.clone(), source.clone(), config.final_time, fine_steps).with_runs(runs);
    input.record_series = true;
    input.tolerance = config.solver.tolerance;
    input.sigma_stride = config.diagnostics.cordes.then_some(fine_steps / coarse_steps);
    let sim = simulate(&input).map_err(at(Stage::Simulation))?;
    wall.reference = sim.times.reference;
    wall.harmonic = sim.times.harmonic;
    wall.coarse = sim.times.coarse;
    wall.errors = sim.times.errors;

    let row = |n_c: usize, errors: ErrorNorms| ConvergenceRow { n_c, dof: (n_c - 1) * (n_c - 1), h: 2.0 / n_c as f64, errors };
    let coarse_errors: Vec<_> = sim.runs.iter().map(|r| row(r.run.n_c, r.final_coarse)).collect();
    let fine_errors: Vec<_> = sim.runs.iter().map(|r| row(r.run.n_c, r.final_fine)).collect();
    let slopes = |rows: &[ConvergenceRow]| {
        (rows.len() >= 2)
            .then(|| convergence_table(rows.iter().map(|r| (r.n_c, r.errors)).collect()).map(|t| t.slopes))
            .transpose()
            .map_err(at(Stage::Simulation))
    };
    let coarse_slopes = slopes(&coarse_errors)?;
    let fine_slopes = slopes(&fine_errors)?;

    let semidiscrete_fine_errors = if medium.is_time_dependent() {
        None
    } else {
        let kit = crate::metrics::NormKit::new(mesh.clone());
        let asm = crate::fem::Assembler::new(mesh.clone());
        let mut rows = Vec::new();
        for &n_c in &coarse_n {
            let space = crate::upscale::CoarseSpace::new(&asm, n_c).map_err(at(Stage::Semidiscrete))?;
            let basis = space.basis(&sim.map_final).map_err(at(Stage::Semidiscrete))?;
            let traj = solve_coarse_semidiscrete(&space, &basis, &medium, &source, config.final_time, fine_steps)
                .map_err(at(Stage::Semidiscrete))?;
            let rec = space.reconstruct(&basis, traj.last().as_slice());
            let e = kit.relative(&sim.reference_final, &rec).map_err(at(Stage::Semidiscrete))?;
            rows.push(row(n_c, e));
        }
        Some(rows)
    };

    let fine_dofs = mesh.n_interior();
    let compression = coarse_n
        .iter()
        .map(|&n_c| {
            let dof = (n_c - 1) * (n_c - 1);
            Compression { dof, factor: compression_factor(fine_steps, fine_dofs, coarse_steps, dof) }
        })
        .collect();
    let stability = sim
        .runs
        .iter()
        .map(|r| StabilityRecord { dof: (r.run.n_c - 1) * (r.run.n_c - 1), max_ratio: r.stability_ratio(sim.lambda_min) })
        .collect();

    // Diagnostics never abort the run.
    let diag_start = Instant::now();
    let mut diagnostics_error = None;
    let cordes = if config.diagnostics.cordes {
        match check_condition_1_1(&sim.sigma) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics_error = Some(format!("cordes: {e}"));
                None
            }
        }
    } else {
        None
    };
    let compensation = if config.diagnostics.compensation {
        match compensation_ratio(&mesh, &sim.reference_final, &sim.map_final, config.resample_resolution()) {
            Ok(r) => Some(r),
            Err(e) => {
                diagnostics_error = Some(format!("compensation: {e}"));
                None
            }
        }
    } else {
        None
    };
    if config.diagnostics.det_check && !sim.warnings.is_empty() {
        diagnostics_error.get_or_insert_with(|| format!("{} levels of F are not invertible", sim.warnings.len()));
    }
    wall.diagnostics = diag_start.elapsed().as_secs_f64();

    let report = ExperimentReport {
        metadata: RunMetadata {
            name: config.name.clone(),
            family: format!("{:?}", config.medium.family()),
            seed: config.seed,
            fine_n: config.fine_n,
            fine_dofs,
            coarse_n: coarse_n.clone(),
            final_time: config.final_time,
            fine_steps,
            coarse_steps,
            source: source.label().to_string(),
        },
        coarse_errors,
        fine_errors,
        coarse_slopes,
        fine_slopes,
        semidiscrete_fine_errors,
        compression,
        lambda_min: sim.lambda_min,
        lambda_max: sim.lambda_max,
        min_det: sim.min_det,
        invertibility_warnings: sim.warnings.len(),
        stability,
        cordes,
        compensation_ratio: compensation,
        diagnostics_error,
    };

    write_outputs(config, &mesh, &medium, &sim, &report, outputs).map_err(at(Stage::Output))?;
    Ok((report, sim))
}

fn write_outputs(
    config: &ExperimentConfig,
    mesh: &Mesh,
    medium: &crate::media::Medium,
    sim: &Simulation,
    report: &ExperimentReport,
    outputs: &mut Outputs,
) -> Result<()> {
    outputs.write("errors_coarse.csv", |b| write_table(&report.coarse_errors, b))?;
    outputs.write("errors_fine.csv", |b| write_table(&report.fine_errors, b))?;
    if let Some(rows) = &report.semidiscrete_fine_errors {
        outputs.write("errors_semidiscrete_fine.csv", |b| write_table(rows, b))?;
    }
    for r in &sim.runs {
        let nc = r.run.n_c;
        outputs.write(&format!("series_fine_nc{nc}.csv"), |b| r.series_fine.write_csv(b))?;
        outputs.write(&format!("series_coarse_nc{nc}.csv"), |b| r.series_coarse.write_csv(b))?;
        outputs.write(&format!("coefficients_nc{nc}.csv"), |b| r.trajectory.write_csv(b))?;
        outputs.write(&format!("stability_nc{nc}.csv"), |b| {
            use std::io::Write;
            writeln!(b, "coarse_step,start,end,source_energy")?;
            for (n, (e, g)) in r.energies.iter().zip(&r.source_energy).enumerate() {
                writeln!(b, "{n},{},{},{g}", e.start, e.end)?;
            }
            Ok(())
        })?;
    }
    if let Some(c) = &report.cordes {
        outputs.write("cordes.json", |b| Ok(serde_json::to_writer_pretty(b, c)?))?;
        outputs.write("beta.csv", |b| sim.sigma.write_beta_csv(b))?;
    }
    if config.diagnostics.det_check {
        outputs.write("det_final.csv", |b| {
            use std::io::Write;
            writeln!(b, "t,triangle_id,det")?;
            for (k, d) in sim.map_final.dets(mesh).iter().enumerate() {
                writeln!(b, "{},{k},{d}", sim.map_final.t)?;
            }
            Ok(())
        })?;
    }
    if !config.dumps.is_empty() {
        if let Some(dir) = outputs.dir.clone() {
            let m = config.resample_resolution();
            for kind in &config.dumps {
                match emit_field_dumps(mesh, medium, &sim.reference_final, &sim.map_final, *kind, m, &dir) {
                    Ok(name) => outputs.files.push(name),
                    Err(e) if matches!(e, Error::NonInvertible { .. }) => {
                        log::warn!("skipping {kind:?} dump: {e}");
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(())
}

/// Cordes report and compensation ratio only: fine reference and `F`, no coarse solves.
pub fn run_diagnostics(config: &ExperimentConfig) -> Result<(Option<CordesReport>, Option<f64>, Simulation)> {
    config.validate()?;
    let mesh = Arc::new(Mesh::uniform(config.fine_n)?);
    let medium = config.medium.build(&mesh, config.seed)?;
    let (fine_steps, coarse_steps) = config.time_grid();
    let mut input = SimulationInput::new(mesh.clone(), medium, config.source.into(), config.final_time, fine_steps);
    input.sigma_stride = Some(fine_steps / coarse_steps);
    input.tolerance = config.solver.tolerance;
    let sim = simulate(&input)?;
    let cordes = check_condition_1_1(&sim.sigma).ok();
    let ratio = compensation_ratio(&mesh, &sim.reference_final, &sim.map_final, config.resample_resolution()).ok();
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        if let Some(c) = &cordes {
            fs::write(dir.join("cordes.json"), c.to_json()?)?;
            let mut buf = Vec::new();
            sim.sigma.write_beta_csv(&mut buf)?;
            fs::write(dir.join("beta.csv"), buf)?;
        }
        fs::write(dir.join("compensation.json"), serde_json::to_vec_pretty(&serde_json::json!({ "compensation_ratio": ratio }))?)?;
    }
    Ok((cordes, ratio, sim))
}
