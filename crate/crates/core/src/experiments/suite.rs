//! Canonical experiment configurations and the combined suite summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_experiment, Compression, DiagnosticToggles, ExperimentConfig, ExperimentReport, SolverSettings, Stage};
use crate::error::{Error, Result};
use crate::fem::SourceKind;
use crate::media::{ChannelParams, MediumSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Percolation,
    Channel,
    Trig,
    Fourier,
    Fractal,
    All,
}

impl SuiteName {
    pub const EXAMPLES: [SuiteName; 5] =
        [SuiteName::Percolation, SuiteName::Channel, SuiteName::Trig, SuiteName::Fourier, SuiteName::Fractal];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Percolation => "percolation",
            SuiteName::Channel => "channel",
            SuiteName::Trig => "trig",
            SuiteName::Fourier => "fourier",
            SuiteName::Fractal => "fractal",
            SuiteName::All => "all",
        }
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "percolation" => SuiteName::Percolation,
            "channel" => SuiteName::Channel,
            "trig" => SuiteName::Trig,
            "fourier" => SuiteName::Fourier,
            "fractal" => SuiteName::Fractal,
            "all" => SuiteName::All,
            other => return Err(Error::Config(format!("unknown suite '{other}'"))),
        })
    }
}

fn config(
    name: &str,
    medium: MediumSpec,
    source: SourceKind,
    fine_n: usize,
    coarse_n: &[usize],
    final_time: f64,
    seed: u64,
    out: Option<&Path>,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        medium,
        seed,
        fine_n,
        coarse_n: coarse_n.iter().copied().filter(|&nc| fine_n % nc == 0 && nc < fine_n).collect(),
        final_time,
        fine_steps: None,
        coarse_steps: None,
        source,
        output_dir: out.map(|o| o.join(name)),
        diagnostics: DiagnosticToggles { cordes: true, compensation: true, det_check: true },
        solver: SolverSettings::default(),
        dumps: Vec::new(),
        resample: None,
    }
}

/// Configurations run by `suite`, in a fixed order.
pub fn canonical_configs(suite: SuiteName, fine_n: usize, seed: u64, out: Option<&Path>) -> Vec<ExperimentConfig> {
    use SourceKind::{One, TravellingSine};
    let stationary = [4, 8, 16];
    let evolving = [4, 8];
    match suite {
        SuiteName::Percolation => vec![
            config("percolation_one", MediumSpec::percolation(), One, fine_n, &stationary, 1.0, seed, out),
            config("percolation_sine", MediumSpec::percolation(), TravellingSine, fine_n, &stationary, 1.0, seed, out),
        ],
        SuiteName::Channel => {
            vec![config("channel_one", MediumSpec::Channel(ChannelParams::default()), One, fine_n, &stationary, 1.0, seed, out)]
        }
        SuiteName::Trig => vec![
            config("trig_one", MediumSpec::TrigMultiscale, One, fine_n, &evolving, 0.1, seed, out),
            config("trig_sine", MediumSpec::TrigMultiscale, TravellingSine, fine_n, &evolving, 0.1, seed, out),
        ],
        SuiteName::Fourier => vec![config("fourier_one", MediumSpec::fourier(), One, fine_n, &evolving, 0.1, seed, out)],
        SuiteName::Fractal => vec![config("fractal_one", MediumSpec::fractal(), One, fine_n, &evolving, 0.1, seed, out)],
        SuiteName::All => SuiteName::EXAMPLES.iter().flat_map(|&s| canonical_configs(s, fine_n, seed, out)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub status: String,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub compression: Vec<Compression>,
    pub report: Option<ExperimentReport>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: SuiteName,
    pub fine_n: usize,
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteSummary {
    pub fn failures(&self) -> impl Iterator<Item = &SuiteEntry> {
        self.entries.iter().filter(|e| e.status != "ok")
    }

    pub fn entry(&self, name: &str) -> Option<&SuiteEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Runs every canonical configuration of `suite`; a failing run is recorded and its siblings continue.
pub fn run_suite(suite: SuiteName, fine_n: usize, out: Option<&Path>, seed: u64) -> Result<SuiteSummary> {
    let configs = canonical_configs(suite, fine_n, seed, out);
    let entries = configs
        .par_iter()
        .map(|c| {
            let start = std::time::Instant::now();
            match run_experiment(c) {
                Ok(o) => SuiteEntry {
                    name: c.name.clone(),
                    status: "ok".into(),
                    failed_stage: None,
                    error: None,
                    compression: o.report.compression.clone(),
                    report: Some(o.report),
                    wall_time: start.elapsed().as_secs_f64(),
                },
                Err(f) => {
                    log::error!("{}: {f}", c.name);
                    SuiteEntry {
                        name: c.name.clone(),
                        status: "failed".into(),
                        failed_stage: Some(f.stage),
                        error: Some(f.error.to_string()),
                        compression: Vec::new(),
                        report: None,
                        wall_time: start.elapsed().as_secs_f64(),
                    }
                }
            }
        })
        .collect();
    let summary = SuiteSummary { suite, fine_n, seed, entries };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let path: PathBuf = dir.join(format!("summary_{}.json", suite.as_str()));
        fs::write(path, serde_json::to_vec_pretty(&summary)?)?;
    }
    Ok(summary)
}
