use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parahom::experiments::{run_diagnostics, run_experiment, run_suite, ExperimentFailure, Stage, SuiteName};
use parahom::{Error, ExperimentConfig, ExperimentReport};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_DIAGNOSTIC: u8 = 4;

#[derive(Parser)]
#[command(name = "parahom", version, about = "Multiscale parabolic homogenization experiments")]
struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the canonical configurations of a suite.
    Suite {
        /// percolation, channel, trig, fourier, fractal or all.
        name: String,
        #[arg(long, default_value_t = 64)]
        fine_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cordes report and compensation ratio only.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error sweep over the coarse meshes with log-log slopes.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if out.is_some() {
        config.output_dir = out;
    }
    Ok(config)
}

fn error_code(e: &Error) -> u8 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_SOLVER
    }
}

fn failure_code(f: &ExperimentFailure) -> u8 {
    if f.stage == Stage::Config {
        EXIT_CONFIG
    } else {
        error_code(&f.error)
    }
}

fn print_report(r: &ExperimentReport) {
    let m = &r.metadata;
    println!("{}: n = {}, {} fine steps, {} coarse steps, g = {}", m.name, m.fine_n, m.fine_steps, m.coarse_steps, m.source);
    println!("{:>6} {:>8} {:>10} {:>10} {:>10} {:>10}", "mesh", "dof", "L1", "Linf", "L2", "H1");
    for (label, rows) in [("coarse", &r.coarse_errors), ("fine", &r.fine_errors)] {
        for row in rows {
            let e = row.errors;
            println!("{label:>6} {:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", row.dof, e.l1, e.linf, e.l2, e.h1);
        }
    }
    for c in &r.compression {
        println!("compression at dof {}: {:.0}", c.dof, c.factor);
    }
    if let Some(c) = &r.cordes {
        println!("cordes: beta = {:.4}, condition {}", c.beta, if c.condition_satisfied { "holds" } else { "fails" });
    }
    if let Some(ratio) = r.compensation_ratio {
        println!("compensation ratio: {ratio:.4}");
    }
    if let Some(e) = &r.diagnostics_error {
        println!("diagnostics: {e}");
    }
}

fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Run { config, out } => {
            let config = match load(&config, out) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            match run_experiment(&config) {
                Ok(o) => {
                    print_report(&o.report);
                    if o.report.diagnostics_error.is_some() {
                        EXIT_DIAGNOSTIC
                    } else {
                        0
                    }
                }
                Err(f) => {
                    eprintln!("error: {f}");
                    failure_code(&f)
                }
            }
        }
        Command::Suite { name, fine_n, out, seed } => {
            let suite: SuiteName = match name.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            match run_suite(suite, fine_n, out.as_deref(), seed) {
                Ok(summary) => {
                    for entry in &summary.entries {
                        match &entry.report {
                            Some(r) => print_report(r),
                            None => println!("{}: failed ({})", entry.name, entry.error.as_deref().unwrap_or("unknown")),
                        }
                    }
                    let failed = summary.failures().count();
                    let degraded = summary.entries.iter().any(|e| e.report.as_ref().is_some_and(|r| r.diagnostics_error.is_some()));
                    if failed > 0 {
                        eprintln!("{failed} of {} runs failed", summary.entries.len());
                        EXIT_SOLVER
                    } else if degraded {
                        EXIT_DIAGNOSTIC
                    } else {
                        0
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    error_code(&e)
                }
            }
        }
        Command::Diagnose { config, out } => {
            let config = match load(&config, out) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            match run_diagnostics(&config) {
                Ok((cordes, ratio, _)) => {
                    match &cordes {
                        Some(c) => println!("{}", c.to_json().unwrap_or_default()),
                        None => println!("cordes: unavailable"),
                    }
                    match ratio {
                        Some(r) => println!("compensation ratio: {r}"),
                        None => println!("compensation ratio: unavailable"),
                    }
                    if cordes.is_none() || ratio.is_none() {
                        EXIT_DIAGNOSTIC
                    } else {
                        0
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    error_code(&e)
                }
            }
        }
        Command::Convergence { config, out } => {
            let config = match load(&config, out) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            if config.coarse_n.len() < 2 {
                eprintln!("error: a convergence sweep needs at least two coarse meshes");
                return EXIT_CONFIG;
            }
            let outcome = match run_experiment(&config) {
                Ok(o) => o,
                Err(f) => {
                    eprintln!("error: {f}");
                    return failure_code(&f);
                }
            };
            let r = &outcome.report;
            for (label, rows, slopes) in [("coarse", &r.coarse_errors, r.coarse_slopes), ("fine", &r.fine_errors, r.fine_slopes)] {
                println!("{label} mesh");
                println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "dof", "L1", "Linf", "L2", "H1");
                for row in rows {
                    let e = row.errors;
                    println!("{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", row.dof, e.l1, e.linf, e.l2, e.h1);
                }
                if let Some(s) = slopes {
                    println!("{:>8} {:>10.3} {:>10.3} {:>10.3} {:>10.3}", "slope", s.l1, s.linf, s.l2, s.h1);
                }
            }
            if r.diagnostics_error.is_some() {
                EXIT_DIAGNOSTIC
            } else {
                0
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    ExitCode::from(run(cli))
}
