use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tadv_core::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use tadv_core::synth::{simulate_couple_dataset, GeneratorSpec};

/// Couples in a default simulated bundle.
const DEFAULT_COUPLES: usize = 630;
const CONFIG_FILE: &str = "config.json";

#[derive(Parser)]
#[command(name = "tadv", version, about = "Tolerance index measurement pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Validate a configuration without running anything.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic survey/diary bundle, its truth file and a config.
    Simulate {
        /// Generator spec (JSON). Defaults to the diary-compatible preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's couple count.
        #[arg(long)]
        couples: Option<usize>,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    Ok(PipelineConfig::load(path)?.with_env_overrides())
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn pipeline_failure(e: PipelineError) -> ExitCode {
    let code = e.exit_code() as u8;
    fail(code, e)
}

fn run(config: &Path) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return pipeline_failure(e),
    };
    match run_pipeline(&cfg) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            eprintln!("{} stages completed, reports in {}", summary.stages.len(), summary.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_failure(e),
    }
}

fn check(config: &Path) -> ExitCode {
    match load_config(config).and_then(|c| c.check()) {
        Ok(()) => {
            println!("config ok");
            ExitCode::SUCCESS
        }
        Err(e) => pipeline_failure(e),
    }
}

fn simulate(spec: Option<&Path>, out: &Path, couples: Option<usize>, seed: Option<u64>) -> ExitCode {
    let mut spec = match spec {
        Some(path) => {
            let parsed = std::fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<GeneratorSpec>(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(s) => s,
                Err(e) => return fail(1, format!("{}: {e}", path.display())),
            }
        }
        None => GeneratorSpec::couple_defaults(DEFAULT_COUPLES),
    };
    if let Some(n) = couples {
        spec.n_couples = n;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Err(e) = spec.validate() {
        return fail(1, e);
    }
    if let Err(e) = std::fs::create_dir_all(out) {
        return fail(2, format!("cannot create {}: {e}", out.display()));
    }
    let sim = match simulate_couple_dataset(&spec, out) {
        Ok(s) => s,
        Err(e) => return fail(2, e),
    };
    if sim.truth.clip_warning {
        eprintln!("warning: {:.1}% of indicator draws were clipped", 100.0 * sim.truth.clip_fraction);
    }
    let config = PipelineConfig::for_bundle(Path::new("."), Path::new("reports"));
    let path = out.join(CONFIG_FILE);
    if let Err(e) = std::fs::write(&path, config.to_json() + "\n") {
        return fail(2, format!("cannot write {}: {e}", path.display()));
    }
    println!("{}", path.display());
    eprintln!("{} couples written to {}", spec.n_couples, out.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => run(&config),
        Command::Check { config } => check(&config),
        Command::Simulate { spec, out, couples, seed } => simulate(spec.as_deref(), &out, couples, seed),
    }
}
