use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use youngfock::experiment::{
    run, CheckVerdict, ExperimentConfig, ExperimentError, RunOutput, Suite,
};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Runs the numerical checks described by a JSON config and writes a JSON
/// report plus CSV plot data.
#[derive(Parser, Debug)]
#[command(name = "youngfock", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the suite in the config: weights, kernel, systems, cauchy, young, pw or all.
    #[arg(long)]
    suite: Option<Suite>,
    /// Output directory; defaults to `output_dir` of the config, relative to the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every tolerance of the config.
    #[arg(long)]
    tol_scale: Option<f64>,
}

enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Failure::Config(e.to_string()),
            ExperimentError::Io { .. } => Failure::Io(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(args: &Args) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        // serde_json appends " at line L column C"; repeat the position up front in file:line:column form
        let message = e.to_string();
        let message = message
            .split(" at line ")
            .next()
            .unwrap_or(&message)
            .to_string();
        Failure::Config(format!(
            "{}:{}:{}: {message}",
            args.config.display(),
            e.line(),
            e.column()
        ))
    })?;
    if let Some(suite) = args.suite {
        config.suite = suite;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(s) = args.tol_scale {
        config.tolerances.scale *= s;
    }
    config.validate()?;
    Ok(config)
}

fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let report = serde_json::to_string_pretty(&out.report).expect("report serializes");
    let path = dir.join("report.json");
    fs::write(&path, report + "\n").map_err(|e| io_failure(&path, e))?;
    for table in &out.tables {
        let path = dir.join(&table.file_name);
        fs::write(&path, table.to_csv()).map_err(|e| io_failure(&path, e))?;
    }
    Ok(())
}

fn execute(args: &Args) -> Result<bool, Failure> {
    let config = load_config(args)?;
    let base_dir = args.config.parent().unwrap_or(Path::new("."));
    let out_dir = match &args.out {
        Some(dir) => dir.clone(),
        None => base_dir.join(&config.output_dir),
    };
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let out = run(&config, base_dir, &timestamp)?;
    write_outputs(&out, &out_dir)?;

    let count = |v: CheckVerdict| out.report.checks.iter().filter(|c| c.verdict == v).count();
    for c in out.report.failures() {
        let detail = match (&c.error, c.measured, c.threshold) {
            (Some(e), _, _) => format!("{}: {}", e.code, e.message),
            (None, Some(m), Some(t)) => format!("measured {m:e}, required {} {t:e}", c.relation),
            (None, Some(m), None) => format!("measured {m:e}"),
            _ => "does not hold".to_string(),
        };
        eprintln!("FAIL {} ({detail})", c.name);
    }
    println!(
        "{} checks: {} pass, {} fail, {} info; report in {}",
        out.report.checks.len(),
        count(CheckVerdict::Pass),
        count(CheckVerdict::Fail),
        count(CheckVerdict::Info),
        out_dir.display()
    );
    Ok(out.report.passed())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Io(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
