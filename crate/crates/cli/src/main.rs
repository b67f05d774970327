use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use jointfusion::eval::{
    after, errors_against_truth, format_report, read_estimate_poses, read_summary, run_method,
    summarize, write_errors, write_estimates, write_summary, EvalConfig, EvalError, MethodId,
};
use jointfusion::fusion::FusionError;
use jointfusion::kinematics::{model_from_document, parse_model, KinematicModel, ModelDocument};
use jointfusion::simulator::{
    default_model_document, generate, read_dataset, write_dataset, Dataset, ScenarioConfig,
    SimulatorError,
};

#[derive(Parser)]
#[command(name = "jointfusion", version, about = "Arm tracking from joint encoders and depth images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a scenario file.
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Model document JSON (built-in 7-joint arm when omitted).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of datasets, seeded `seed, seed+1, ...`, written to `run_NNN/`.
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Run a tracking method over a dataset and write `estimates.csv`.
    Track {
        /// Dataset directory (a single dataset or `run_NNN/` subdirectories).
        #[arg(long)]
        data: PathBuf,
        /// encoders-only | camera-offset-only | full-fusion | vision-only
        #[arg(long)]
        method: String,
        /// Parameter JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Base seed of the particle filter.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the configured seed when `--seed` is absent instead of a fresh one.
        #[arg(long)]
        deterministic: bool,
        /// Only the first N runs of a multi-run dataset.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Score estimates against ground truth; writes `errors.csv` and `summary.csv`.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        estimates: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Method label for the summary.
        #[arg(long, default_value = "unknown")]
        method: String,
        /// Parameter JSON (convergence window).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sequence label (scenario name when omitted).
        #[arg(long)]
        sequence: Option<String>,
    },
    /// Print percentile tables from one or more summary CSVs.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        summary: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Validation(m) => m,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<SimulatorError> for CliError {
    fn from(e: SimulatorError) -> Self {
        match e {
            SimulatorError::Io(_) => CliError::Io(e.to_string()),
            SimulatorError::Depth(jointfusion::depth::DepthError::Io(_)) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match &e {
            EvalError::UnknownMethod(_) => CliError::Usage(e.to_string()),
            EvalError::Csv(c) if c.is_io_error() => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn load_params(path: Option<&Path>) -> Result<EvalConfig, CliError> {
    path.map_or(Ok(EvalConfig::default()), read_json)
}

/// Dataset directories under `data`: `run_*` subdirectories in name order,
/// or `data` itself.
fn run_dirs(data: &Path) -> Result<Vec<PathBuf>, CliError> {
    if data.join("scenario.json").is_file() {
        return Ok(vec![data.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(data)
        .map_err(|e| io_err(data, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("run_"))
                && p.join("scenario.json").is_file()
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Io(format!("{}: no dataset found", data.display())));
    }
    Ok(dirs)
}

fn load_run(dir: &Path) -> Result<(Dataset, KinematicModel), CliError> {
    let (dataset, doc) = read_dataset(dir)?;
    let model = model_from_document(doc)
        .and_then(|m| m.inject_virtual_joints())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((dataset, model))
}

fn simulate(config: &Path, out: &Path, model: Option<&Path>, seed: Option<u64>, runs: usize) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let mut scenario: ScenarioConfig = read_json(config)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let doc: ModelDocument = match model {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            parse_model(&text).map_err(|e| CliError::Validation(e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(e.to_string()))?
        }
        None => default_model_document(),
    };
    let km = model_from_document(doc.clone()).map_err(|e| CliError::Validation(e.to_string()))?;
    for r in 0..runs {
        let mut sc = scenario.clone();
        sc.seed = scenario.seed.wrapping_add(r as u64);
        let dir = if runs == 1 { out.to_path_buf() } else { out.join(format!("run_{r:03}")) };
        let dataset = generate(&km, &sc)?;
        write_dataset(&dir, &dataset, &doc)?;
        eprintln!(
            "wrote {} ({} encoder readings, {} frames)",
            dir.display(),
            dataset.encoders.len(),
            dataset.frames.len()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn track(
    data: &Path,
    method: &str,
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    deterministic: bool,
    runs: Option<usize>,
) -> Result<(), CliError> {
    let method: MethodId = method.parse()?;
    let mut params = load_params(config)?;
    params.cpf.seed = match (seed, deterministic) {
        (Some(s), _) => s,
        (None, true) => params.cpf.seed,
        (None, false) => SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64),
    };
    let mut dirs = run_dirs(data)?;
    if let Some(n) = runs {
        dirs.truncate(n);
    }
    let mut results = Vec::with_capacity(dirs.len());
    let mut names = Vec::new();
    for (r, dir) in dirs.iter().enumerate() {
        let (dataset, model) = load_run(dir)?;
        names = model.joints().iter().map(|j| j.name.clone()).collect();
        let mut p = params;
        p.cpf.seed = params.cpf.seed.wrapping_add(r as u64);
        let run = run_method(method, &dataset, &model, &p, r)?;
        results.push(run.outputs);
    }
    let refs: Vec<(usize, &[_])> = results.iter().enumerate().map(|(r, o)| (r, o.as_slice())).collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    write_estimates(BufWriter::new(file), &names, &refs)?;
    eprintln!("wrote {} ({} runs, method {method})", out.display(), refs.len());
    Ok(())
}

fn eval(
    data: &Path,
    estimates: &Path,
    out: &Path,
    method: &str,
    config: Option<&Path>,
    sequence: Option<&str>,
) -> Result<(), CliError> {
    let params = load_params(config)?;
    let file = File::open(estimates).map_err(|e| io_err(estimates, e))?;
    let poses = read_estimate_poses(BufReader::new(file))?;
    let dirs = run_dirs(data)?;
    let mut samples = Vec::new();
    let mut seq_name = sequence.map(str::to_string);
    let mut runs = 0;
    for (r, dir) in dirs.iter().enumerate() {
        let (dataset, _) = read_dataset(dir)?;
        if dataset.truth.is_empty() {
            return Err(EvalError::MissingTruth.into());
        }
        if seq_name.is_none() && !dataset.scenario.name.is_empty() {
            seq_name = Some(dataset.scenario.name.clone());
        }
        let est: Vec<_> = poses.iter().filter(|p| p.run == r).map(|p| (p.timestamp, p.pose)).collect();
        if est.is_empty() {
            continue;
        }
        runs += 1;
        samples.extend(errors_against_truth(&est, &dataset.truth, r));
    }
    let seq = seq_name.unwrap_or_else(|| {
        data.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("sequence")
            .to_string()
    });
    let mut rows = vec![summarize(&samples, runs, &seq, method, "all")?];
    let converged = after(&samples, params.convergence_window);
    if !converged.is_empty() {
        rows.push(summarize(&converged, runs, &seq, method, "converged")?);
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let ep = out.join("errors.csv");
    write_errors(BufWriter::new(File::create(&ep).map_err(|e| io_err(&ep, e))?), &samples)?;
    let sp = out.join("summary.csv");
    write_summary(BufWriter::new(File::create(&sp).map_err(|e| io_err(&sp, e))?), &rows)?;
    eprintln!("wrote {} and {}", ep.display(), sp.display());
    Ok(())
}

fn report(summaries: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for p in summaries {
        let f = File::open(p).map_err(|e| io_err(p, e))?;
        rows.extend(read_summary(BufReader::new(f))?);
    }
    let table = format_report(&rows);
    print!("{table}");
    if let Some(o) = out {
        fs::write(o, &table).map_err(|e| io_err(o, e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            model,
            seed,
            runs,
        } => simulate(&config, &out, model.as_deref(), seed, runs),
        Command::Track {
            data,
            method,
            config,
            out,
            seed,
            deterministic,
            runs,
        } => track(&data, &method, config.as_deref(), &out, seed, deterministic, runs),
        Command::Eval {
            data,
            estimates,
            out,
            method,
            config,
            sequence,
        } => eval(&data, &estimates, &out, &method, config.as_deref(), sequence.as_deref()),
        Command::Report { summary, out } => report(&summary, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
