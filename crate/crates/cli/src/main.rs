//! Command-line harness: data generation, training, moment-based
//! initialization, the analytic report, experiment sweeps, and plotting.
//!
//! Exit codes: 0 success, 2 bad spec/input, 3 runtime failure.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use groupmix::sweep::{run_experiment, write_results_csv, ExperimentSpec};
use groupmix::{
    aligned_error, fit_rate, gd_train, local_random_init, tensor_init, theory_report, Dataset,
    Error as CoreError, MixtureJson, MixtureParams, TeacherJson, TeacherModel, TensorInitConfig,
    TrainConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_ENV: &str = "GROUPMIX_THREADS";

#[derive(Parser)]
#[command(
    name = "groupmix",
    about = "Teacher-student learning on Gaussian-mixture data with group structure",
    version
)]
struct Cli {
    /// Worker threads (overrides the GROUPMIX_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled dataset from a mixture and teacher.
    Generate(GenerateArgs),
    /// Run gradient descent and write the per-iteration trace.
    Train(TrainArgs),
    /// Compute the moment-based initialization and write it as JSON.
    Init(InitArgs),
    /// Print the analytic report (rate, step size, radius, curvature) as JSON.
    Theory(TheoryArgs),
    /// Run an experiment sweep from a JSON spec.
    Sweep(SweepArgs),
    /// Re-render the SVG plots for an existing sweep output directory.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Mixture parameters JSON file.
    #[arg(long)]
    psi: PathBuf,
    /// Teacher weights JSON file.
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (columns x0..x{d-1},label,group).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    psi: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    /// Dataset CSV from `generate`; omitted means a fresh draw of --n samples.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    /// Step size; omitted means the mixture-derived rule.
    #[arg(long)]
    step_size: Option<f64>,
    /// Entry-wise gradient noise bound.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Initialization: "local" (near the teacher), "tensor", or a JSON file
    /// produced by `init`.
    #[arg(long, default_value = "local")]
    init: String,
    /// Radius of the local random initialization.
    #[arg(long, default_value_t = 0.1)]
    init_radius: f64,
    /// Output directory for trace.csv and train_summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    psi: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    psi: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    eps0: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment kind: sample_complexity_grid, convergence_sweep,
    /// error_vs_n, risk_vs_mu, risk_vs_sigma, risk_vs_lambda, init_compare.
    kind: String,
    /// Spec JSON; omitted means the kind's built-in defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv, summary.json and plots.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory containing a sweep's spec.json (written by `sweep`).
    #[arg(long)]
    dir: PathBuf,
}

/// Anything that goes wrong before computation starts (files, JSON, invalid
/// parameters) exits 2; runtime failures exit 3.
enum Failure {
    Spec(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Spec(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            Failure::Spec(e) | Failure::Runtime(e) => e,
        }
    }
}

fn spec_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Spec(e.into())
}

fn runtime_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not configure {n} threads: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn load_psi(path: &Path) -> Result<MixtureParams, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading mixture file {}", path.display()))
        .map_err(spec_err)?;
    let doc: MixtureJson = serde_json::from_str(&text)
        .context("parsing mixture JSON")
        .map_err(spec_err)?;
    MixtureParams::from_json(&doc).map_err(spec_err)
}

fn load_teacher(path: &Path) -> Result<TeacherModel, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading teacher file {}", path.display()))
        .map_err(spec_err)?;
    let doc: TeacherJson = serde_json::from_str(&text)
        .context("parsing teacher JSON")
        .map_err(spec_err)?;
    TeacherModel::from_json(&doc).map_err(spec_err)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Train(args) => train(args),
        Command::Init(args) => init(args),
        Command::Theory(args) => theory(args),
        Command::Sweep(args) => sweep(args),
        Command::Plot(args) => plot(args),
    }
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let psi = load_psi(&args.psi)?;
    let teacher = load_teacher(&args.teacher)?;
    if args.n == 0 {
        return Err(spec_err(anyhow!("--n must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = Dataset::generate(&psi, &teacher, args.n, &mut rng).map_err(runtime_err)?;
    let mut out = String::new();
    let d = psi.dimension();
    for i in 0..d {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("label,group\n");
    for s in &data.samples {
        for v in s.x.iter() {
            out.push_str(&groupmix::util::fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&format!("{},{}\n", s.label, s.group + 1));
    }
    std::fs::write(&args.out, out).map_err(runtime_err)?;
    println!("wrote {} samples to {}", args.n, args.out.display());
    Ok(())
}

fn read_dataset(path: &Path, d: usize) -> Result<Dataset, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading dataset {}", path.display()))
        .map_err(spec_err)?;
    let mut samples = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(spec_err(anyhow!(
                "line {}: expected {} fields, got {}",
                ln + 1,
                d + 2,
                fields.len()
            )));
        }
        let x = DVector::from_fn(d, |i, _| fields[i].parse::<f64>().unwrap_or(f64::NAN));
        if x.iter().any(|v| v.is_nan()) {
            return Err(spec_err(anyhow!("line {}: unparsable feature", ln + 1)));
        }
        let label: u8 = fields[d].parse().map_err(spec_err)?;
        let group: usize = fields[d + 1].parse().map_err(spec_err)?;
        samples.push(groupmix::LabeledSample {
            x,
            label,
            group: group.saturating_sub(1),
        });
    }
    if samples.is_empty() {
        return Err(spec_err(anyhow!("dataset is empty")));
    }
    Ok(Dataset { samples })
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let psi = load_psi(&args.psi)?;
    let teacher = load_teacher(&args.teacher)?;
    let data = match &args.data {
        Some(path) => read_dataset(path, psi.dimension())?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(groupmix::util::derive_seed(
                args.seed, 0xda7a, 0,
            ));
            Dataset::generate(&psi, &teacher, args.n, &mut rng).map_err(runtime_err)?
        }
    };
    let w0 = match args.init.as_str() {
        "local" => {
            let mut rng = ChaCha8Rng::seed_from_u64(groupmix::util::derive_seed(
                args.seed, 0x1217, 0,
            ));
            local_random_init(teacher.weights(), args.init_radius, &mut rng)
        }
        "tensor" => {
            let cfg = TensorInitConfig {
                probe_seed: args.seed,
                ..TensorInitConfig::default()
            };
            tensor_init(&data.samples, &psi, teacher.neuron_count(), &cfg)
                .map_err(runtime_err)?
                .w0
        }
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading init file {path}"))
                .map_err(spec_err)?;
            let doc: groupmix::tensorinit::InitResultJson =
                serde_json::from_str(&text).map_err(spec_err)?;
            let d = doc.w0.len();
            let k = doc.w0.first().map(|r| r.len()).unwrap_or(0);
            DMatrix::from_fn(d, k, |i, j| doc.w0[i][j])
        }
    };
    let cfg = TrainConfig {
        step_size: args.step_size,
        iterations: args.iterations,
        noise_level: args.noise,
        seed: args.seed,
        stop_movement: None,
    };
    let trace = gd_train(&w0, &data, &cfg, teacher.weights(), &psi).map_err(runtime_err)?;
    std::fs::create_dir_all(&args.out).map_err(runtime_err)?;
    std::fs::write(args.out.join("trace.csv"), trace.to_csv()).map_err(runtime_err)?;
    let fit = fit_rate(&trace).ok();
    let final_err = aligned_error(&trace.final_weights, teacher.weights())
        .map_err(runtime_err)?
        .distance;
    let summary = serde_json::json!({
        "iterations": trace.iterations(),
        "final_aligned_error": final_err,
        "final_empirical_risk": trace.empirical_risk.last(),
        "rate_fit": fit,
    });
    std::fs::write(
        args.out.join("train_summary.json"),
        serde_json::to_string_pretty(&summary).map_err(runtime_err)?,
    )
    .map_err(runtime_err)?;
    println!(
        "trained {} iterations; final aligned error {final_err:.6e}",
        trace.iterations()
    );
    Ok(())
}

fn init(args: InitArgs) -> Result<(), Failure> {
    let psi = load_psi(&args.psi)?;
    let teacher = load_teacher(&args.teacher)?;
    let mut rng = ChaCha8Rng::seed_from_u64(groupmix::util::derive_seed(args.seed, 0xda7a, 0));
    let data = Dataset::generate(&psi, &teacher, args.n, &mut rng).map_err(runtime_err)?;
    let cfg = TensorInitConfig {
        probe_seed: args.seed,
        ..TensorInitConfig::default()
    };
    let res =
        tensor_init(&data.samples, &psi, teacher.neuron_count(), &cfg).map_err(runtime_err)?;
    let rel = aligned_error(&res.w0, teacher.weights())
        .map_err(runtime_err)?
        .distance
        / teacher.weights().norm();
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&res.to_json()).map_err(runtime_err)?,
    )
    .map_err(runtime_err)?;
    println!(
        "initialization written to {} (relative error {rel:.4})",
        args.out.display()
    );
    Ok(())
}

fn theory(args: TheoryArgs) -> Result<(), Failure> {
    let psi = load_psi(&args.psi)?;
    let teacher = load_teacher(&args.teacher)?;
    let report = match theory_report(&psi, &teacher, args.eps0) {
        Ok(r) => r,
        Err(e @ CoreError::InvalidInput(_)) => return Err(spec_err(e)),
        Err(e) => return Err(runtime_err(e)),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(runtime_err)?
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))
                .map_err(spec_err)?;
            let spec: ExperimentSpec = serde_json::from_str(&text)
                .context("parsing experiment spec")
                .map_err(spec_err)?;
            if spec.kind() != args.kind {
                return Err(spec_err(anyhow!(
                    "spec kind {} does not match requested {}",
                    spec.kind(),
                    args.kind
                )));
            }
            spec
        }
        None => ExperimentSpec::default_for(&args.kind)
            .ok_or_else(|| spec_err(anyhow!("unknown experiment kind {}", args.kind)))?,
    };
    if let Some(seed) = args.seed {
        spec.set_seed(seed);
    }
    let result = match run_experiment(&spec) {
        Ok(r) => r,
        Err(e @ CoreError::InvalidInput(_)) | Err(e @ CoreError::InvalidMixture(_)) => {
            return Err(spec_err(e))
        }
        Err(e) => return Err(runtime_err(e)),
    };
    write_results_csv(&result, &args.out).map_err(runtime_err)?;
    std::fs::write(
        args.out.join("spec.json"),
        serde_json::to_string_pretty(&spec).map_err(runtime_err)?,
    )
    .map_err(runtime_err)?;
    println!(
        "wrote {} rows to {}",
        result.rows.len(),
        args.out.join("results.csv").display()
    );
    Ok(())
}

fn plot(args: PlotArgs) -> Result<(), Failure> {
    let spec_path = args.dir.join("spec.json");
    let text = std::fs::read_to_string(&spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))
        .map_err(spec_err)?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(spec_err)?;
    // Plots are a pure function of the recorded spec and seed, so re-running
    // the experiment reproduces them byte-for-byte.
    let result = run_experiment(&spec).map_err(runtime_err)?;
    for (name, svg) in &result.plots {
        std::fs::write(args.dir.join(name), svg).map_err(runtime_err)?;
        println!("wrote {}", args.dir.join(name).display());
    }
    if result.plots.is_empty() {
        println!("experiment kind {} has no plots", spec.kind());
    }
    Ok(())
}
