use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use meanscore::cli::{emit_results, load_dataset, run_sweep, ConfigFile, RunConfig};
use meanscore::demo::write_demo;
use meanscore::sim::{run_study, Dgm, DgmSpec, Method, Scenario, StudyConfig};

#[derive(Parser)]
#[command(name = "meanscore", version, about = "Mean score sensitivity analysis for trials with missing outcomes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep departures from missing at random over a grid and arm patterns.
    Sweep(Box<SweepArgs>),
    /// Run the Monte Carlo benchmark.
    Simulate(SimulateArgs),
    /// Write the bundled synthetic trial and example configurations.
    Demo(DemoArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Delimited data file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// TOML configuration file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long)]
    arm: Option<String>,
    /// Substantive covariate column (repeatable or comma separated).
    #[arg(long = "covar", value_delimiter = ',')]
    covariates: Vec<String>,
    /// Auxiliary column used only in the pattern model (repeatable or comma separated).
    #[arg(long = "aux", value_delimiter = ',')]
    auxiliaries: Vec<String>,
    /// Covariate whose missing entries are replaced by the observed mean.
    #[arg(long = "impute-mean", value_delimiter = ',')]
    impute_mean: Vec<String>,
    /// Categorical covariate expanded to indicator columns.
    #[arg(long = "factor", value_delimiter = ',')]
    factors: Vec<String>,
    #[arg(long)]
    reason: Option<String>,
    #[arg(long)]
    cluster: Option<String>,
    /// identity or logit.
    #[arg(long)]
    family: Option<String>,
    /// MIN:MAX:STEPS.
    #[arg(long = "delta-grid", allow_hyphen_values = true)]
    delta_grid: Option<String>,
    /// both, arm1, arm0 or all.
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    level: Option<f64>,
    /// auto, full or tworeg.
    #[arg(long)]
    engine: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Data-generating mechanisms: comma separated from 1-4, or "all".
    #[arg(long, default_value = "1")]
    dgm: String,
    /// Scenarios: comma separated from a-d, or "all".
    #[arg(long, default_value = "a")]
    scenario: String,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Comma separated subset of full,cc,ms,mi,sm.
    #[arg(long, default_value = "full,cc,ms,mi,sm")]
    methods: String,
    #[arg(long, default_value_t = 20240611)]
    seed: u64,
    /// Number of imputations for multiple imputation.
    #[arg(long, default_value_t = 30)]
    imputations: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Rows of the large draw used for calibration and the true estimand.
    #[arg(long = "calibration-rows", default_value_t = 1_000_000)]
    calibration_rows: usize,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Directory to write into.
    #[arg(long, default_value = "meanscore-demo")]
    dir: PathBuf,
    /// Also run both example sweeps, writing demo_continuous.csv and demo_binary.csv.
    #[arg(long)]
    run: bool,
}

fn merge_config(args: &SweepArgs) -> anyhow::Result<RunConfig> {
    let mut file = match &args.config {
        Some(p) => ConfigFile::from_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => ConfigFile::default(),
    };
    let set = |slot: &mut Option<String>, v: &Option<String>| {
        if let Some(v) = v {
            *slot = Some(v.clone());
        }
    };
    set(&mut file.outcome, &args.outcome);
    set(&mut file.arm, &args.arm);
    set(&mut file.reason, &args.reason);
    set(&mut file.cluster, &args.cluster);
    set(&mut file.family, &args.family);
    set(&mut file.delta_grid, &args.delta_grid);
    set(&mut file.pattern, &args.pattern);
    set(&mut file.engine, &args.engine);
    let replace = |slot: &mut Vec<String>, v: &Vec<String>| {
        if !v.is_empty() {
            *slot = v.clone();
        }
    };
    replace(&mut file.covariates, &args.covariates);
    replace(&mut file.auxiliaries, &args.auxiliaries);
    replace(&mut file.impute_mean, &args.impute_mean);
    replace(&mut file.factors, &args.factors);
    if args.level.is_some() {
        file.level = args.level;
    }
    if args.out.is_some() {
        file.out = args.out.clone();
    }
    Ok(RunConfig::from_file(file)?)
}

/// Runs a sweep and writes its table; returns the number of failed rows.
fn sweep(data_path: &Path, cfg: &RunConfig) -> anyhow::Result<usize> {
    let data = load_dataset(data_path, cfg).with_context(|| format!("loading {}", data_path.display()))?;
    log::info!("{} rows, {} observed outcomes", data.n(), data.n_obs());
    let rows = run_sweep(&data, cfg)?;
    emit_results(&rows, cfg.out.as_deref())?;
    let failed: Vec<_> = rows.iter().filter(|r| !r.is_ok()).collect();
    for r in &failed {
        eprintln!(
            "error: {} at delta {}: {}",
            r.pattern,
            r.delta,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(failed.len())
}

fn parse_list<T>(s: &str, all: &[T]) -> anyhow::Result<Vec<T>>
where
    T: Copy + std::str::FromStr<Err = meanscore::Error>,
{
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    let out = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<T>, _>>()?;
    if out.is_empty() {
        bail!("empty list '{s}'");
    }
    Ok(out)
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let dgms = parse_list(&args.dgm, &Dgm::ALL)?;
    let scenarios = parse_list(&args.scenario, &Scenario::ALL)?;
    let methods = parse_list(&args.methods, &Method::ALL)?;
    let specs: Vec<DgmSpec> = dgms
        .iter()
        .flat_map(|&d| scenarios.iter().map(move |&s| DgmSpec::new(d, s, args.seed)))
        .collect();
    let cfg = StudyConfig {
        reps: args.reps,
        methods,
        imputations: args.imputations,
        level: args.level,
        calibration_rows: args.calibration_rows,
        threads: args.threads,
        ..StudyConfig::default()
    };
    let report = run_study(&specs, &cfg)?;
    match &args.out {
        Some(p) => report.write_csv(p)?,
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn demo(args: &DemoArgs) -> anyhow::Result<usize> {
    let files = write_demo(&args.dir)?;
    println!("wrote {}", files.data.display());
    println!("wrote {}", files.manifest.display());
    println!("wrote {}", files.continuous_config.display());
    println!("wrote {}", files.binary_config.display());
    if !args.run {
        return Ok(0);
    }
    let mut failed = 0;
    for (config, name) in [
        (&files.continuous_config, "demo_continuous.csv"),
        (&files.binary_config, "demo_binary.csv"),
    ] {
        let mut cfg = RunConfig::from_file(ConfigFile::from_path(config)?)?;
        let out = args.dir.join(name);
        cfg.out = Some(out.clone());
        failed += sweep(&files.data, &cfg)?;
        println!("wrote {}", out.display());
    }
    Ok(failed)
}

fn run(cli: Cli) -> anyhow::Result<usize> {
    match cli.command {
        Command::Sweep(args) => {
            let cfg = merge_config(&args)?;
            sweep(&args.data, &cfg)
        }
        Command::Simulate(args) => simulate(&args).map(|_| 0),
        Command::Demo(args) => demo(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} grid point(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
