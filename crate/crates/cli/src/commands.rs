//! Subcommand implementations and exit-code mapping.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 invalid config,
//! 3 internal assertion (constraint violation during a run).

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ntnmec::harness::{
    self, apply_override, parse_override, run_once, HarnessError, SweepConfig, Variant,
};
use ntnmec::oracle::{self, OracleLimits};
use ntnmec::qtcajosa::{restrict_destinations, DestRestriction};
use ntnmec::scenario::{scenario_from_value, ScenarioError};

const FIG2_CONFIG: &str = include_str!("../../../configs/fig2.json");
const FIG3_CONFIG: &str = include_str!("../../../configs/fig3.json");
const FIG4_CONFIG: &str = include_str!("../../../configs/fig4.json");

#[derive(Parser)]
#[command(
    name = "ntnmec",
    about = "Simulator and optimizer for IoMT task offloading over a UAV/HAPS/LEO network",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config overrides, e.g. --set nodes.LEO.f_max=1e10.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Schema-check a scenario config.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one experiment and write its metrics JSON.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "all")]
        variant: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a parameter sweep from a sweep config and write CSV + JSON tables.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the number of Monte-Carlo seeds.
        #[arg(long)]
        seeds: Option<usize>,
        /// Table echoed to stdout.
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare the greedy solver against the exhaustive oracle on random
    /// tiny instances and write the gap table.
    OracleCompare {
        #[arg(long, default_value_t = 4)]
        max_tasks: usize,
        #[arg(long, default_value_t = 3)]
        max_subchannels: usize,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "all")]
        variant: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Execute a shipped figure-reproduction sweep.
    Repro {
        /// One of fig2, fig3, fig4.
        figure: String,
        /// Override the number of Monte-Carlo seeds.
        #[arg(long)]
        seeds: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

enum CliError {
    Usage(String),
    Config(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::ConstraintViolation { .. } => CliError::Internal(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Run {
            scenario,
            seed,
            variant,
            common,
        } => run_cmd(&scenario, seed, &variant, &common),
        Command::Sweep {
            scenario,
            seeds,
            format,
            common,
        } => sweep_cmd(&scenario, seeds, format, &common),
        Command::OracleCompare {
            max_tasks,
            max_subchannels,
            instances,
            seed,
            variant,
            common,
        } => oracle_compare(max_tasks, max_subchannels, instances, seed, &variant, &common),
        Command::Repro {
            figure,
            seeds,
            common,
        } => repro(&figure, seeds, &common),
    }
}

fn load_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn apply_overrides(
    config: &mut serde_json::Value,
    overrides: &[String],
) -> Result<(), CliError> {
    for raw in overrides {
        let (path, value) = parse_override(raw)?;
        apply_override(config, &path, value)?;
    }
    Ok(())
}

fn parse_variant(s: &str) -> Result<Variant, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn validate(path: &Path) -> Result<(), CliError> {
    let config = load_json(path)?;
    // Sweep configs validate their embedded scenario; plain configs validate
    // directly.
    let scenario_value = match serde_json::from_value::<SweepConfig>(config.clone()) {
        Ok(sweep) => sweep.scenario,
        Err(_) => config,
    };
    scenario_from_value::<f64>(&scenario_value)?;
    println!("ok: {}", path.display());
    Ok(())
}

fn run_cmd(
    path: &Path,
    seed: Option<u64>,
    variant: &str,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let variant = parse_variant(variant)?;
    let mut config = load_json(path)?;
    apply_overrides(&mut config, &common.overrides)?;
    if let Some(seed) = seed {
        apply_override(&mut config, "seed", serde_json::Value::from(seed))?;
    }
    let scenario = scenario_from_value::<f64>(&config)?;
    let metrics = run_once(&scenario, variant, scenario.seed)?;

    let json = serde_json::to_string_pretty(&metrics).expect("serializable metrics");
    fs::create_dir_all(&common.out)?;
    let out_path = common.out.join("run.json");
    fs::write(&out_path, &json)?;
    println!("{json}");
    eprintln!("wrote {}", out_path.display());
    Ok(())
}

fn sweep_from_value(
    mut config: serde_json::Value,
    seeds: Option<usize>,
    overrides: &[String],
) -> Result<SweepConfig, CliError> {
    apply_overrides(&mut config, overrides)?;
    let mut sweep: SweepConfig = serde_json::from_value(config)
        .map_err(|e| CliError::Config(format!("sweep config: {e}")))?;
    if let Some(n) = seeds {
        sweep.sweep.n_seeds = n;
    }
    Ok(sweep)
}

fn write_sweep_artifacts(
    results: &harness::SweepResults,
    out: &Path,
    stem: &str,
    echo: Option<OutputFormat>,
) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let csv = results.to_csv_string();
    let json = results.to_json_string();
    fs::write(out.join(format!("{stem}.csv")), &csv)?;
    fs::write(out.join(format!("{stem}.json")), &json)?;
    match echo {
        Some(OutputFormat::Csv) => print!("{csv}"),
        Some(OutputFormat::Json) => println!("{json}"),
        None => {}
    }
    eprintln!(
        "wrote {} and {} ({} rows)",
        out.join(format!("{stem}.csv")).display(),
        out.join(format!("{stem}.json")).display(),
        results.rows.len()
    );
    Ok(())
}

fn sweep_cmd(
    path: &Path,
    seeds: Option<usize>,
    format: OutputFormat,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let sweep = sweep_from_value(load_json(path)?, seeds, &common.overrides)?;
    let results = harness::run_sweep(&sweep)?;
    write_sweep_artifacts(&results, &common.out, "sweep", Some(format))
}

fn oracle_compare(
    max_tasks: usize,
    max_subchannels: usize,
    instances: usize,
    seed: u64,
    variant: &str,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let destinations = match parse_variant(variant)? {
        Variant::All | Variant::NonAdaptive => restrict_destinations(DestRestriction::All),
        Variant::NoLeo => restrict_destinations(DestRestriction::NoLeo),
        Variant::NoHaps => restrict_destinations(DestRestriction::NoHaps),
    };
    let limits = OracleLimits {
        max_tasks,
        max_subchannels,
        ..Default::default()
    };

    let mut records = Vec::with_capacity(instances);
    for k in 0..instances {
        let instance_seed = harness::derive_seeds(seed, instances)[k];
        let scenario = oracle::random_tiny_scenario(instance_seed, max_tasks, max_subchannels);
        let caps = ntnmec::channel::build_capacity_table(&scenario, instance_seed)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let record = compare_record(&scenario, &caps, destinations, limits, instance_seed)?;
        records.push(record);
    }

    let mut gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = gaps[gaps.len() / 2];

    fs::create_dir_all(&common.out)?;
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record([
        "instance",
        "seed",
        "n_tasks",
        "n_subchannels",
        "greedy_feasible",
        "oracle_feasible",
        "greedy_objective",
        "oracle_objective",
        "gap",
        "search_space",
    ])
    .expect("in-memory write");
    for (k, r) in records.iter().enumerate() {
        w.write_record([
            k.to_string(),
            r.seed.to_string(),
            r.n_tasks.to_string(),
            r.n_subchannels.to_string(),
            r.greedy_feasible.to_string(),
            r.oracle_feasible.to_string(),
            r.greedy_objective.to_string(),
            r.oracle_objective.to_string(),
            r.gap.to_string(),
            r.search_space.to_string(),
        ])
        .expect("in-memory write");
    }
    let csv_text =
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv");
    let out_path = common.out.join("oracle_gap.csv");
    fs::write(&out_path, &csv_text)?;
    print!("{csv_text}");
    eprintln!(
        "wrote {} ({} instances, median gap {median:.3e})",
        out_path.display(),
        records.len()
    );
    Ok(())
}

fn compare_record(
    scenario: &ntnmec::Scenario,
    caps: &ntnmec::CapacityTable,
    destinations: ntnmec::qtcajosa::DestinationSet,
    limits: OracleLimits,
    seed: u64,
) -> Result<oracle::GapRecord, CliError> {
    oracle::compare_with_greedy(scenario, caps, destinations, limits, seed)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn repro(figure: &str, seeds: Option<usize>, common: &CommonArgs) -> Result<(), CliError> {
    let text = match figure {
        "fig2" => FIG2_CONFIG,
        "fig3" => FIG3_CONFIG,
        "fig4" => FIG4_CONFIG,
        other => {
            return Err(CliError::Usage(format!(
                "unknown figure `{other}` (expected fig2, fig3 or fig4)"
            )))
        }
    };
    let config: serde_json::Value =
        serde_json::from_str(text).expect("embedded repro config parses");
    let sweep = sweep_from_value(config, seeds, &common.overrides)?;
    let results = harness::run_sweep(&sweep)?;
    write_sweep_artifacts(&results, &common.out, figure, None)
}
