//! `engage`: replay traces, synthesize scenarios, and measure inference latency.
//!
//! Exit status is 0 on success, 2 for usage errors, 1 for data errors.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use engage_core::bench::{bench_inference, workload};
use engage_core::config::ConfigError;
use engage_core::replay::{replay, write_timeline};
use engage_core::scenario::generate_scenario;
use engage_core::trace::{parse_trace, write_trace};
use engage_core::{Catalog, ContentCache, EngineConfig, Scenario};

#[derive(Parser)]
#[command(name = "engage", version, about = "Engagement inference from behavioral telemetry")]
struct Cli {
    /// Engine configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set fusion.alpha=1.0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trace through the full pipeline and write the timeline and report.
    Replay(ReplayArgs),
    /// Generate a synthetic trace.
    Simulate(SimulateArgs),
    /// Measure per-frame inference latency on a synthetic workload.
    Bench(BenchArgs),
    /// Print the effective configuration.
    PrintConfig,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace file (JSON Lines).
    trace: PathBuf,
    /// Per-tick timeline output. Default: `<trace>.timeline.jsonl`.
    #[arg(long, value_name = "PATH")]
    timeline: Option<PathBuf>,
    /// Metrics report output (one JSON object). Default: `<trace>.report.json`.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Exhibit catalog (JSON Lines). Default: the built-in catalog.
    #[arg(long, value_name = "PATH")]
    catalog: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// `focused-reader`, `scanner`, `walker`, `runner`, or a compact spec
    /// such as `runner(2.5)` or `focused-reader(ex-01)@10,walker(1.5)@5`.
    scenario: String,
    /// Exhibit read by `focused-reader`.
    #[arg(long, default_value = "ex-01")]
    exhibit: String,
    /// Comma-separated exhibits swept by `scanner`.
    #[arg(long, value_delimiter = ',', default_value = "ex-01,ex-02,ex-03,ex-04")]
    targets: Vec<String>,
    /// Seconds per exhibit for `scanner`.
    #[arg(long, default_value_t = 0.4)]
    glance: f64,
    /// m/s for `walker` (default 1.6) or `runner` (default 2.5).
    #[arg(long)]
    velocity: Option<f64>,
    /// Seconds of trace to generate.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path. Default: standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Seconds of workload at 90 Hz.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        command => {
            let cfg = load_config(cli.config.as_deref(), &cli.set)?;
            match command {
                Command::Replay(args) => run_replay(&cfg, args),
                Command::Bench(args) => run_bench(&cfg, args),
                Command::PrintConfig => {
                    print!("# fingerprint {}\n{}", cfg.fingerprint(), cfg.to_toml());
                    Ok(())
                }
                Command::Simulate(_) => unreachable!(),
            }
        }
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<EngineConfig, Failure> {
    let result = match path {
        Some(p) => EngineConfig::load(p, overrides).map_err(|e| match e {
            ConfigError::Io(io) => ConfigError::Parse(format!("{}: {io}", p.display())),
            other => other,
        }),
        None => EngineConfig::from_toml_with_overrides("", overrides),
    };
    result.map_err(|e| match e {
        ConfigError::Override(_) => Failure::Usage(e.to_string()),
        other => Failure::Data(other.into()),
    })
}

fn scenario_from(args: &SimulateArgs) -> Result<Scenario, Failure> {
    let s = match args.scenario.as_str() {
        "focused-reader" => Scenario::FocusedReader {
            exhibit: args.exhibit.clone(),
        },
        "scanner" => Scenario::Scanner {
            targets: args.targets.clone(),
            glance: args.glance,
        },
        "walker" => Scenario::Walker {
            velocity: args.velocity.unwrap_or(1.6),
        },
        "runner" => Scenario::Runner {
            velocity: args.velocity.unwrap_or(2.5),
        },
        spec => spec.parse().map_err(|e| Failure::Usage(format!("{e}")))?,
    };
    s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(s)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let scenario = scenario_from(&args)?;
    let trace = generate_scenario(&scenario, args.duration, args.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    match &args.out {
        Some(path) => write_atomically(path, |w| Ok(write_trace(w, &trace)?))?,
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_trace(&mut w, &trace).context("writing trace")?;
            w.flush().context("writing trace")?;
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes through a temporary file in the target directory, renamed into place on success.
fn write_atomically(path: &Path, fill: impl FnOnce(&mut BufWriter<&File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_replay(cfg: &EngineConfig, args: ReplayArgs) -> Result<(), Failure> {
    let open = |p: &Path| File::open(p).map(BufReader::new).with_context(|| format!("opening {}", p.display()));
    let trace = parse_trace(open(&args.trace)?).with_context(|| format!("reading {}", args.trace.display()))?;
    let catalog = match &args.catalog {
        Some(p) => Catalog::read_jsonl(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => Catalog::builtin(),
    };
    let cache = ContentCache::new();
    if let Some(p) = cfg.cache_path.as_deref().filter(|p| p.exists()) {
        let n = cache.load(open(p)?).with_context(|| format!("reading {}", p.display()))?;
        log::info!("loaded {n} cached records from {}", p.display());
    }

    let out = replay(&trace, cfg, catalog, cache.clone()).context("replay failed")?;

    let timeline_path = args.timeline.unwrap_or_else(|| with_suffix(&args.trace, ".timeline.jsonl"));
    let report_path = args.report.unwrap_or_else(|| with_suffix(&args.trace, ".report.json"));
    write_atomically(&timeline_path, |w| Ok(write_timeline(w, &out.timeline)?))?;
    write_atomically(&report_path, |w| {
        writeln!(w, "{}", out.report.to_json_line())?;
        Ok(())
    })?;
    if let Some(p) = &cfg.cache_path {
        write_atomically(p, |w| Ok(cache.save(w).map(|_| ())?))?;
    }

    if args.json {
        println!("{}", out.report.to_json_line());
    } else {
        print!("{}", out.report.to_table());
        println!("Config fingerprint     {}", out.report.config_fingerprint);
    }
    Ok(())
}

fn run_bench(cfg: &EngineConfig, args: BenchArgs) -> Result<(), Failure> {
    if !(args.duration.is_finite() && args.duration > 0.0) {
        return Err(Failure::Usage(format!("--duration must be positive, got {}", args.duration)));
    }
    let frames = workload(args.duration, 90.0, args.seed);
    // One untimed pass warms caches and the allocator.
    bench_inference(cfg, &frames);
    let report = bench_inference(cfg, &frames);
    if args.json {
        println!("{}", report.to_json_line());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}
