mod config;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use streamhm::bounds::{hoeffding_epsilon, BoundQuery};
use streamhm::harness::{compare, run, write_compare_csv, InputSource, RunConfig};
use streamhm::net::{merge_logs, read_line_file, write_line_file, MergeSpec, OnDecodeError, StreamServer, StreamSourceConfig};
use streamhm::online::AlphaSteps;
use streamhm::synth::{generate, ProcessSpec, StreamPlan};
use streamhm::{Codec, MinerKind};

use config::FileConfig;

#[derive(Parser)]
#[command(name = "streamhm", version, about = "Streaming Heuristics Miner toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic log from a plan (or a single spec) in the line codec.
    Generate(GenerateArgs),
    /// Concatenate logs, optionally overlapping consecutive segments.
    Merge(MergeArgs),
    /// Replay a log over TCP to every client that connects.
    Serve(ServeArgs),
    /// Mine a stream with one miner and write the run artifacts.
    Mine(Box<MineArgs>),
    /// Mean and variance of fitness and precision across run directories.
    Compare(CompareArgs),
    /// Hoeffding error bounds of the online measures.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Stream plan in JSON.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    plan: Option<PathBuf>,
    /// Process spec in JSON, used as a single-segment plan.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 10)]
    max_concurrent: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    /// Logs in segment order.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Overlap fraction; give once for every boundary or once per boundary.
    #[arg(long, default_value = "0")]
    overlap: Vec<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7373")]
    addr: String,
    #[arg(long, default_value = "line")]
    codec: Codec,
    /// Pause before each event, in milliseconds.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Replay the log endlessly.
    #[arg(long = "loop")]
    looping: bool,
    /// Exit after serving this many clients.
    #[arg(long)]
    max_clients: Option<usize>,
}

#[derive(Args)]
struct MineArgs {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// reset, window, online, aging, self_adapting or lossy.
    #[arg(long)]
    miner: Option<MinerKind>,
    /// Line- or XES-encoded log file.
    #[arg(long, conflicts_with = "connect")]
    input: Option<PathBuf>,
    /// host:port of a stream source.
    #[arg(long)]
    connect: Option<String>,
    #[arg(long)]
    codec: Option<Codec>,
    #[arg(long, env = "STREAMHM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Size of each online queue.
    #[arg(long)]
    queue_size: Option<usize>,
    /// Leave the online queues unbounded.
    #[arg(long)]
    unbounded: bool,
    /// Buffer size of the reset and window miners.
    #[arg(long)]
    window_size: Option<usize>,
    /// Aging factor; starting value for self_adapting.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    step_down: Option<f64>,
    #[arg(long)]
    step_up: Option<f64>,
    /// Fitness drop that counts as a drift for self_adapting.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Lossy Counting error bound.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Events between two model generations.
    #[arg(long)]
    mine_every: Option<u64>,
    /// Events in the evaluation window.
    #[arg(long)]
    eval_window: Option<usize>,
    #[arg(long)]
    dependency: Option<f64>,
    #[arg(long)]
    and_threshold: Option<f64>,
    /// Write a DOT snapshot every this many mining runs (0 disables).
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Leave timings out so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,
    /// Skip undecodable events instead of stopping.
    #[arg(long)]
    skip_bad_events: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output CSV; standard output when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Number of observed cases.
    #[arg(long)]
    nc: f64,
    /// Range of the variables, for a bare epsilon.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    range: Option<f64>,
    /// Loop-free process spec giving the trace distribution.
    #[arg(long, requires = "pair")]
    spec: Option<PathBuf>,
    /// Activities a and b of the dependency measure a => b.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pair: Vec<String>,
    /// Third activity c for the AND measure a => (b AND c).
    #[arg(long, requires = "pair")]
    and: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Mine(a) => cmd_mine(*a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bounds(a) => cmd_bounds(a),
    }
}

fn read_json(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let plan = match (&args.plan, &args.spec) {
        (Some(path), _) => StreamPlan::from_json(&read_json(path)?)?,
        (None, Some(path)) => {
            let plan = StreamPlan::single(
                ProcessSpec::from_json(&read_json(path)?)?,
                args.cases,
                args.max_concurrent,
                args.seed,
            );
            plan.validate()?;
            plan
        }
        (None, None) => bail!("either --plan or --spec is required"),
    };
    let events = generate(&plan)?;
    match args.out {
        Some(path) => write_line_file(&path, &events)?,
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            streamhm::net::write_events(&mut out, &events, Codec::Line)?;
            out.flush()?;
        }
    }
    log::info!("generated {} events", events.len());
    Ok(())
}

fn cmd_merge(args: MergeArgs) -> Result<()> {
    let segments = args
        .logs
        .iter()
        .map(|p| read_line_file(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let merged = merge_logs(&MergeSpec {
        segments,
        overlap: args.overlap,
    })?;
    write_line_file(&args.out, &merged)?;
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let log = read_line_file(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    let config = StreamSourceConfig {
        address: args.addr,
        codec: args.codec,
        inter_event_delay: Duration::from_millis(args.delay_ms),
        looping: args.looping,
        max_clients: args.max_clients,
    };
    let server = StreamServer::bind(config.clone()).with_context(|| format!("binding {}", config.address))?;
    eprintln!("serving {} events on {}", log.len(), server.local_addr()?);
    server.serve(&log)?;
    Ok(())
}

fn build_run_config(args: MineArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let miner = match (args.miner, &file.miner) {
        (Some(m), _) => m,
        (None, Some(name)) => name.parse()?,
        (None, None) => bail!("--miner is required (or `miner` in the config file)"),
    };
    let input = match (args.input, args.connect, file.input, file.connect) {
        (Some(path), None, ..) => InputSource::File(path),
        (None, Some(addr), ..) => InputSource::Network(addr),
        (None, None, Some(path), None) => InputSource::File(path),
        (None, None, None, Some(addr)) => InputSource::Network(addr),
        (None, None, Some(_), Some(_)) => bail!("config file sets both input and connect"),
        _ => bail!("exactly one of --input or --connect is required"),
    };
    let out_dir = args.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("runs"));
    let mut cfg = RunConfig::new(miner, input, out_dir);

    if let Some(codec) = args.codec.or(file.codec.as_deref().map(str::parse).transpose()?) {
        cfg.codec = codec;
    }
    if args.unbounded {
        cfg.queue_size = None;
    } else if let Some(q) = args.queue_size {
        cfg.queue_size = Some(q);
    } else if file.unbounded == Some(true) {
        cfg.queue_size = None;
    } else if let Some(q) = file.queue_size {
        cfg.queue_size = Some(q);
    }
    macro_rules! pick {
        ($field:ident => $target:expr) => {
            if let Some(v) = args.$field.or(file.$field) {
                $target = v;
            }
        };
    }
    pick!(window_size => cfg.window_size);
    pick!(alpha => cfg.alpha);
    pick!(epsilon => cfg.epsilon);
    pick!(mine_every => cfg.mine_every);
    pick!(eval_window => cfg.eval_window);
    pick!(dependency => cfg.thresholds.dependency);
    pick!(and_threshold => cfg.thresholds.and_threshold);
    pick!(snapshot_every => cfg.snapshot_every);
    let defaults = AlphaSteps::default();
    cfg.steps = AlphaSteps {
        step_down: args.step_down.or(file.step_down).unwrap_or(defaults.step_down),
        step_up: args.step_up.or(file.step_up).unwrap_or(defaults.step_up),
        tolerance: args.tolerance.or(file.tolerance).unwrap_or(defaults.tolerance),
    };
    if args.no_timing || file.no_timing.unwrap_or(false) {
        cfg.timing = false;
    }
    if args.skip_bad_events || file.skip_bad_events.unwrap_or(false) {
        cfg.on_decode_error = OnDecodeError::Skip;
    }
    Ok(cfg)
}

fn cmd_mine(args: MineArgs) -> Result<()> {
    let cfg = build_run_config(args)?;
    let summary = run(&cfg)?;
    eprintln!(
        "{}: {} events, {} models, peak {} entries, {:.0} events/s -> {}",
        summary.miner,
        summary.events,
        summary.mining_runs,
        summary.peak_retained_entries,
        summary.events_per_sec,
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let rows = compare(&args.runs)?;
    match args.out {
        Some(path) => write_compare_csv(&rows, fs::File::create(&path)?)?,
        None => write_compare_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let mut out = io::stdout().lock();
    if let Some(range) = args.range {
        BoundQuery::new(args.delta, args.nc)?;
        writeln!(out, "epsilon={:.6}", hoeffding_epsilon(range, args.delta, args.nc))?;
        return Ok(());
    }
    let spec_path = args.spec.expect("clap requires --spec without --range");
    let spec = ProcessSpec::from_json(&read_json(&spec_path)?)?;
    let Some(traces) = spec.trace_distribution() else {
        bail!("bounds need a loop-free spec");
    };
    let query = BoundQuery::from_traces(args.delta, args.nc, &traces)?;
    let (a, b) = (&args.pair[0], &args.pair[1]);
    let dep = query.dependency_bounds(a, b)?;
    writeln!(
        out,
        "dependency {a}=>{b}: limit={:.6} epsilon={:.6} lower={:.6} upper={:.6}",
        query.dependency_limit(a, b),
        query.epsilon_pair(a, b),
        dep.lower,
        dep.upper
    )?;
    if let Some(c) = &args.and {
        let and = query.and_bounds(a, b, c)?;
        writeln!(
            out,
            "and {a}=>({b}^{c}): limit={:.6} epsilon_x={:.6} epsilon_y={:.6} lower={:.6} upper={:.6}",
            query.and_limit(a, b, c),
            query.epsilon_pair(b, c),
            query.epsilon_triple(a, b, c),
            and.lower,
            and.upper
        )?;
    }
    Ok(())
}
