//! `mistqueue` command line: trace generation, batch runs, one-parameter
//! sweeps and lower-bound grids, all emitting CSV.
//!
//! Exit codes: 0 on success, 2 for bad flags or values, 3 for I/O errors.

mod config;
mod output;

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mistqueue::experiment::powers_of_two;
use mistqueue::{
    read_trace, sweep, write_trace, PolicyName, RegimeChoice, Scenario, SweepParam, Trace,
    TraceError, TrafficConfig,
};

use crate::output::Sink;

const SEED_ENV: &str = "MISTQUEUE_SEED";

#[derive(Debug)]
pub enum Failure {
    /// Bad flag, value or input content.
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn io_failure(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(
    name = "mistqueue",
    version,
    about = "Queue management with unknown packet characteristics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write generated traces to a directory and print a manifest.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Run policies over traces and emit one CSV row per run.
    #[command(args_override_self = true)]
    Run(RunArgs),
    /// Vary one parameter over a grid and emit per-policy summaries.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Evaluate the lower bound on a parameter grid.
    #[command(args_override_self = true)]
    Bounds(BoundsArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed; falls back to MISTQUEUE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of `key=value` lines naming long flags; flags given on the
    /// command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn seed(&self) -> Result<u64, Failure> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("{SEED_ENV} is not a u64: `{v}`"))),
            Err(_) => Ok(0),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct TrafficArgs {
    /// Maximum work per packet (power of two).
    #[arg(long = "W", default_value_t = 256)]
    w: u32,
    /// Maximum profit per packet (power of two).
    #[arg(long = "V", default_value_t = 16)]
    v: u32,
    /// Probability that a packet arrives unknown.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Packets per trace.
    #[arg(long, default_value_t = 10_000)]
    packets: usize,
    /// Number of traces.
    #[arg(long, default_value_t = 100)]
    traces: usize,
}

impl TrafficArgs {
    fn config(&self) -> TrafficConfig {
        TrafficConfig {
            max_profit: self.v,
            alpha: self.alpha,
            total_packets: self.packets,
            ..TrafficConfig::with_max_work(self.w)
        }
    }
}

#[derive(Args, Debug, Clone)]
struct PolicyArgs {
    /// Comma-separated list of policies.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "fifo,sam,sao-fifo,sao-wtv,sao-effect"
    )]
    policy: Vec<PolicyName>,
    /// Buffer size.
    #[arg(long = "B", default_value_t = 10)]
    b: usize,
    /// Admittance probability.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Selected work class (a work value under small-sets).
    #[arg(long)]
    i_star: Option<u32>,
    /// Selected profit class (a profit value under small-sets).
    #[arg(long)]
    j_star: Option<u32>,
    /// exact, closure, small-sets or oblivious; each policy's own by default.
    #[arg(long)]
    regime: Option<RegimeChoice>,
    /// Sort the buffer once per arrival batch instead of after every packet.
    #[arg(long)]
    batch_sort: bool,
}

impl PolicyArgs {
    fn scenario(
        &self,
        traffic: &TrafficArgs,
        seed: u64,
        default_class: Option<(u32, u32)>,
    ) -> Scenario {
        let tc = traffic.config();
        let class = match (self.i_star, self.j_star) {
            (None, None) => default_class,
            (i, j) => Some((i.unwrap_or(3), j.unwrap_or(3))),
        };
        Scenario {
            small_sets: (powers_of_two(tc.max_work), powers_of_two(tc.max_profit)),
            traffic: tc,
            policies: self.policy.clone(),
            buffer_size: self.b,
            admittance: self.r,
            class,
            regime: self.regime,
            traces: traffic.traces,
            seed,
            per_packet_sort: !self.batch_sort,
            ..Scenario::default()
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    traffic: TrafficArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    traffic: TrafficArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Trace files to run on instead of generating traces.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    input: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    traffic: TrafficArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// i-star, j-star, alpha or r.
    #[arg(long)]
    sweep: SweepParam,
    /// Comma-separated values; `start:stop:step` expands to an inclusive range.
    #[arg(long, value_parser = output::parse_grid)]
    grid: output::Grid,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Maximum profits to evaluate.
    #[arg(long = "V", value_delimiter = ',', default_value = "1,2,4,8,16")]
    v: Vec<u32>,
    /// Maximum works to evaluate.
    #[arg(
        long = "W",
        value_delimiter = ',',
        default_value = "2,4,8,16,32,64,128,256"
    )]
    w: Vec<u32>,
    /// Minimum works; defaults to 1, W/2 and W for each W.
    #[arg(long = "w-min", value_delimiter = ',')]
    w_min: Vec<u32>,
    /// Arrivals per cycle are evaluated for 1..=M-max.
    #[arg(long = "M-max", default_value_t = 64)]
    m_max: u32,
    /// Adversarial traces per grid point for a SubOPT check; 0 skips it.
    #[arg(long, default_value_t = 0)]
    subopt_runs: u64,
    /// Arrival cycles per adversarial trace.
    #[arg(long, default_value_t = 10_000)]
    cycles: u64,
    #[command(flatten)]
    common: Common,
}

fn open_sink(out: &Option<PathBuf>) -> Result<Sink, Failure> {
    let writer: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| io_failure(path, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    Ok(Sink::new(writer, out.clone()))
}

fn load_trace(path: &Path) -> Result<Trace, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    read_trace(BufReader::new(file)).map_err(|e| match e {
        TraceError::Io(e) => io_failure(path, e),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let seed = args.common.seed()?;
    let dir = args
        .common
        .out
        .clone()
        .ok_or_else(|| Failure::Usage("generate needs --out <directory>".into()))?;
    let scenario = Scenario {
        traffic: args.traffic.config(),
        traces: args.traffic.traces,
        seed,
        ..Scenario::default()
    };
    let traces = scenario.generate_traces().map_err(usage)?;
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let mut manifest = Sink::new(Box::new(BufWriter::new(io::stdout().lock())), None);
    manifest.record(["path", "seed", "packets", "last_cycle"])?;
    for (k, trace) in traces.iter().enumerate() {
        let path = dir.join(format!("trace-{k:04}.txt"));
        let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
        write_trace(trace, BufWriter::new(file)).map_err(|e| io_failure(&path, e))?;
        manifest.record([
            path.display().to_string(),
            trace.meta.seed.to_string(),
            trace.packet_count().to_string(),
            trace
                .last_cycle()
                .map_or_else(String::new, |c| c.to_string()),
        ])?;
    }
    manifest.finish()
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let seed = args.common.seed()?;
    let mut scenario = args.policy.scenario(&args.traffic, seed, None);
    // fail on bad policy flags before spending time on traces
    for cfg in scenario.policy_configs() {
        cfg.validate().map_err(usage)?;
    }
    let traces = if args.input.is_empty() {
        scenario.generate_traces().map_err(usage)?
    } else {
        let traces = args
            .input
            .iter()
            .map(|p| load_trace(p))
            .collect::<Result<Vec<_>, _>>()?;
        scenario.traces = traces.len();
        traces
    };
    let table = scenario.run_on(&traces).map_err(usage)?;
    let mut sink = open_sink(&args.common.out)?;
    output::write_runs(&mut sink, &scenario, &traces, &table)?;
    sink.finish()
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let seed = args.common.seed()?;
    let base = args.policy.scenario(&args.traffic, seed, Some((3, 3)));
    let points = sweep(&base, args.sweep, &args.grid.0).map_err(usage)?;
    let mut sink = open_sink(&args.common.out)?;
    output::write_sweep(&mut sink, args.sweep, &points)?;
    sink.finish()
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Failure> {
    let seed = args.common.seed()?;
    let mut sink = open_sink(&args.common.out)?;
    let skipped = output::write_bounds(&mut sink, &args, seed)?;
    sink.finish()?;
    if skipped > 0 {
        eprintln!("skipped {skipped} degenerate grid points (V = 1 with w = W)");
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let result = config::expand(args).and_then(|args| {
        let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
        match cli.command {
            Command::Generate(a) => cmd_generate(a),
            Command::Run(a) => cmd_run(a),
            Command::Sweep(a) => cmd_sweep(a),
            Command::Bounds(a) => cmd_bounds(a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mistqueue: {f}");
            ExitCode::from(f.code())
        }
    }
}
