//! Arrival traces and their line-oriented text format.
//!
//! ```text
//! #mistqueue-trace v1 W=256 V=16 seed=7
//! #gen lambda_high=10 lambda_low=0.5 ...        (optional)
//! 0    3    12:4:K,8:1:U,40:2:K
//! 5    1    9:16:U
//! ```
//!
//! Cycle lines are tab-separated: cycle, packet count, packets. Only
//! non-empty cycles are written. Each packet is `work:profit:K|U`.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::model::{ArrivalBatch, PacketSpec};
use crate::traffic::{ParetoParams, TrafficConfig};

const HEADER_TAG: &str = "#mistqueue-trace";
const VERSION: &str = "v1";
const GEN_TAG: &str = "#gen";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid trace: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub max_work: u32,
    pub max_profit: u32,
    pub seed: u64,
    /// Parameters of the generator that produced the trace, if any.
    pub generator: Option<TrafficConfig>,
}

impl TraceMeta {
    pub fn new(max_work: u32, max_profit: u32, seed: u64) -> Self {
        Self {
            max_work,
            max_profit,
            seed,
            generator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    batches: Vec<ArrivalBatch>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            batches: Vec::new(),
        }
    }

    /// Builds a trace from batches, validating ordering and value ranges.
    /// Empty batches are dropped since the file format cannot carry them.
    pub fn from_batches(meta: TraceMeta, batches: Vec<ArrivalBatch>) -> Result<Self, TraceError> {
        let mut trace = Self::new(meta);
        for batch in batches {
            trace.push_batch(batch)?;
        }
        Ok(trace)
    }

    pub fn push_batch(&mut self, batch: ArrivalBatch) -> Result<(), TraceError> {
        if let Some(last) = self.batches.last() {
            if batch.cycle <= last.cycle {
                return Err(TraceError::Invalid(format!(
                    "cycle {} does not follow cycle {}",
                    batch.cycle, last.cycle
                )));
            }
        }
        for spec in &batch.packets {
            self.check_range(spec).map_err(TraceError::Invalid)?;
        }
        if !batch.packets.is_empty() {
            self.batches.push(batch);
        }
        Ok(())
    }

    fn check_range(&self, spec: &PacketSpec) -> Result<(), String> {
        if spec.work == 0 || spec.work > self.meta.max_work {
            return Err(format!(
                "work {} outside [1, {}]",
                spec.work, self.meta.max_work
            ));
        }
        if spec.profit == 0 || spec.profit > self.meta.max_profit {
            return Err(format!(
                "profit {} outside [1, {}]",
                spec.profit, self.meta.max_profit
            ));
        }
        Ok(())
    }

    pub fn batches(&self) -> &[ArrivalBatch] {
        &self.batches
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn packet_count(&self) -> usize {
        self.batches.iter().map(|b| b.packets.len()).sum()
    }

    pub fn first_cycle(&self) -> Option<u64> {
        self.batches.first().map(|b| b.cycle)
    }

    pub fn last_cycle(&self) -> Option<u64> {
        self.batches.last().map(|b| b.cycle)
    }

    /// All packets in trace order with their arrival cycle.
    pub fn packets(&self) -> impl Iterator<Item = (u64, &PacketSpec)> {
        self.batches
            .iter()
            .flat_map(|b| b.packets.iter().map(move |p| (b.cycle, p)))
    }
}

pub fn write_trace<W: Write>(trace: &Trace, mut sink: W) -> io::Result<()> {
    let meta = &trace.meta;
    writeln!(
        sink,
        "{HEADER_TAG} {VERSION} W={} V={} seed={}",
        meta.max_work, meta.max_profit, meta.seed
    )?;
    if let Some(cfg) = &meta.generator {
        writeln!(
            sink,
            "{GEN_TAG} lambda_high={} lambda_low={} mean_high_duration={} duration_ratio={} \
             alpha={} work_shape={} work_scale={} profit_shape={} profit_scale={} total_packets={}",
            cfg.lambda_high,
            cfg.lambda_low,
            cfg.mean_high_duration,
            cfg.duration_ratio,
            cfg.alpha,
            cfg.pareto_work.shape,
            cfg.pareto_work.scale,
            cfg.pareto_profit.shape,
            cfg.pareto_profit.scale,
            cfg.total_packets,
        )?;
    }
    let mut line = String::new();
    for batch in trace.batches() {
        line.clear();
        for (k, p) in batch.packets.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            let tag = if p.known { 'K' } else { 'U' };
            line.push_str(&format!("{}:{}:{}", p.work, p.profit, tag));
        }
        writeln!(sink, "{}\t{}\t{}", batch.cycle, batch.packets.len(), line)?;
    }
    sink.flush()
}

pub fn read_trace<R: BufRead>(source: R) -> Result<Trace, TraceError> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let meta = parse_header(&header?)?;
    let mut trace = Trace::new(meta);

    for (lineno, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix(GEN_TAG) {
            if trace.meta.generator.is_some() || !trace.is_empty() {
                return Err(parse_err(
                    lineno,
                    "generator line must directly follow the header",
                ));
            }
            let cfg = parse_generator(rest, &trace.meta).map_err(|m| parse_err(lineno, m))?;
            trace.meta.generator = Some(cfg);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let batch = parse_batch(&line).map_err(|m| parse_err(lineno, m))?;
        for spec in &batch.packets {
            trace.check_range(spec).map_err(|m| parse_err(lineno, m))?;
        }
        if batch.packets.is_empty() {
            return Err(parse_err(lineno, "cycle line with no packets"));
        }
        trace
            .push_batch(batch)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
    }
    Ok(trace)
}

fn parse_header(line: &str) -> Result<TraceMeta, TraceError> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some(HEADER_TAG) || fields.next() != Some(VERSION) {
        return Err(parse_err(
            1,
            format!("expected `{HEADER_TAG} {VERSION}` header"),
        ));
    }
    let mut w = None;
    let mut v = None;
    let mut seed = None;
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("malformed header field `{field}`")))?;
        let bad = |_| parse_err(1, format!("bad value for {key}: `{value}`"));
        match key {
            "W" => w = Some(value.parse::<u32>().map_err(bad)?),
            "V" => v = Some(value.parse::<u32>().map_err(bad)?),
            "seed" => seed = Some(value.parse::<u64>().map_err(bad)?),
            _ => return Err(parse_err(1, format!("unknown header field `{key}`"))),
        }
    }
    match (w, v, seed) {
        (Some(w), Some(v), Some(seed)) if w >= 1 && v >= 1 => Ok(TraceMeta::new(w, v, seed)),
        (Some(_), Some(_), Some(_)) => Err(parse_err(1, "W and V must be at least 1")),
        _ => Err(parse_err(1, "header needs W, V and seed")),
    }
}

fn parse_generator(rest: &str, meta: &TraceMeta) -> Result<TrafficConfig, String> {
    let mut cfg = TrafficConfig {
        max_work: meta.max_work,
        max_profit: meta.max_profit,
        seed: meta.seed,
        ..TrafficConfig::default()
    };
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed generator field `{field}`"))?;
        let real = || {
            value
                .parse::<f64>()
                .map_err(|_| format!("bad value for {key}: `{value}`"))
        };
        match key {
            "lambda_high" => cfg.lambda_high = real()?,
            "lambda_low" => cfg.lambda_low = real()?,
            "mean_high_duration" => cfg.mean_high_duration = real()?,
            "duration_ratio" => cfg.duration_ratio = real()?,
            "alpha" => cfg.alpha = real()?,
            "work_shape" => {
                cfg.pareto_work = ParetoParams {
                    shape: real()?,
                    ..cfg.pareto_work
                }
            }
            "work_scale" => {
                cfg.pareto_work = ParetoParams {
                    scale: real()?,
                    ..cfg.pareto_work
                }
            }
            "profit_shape" => {
                cfg.pareto_profit = ParetoParams {
                    shape: real()?,
                    ..cfg.pareto_profit
                }
            }
            "profit_scale" => {
                cfg.pareto_profit = ParetoParams {
                    scale: real()?,
                    ..cfg.pareto_profit
                }
            }
            "total_packets" => {
                cfg.total_packets = value
                    .parse()
                    .map_err(|_| format!("bad value for {key}: `{value}`"))?
            }
            _ => return Err(format!("unknown generator field `{key}`")),
        }
    }
    Ok(cfg)
}

fn parse_batch(line: &str) -> Result<ArrivalBatch, String> {
    let mut cols = line.split('\t');
    let (Some(cycle), Some(count), Some(list), None) =
        (cols.next(), cols.next(), cols.next(), cols.next())
    else {
        return Err("expected `<cycle>\\t<n>\\t<packets>`".into());
    };
    let cycle: u64 = cycle.parse().map_err(|_| format!("bad cycle `{cycle}`"))?;
    let count: usize = count
        .parse()
        .map_err(|_| format!("bad packet count `{count}`"))?;
    let packets = list
        .split(',')
        .map(parse_packet)
        .collect::<Result<Vec<_>, _>>()?;
    if packets.len() != count {
        return Err(format!(
            "declared {count} packets but found {}",
            packets.len()
        ));
    }
    Ok(ArrivalBatch { cycle, packets })
}

fn parse_packet(item: &str) -> Result<PacketSpec, String> {
    let mut parts = item.split(':');
    let (Some(w), Some(v), Some(tag), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(format!("malformed packet `{item}`"));
    };
    let work = w.parse().map_err(|_| format!("bad work in `{item}`"))?;
    let profit = v.parse().map_err(|_| format!("bad profit in `{item}`"))?;
    let known = match tag {
        "K" => true,
        "U" => false,
        _ => return Err(format!("bad known flag in `{item}`")),
    };
    Ok(PacketSpec {
        work,
        profit,
        known,
    })
}
