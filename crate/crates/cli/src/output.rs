//! CSV emission for every subcommand.

use std::io::Write;
use std::path::PathBuf;

use mistqueue::bounds::{
    adversarial_trace, check_region, lower_bound_general, p_star, subopt_expected, subopt_run,
    BoundError, BoundParams,
};
use mistqueue::engine::mean_std;
use mistqueue::{
    derive_seed, substream, BatchTable, PolicyConfig, PolicyKind, RegimeChoice, Scenario,
    SelectionSpec, Stream, SweepParam, SweepPoint, Trace,
};

use crate::{BoundsArgs, Failure};

/// A CSV writer that can also emit `#` comment lines.
pub struct Sink {
    csv: csv::Writer<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(writer: Box<dyn Write>, path: Option<PathBuf>) -> Self {
        // comment lines are single-field records
        let csv = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        Self { csv, path }
    }

    fn fail(&self, e: impl std::fmt::Display) -> Failure {
        let target = self
            .path
            .as_ref()
            .map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        Failure::Io(format!("{target}: {e}"))
    }

    pub fn record<I, T>(&mut self, fields: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.csv.write_record(fields).map_err(|e| self.fail(e))
    }

    /// `line` must not contain commas, quotes or newlines.
    pub fn comment(&mut self, line: &str) -> Result<(), Failure> {
        debug_assert!(!line.contains([',', '"', '\n']));
        self.record([format!("# {line}")])
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.csv.flush().map_err(|e| self.fail(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `0,0.5,1` or `0:1:0.25`, or a mix of both.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad grid value `{t}`"))
    };
    let mut values = Vec::new();
    for item in s.split(',').filter(|t| !t.trim().is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts[..] {
            [one] => values.push(number(one)?),
            [start, stop, step] => {
                let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
                if step.is_nan() || step <= 0.0 || stop < start {
                    return Err(format!(
                        "bad range `{item}`: need start <= stop and step > 0"
                    ));
                }
                let n = ((stop - start) / step + 1e-9).floor() as u64;
                // round away accumulated binary error, e.g. 0.30000000000000004
                values.extend((0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9));
            }
            _ => return Err(format!("bad grid item `{item}`")),
        }
    }
    if values.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(values))
}

fn regime_label(cfg: &PolicyConfig) -> &'static str {
    match (cfg.kind, &cfg.selection) {
        (PolicyKind::PlainFifo, _) => "",
        (_, SelectionSpec::Oblivious) => RegimeChoice::Oblivious.as_str(),
        _ => cfg.regime.name(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_runs(
    sink: &mut Sink,
    scenario: &Scenario,
    traces: &[Trace],
    table: &BatchTable,
) -> Result<(), Failure> {
    sink.record([
        "algorithm",
        "i_star",
        "j_star",
        "regime",
        "order",
        "alpha",
        "r",
        "B",
        "seed",
        "throughput",
        "ub_greedy",
        "ub_certified",
        "ratio",
    ])?;
    let configs = scenario.policy_configs();
    for row in &table.rows {
        let cfg = &configs[row.policy_index];
        let class = row.stats.selected_class;
        let alpha = traces[row.trace_index]
            .meta
            .generator
            .as_ref()
            .map(|g| g.alpha);
        sink.record([
            cfg.name(),
            opt(class.map(|c| c.0)),
            opt(class.map(|c| c.1)),
            regime_label(cfg).to_string(),
            cfg.order.name().to_string(),
            opt(alpha),
            cfg.admittance.to_string(),
            cfg.buffer_size.to_string(),
            row.seed.to_string(),
            row.stats.throughput.to_string(),
            row.upper.ub_greedy.to_string(),
            row.upper.ub_certified.to_string(),
            row.ratio.to_string(),
        ])?;
    }
    for s in table.ratio_summary() {
        sink.comment(&format!(
            "summary algorithm={} n={} mean_ratio={} std_ratio={}",
            s.policy, s.n, s.mean, s.std
        ))?;
    }
    Ok(())
}

pub fn write_sweep(
    sink: &mut Sink,
    param: SweepParam,
    points: &[SweepPoint],
) -> Result<(), Failure> {
    sink.record([
        "param",
        "value",
        "algorithm",
        "i_star",
        "j_star",
        "regime",
        "order",
        "alpha",
        "r",
        "B",
        "traces",
        "mean_ratio",
        "std_ratio",
        "mean_throughput",
    ])?;
    for point in points {
        let s = &point.scenario;
        let configs = s.policy_configs();
        let throughput = point.table.summarize(|r| r.stats.throughput as f64);
        for (summary, tp) in point.ratio_summary().iter().zip(&throughput) {
            let cfg = &configs[summary.policy_index];
            let class = if cfg.kind == PolicyKind::PlainFifo {
                None
            } else {
                s.class
            };
            sink.record([
                param.as_str().to_string(),
                point.value.to_string(),
                summary.policy.clone(),
                opt(class.map(|c| c.0)),
                opt(class.map(|c| c.1)),
                regime_label(cfg).to_string(),
                cfg.order.name().to_string(),
                s.traffic.alpha.to_string(),
                cfg.admittance.to_string(),
                cfg.buffer_size.to_string(),
                summary.n.to_string(),
                summary.mean.to_string(),
                summary.std.to_string(),
                tp.mean.to_string(),
            ])?;
        }
    }
    Ok(())
}

/// Returns the number of degenerate grid points left out.
pub fn write_bounds(sink: &mut Sink, args: &BoundsArgs, seed: u64) -> Result<u64, Failure> {
    let mut header = vec!["V", "W", "w", "M", "p_star", "bound", "region", "check"];
    if args.subopt_runs > 0 {
        header.extend(["subopt_mean", "subopt_se", "subopt_expected"]);
    }
    sink.record(&header)?;
    let bad = |e: BoundError| Failure::Usage(e.to_string());
    let mut skipped = 0;
    let mut point = 0u64;
    for &v in &args.v {
        for &w_max in &args.w {
            let w_mins: Vec<u32> = if args.w_min.is_empty() {
                let mut d = vec![1, w_max / 2, w_max];
                d.retain(|&w| w >= 1);
                d.dedup();
                d
            } else {
                args.w_min.iter().copied().filter(|&w| w <= w_max).collect()
            };
            for w_min in w_mins {
                for m in 1..=args.m_max {
                    let params = match BoundParams::new(v, w_max, w_min, m) {
                        Ok(p) => p,
                        Err(BoundError::Degenerate { .. }) => {
                            skipped += 1;
                            continue;
                        }
                        Err(e) => return Err(bad(e)),
                    };
                    let (region, holds) = check_region(&params).map_err(bad)?;
                    let mut fields = vec![
                        v.to_string(),
                        w_max.to_string(),
                        w_min.to_string(),
                        m.to_string(),
                        p_star(v, w_max, w_min).map_err(bad)?.to_string(),
                        lower_bound_general(&params).map_err(bad)?.to_string(),
                        region.name().to_string(),
                        holds.to_string(),
                    ];
                    if args.subopt_runs > 0 {
                        let base = derive_seed(seed, point);
                        let runs = (0..args.subopt_runs)
                            .map(|k| {
                                let mut rng = substream(derive_seed(base, k), Stream::Traffic);
                                let trace = adversarial_trace(&params, args.cycles, &mut rng)
                                    .map_err(bad)?;
                                Ok(subopt_run(&trace, &params) as f64)
                            })
                            .collect::<Result<Vec<f64>, Failure>>()?;
                        let (mean, sd) = mean_std(&runs);
                        fields.push(mean.to_string());
                        fields.push((sd / (runs.len() as f64).sqrt()).to_string());
                        fields.push(
                            subopt_expected(&params, args.cycles)
                                .map_err(bad)?
                                .to_string(),
                        );
                    }
                    sink.record(&fields)?;
                    point += 1;
                }
            }
        }
    }
    Ok(skipped)
}
