//! Cycle loop: transmission, arrival, processing, for every cycle from 0
//! through the last arrival, then transmission and processing until the
//! buffer drains.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::knapsack::{knapsack_upper_bound, performance_ratio, CapacityRule, UpperBound};
use crate::model::{CycleKind, Packet, QueueEvent, RunStats};
use crate::policy::{PolicyConfig, PolicyConfigError, QueuePolicy};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyConfigError),
    #[error("trace W={trace_w}, V={trace_v} is invalid")]
    Trace { trace_w: u32, trace_v: u32 },
}

/// Which of the three per-cycle steps is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Transmission,
    Arrival,
    Processing,
}

/// Receives every event along with the cycle and step that produced it.
pub trait Observer {
    fn on_event(&mut self, cycle: u64, step: Step, event: &QueueEvent);
}

impl Observer for () {
    fn on_event(&mut self, _: u64, _: Step, _: &QueueEvent) {}
}

impl<F: FnMut(u64, Step, &QueueEvent)> Observer for F {
    fn on_event(&mut self, cycle: u64, step: Step, event: &QueueEvent) {
        self(cycle, step, event)
    }
}

/// Runs one policy configuration over a trace. Deterministic in
/// `(trace, policy, seed)`.
pub fn run(trace: &Trace, policy: &PolicyConfig, seed: u64) -> Result<RunStats, SimError> {
    run_observed(trace, policy, seed, &mut ())
}

pub fn run_observed<O: Observer + ?Sized>(
    trace: &Trace,
    policy: &PolicyConfig,
    seed: u64,
    observer: &mut O,
) -> Result<RunStats, SimError> {
    let (w, v) = (trace.meta.max_work, trace.meta.max_profit);
    if w == 0 || v == 0 {
        return Err(SimError::Trace {
            trace_w: w,
            trace_v: v,
        });
    }
    let mut instance = policy.build(w, v, seed)?;
    Ok(drive(trace, instance.as_mut(), observer))
}

/// Drives an already-built policy through the trace.
pub fn drive<P: QueuePolicy + ?Sized, O: Observer + ?Sized>(
    trace: &Trace,
    policy: &mut P,
    observer: &mut O,
) -> RunStats {
    let mut stats = RunStats::default();
    let mut events = Vec::new();
    let mut flush = |cycle, step, events: &mut Vec<QueueEvent>, stats: &mut RunStats| {
        for event in events.drain(..) {
            stats.record_event(&event);
            observer.on_event(cycle, step, &event);
        }
    };

    let mut batches = trace.batches().iter().peekable();
    let mut next_id = 0u64;
    let mut cycle = 0u64;
    let last = trace.last_cycle();

    loop {
        policy.transmission_step(cycle, &mut events);
        flush(cycle, Step::Transmission, &mut events, &mut stats);

        let arriving = last.is_some_and(|l| cycle <= l);
        if !arriving && policy.is_empty() {
            break;
        }

        let arrivals: Vec<Packet> = match batches.next_if(|b| b.cycle == cycle) {
            Some(batch) => batch
                .packets
                .iter()
                .map(|spec| {
                    let p = Packet::new(next_id, cycle, *spec);
                    next_id += 1;
                    p
                })
                .collect(),
            None => Vec::new(),
        };
        policy.arrival_step(cycle, arrivals, &mut events);
        flush(cycle, Step::Arrival, &mut events, &mut stats);
        assert!(
            policy.len() <= policy.capacity(),
            "buffer over capacity after arrivals"
        );

        let kind = policy.processing_step(cycle, &mut events);
        flush(cycle, Step::Processing, &mut events, &mut stats);
        debug_assert!(kind != CycleKind::Idle || policy.is_empty());
        stats.record_cycle(kind);
        cycle += 1;
    }
    stats.selected_class = policy.selected_pair();
    stats
}

/// How traces, policies and seeds are combined in a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Every trace with every seed.
    Cartesian,
    /// Trace `k` with seed `k`.
    Paired,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchRow {
    pub trace_index: usize,
    pub policy_index: usize,
    pub policy: String,
    pub seed: u64,
    pub stats: RunStats,
    pub upper: UpperBound,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub policy_index: usize,
    pub policy: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BatchTable {
    /// Sorted by (trace, policy, seed).
    pub rows: Vec<BatchRow>,
}

impl BatchTable {
    /// Mean and sample standard deviation of `metric`, per policy.
    pub fn summarize(&self, metric: impl Fn(&BatchRow) -> f64) -> Vec<Summary> {
        let mut policies: Vec<(usize, &str)> = self
            .rows
            .iter()
            .map(|r| (r.policy_index, r.policy.as_str()))
            .collect();
        policies.sort_unstable();
        policies.dedup();
        policies
            .into_iter()
            .map(|(index, name)| {
                let values: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.policy_index == index)
                    .map(&metric)
                    .collect();
                let (mean, std) = mean_std(&values);
                Summary {
                    policy_index: index,
                    policy: name.to_string(),
                    n: values.len(),
                    mean,
                    std,
                }
            })
            .collect()
    }

    pub fn ratio_summary(&self) -> Vec<Summary> {
        self.summarize(|r| r.ratio)
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs every combination in parallel. Rows come back ordered by
/// (trace, policy, seed) regardless of completion order.
pub fn run_batch(
    traces: &[Trace],
    policies: &[PolicyConfig],
    seeds: &[u64],
    pairing: Pairing,
    capacity_rule: CapacityRule,
) -> Result<BatchTable, SimError> {
    for p in policies {
        p.validate()?;
    }
    let mut jobs = Vec::new();
    for (t, _) in traces.iter().enumerate() {
        let trace_seeds: Vec<u64> = match pairing {
            Pairing::Cartesian => seeds.to_vec(),
            Pairing::Paired => seeds.get(t).copied().into_iter().collect(),
        };
        for (p, _) in policies.iter().enumerate() {
            for &s in &trace_seeds {
                jobs.push((t, p, s));
            }
        }
    }
    let mut rows = jobs
        .into_par_iter()
        .map(|(t, p, seed)| {
            let (trace, policy) = (&traces[t], &policies[p]);
            let stats = run(trace, policy, seed)?;
            let upper = knapsack_upper_bound(
                trace,
                policy.buffer_size,
                trace.meta.max_profit,
                capacity_rule,
            );
            let ratio = performance_ratio(stats.throughput, upper.ub_greedy);
            Ok(BatchRow {
                trace_index: t,
                policy_index: p,
                policy: policy.name(),
                seed,
                stats,
                upper,
                ratio,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    rows.sort_by_key(|r| (r.trace_index, r.policy_index, r.seed));
    Ok(BatchTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArrivalBatch, PacketSpec};
    use crate::trace::TraceMeta;

    fn trace(batches: Vec<(u64, Vec<PacketSpec>)>) -> Trace {
        Trace::from_batches(
            TraceMeta::new(8, 8, 0),
            batches
                .into_iter()
                .map(|(cycle, packets)| ArrivalBatch { cycle, packets })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_packet_is_transmitted() {
        let t = trace(vec![(0, vec![PacketSpec::known(1, 5)])]);
        for cfg in [
            PolicyConfig::plain_fifo(2),
            PolicyConfig::sam(2, 1.0),
            PolicyConfig::sao(2, 1.0, crate::policy::SchedOrder::Effect),
        ] {
            let stats = run(&t, &cfg, 1).unwrap();
            assert_eq!(stats.throughput, 5, "{cfg}");
            assert_eq!(stats.total_cycles, 1);
        }
    }

    #[test]
    fn empty_trace_runs_no_cycles() {
        let t = trace(vec![]);
        let stats = run(&t, &PolicyConfig::plain_fifo(2), 0).unwrap();
        assert_eq!(stats, RunStats::default());
    }

    #[test]
    fn gaps_before_and_between_arrivals_are_simulated() {
        let t = trace(vec![
            (2, vec![PacketSpec::known(1, 1)]),
            (5, vec![PacketSpec::known(2, 1)]),
        ]);
        let stats = run(&t, &PolicyConfig::plain_fifo(2), 0).unwrap();
        assert_eq!(stats.total_cycles, 7);
        assert_eq!(stats.work_cycles, 3);
        assert_eq!(stats.idle_cycles, 4);
    }

    #[test]
    fn batch_rows_are_ordered_and_summarized() {
        let traces: Vec<Trace> = (0..3)
            .map(|k| trace(vec![(0, vec![PacketSpec::known(1, k + 1)])]))
            .collect();
        let policies = [PolicyConfig::plain_fifo(2), PolicyConfig::sam(2, 1.0)];
        let table = run_batch(
            &traces,
            &policies,
            &[7, 8, 9],
            Pairing::Paired,
            CapacityRule::ArrivalSpan,
        )
        .unwrap();
        assert_eq!(table.rows.len(), 6);
        let keys: Vec<_> = table
            .rows
            .iter()
            .map(|r| (r.trace_index, r.policy_index, r.seed))
            .collect();
        assert_eq!(
            keys,
            vec![
                (0, 0, 7),
                (0, 1, 7),
                (1, 0, 8),
                (1, 1, 8),
                (2, 0, 9),
                (2, 1, 9)
            ]
        );
        let summary = table.summarize(|r| r.stats.throughput as f64);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].mean, 2.0);
        assert_eq!(summary[0].std, 1.0);

        let empty = run_batch(
            &traces,
            &[],
            &[1],
            Pairing::Cartesian,
            CapacityRule::ArrivalSpan,
        )
        .unwrap();
        assert!(empty.rows.is_empty());
    }

    #[test]
    fn invalid_policy_aborts_before_simulating() {
        let t = trace(vec![(0, vec![PacketSpec::known(1, 1)])]);
        assert!(run(&t, &PolicyConfig::plain_fifo(1), 0).is_err());
        assert!(run(&t, &PolicyConfig::sam(4, 1.5), 0).is_err());
    }
}
