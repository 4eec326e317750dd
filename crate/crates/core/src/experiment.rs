//! Experiment scenarios: a traffic configuration, a set of policies and a
//! master seed, expanded into traces and runs. Sweeps vary one parameter
//! over a grid with everything else fixed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::class::{ClassId, Regime, SelectedClass};
use crate::engine::{run_batch, BatchTable, Pairing, SimError, Summary};
use crate::knapsack::CapacityRule;
use crate::policy::{PolicyConfig, PolicyKind, PolicyName, SelectionSpec};
use crate::rng::{derive_seed, substream, Stream};
use crate::trace::Trace;
use crate::traffic::{generate_trace, TrafficConfig, TrafficConfigError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Traffic(#[from] TrafficConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Invalid(String),
}

/// Class regime requested for the class-aware policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeChoice {
    Exact,
    Closure,
    SmallSets,
    /// Keep each policy's own regime and select the class obliviously.
    Oblivious,
}

impl RegimeChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeChoice::Exact => "exact",
            RegimeChoice::Closure => "closure",
            RegimeChoice::SmallSets => "small-sets",
            RegimeChoice::Oblivious => "oblivious",
        }
    }
}

impl FromStr for RegimeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(RegimeChoice::Exact),
            "closure" => Ok(RegimeChoice::Closure),
            "small-sets" => Ok(RegimeChoice::SmallSets),
            "oblivious" => Ok(RegimeChoice::Oblivious),
            _ => Err(format!("unknown regime `{s}`")),
        }
    }
}

/// Powers of two up to `max`, the default SAM-SS value set.
pub fn powers_of_two(max: u32) -> Vec<u32> {
    std::iter::successors(Some(1u32), |x| x.checked_mul(2))
        .take_while(|&x| x <= max)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub traffic: TrafficConfig,
    pub policies: Vec<PolicyName>,
    pub buffer_size: usize,
    pub admittance: f64,
    /// Selected `(i*, j*)`; `None` draws it per run. Read as concrete
    /// `(w*, v*)` values under the small-sets regime.
    pub class: Option<(u32, u32)>,
    pub regime: Option<RegimeChoice>,
    pub small_sets: (Vec<u32>, Vec<u32>),
    pub traces: usize,
    pub seed: u64,
    pub capacity_rule: CapacityRule,
    pub per_packet_sort: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        let traffic = TrafficConfig::default();
        let small_sets = (
            powers_of_two(traffic.max_work),
            powers_of_two(traffic.max_profit),
        );
        Self {
            traffic,
            policies: vec![
                PolicyName::Fifo,
                PolicyName::Sam,
                PolicyName::SaoFifo,
                PolicyName::SaoWtv,
                PolicyName::SaoEffect,
            ],
            buffer_size: 10,
            admittance: 1.0,
            class: Some((3, 3)),
            regime: None,
            small_sets,
            traces: 100,
            seed: 0,
            capacity_rule: CapacityRule::ArrivalSpan,
            per_packet_sort: true,
        }
    }
}

impl Scenario {
    /// Seed of trace `k`; the same value seeds the runs on that trace.
    pub fn trace_seed(&self, k: usize) -> u64 {
        derive_seed(self.seed, k as u64)
    }

    pub fn trace_seeds(&self) -> Vec<u64> {
        (0..self.traces).map(|k| self.trace_seed(k)).collect()
    }

    /// Generates all traces in parallel. Trace `k` depends only on the
    /// traffic configuration and `trace_seed(k)`.
    pub fn generate_traces(&self) -> Result<Vec<Trace>, ExperimentError> {
        self.traffic.validate()?;
        self.trace_seeds()
            .into_par_iter()
            .map(|seed| {
                let cfg = TrafficConfig {
                    seed,
                    ..self.traffic.clone()
                };
                Ok(generate_trace(&cfg, &mut substream(seed, Stream::Traffic))?)
            })
            .collect()
    }

    pub fn policy_config(&self, name: PolicyName) -> PolicyConfig {
        let mut cfg = name.config(
            self.buffer_size,
            self.admittance,
            (&self.small_sets.0, &self.small_sets.1),
        );
        cfg.per_packet_sort = self.per_packet_sort;
        if cfg.kind == PolicyKind::PlainFifo {
            return cfg;
        }
        match self.regime {
            None | Some(RegimeChoice::Oblivious) => {}
            Some(RegimeChoice::Exact) => cfg.regime = Regime::Exact,
            Some(RegimeChoice::Closure) => cfg.regime = Regime::Closure,
            Some(RegimeChoice::SmallSets) => {
                cfg.regime = Regime::SmallSets {
                    work_values: self.small_sets.0.clone(),
                    profit_values: self.small_sets.1.clone(),
                }
            }
        }
        cfg.selection = if self.regime == Some(RegimeChoice::Oblivious) {
            SelectionSpec::Oblivious
        } else {
            match (self.class, &cfg.regime) {
                (None, _) => SelectionSpec::Random,
                (Some((w, v)), Regime::SmallSets { .. }) => {
                    SelectionSpec::Fixed(SelectedClass::Values { work: w, profit: v })
                }
                (Some((i, j)), _) => {
                    SelectionSpec::Fixed(SelectedClass::Indexed(ClassId::new(i, j)))
                }
            }
        };
        cfg
    }

    pub fn policy_configs(&self) -> Vec<PolicyConfig> {
        self.policies
            .iter()
            .map(|&p| self.policy_config(p))
            .collect()
    }

    /// Runs every policy on every trace, pairing trace `k` with its seed.
    pub fn run_on(&self, traces: &[Trace]) -> Result<BatchTable, ExperimentError> {
        let seeds: Vec<u64> = (0..traces.len()).map(|k| self.trace_seed(k)).collect();
        Ok(run_batch(
            traces,
            &self.policy_configs(),
            &seeds,
            Pairing::Paired,
            self.capacity_rule,
        )?)
    }

    pub fn run(&self) -> Result<BatchTable, ExperimentError> {
        self.run_on(&self.generate_traces()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    IStar,
    JStar,
    Alpha,
    Admittance,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::IStar => "i_star",
            SweepParam::JStar => "j_star",
            SweepParam::Alpha => "alpha",
            SweepParam::Admittance => "r",
        }
    }

    /// Applies one grid value to a copy of `base`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario, ExperimentError> {
        let mut s = base.clone();
        let as_class = |value: f64| {
            if value >= 1.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
                Ok(value as u32)
            } else {
                Err(ExperimentError::Invalid(format!(
                    "class index must be a positive integer, got {value}"
                )))
            }
        };
        match self {
            SweepParam::IStar => {
                let (_, j) = base.class.unwrap_or((3, 3));
                s.class = Some((as_class(value)?, j));
            }
            SweepParam::JStar => {
                let (i, _) = base.class.unwrap_or((3, 3));
                s.class = Some((i, as_class(value)?));
            }
            SweepParam::Alpha => s.traffic.alpha = value,
            SweepParam::Admittance => s.admittance = value,
        }
        Ok(s)
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i-star" | "i_star" | "i*" => Ok(SweepParam::IStar),
            "j-star" | "j_star" | "j*" => Ok(SweepParam::JStar),
            "alpha" => Ok(SweepParam::Alpha),
            "r" => Ok(SweepParam::Admittance),
            _ => Err(format!("unknown sweep parameter `{s}`")),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub scenario: Scenario,
    pub table: BatchTable,
}

impl SweepPoint {
    pub fn ratio_summary(&self) -> Vec<Summary> {
        self.table.ratio_summary()
    }
}

/// Runs `base` once per grid value. Traces are generated once and shared
/// unless the swept parameter changes the traffic; every point reuses the
/// same trace seeds.
pub fn sweep(
    base: &Scenario,
    param: SweepParam,
    grid: &[f64],
) -> Result<Vec<SweepPoint>, ExperimentError> {
    let scenarios = grid
        .iter()
        .map(|&v| param.apply(base, v).map(|s| (v, s)))
        .collect::<Result<Vec<_>, _>>()?;
    for (_, s) in &scenarios {
        s.traffic.validate()?;
        for cfg in s.policy_configs() {
            cfg.build(s.traffic.max_work, s.traffic.max_profit, 0)
                .map_err(SimError::from)?;
        }
    }
    let shared = if param == SweepParam::Alpha {
        None
    } else {
        Some(base.generate_traces()?)
    };
    scenarios
        .into_iter()
        .map(|(value, scenario)| {
            let table = match &shared {
                Some(traces) => scenario.run_on(traces)?,
                None => scenario.run()?,
            };
            Ok(SweepPoint {
                value,
                scenario,
                table,
            })
        })
        .collect()
}
