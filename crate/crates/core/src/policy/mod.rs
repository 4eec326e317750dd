//! Online queue-management policies.
//!
//! Every policy is driven by the engine through three hooks per cycle:
//! transmission, arrival and processing. Policies report accept, drop and
//! transmit events through an event buffer owned by the engine.

mod admission;
mod fifo;
mod managed;
mod order;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::class::{ClassError, ClassId, ClassSelector, Regime, SelectedClass};
use crate::model::{CycleKind, Packet, QueueEvent};
use crate::rng::{substream, Stream};

pub use admission::{admit_candidate, decide_admittance};
pub use fifo::PlainFifo;
pub use managed::{ManagedQueue, QueueState};
pub use order::{compare_packets, BandLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Fill,
    Flush,
}

/// Order applied inside the known-packet priority bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedOrder {
    Fifo,
    /// Increasing remaining work, ties by decreasing profit.
    WorkThenValue,
    /// Decreasing profit-to-remaining-work ratio.
    Effect,
}

impl SchedOrder {
    pub fn name(self) -> &'static str {
        match self {
            SchedOrder::Fifo => "fifo",
            SchedOrder::WorkThenValue => "w-then-v",
            SchedOrder::Effect => "effect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    PlainFifo,
    Sam,
    Sao,
    SamSs,
}

/// How the policy obtains its selected class at the start of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionSpec {
    /// Uniformly at random from the run's class-selection stream.
    Random,
    Fixed(SelectedClass),
    /// Values-oblivious reservoir over uncovered classes.
    Oblivious,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyConfigError {
    #[error("buffer size must be at least 2, got {0}")]
    BufferTooSmall(usize),
    #[error("admittance probability must lie in [0, 1], got {0}")]
    BadAdmittance(f64),
    #[error(transparent)]
    Class(#[from] ClassError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub buffer_size: usize,
    /// Probability `r` that a cycle is an admittance cycle.
    pub admittance: f64,
    pub order: SchedOrder,
    /// Accept arrivals during flush without ever serving them before the
    /// packets that made the buffer full of selected packets.
    pub pipelining: bool,
    pub regime: Regime,
    pub selection: SelectionSpec,
    /// Re-sort after every accepted packet rather than once per batch.
    pub per_packet_sort: bool,
}

impl PolicyConfig {
    pub fn plain_fifo(buffer_size: usize) -> Self {
        Self {
            kind: PolicyKind::PlainFifo,
            buffer_size,
            admittance: 0.0,
            order: SchedOrder::Fifo,
            pipelining: false,
            regime: Regime::Exact,
            selection: SelectionSpec::Random,
            per_packet_sort: true,
        }
    }

    pub fn sam(buffer_size: usize, admittance: f64) -> Self {
        Self {
            kind: PolicyKind::Sam,
            admittance,
            ..Self::plain_fifo(buffer_size)
        }
    }

    /// SAO: closure class, fill during flush and the given internal order.
    pub fn sao(buffer_size: usize, admittance: f64, order: SchedOrder) -> Self {
        Self {
            kind: PolicyKind::Sao,
            admittance,
            order,
            pipelining: true,
            regime: Regime::Closure,
            ..Self::plain_fifo(buffer_size)
        }
    }

    pub fn sam_ss(
        buffer_size: usize,
        admittance: f64,
        work_values: Vec<u32>,
        profit_values: Vec<u32>,
    ) -> Self {
        Self {
            kind: PolicyKind::SamSs,
            admittance,
            regime: Regime::SmallSets {
                work_values,
                profit_values,
            },
            ..Self::plain_fifo(buffer_size)
        }
    }

    pub fn with_class(mut self, class: ClassId) -> Self {
        self.selection = SelectionSpec::Fixed(SelectedClass::Indexed(class));
        self
    }

    pub fn with_selection(mut self, selection: SelectionSpec) -> Self {
        self.selection = selection;
        self
    }

    pub fn name(&self) -> String {
        match self.kind {
            PolicyKind::PlainFifo => "fifo".into(),
            PolicyKind::Sam => "sam".into(),
            PolicyKind::SamSs => "sam-ss".into(),
            PolicyKind::Sao => match self.order {
                SchedOrder::Fifo => "sao-fifo".into(),
                SchedOrder::WorkThenValue => "sao-wtv".into(),
                SchedOrder::Effect => "sao-effect".into(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), PolicyConfigError> {
        if self.buffer_size < 2 {
            return Err(PolicyConfigError::BufferTooSmall(self.buffer_size));
        }
        if !(0.0..=1.0).contains(&self.admittance) {
            return Err(PolicyConfigError::BadAdmittance(self.admittance));
        }
        if let SelectionSpec::Fixed(selected) = self.selection {
            ClassSelector::fixed(self.regime.clone(), selected)?;
        }
        Ok(())
    }

    /// Instantiates the policy for one run. `seed` feeds the class
    /// selection, admittance and reservoir streams.
    pub fn build(
        &self,
        max_work: u32,
        max_profit: u32,
        seed: u64,
    ) -> Result<Box<dyn QueuePolicy>, PolicyConfigError> {
        self.validate()?;
        if self.kind == PolicyKind::PlainFifo {
            return Ok(Box::new(PlainFifo::new(self.buffer_size)));
        }
        let selector = match self.selection {
            SelectionSpec::Random => ClassSelector::random(
                &mut substream(seed, Stream::ClassSelection),
                max_work,
                max_profit,
                self.regime.clone(),
            )?,
            SelectionSpec::Fixed(SelectedClass::Indexed(class)) => {
                ClassSelector::indexed(self.regime.clone(), class, max_work, max_profit)?
            }
            SelectionSpec::Fixed(selected) => ClassSelector::fixed(self.regime.clone(), selected)?,
            SelectionSpec::Oblivious => ClassSelector::oblivious(self.regime.clone()),
        };
        Ok(Box::new(ManagedQueue::new(self, selector, seed)))
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// The policy names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyName {
    Fifo,
    Sam,
    SaoFifo,
    SaoWtv,
    SaoEffect,
    SamSs,
}

impl PolicyName {
    pub const ALL: [PolicyName; 6] = [
        PolicyName::Fifo,
        PolicyName::Sam,
        PolicyName::SaoFifo,
        PolicyName::SaoWtv,
        PolicyName::SaoEffect,
        PolicyName::SamSs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Fifo => "fifo",
            PolicyName::Sam => "sam",
            PolicyName::SaoFifo => "sao-fifo",
            PolicyName::SaoWtv => "sao-wtv",
            PolicyName::SaoEffect => "sao-effect",
            PolicyName::SamSs => "sam-ss",
        }
    }

    /// Default configuration for this policy; SAM-SS gets the given value sets.
    pub fn config(
        self,
        buffer_size: usize,
        admittance: f64,
        small_sets: (&[u32], &[u32]),
    ) -> PolicyConfig {
        match self {
            PolicyName::Fifo => PolicyConfig::plain_fifo(buffer_size),
            PolicyName::Sam => PolicyConfig::sam(buffer_size, admittance),
            PolicyName::SaoFifo => PolicyConfig::sao(buffer_size, admittance, SchedOrder::Fifo),
            PolicyName::SaoWtv => {
                PolicyConfig::sao(buffer_size, admittance, SchedOrder::WorkThenValue)
            }
            PolicyName::SaoEffect => PolicyConfig::sao(buffer_size, admittance, SchedOrder::Effect),
            PolicyName::SamSs => PolicyConfig::sam_ss(
                buffer_size,
                admittance,
                small_sets.0.to_vec(),
                small_sets.1.to_vec(),
            ),
        }
    }
}

impl FromStr for PolicyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A queue-management algorithm as seen by the engine.
pub trait QueuePolicy {
    /// Removes fully processed packets.
    fn transmission_step(&mut self, cycle: u64, events: &mut Vec<QueueEvent>);

    /// Offers this cycle's arrivals, in arrival order.
    fn arrival_step(&mut self, cycle: u64, arrivals: Vec<Packet>, events: &mut Vec<QueueEvent>);

    /// Processes at most one packet.
    fn processing_step(&mut self, cycle: u64, events: &mut Vec<QueueEvent>) -> CycleKind;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn capacity(&self) -> usize;

    /// Current selected class as `(i*, j*)` or `(w*, v*)`, if any.
    fn selected_pair(&self) -> Option<(u32, u32)> {
        None
    }
}
