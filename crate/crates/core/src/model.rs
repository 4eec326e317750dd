//! Packets, arrival batches and per-run statistics.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::class::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("packet {0} has no remaining work to process")]
    AlreadyComplete(u64),
}

/// Characteristics of one arriving packet as recorded in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PacketSpec {
    pub work: u32,
    pub profit: u32,
    pub known: bool,
}

impl PacketSpec {
    pub fn known(work: u32, profit: u32) -> Self {
        Self {
            work,
            profit,
            known: true,
        }
    }

    pub fn unknown(work: u32, profit: u32) -> Self {
        Self {
            work,
            profit,
            known: false,
        }
    }
}

/// All packets arriving in one cycle, in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalBatch {
    pub cycle: u64,
    pub packets: Vec<PacketSpec>,
}

/// What a single processing application did to a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CycleKind {
    /// First processing of a packet that was unknown; reveals work and profit.
    Parse,
    Work,
    Idle,
}

/// A unit-size packet resident in (or offered to) a queue.
///
/// `total_work` and `profit` always hold the true characteristics; a policy
/// may only look at them once `known` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub total_work: u32,
    pub remaining_work: u32,
    pub profit: u32,
    pub known: bool,
    pub arrival_cycle: u64,
    /// Picked as the admitted unknown packet of its arrival cycle.
    pub admitted: bool,
}

impl Packet {
    pub fn new(id: u64, arrival_cycle: u64, spec: PacketSpec) -> Self {
        Self {
            id,
            total_work: spec.work,
            remaining_work: spec.work,
            profit: spec.profit,
            known: spec.known,
            arrival_cycle,
            admitted: false,
        }
    }

    /// Applies one processing cycle. The first processing of an unknown
    /// packet is its parsing cycle and leaves it known.
    pub fn apply_processing(&mut self) -> Result<CycleKind, ModelError> {
        if self.remaining_work == 0 {
            return Err(ModelError::AlreadyComplete(self.id));
        }
        self.remaining_work -= 1;
        if self.known {
            Ok(CycleKind::Work)
        } else {
            self.known = true;
            Ok(CycleKind::Parse)
        }
    }

    pub fn is_transmittable(&self) -> bool {
        self.remaining_work == 0
    }

    /// Processed at least once.
    pub fn in_service(&self) -> bool {
        self.remaining_work < self.total_work
    }
}

/// Why a packet left the system without being transmitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DropCause {
    /// Arrival was not accepted into the buffer.
    Rejected,
    /// A buffered packet was evicted to make room.
    PushedOut,
}

/// Events a policy reports to the engine while it runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueueEvent {
    Accepted {
        id: u64,
    },
    Dropped {
        packet: Packet,
        cause: DropCause,
        /// The packet was known and in the selected class when dropped.
        selected_known: bool,
    },
    Transmitted {
        packet: Packet,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub throughput: u64,
    pub transmitted_count: u64,
    pub accepted_count: u64,
    /// Rejections plus push-outs.
    pub dropped_count: u64,
    pub pushed_out_count: u64,
    pub parse_cycles: u64,
    pub work_cycles: u64,
    pub idle_cycles: u64,
    pub total_cycles: u64,
    /// Profit of transmitted packets keyed by their exact work/profit class.
    #[serde(skip)]
    pub per_class_profit: BTreeMap<ClassId, u64>,
    /// Selected class at the end of the run, `(i*, j*)` or `(w*, v*)`.
    #[serde(skip)]
    pub selected_class: Option<(u32, u32)>,
}

impl RunStats {
    pub fn record_cycle(&mut self, kind: CycleKind) {
        self.total_cycles += 1;
        match kind {
            CycleKind::Parse => self.parse_cycles += 1,
            CycleKind::Work => self.work_cycles += 1,
            CycleKind::Idle => self.idle_cycles += 1,
        }
    }

    pub fn record_event(&mut self, event: &QueueEvent) {
        match event {
            QueueEvent::Accepted { .. } => self.accepted_count += 1,
            QueueEvent::Dropped { cause, .. } => {
                self.dropped_count += 1;
                if *cause == DropCause::PushedOut {
                    self.pushed_out_count += 1;
                }
            }
            QueueEvent::Transmitted { packet } => {
                self.throughput += u64::from(packet.profit);
                self.transmitted_count += 1;
                let class = ClassId::of(packet.total_work, packet.profit);
                *self.per_class_profit.entry(class).or_default() += u64::from(packet.profit);
            }
        }
    }
}
