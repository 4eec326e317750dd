//! The speculatively-admitting queue: SAM, its small-sets variant and the
//! SAO flavors share this implementation and differ only in configuration.
//!
//! Per cycle, after transmission:
//! - arrival: update the phase, draw the admittance decision, then offer
//!   arrivals one by one while the phase allows it. A packet is accepted if
//!   there is room; into a full buffer only if it is a known selected packet
//!   or the reservoir picked it, evicting the tail. Phase and order are
//!   refreshed after every offer.
//! - processing: in fill, the admitted packet (if any) is moved to the
//!   head and parsed; otherwise the head is processed.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use super::admission::{admit_candidate, decide_admittance};
use super::order::{compare_packets, BandLayout};
use super::{Phase, PolicyConfig, PolicyKind, QueuePolicy, SchedOrder};
use crate::class::ClassSelector;
use crate::model::{CycleKind, DropCause, Packet, QueueEvent};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueState {
    /// Priority order, head first.
    pub buffer: Vec<Packet>,
    pub phase: Phase,
    /// This cycle's admitted unknown packet.
    pub admitted_slot: Option<u64>,
    /// Packets present when the buffer last became full of selected
    /// packets; only used with pipelining.
    pub flush_barrier: BTreeSet<u64>,
    /// Unknown arrivals offered so far this cycle (reservoir denominator).
    pub u_seen_this_cycle: u32,
}

impl Default for QueueState {
    fn default() -> Self {
        Self {
            buffer: Vec::new(),
            phase: Phase::Fill,
            admitted_slot: None,
            flush_barrier: BTreeSet::new(),
            u_seen_this_cycle: 0,
        }
    }
}

pub struct ManagedQueue {
    state: QueueState,
    selector: ClassSelector,
    capacity: usize,
    admittance: f64,
    layout: BandLayout,
    order: SchedOrder,
    pipelining: bool,
    per_packet_sort: bool,
    admittance_rng: ChaCha8Rng,
    reservoir_rng: ChaCha8Rng,
    oblivious_rng: ChaCha8Rng,
}

impl ManagedQueue {
    pub fn new(cfg: &PolicyConfig, selector: ClassSelector, seed: u64) -> Self {
        let layout = match cfg.kind {
            PolicyKind::Sao => BandLayout::KnownThenUnknown,
            _ => BandLayout::SelectedFirst,
        };
        let order = if layout == BandLayout::SelectedFirst {
            SchedOrder::Fifo
        } else {
            cfg.order
        };
        Self {
            state: QueueState::default(),
            selector,
            capacity: cfg.buffer_size,
            admittance: cfg.admittance,
            layout,
            order,
            pipelining: cfg.pipelining,
            per_packet_sort: cfg.per_packet_sort,
            admittance_rng: substream(seed, Stream::Admittance),
            reservoir_rng: substream(seed, Stream::Reservoir),
            oblivious_rng: substream(seed, Stream::Oblivious),
        }
    }

    pub fn state(&self) -> &QueueState {
        &self.state
    }

    /// Replaces the queue state; for setting up scenarios in tests.
    pub fn set_state(&mut self, state: QueueState) {
        self.state = state;
    }

    pub fn selector(&self) -> &ClassSelector {
        &self.selector
    }

    fn is_selected_known(&self, p: &Packet) -> bool {
        p.known && self.selector.is_selected(p)
    }

    /// Every slot holds a known packet of the selected class.
    pub fn is_hfull(&self) -> bool {
        self.state.buffer.len() == self.capacity
            && self.state.buffer.iter().all(|p| self.is_selected_known(p))
    }

    pub fn update_phase(&mut self) -> Phase {
        if self.state.buffer.is_empty() {
            self.state.phase = Phase::Fill;
            self.state.flush_barrier.clear();
            return Phase::Fill;
        }
        if self.pipelining {
            if self.state.phase == Phase::Flush && self.state.flush_barrier.is_empty() {
                self.state.phase = Phase::Fill;
            }
            if self.state.phase == Phase::Fill && self.is_hfull() {
                self.state.phase = Phase::Flush;
                self.state.flush_barrier = self.state.buffer.iter().map(|p| p.id).collect();
            }
        } else if self.is_hfull() {
            self.state.phase = Phase::Flush;
        }
        self.state.phase
    }

    pub fn sort_buffer(&mut self) {
        let (selector, layout, order) = (&self.selector, self.layout, self.order);
        self.state
            .buffer
            .sort_by(|a, b| compare_packets(a, b, selector, layout, order));
    }

    /// Lowest-priority packet that may be pushed out: never a known selected
    /// packet nor a barrier packet. This cycle's admitted packet is spared
    /// unless nothing else qualifies.
    fn eviction_victim(&self) -> Option<usize> {
        let eligible =
            |p: &Packet| !self.is_selected_known(p) && !self.state.flush_barrier.contains(&p.id);
        let buffer = &self.state.buffer;
        let admitted = self.state.admitted_slot;
        (0..buffer.len())
            .rev()
            .find(|&i| eligible(&buffer[i]) && Some(buffer[i].id) != admitted)
            .or_else(|| (0..buffer.len()).rev().find(|&i| eligible(&buffer[i])))
    }

    fn uncover(&mut self, work: u32, profit: u32) {
        if self.selector.is_oblivious() {
            let key = self.selector.class_key(work, profit);
            if self.selector.uncover(key, &mut self.oblivious_rng) {
                self.sort_buffer();
            }
        }
    }

    fn accepts_arrivals(&self) -> bool {
        self.state.phase == Phase::Fill || self.pipelining
    }

    fn offer(&mut self, mut packet: Packet, admittance: bool, events: &mut Vec<QueueEvent>) {
        if packet.known {
            self.uncover(packet.total_work, packet.profit);
        }
        if !self.accepts_arrivals() {
            let selected_known = self.is_selected_known(&packet);
            events.push(QueueEvent::Dropped {
                packet,
                cause: DropCause::Rejected,
                selected_known,
            });
            return;
        }
        let mut picked = false;
        if admittance && !packet.known {
            self.state.u_seen_this_cycle += 1;
            picked = admit_candidate(&mut self.reservoir_rng, self.state.u_seen_this_cycle);
        }
        let preferred = picked || self.is_selected_known(&packet);

        let accept = if self.state.buffer.len() < self.capacity {
            true
        } else if preferred {
            match self.eviction_victim() {
                Some(idx) => {
                    let victim = self.state.buffer.remove(idx);
                    if self.state.admitted_slot == Some(victim.id) {
                        self.state.admitted_slot = None;
                    }
                    let selected_known = self.is_selected_known(&victim);
                    events.push(QueueEvent::Dropped {
                        packet: victim,
                        cause: DropCause::PushedOut,
                        selected_known,
                    });
                    true
                }
                None => false,
            }
        } else {
            false
        };

        if accept {
            if picked {
                if let Some(prev) = self.state.admitted_slot {
                    if let Some(p) = self.state.buffer.iter_mut().find(|p| p.id == prev) {
                        p.admitted = false;
                    }
                }
                packet.admitted = true;
                self.state.admitted_slot = Some(packet.id);
            }
            events.push(QueueEvent::Accepted { id: packet.id });
            self.state.buffer.push(packet);
        } else {
            if picked {
                self.state.admitted_slot = None;
            }
            let selected_known = self.is_selected_known(&packet);
            events.push(QueueEvent::Dropped {
                packet,
                cause: DropCause::Rejected,
                selected_known,
            });
        }
    }
}

impl QueuePolicy for ManagedQueue {
    fn transmission_step(&mut self, _cycle: u64, events: &mut Vec<QueueEvent>) {
        let state = &mut self.state;
        let mut k = 0;
        while k < state.buffer.len() {
            if state.buffer[k].is_transmittable() {
                let packet = state.buffer.remove(k);
                state.flush_barrier.remove(&packet.id);
                events.push(QueueEvent::Transmitted { packet });
            } else {
                k += 1;
            }
        }
    }

    fn arrival_step(&mut self, _cycle: u64, arrivals: Vec<Packet>, events: &mut Vec<QueueEvent>) {
        self.state.admitted_slot = None;
        self.state.u_seen_this_cycle = 0;
        self.update_phase();
        let admittance = decide_admittance(&mut self.admittance_rng, self.admittance);
        for packet in arrivals {
            self.offer(packet, admittance, events);
            self.update_phase();
            if self.per_packet_sort {
                self.sort_buffer();
            }
        }
        if !self.per_packet_sort {
            self.sort_buffer();
        }
    }

    fn processing_step(&mut self, _cycle: u64, _events: &mut Vec<QueueEvent>) -> CycleKind {
        let admitted = self.state.admitted_slot.take();
        if self.state.buffer.is_empty() {
            return CycleKind::Idle;
        }
        let buffer = &self.state.buffer;
        let target = match self.state.phase {
            Phase::Fill => {
                admitted.and_then(|id| buffer.iter().position(|p| p.id == id && !p.known))
            }
            Phase::Flush if self.pipelining => buffer
                .iter()
                .position(|p| self.state.flush_barrier.contains(&p.id)),
            Phase::Flush => None,
        };
        if let Some(idx) = target.filter(|&i| i > 0) {
            let packet = self.state.buffer.remove(idx);
            self.state.buffer.insert(0, packet);
        }
        let head = &mut self.state.buffer[0];
        let kind = head
            .apply_processing()
            .expect("finished packets leave at transmission");
        if kind == CycleKind::Parse {
            let (work, profit) = (head.total_work, head.profit);
            self.uncover(work, profit);
        }
        self.update_phase();
        self.sort_buffer();
        kind
    }

    fn len(&self) -> usize {
        self.state.buffer.len()
    }

    fn capacity(&self) -> usize {
        self.capacity
    }

    fn selected_pair(&self) -> Option<(u32, u32)> {
        self.selector.selected_pair()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{ClassId, Regime};
    use crate::model::PacketSpec;

    const CLASS: ClassId = ClassId::new(3, 3);

    fn queue(cfg: PolicyConfig) -> ManagedQueue {
        let selector = ClassSelector::indexed(cfg.regime.clone(), CLASS, 256, 16).unwrap();
        ManagedQueue::new(&cfg, selector, 7)
    }

    fn sam(b: usize, r: f64) -> ManagedQueue {
        queue(PolicyConfig::sam(b, r))
    }

    fn sao(b: usize) -> ManagedQueue {
        queue(PolicyConfig::sao(b, 1.0, SchedOrder::Effect))
    }

    /// (5..=8 work, 5..=8 profit) is the exact class (3, 3).
    fn cs(id: u64) -> Packet {
        Packet::new(id, 0, PacketSpec::known(6, 6))
    }

    fn other(id: u64) -> Packet {
        Packet::new(id, 0, PacketSpec::known(100, 1))
    }

    fn unknown(id: u64) -> Packet {
        Packet::new(id, 0, PacketSpec::unknown(6, 6))
    }

    fn ids(q: &ManagedQueue) -> Vec<u64> {
        q.state().buffer.iter().map(|p| p.id).collect()
    }

    #[test]
    fn empty_buffer_means_fill() {
        let mut q = sam(3, 1.0);
        q.set_state(QueueState {
            phase: Phase::Flush,
            ..QueueState::default()
        });
        assert_eq!(q.update_phase(), Phase::Fill);
    }

    #[test]
    fn buffer_of_selected_known_packets_flushes() {
        let mut q = sam(3, 1.0);
        q.set_state(QueueState {
            buffer: vec![cs(0), cs(1), cs(2)],
            ..QueueState::default()
        });
        assert!(q.is_hfull());
        assert_eq!(q.update_phase(), Phase::Flush);
    }

    #[test]
    fn mixed_partial_buffer_keeps_phase() {
        for phase in [Phase::Fill, Phase::Flush] {
            let mut q = sam(4, 1.0);
            q.set_state(QueueState {
                buffer: vec![cs(0), other(1)],
                phase,
                ..QueueState::default()
            });
            assert_eq!(q.update_phase(), phase);
        }
    }

    #[test]
    fn room_left_accepts_anything() {
        let mut q = sam(3, 0.0);
        q.set_state(QueueState {
            buffer: vec![cs(0), other(1)],
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        q.arrival_step(0, vec![other(2)], &mut ev);
        assert_eq!(ev, vec![QueueEvent::Accepted { id: 2 }]);
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn flush_discards_whole_batch() {
        let mut q = sam(2, 1.0);
        q.set_state(QueueState {
            buffer: vec![cs(0), cs(1)],
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        q.arrival_step(0, vec![cs(2), unknown(3), other(4)], &mut ev);
        assert_eq!(q.state().phase, Phase::Flush);
        assert_eq!(ids(&q), vec![0, 1]);
        assert!(ev.iter().all(|e| matches!(
            e,
            QueueEvent::Dropped {
                cause: DropCause::Rejected,
                ..
            }
        )));
        assert_eq!(ev.len(), 3);
    }

    #[test]
    fn selected_arrival_pushes_out_tail() {
        let mut q = sam(3, 0.0);
        q.set_state(QueueState {
            buffer: vec![cs(0), other(1), other(2)],
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        q.arrival_step(0, vec![cs(3)], &mut ev);
        assert_eq!(ids(&q), vec![0, 3, 1]);
        assert!(matches!(
            &ev[0],
            QueueEvent::Dropped { packet, cause: DropCause::PushedOut, .. } if packet.id == 2
        ));
        assert_eq!(ev[1], QueueEvent::Accepted { id: 3 });
        // now Hfull? no: packet 1 is not selected
        assert_eq!(q.state().phase, Phase::Fill);
    }

    #[test]
    fn unselected_arrival_into_full_buffer_is_rejected_without_admittance() {
        let mut q = sam(2, 0.0);
        q.set_state(QueueState {
            buffer: vec![cs(0), other(1)],
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        q.arrival_step(0, vec![unknown(2), other(3)], &mut ev);
        assert_eq!(ids(&q), vec![0, 1]);
        assert_eq!(ev.len(), 2);
    }

    #[test]
    fn admitted_unknown_is_parsed_in_fill() {
        let mut q = sam(3, 1.0);
        q.set_state(QueueState {
            buffer: vec![cs(0), other(1), other(2)],
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        q.arrival_step(0, vec![unknown(3)], &mut ev);
        assert_eq!(q.state().admitted_slot, Some(3));
        let kind = q.processing_step(0, &mut ev);
        assert_eq!(kind, CycleKind::Parse);
        let parsed = q.state().buffer.iter().find(|p| p.id == 3).unwrap();
        assert!(parsed.known && parsed.admitted);
        assert_eq!(parsed.remaining_work, 5);
        // revealed as selected; being in service it leads its band
        assert_eq!(ids(&q)[..2], [3, 0]);
        assert_eq!(q.state().admitted_slot, None);
    }

    #[test]
    fn admitted_candidate_is_not_served_during_flush() {
        let mut q = sao(2);
        q.set_state(QueueState {
            buffer: vec![cs(0), unknown(5)],
            phase: Phase::Flush,
            admitted_slot: Some(5),
            flush_barrier: [0].into_iter().collect(),
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        assert_eq!(q.processing_step(0, &mut ev), CycleKind::Work);
        assert_eq!(q.state().buffer[0].remaining_work, 5);
        assert!(!q.state().buffer[1].known);
    }

    #[test]
    fn idle_when_empty() {
        let mut q = sam(2, 1.0);
        assert_eq!(q.processing_step(0, &mut Vec::new()), CycleKind::Idle);
    }

    #[test]
    fn transmission_credits_finished_packets() {
        let mut q = sam(3, 1.0);
        let mut done = Packet::new(0, 0, PacketSpec::known(1, 7));
        done.remaining_work = 0;
        q.set_state(QueueState {
            buffer: vec![done, other(1)],
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        q.transmission_step(0, &mut ev);
        assert!(matches!(&ev[..], [QueueEvent::Transmitted { packet }] if packet.profit == 7));
        assert_eq!(ids(&q), vec![1]);
        let mut ev = Vec::new();
        q.transmission_step(1, &mut ev);
        assert!(ev.is_empty());
    }

    /// Hand-traced pipelined flush with B = 2 and unit-work selected packets.
    #[test]
    fn barrier_drain_returns_to_fill() {
        let mut q = sao(2);
        let unit = |id| Packet::new(id, 0, PacketSpec::known(1, 8));
        let mut ev = Vec::new();

        // cycle 0: two selected packets fill the buffer, head processed
        q.arrival_step(0, vec![unit(0), unit(1)], &mut ev);
        assert_eq!(q.state().phase, Phase::Flush);
        assert_eq!(q.state().flush_barrier, [0, 1].into_iter().collect());
        q.processing_step(0, &mut ev);

        // cycle 1: packet 0 leaves; a late arrival is kept but not served
        q.transmission_step(1, &mut ev);
        q.arrival_step(1, vec![unit(2)], &mut ev);
        assert_eq!(q.state().phase, Phase::Flush);
        assert_eq!(ids(&q), vec![1, 2]);
        q.processing_step(1, &mut ev);
        assert_eq!(
            q.state()
                .buffer
                .iter()
                .find(|p| p.id == 2)
                .unwrap()
                .remaining_work,
            1
        );

        // cycle 2: barrier drained, flush ends at the next update
        q.transmission_step(2, &mut ev);
        assert!(q.state().flush_barrier.is_empty());
        assert_eq!(q.state().phase, Phase::Flush);
        q.arrival_step(2, vec![], &mut ev);
        assert_eq!(q.state().phase, Phase::Fill);
        q.processing_step(2, &mut ev);
        q.transmission_step(3, &mut ev);
        assert!(q.is_empty());
    }

    #[test]
    fn pipelined_flush_never_evicts_barrier_packets() {
        let mut q = sao(2);
        q.set_state(QueueState {
            buffer: vec![cs(0), cs(1)],
            phase: Phase::Flush,
            flush_barrier: [0, 1].into_iter().collect(),
            ..QueueState::default()
        });
        let mut ev = Vec::new();
        let better = Packet::new(9, 0, PacketSpec::known(1, 16));
        q.arrival_step(0, vec![better, unknown(10)], &mut ev);
        assert_eq!(ids(&q), vec![0, 1]);
    }

    #[test]
    fn batch_sort_mode_evicts_physical_tail() {
        let arrivals = || {
            vec![
                Packet::new(0, 0, PacketSpec::known(1, 2)),
                Packet::new(1, 0, PacketSpec::known(100, 1)),
                Packet::new(2, 0, PacketSpec::known(2, 3)),
                cs(3),
            ]
        };
        let mut per_packet = sao(3);
        per_packet.arrival_step(0, arrivals(), &mut Vec::new());
        assert_eq!(ids(&per_packet), vec![3, 0, 2]);

        let cfg = PolicyConfig {
            per_packet_sort: false,
            ..PolicyConfig::sao(3, 1.0, SchedOrder::Effect)
        };
        let mut batch = queue(cfg);
        batch.arrival_step(0, arrivals(), &mut Vec::new());
        assert_eq!(ids(&batch), vec![3, 0, 1]);
    }

    #[test]
    fn small_sets_select_exact_values() {
        let cfg = PolicyConfig::sam_ss(2, 0.0, vec![6], vec![6]);
        let selector = ClassSelector::fixed(
            cfg.regime.clone(),
            crate::class::SelectedClass::Values { work: 6, profit: 6 },
        )
        .unwrap();
        let mut q = ManagedQueue::new(&cfg, selector, 0);
        let mut ev = Vec::new();
        q.arrival_step(
            0,
            vec![Packet::new(0, 0, PacketSpec::known(5, 4)), cs(1)],
            &mut ev,
        );
        assert_eq!(ids(&q), vec![1, 0]);
        assert!(matches!(q.selector().regime(), Regime::SmallSets { .. }));
    }
}
