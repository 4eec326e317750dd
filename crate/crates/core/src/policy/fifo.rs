use std::collections::VecDeque;

use super::QueuePolicy;
use crate::model::{CycleKind, DropCause, Packet, QueueEvent};

/// Greedy, non-preemptive FIFO: accepts while there is room and runs the
/// head packet to completion, ignoring work and profit.
#[derive(Debug, Clone)]
pub struct PlainFifo {
    capacity: usize,
    buffer: VecDeque<Packet>,
}

impl PlainFifo {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
        }
    }
}

impl QueuePolicy for PlainFifo {
    fn transmission_step(&mut self, _cycle: u64, events: &mut Vec<QueueEvent>) {
        while self.buffer.front().is_some_and(Packet::is_transmittable) {
            let packet = self.buffer.pop_front().expect("front exists");
            events.push(QueueEvent::Transmitted { packet });
        }
    }

    fn arrival_step(&mut self, _cycle: u64, arrivals: Vec<Packet>, events: &mut Vec<QueueEvent>) {
        for packet in arrivals {
            if self.buffer.len() < self.capacity {
                events.push(QueueEvent::Accepted { id: packet.id });
                self.buffer.push_back(packet);
            } else {
                events.push(QueueEvent::Dropped {
                    packet,
                    cause: DropCause::Rejected,
                    selected_known: false,
                });
            }
        }
    }

    fn processing_step(&mut self, _cycle: u64, _events: &mut Vec<QueueEvent>) -> CycleKind {
        match self.buffer.front_mut() {
            Some(head) => head
                .apply_processing()
                .expect("finished packets leave at transmission"),
            None => CycleKind::Idle,
        }
    }

    fn len(&self) -> usize {
        self.buffer.len()
    }

    fn capacity(&self) -> usize {
        self.capacity
    }
}
