//! Priority order of buffered packets. Index 0 of a sorted buffer is the
//! head-of-line packet; the last index is the tail.

use std::cmp::Ordering;

use super::SchedOrder;
use crate::class::ClassSelector;
use crate::model::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandLayout {
    /// Known selected packets first, everything else after, FIFO in both.
    SelectedFirst,
    /// Known selected, other known, then unknown packets. The configured
    /// order applies inside the two known bands; unknowns stay FIFO.
    KnownThenUnknown,
}

fn band(p: &Packet, selector: &ClassSelector, layout: BandLayout) -> u8 {
    let selected = p.known && selector.is_selected(p);
    match layout {
        BandLayout::SelectedFirst => u8::from(!selected),
        BandLayout::KnownThenUnknown if selected => 0,
        BandLayout::KnownThenUnknown if p.known => 1,
        BandLayout::KnownThenUnknown => 2,
    }
}

fn within_band(a: &Packet, b: &Packet, order: SchedOrder) -> Ordering {
    match order {
        SchedOrder::Fifo => Ordering::Equal,
        SchedOrder::WorkThenValue => a
            .remaining_work
            .cmp(&b.remaining_work)
            .then_with(|| b.profit.cmp(&a.profit)),
        // a ahead of b iff v_a / w_a > v_b / w_b; zero remaining work ranks first
        SchedOrder::Effect => {
            let lhs = u64::from(b.profit) * u64::from(a.remaining_work);
            let rhs = u64::from(a.profit) * u64::from(b.remaining_work);
            lhs.cmp(&rhs)
        }
    }
}

/// `Less` means `a` has higher priority than `b`.
pub fn compare_packets(
    a: &Packet,
    b: &Packet,
    selector: &ClassSelector,
    layout: BandLayout,
    order: SchedOrder,
) -> Ordering {
    let (band_a, band_b) = (band(a, selector, layout), band(b, selector, layout));
    let in_band_order = match layout {
        BandLayout::KnownThenUnknown if band_a < 2 => order,
        _ => SchedOrder::Fifo,
    };
    band_a
        .cmp(&band_b)
        .then_with(|| {
            if band_a == band_b {
                within_band(a, b, in_band_order)
            } else {
                Ordering::Equal
            }
        })
        .then_with(|| b.in_service().cmp(&a.in_service()))
        .then_with(|| a.id.cmp(&b.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::{ClassId, Regime};
    use crate::model::PacketSpec;

    fn pkt(id: u64, work: u32, remaining: u32, profit: u32, known: bool) -> Packet {
        let mut p = Packet::new(
            id,
            0,
            PacketSpec {
                work,
                profit,
                known,
            },
        );
        p.remaining_work = remaining;
        p
    }

    fn closure() -> ClassSelector {
        // w <= 2, v >= 16: nothing below qualifies
        ClassSelector::indexed(Regime::Closure, ClassId::new(1, 4), 256, 16).unwrap()
    }

    fn sorted(mut v: Vec<Packet>, order: SchedOrder) -> Vec<u64> {
        let sel = closure();
        v.sort_by(|a, b| compare_packets(a, b, &sel, BandLayout::KnownThenUnknown, order));
        v.into_iter().map(|p| p.id).collect()
    }

    #[test]
    fn effect_prefers_higher_ratio() {
        let a = pkt(0, 4, 4, 8, true);
        let b = pkt(1, 2, 2, 8, true);
        assert_eq!(sorted(vec![a, b], SchedOrder::Effect), vec![1, 0]);
    }

    #[test]
    fn work_then_value_breaks_ties_by_profit() {
        let a = pkt(0, 3, 3, 5, true);
        let b = pkt(1, 3, 3, 9, true);
        assert_eq!(sorted(vec![a, b], SchedOrder::WorkThenValue), vec![1, 0]);
    }

    #[test]
    fn unknown_packets_trail_known_ones_in_fifo_order() {
        for order in [
            SchedOrder::Fifo,
            SchedOrder::WorkThenValue,
            SchedOrder::Effect,
        ] {
            let v = vec![
                pkt(0, 1, 1, 16, false),
                pkt(1, 200, 200, 1, true),
                pkt(2, 1, 1, 16, false),
                pkt(3, 9, 9, 2, true),
            ];
            let ids = sorted(v, order);
            assert_eq!(&ids[2..], &[0, 2], "{order:?}");
        }
    }

    #[test]
    fn selected_band_first() {
        let sel = ClassSelector::indexed(Regime::Exact, ClassId::new(3, 3), 256, 16).unwrap();
        let mut v = [
            pkt(0, 1, 1, 1, true),
            pkt(1, 5, 5, 6, false),
            pkt(2, 6, 6, 5, true),
        ];
        v.sort_by(|a, b| compare_packets(a, b, &sel, BandLayout::SelectedFirst, SchedOrder::Fifo));
        assert_eq!(v.iter().map(|p| p.id).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn in_service_packet_wins_ties() {
        let fresh = pkt(0, 4, 4, 8, true);
        let started = pkt(1, 6, 4, 8, true);
        assert_eq!(
            sorted(
                vec![fresh.clone(), started.clone()],
                SchedOrder::WorkThenValue
            ),
            vec![1, 0]
        );
        assert_eq!(sorted(vec![fresh, started], SchedOrder::Effect), vec![1, 0]);
    }
}
