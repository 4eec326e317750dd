//! Offline upper bound on achievable throughput and the performance ratio.
//!
//! Every packet becomes a knapsack item (size = work, value = profit) and the
//! capacity is the number of processing cycles available while packets
//! arrive. The greedy 2-approximation is used as the benchmark; `B * V` is
//! added for what an optimal policy may still hold in its buffer when
//! arrivals stop.

use serde::Serialize;

use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Item {
    pub size: u64,
    pub value: u64,
}

/// How many processing cycles the knapsack may fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapacityRule {
    /// Last arrival cycle minus first arrival cycle, plus one.
    #[default]
    ArrivalSpan,
    /// Only cycles in which at least one packet arrives.
    NonEmptyCycles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub capacity: u64,
    /// Value of the greedy solution alone.
    pub greedy: u64,
    /// `greedy + B*V`; the denominator of the performance ratio.
    pub ub_greedy: u64,
    /// `2*greedy + B*V`; a guaranteed upper bound.
    pub ub_certified: u64,
}

/// Density-ordered greedy: the longest fitting prefix, or the single most
/// valuable item that fits on its own, whichever is worth more.
pub fn greedy_knapsack(items: &[Item], capacity: u64) -> u64 {
    let mut order: Vec<&Item> = items.iter().collect();
    // a/b > c/d  <=>  a*d > c*b; the stable sort keeps input order on ties
    order.sort_by(|a, b| {
        (u128::from(b.value) * u128::from(a.size)).cmp(&(u128::from(a.value) * u128::from(b.size)))
    });

    let mut used = 0u64;
    let mut prefix = 0u64;
    for item in &order {
        if used + item.size > capacity {
            break;
        }
        used += item.size;
        prefix += item.value;
    }
    let single = items
        .iter()
        .filter(|it| it.size <= capacity)
        .map(|it| it.value)
        .max()
        .unwrap_or(0);
    prefix.max(single)
}

pub fn knapsack_capacity(trace: &Trace, rule: CapacityRule) -> u64 {
    match (rule, trace.first_cycle(), trace.last_cycle()) {
        (_, None, _) | (_, _, None) => 0,
        (CapacityRule::ArrivalSpan, Some(first), Some(last)) => last - first + 1,
        (CapacityRule::NonEmptyCycles, _, _) => trace.batches().len() as u64,
    }
}

pub fn knapsack_upper_bound(
    trace: &Trace,
    buffer_size: usize,
    max_profit: u32,
    rule: CapacityRule,
) -> UpperBound {
    let capacity = knapsack_capacity(trace, rule);
    let extra = buffer_size as u64 * u64::from(max_profit);
    let greedy = if capacity == 0 {
        0
    } else {
        let items: Vec<Item> = trace
            .packets()
            .map(|(_, p)| Item {
                size: u64::from(p.work),
                value: u64::from(p.profit),
            })
            .collect();
        greedy_knapsack(&items, capacity)
    };
    UpperBound {
        capacity,
        greedy,
        ub_greedy: greedy + extra,
        ub_certified: 2 * greedy + extra,
    }
}

pub fn performance_ratio(throughput: u64, upper: u64) -> f64 {
    if upper == 0 {
        return if throughput == 0 { 0.0 } else { f64::INFINITY };
    }
    throughput as f64 / upper as f64
}
