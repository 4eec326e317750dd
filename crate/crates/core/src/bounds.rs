//! Lower bounds on the competitive ratio of randomized algorithms when
//! packets are unknown on arrival, the adversarial input behind them, the
//! offline SubOPT policy used on that input, and the tail bound on the
//! number of unknown packets arriving in one cycle.

use std::collections::VecDeque;
use std::f64::consts::E;

use rand::Rng;
use thiserror::Error;

use crate::model::{ArrivalBatch, PacketSpec};
use crate::trace::{Trace, TraceMeta};

/// `(e - 1) / (2e)`, the constant of the large-burst bound.
pub const LARGE_M_CONSTANT: f64 = (E - 1.0) / (2.0 * E);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BoundError {
    #[error("need V >= 1, W >= 2, 1 <= w <= W and M >= 1; got V={v}, W={w_max}, w={w_min}, M={m}")]
    OutOfRange {
        v: u32,
        w_max: u32,
        w_min: u32,
        m: u32,
    },
    /// `V(W-1) + 1 - w = 0`, which happens exactly when `V = 1` and `w = W`.
    #[error("V(W-1)+1-w vanishes for V={v}, W={w_max}, w={w_min}")]
    Degenerate { v: u32, w_max: u32, w_min: u32 },
}

/// `V` max profit, `W` max work, `w` min work, `M` unknown packets per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundParams {
    pub v: u32,
    pub w_max: u32,
    pub w_min: u32,
    pub m: u32,
}

/// Which of the two inequalities applies at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `M w <= V (W - 1)`: the bound is at least `M / 2`.
    SmallM,
    /// Otherwise: the bound exceeds `(e-1)/(2e) * V W / w`.
    LargeM,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::SmallM => "small-M",
            Region::LargeM => "large-M",
        }
    }
}

impl BoundParams {
    pub fn new(v: u32, w_max: u32, w_min: u32, m: u32) -> Result<Self, BoundError> {
        let params = Self { v, w_max, w_min, m };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        let Self { v, w_max, w_min, m } = *self;
        if v < 1 || w_max < 2 || w_min < 1 || w_min > w_max || m < 1 {
            return Err(BoundError::OutOfRange { v, w_max, w_min, m });
        }
        if self.denominator() == 0 {
            return Err(BoundError::Degenerate { v, w_max, w_min });
        }
        Ok(())
    }

    /// `V (W - 1)`.
    fn span(&self) -> u64 {
        u64::from(self.v) * u64::from(self.w_max - 1)
    }

    fn denominator(&self) -> u64 {
        (self.span() + 1).saturating_sub(u64::from(self.w_min))
    }

    /// The region boundary `M <= 1/(p* w) + 1 - 1/w` simplifies to
    /// `M w <= V (W - 1)`, which is evaluated in integers.
    pub fn region(&self) -> Region {
        if u64::from(self.m) * u64::from(self.w_min) <= self.span() {
            Region::SmallM
        } else {
            Region::LargeM
        }
    }
}

/// `1 / (V (W - 1) + 1 - w)`.
pub fn p_star(v: u32, w_max: u32, w_min: u32) -> Result<f64, BoundError> {
    let params = BoundParams {
        v,
        w_max,
        w_min,
        m: 1,
    };
    params.validate()?;
    Ok(1.0 / params.denominator() as f64)
}

/// `1 - (1 - p)^n`, accurate for tiny `p` and huge `n`.
fn hit_probability(p: f64, n: f64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    -(n * (-p).ln_1p()).exp_m1()
}

/// `(V (W - 1) / w) * [1 - (1 - p*)^(M w)]`.
pub fn lower_bound_general(params: &BoundParams) -> Result<f64, BoundError> {
    let p = p_star(params.v, params.w_max, params.w_min)?;
    let mw = f64::from(params.m) * f64::from(params.w_min);
    Ok(params.span() as f64 / f64::from(params.w_min) * hit_probability(p, mw))
}

/// Bound `>= M / 2`. Only meaningful in [`Region::SmallM`].
pub fn check_small_m(params: &BoundParams) -> Result<bool, BoundError> {
    Ok(lower_bound_general(params)? >= f64::from(params.m) / 2.0)
}

/// Bound `> (e-1)/(2e) * V W / w`. Only meaningful in [`Region::LargeM`].
pub fn check_large_m(params: &BoundParams) -> Result<bool, BoundError> {
    let floor =
        LARGE_M_CONSTANT * f64::from(params.v) * f64::from(params.w_max) / f64::from(params.w_min);
    Ok(lower_bound_general(params)? > floor)
}

/// Evaluates the inequality that applies in the point's region.
pub fn check_region(params: &BoundParams) -> Result<(Region, bool), BoundError> {
    let region = params.region();
    let holds = match region {
        Region::SmallM => check_small_m(params)?,
        Region::LargeM => check_large_m(params)?,
    };
    Ok((region, holds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorollaryVariant {
    /// Arbitrary work and profit, minimum work 1.
    General,
    /// All profits equal; minimum work 1.
    UniformProfit,
    /// All packets carry work `W`.
    UniformWork,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryFloor {
    pub region: Region,
    /// `M / 2` or `(e-1)/(2e) * V W / w`, depending on the region.
    pub floor: f64,
    pub bound: f64,
}

impl CorollaryFloor {
    pub fn holds(&self) -> bool {
        match self.region {
            Region::SmallM => self.bound >= self.floor,
            Region::LargeM => self.bound > self.floor,
        }
    }
}

/// The `min(.., M)` floor of a corollary together with the bound it
/// lower-bounds. `w` is 1 for the general and uniform-profit variants and
/// `W` for uniform work.
pub fn corollary_floor(
    v: u32,
    w_max: u32,
    m: u32,
    variant: CorollaryVariant,
) -> Result<CorollaryFloor, BoundError> {
    let w_min = match variant {
        CorollaryVariant::General | CorollaryVariant::UniformProfit => 1,
        CorollaryVariant::UniformWork => w_max,
    };
    let params = BoundParams::new(v, w_max, w_min, m)?;
    let region = params.region();
    let floor = match region {
        Region::SmallM => f64::from(m) / 2.0,
        Region::LargeM => LARGE_M_CONSTANT * f64::from(v) * f64::from(w_max) / f64::from(w_min),
    };
    Ok(CorollaryFloor {
        region,
        floor,
        bound: lower_bound_general(&params)?,
    })
}

/// Best packet of the construction: minimum work, maximum profit.
pub fn best_packet(params: &BoundParams) -> PacketSpec {
    PacketSpec::unknown(params.w_min, params.v)
}

/// Worst packet of the construction: maximum work, unit profit.
pub fn worst_packet(params: &BoundParams) -> PacketSpec {
    PacketSpec::unknown(params.w_max, 1)
}

/// `n_cycles` cycles of `M` unknown packets each, every one independently
/// best with probability `p*` and worst otherwise.
///
/// The closing flush (`B W` cycles without arrivals) is not stored; the
/// engine keeps running until the buffer drains.
pub fn adversarial_trace<R: Rng + ?Sized>(
    params: &BoundParams,
    n_cycles: u64,
    rng: &mut R,
) -> Result<Trace, BoundError> {
    let p = p_star(params.v, params.w_max, params.w_min)?;
    adversarial_trace_with(params, p, n_cycles, rng)
}

/// As [`adversarial_trace`] with an explicit best-packet probability.
pub fn adversarial_trace_with<R: Rng + ?Sized>(
    params: &BoundParams,
    p: f64,
    n_cycles: u64,
    rng: &mut R,
) -> Result<Trace, BoundError> {
    params.validate()?;
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    let (best, worst) = (best_packet(params), worst_packet(params));
    let mut trace = Trace::new(TraceMeta::new(params.w_max, params.v, 0));
    for cycle in 0..n_cycles {
        let packets = (0..params.m)
            .map(|_| if rng.random_bool(p) { best } else { worst })
            .collect();
        trace
            .push_batch(ArrivalBatch { cycle, packets })
            .expect("cycles increase and values lie in range");
    }
    Ok(trace)
}

/// Offline SubOPT on an adversarial trace, with a buffer of two.
///
/// Time is cut into periods of `w` cycles. In each period SubOPT keeps at
/// most one best packet; during the next period it processes that packet
/// (which takes exactly `w` cycles) and transmits it at the period's end.
/// The pick of the final period is processed after arrivals stop.
pub fn subopt_run(trace: &Trace, params: &BoundParams) -> u64 {
    let w = u64::from(params.w_min);
    let best = best_packet(params);
    let is_best = |p: &PacketSpec| p.work == best.work && p.profit == best.profit;

    let mut throughput = 0u64;
    let mut pick: Option<u32> = None;
    // at most the packet in service plus the current period's pick
    let mut buffer: VecDeque<(u64, u32)> = VecDeque::with_capacity(2);
    let mut batches = trace.batches().iter().peekable();
    let end = trace.last_cycle().map_or(0, |c| c + 1);

    let mut process = |buffer: &mut VecDeque<(u64, u32)>| {
        if let Some((remaining, profit)) = buffer.front_mut() {
            *remaining -= 1;
            if *remaining == 0 {
                throughput += u64::from(*profit);
                buffer.pop_front();
            }
        }
    };

    for cycle in 0..end {
        if let Some(batch) = batches.next_if(|b| b.cycle == cycle) {
            if pick.is_none() {
                pick = batch.packets.iter().find(|p| is_best(p)).map(|p| p.profit);
            }
        }
        process(&mut buffer);
        if cycle % w == w - 1 || cycle + 1 == end {
            buffer.extend(pick.take().map(|profit| (w, profit)));
        }
    }
    while !buffer.is_empty() {
        process(&mut buffer);
    }
    throughput
}

/// `(N V / w) * [1 - (1 - p*)^(M w)]`, SubOPT's expected throughput over
/// `N` fill cycles when `w` divides `N`.
pub fn subopt_expected(params: &BoundParams, n_cycles: u64) -> Result<f64, BoundError> {
    let p = p_star(params.v, params.w_max, params.w_min)?;
    let mw = f64::from(params.m) * f64::from(params.w_min);
    Ok(n_cycles as f64 * f64::from(params.v) / f64::from(params.w_min) * hit_probability(p, mw))
}

/// Probability that more than `k` unknown packets arrive in a cycle when
/// arrivals are Poisson(`lambda`) and each is unknown with probability
/// `p_unknown`, truncating the Poisson mixture at `n_max`:
///
/// `sum_{n=k}^{n_max} P(Bin(n, p) > k) P(X = n) + P(X > n_max)`.
pub fn tail_bound(lambda: f64, p_unknown: f64, k: u64, n_max: u64) -> f64 {
    assert!(lambda >= 0.0 && lambda.is_finite(), "bad rate {lambda}");
    assert!(
        (0.0..=1.0).contains(&p_unknown),
        "bad probability {p_unknown}"
    );
    let mut total = 0.0;
    let mut ln_pmf = poisson_ln_pmf(lambda, k);
    for n in k..=n_max {
        total += binomial_sf(n, p_unknown, k) * ln_pmf.exp();
        ln_pmf += lambda.ln() - ((n + 1) as f64).ln();
    }
    total + poisson_sf(lambda, n_max)
}

/// `ln P(X = n)` for `X ~ Poisson(lambda)`, by summing `ln(lambda / i)`.
fn poisson_ln_pmf(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_lambda = lambda.ln();
    (1..=n).fold(-lambda, |acc, i| acc + ln_lambda - (i as f64).ln())
}

/// `P(X > n)`, summed upward from `n + 1` so that tiny tails keep their
/// precision.
fn poisson_sf(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let ln_lambda = lambda.ln();
    let mut ln_term = poisson_ln_pmf(lambda, n + 1);
    let mut i = n + 1;
    let mut sum = 0.0;
    loop {
        let term = ln_term.exp();
        sum += term;
        if (i as f64) > lambda && term <= sum * 1e-17 {
            return sum.min(1.0);
        }
        i += 1;
        ln_term += ln_lambda - (i as f64).ln();
    }
}

/// `P(Bin(n, p) > k)`, summing the upper terms through the log-pmf
/// recurrence `P(j) = P(j-1) (n-j+1)/j * p/(1-p)`.
fn binomial_sf(n: u64, p: f64, k: u64) -> f64 {
    if k >= n || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let ln_odds = p.ln() - (-p).ln_1p();
    let mut ln_term = n as f64 * (-p).ln_1p();
    let mut sum = 0.0;
    for j in 1..=n {
        ln_term += ((n - j + 1) as f64 / j as f64).ln() + ln_odds;
        if j > k {
            sum += ln_term.exp();
        }
    }
    sum.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(v: u32, w_max: u32, w_min: u32, m: u32) -> BoundParams {
        BoundParams::new(v, w_max, w_min, m).unwrap()
    }

    #[test]
    fn p_star_examples() {
        assert_eq!(p_star(1, 2, 1).unwrap(), 1.0);
        assert_eq!(p_star(2, 2, 1).unwrap(), 0.5);
        assert_eq!(p_star(1, 3, 1).unwrap(), 0.5);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(lower_bound_general(&params(1, 2, 1, 1)).unwrap(), 1.0);
        assert!((lower_bound_general(&params(2, 2, 1, 1)).unwrap() - 1.0).abs() < 1e-12);
        assert!((lower_bound_general(&params(1, 3, 1, 2)).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_out_of_range_points_are_rejected() {
        assert_eq!(
            BoundParams::new(1, 8, 8, 1),
            Err(BoundError::Degenerate {
                v: 1,
                w_max: 8,
                w_min: 8
            })
        );
        assert!(BoundParams::new(2, 8, 8, 1).is_ok());
        assert!(BoundParams::new(0, 8, 1, 1).is_err());
        assert!(BoundParams::new(1, 1, 1, 1).is_err());
        assert!(BoundParams::new(1, 4, 5, 1).is_err());
        assert!(BoundParams::new(1, 4, 1, 0).is_err());
    }

    #[test]
    fn region_boundary_is_small_m() {
        // V(W-1)/w = 2*7/2 = 7
        assert_eq!(params(2, 8, 2, 7).region(), Region::SmallM);
        assert_eq!(params(2, 8, 2, 8).region(), Region::LargeM);
        assert!(check_small_m(&params(2, 8, 2, 7)).unwrap());
    }

    #[test]
    fn tiny_probability_does_not_underflow() {
        let b = lower_bound_general(&params(16, 1 << 20, 1, 1)).unwrap();
        assert!((b - 1.0).abs() < 1e-9, "{b}");
    }

    #[test]
    fn corollary_examples() {
        let c = corollary_floor(1, 2, 100, CorollaryVariant::UniformProfit).unwrap();
        assert_eq!(c.region, Region::LargeM);
        assert!(c.holds());
        let c = corollary_floor(16, 256, 1, CorollaryVariant::General).unwrap();
        assert_eq!((c.region, c.floor), (Region::SmallM, 0.5));
        assert!(c.holds());
        let c = corollary_floor(1, 2, 1, CorollaryVariant::General).unwrap();
        assert_eq!((c.floor, c.bound), (0.5, 1.0));
        assert!(corollary_floor(1, 4, 1, CorollaryVariant::UniformWork).is_err());
        assert!(corollary_floor(4, 4, 64, CorollaryVariant::UniformWork)
            .unwrap()
            .holds());
    }

    #[test]
    fn subopt_without_best_packets_earns_nothing() {
        let p = params(2, 4, 1, 3);
        let mut rng = rand::rng();
        let t = adversarial_trace_with(&p, 0.0, 50, &mut rng).unwrap();
        assert!(t.packets().all(|(_, s)| *s == worst_packet(&p)));
        assert_eq!(subopt_run(&t, &p), 0);
    }

    #[test]
    fn subopt_transmits_one_best_per_period() {
        let mut rng = rand::rng();
        let p = params(4, 4, 1, 2);
        let t = adversarial_trace_with(&p, 1.0, 37, &mut rng).unwrap();
        assert_eq!(subopt_run(&t, &p), 37 * 4);

        // w = 3 with a trailing partial period
        let p = params(2, 8, 3, 1);
        let t = adversarial_trace_with(&p, 1.0, 10, &mut rng).unwrap();
        assert_eq!(subopt_run(&t, &p), 4 * 2);
    }

    #[test]
    fn tail_bound_examples() {
        let value = tail_bound(10.0, 0.3, 10, 100);
        assert!(value < 0.0003, "{value}");
        assert!((value - tail_bound(10.0, 0.3, 10, 200)).abs() < 1e-9);
        assert_eq!(tail_bound(10.0, 0.0, 4, 20), poisson_sf(10.0, 20));
        assert!((poisson_sf(10.0, 0) - (1.0 - (-10f64).exp())).abs() < 1e-12);
    }
}
