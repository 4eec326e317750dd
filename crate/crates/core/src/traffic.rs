//! Bursty workload generation: a two-state Markov modulated Poisson process
//! with truncated Pareto work and profit, and Bernoulli unknown-marking.

use rand::Rng;
use rand_distr::{Distribution, Pareto, Poisson};
use thiserror::Error;

use crate::model::{ArrivalBatch, PacketSpec};
use crate::trace::{Trace, TraceMeta};

/// Shape and scale of a (type I) Pareto distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoParams {
    pub shape: f64,
    pub scale: f64,
}

/// Calibrated so that the rounded, truncated draws on `[1, 256]` have mean
/// 17.97 and standard deviation 22.22. Produced by
/// `cargo run -p mistqueue --example calibrate_pareto`.
pub const WORK_PARETO: ParetoParams = ParetoParams {
    shape: 1.692_124_27,
    scale: 7.758_867_22,
};

/// Calibrated so that the rounded, truncated draws on `[1, 16]` have mean
/// 3.66 and standard deviation 3.20.
pub const PROFIT_PARETO: ParetoParams = ParetoParams {
    shape: 1.448_273_69,
    scale: 1.460_575_69,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid traffic config: {0}")]
pub struct TrafficConfigError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    /// Mean arrivals per cycle in the HIGH state.
    pub lambda_high: f64,
    /// Mean arrivals per cycle in the LOW state.
    pub lambda_low: f64,
    /// Mean HIGH sojourn, in cycles.
    pub mean_high_duration: f64,
    /// LOW mean sojourn divided by HIGH mean sojourn.
    pub duration_ratio: f64,
    /// Probability that a packet arrives unknown.
    pub alpha: f64,
    pub max_work: u32,
    pub max_profit: u32,
    pub pareto_work: ParetoParams,
    pub pareto_profit: ParetoParams,
    pub total_packets: usize,
    pub seed: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            lambda_high: 10.0,
            lambda_low: 0.5,
            mean_high_duration: 10.0,
            duration_ratio: 256.0,
            alpha: 0.3,
            max_work: 256,
            max_profit: 16,
            pareto_work: WORK_PARETO,
            pareto_profit: PROFIT_PARETO,
            total_packets: 10_000,
            seed: 0,
        }
    }
}

impl TrafficConfig {
    /// Defaults with the LOW/HIGH duration ratio tied to `max_work`.
    pub fn with_max_work(max_work: u32) -> Self {
        Self {
            max_work,
            duration_ratio: f64::from(max_work),
            ..Self::default()
        }
    }

    pub fn mean_low_duration(&self) -> f64 {
        self.mean_high_duration * self.duration_ratio
    }

    pub fn validate(&self) -> Result<(), TrafficConfigError> {
        let fail = |m: &str| Err(TrafficConfigError(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("alpha must lie in [0, 1]");
        }
        if !(self.lambda_high >= 0.0 && self.lambda_low >= 0.0) {
            return fail("arrival rates must be non-negative");
        }
        if self.total_packets > 0 && self.lambda_high == 0.0 && self.lambda_low == 0.0 {
            return fail("at least one arrival rate must be positive");
        }
        if !(self.mean_high_duration >= 1.0 && self.mean_low_duration() >= 1.0) {
            return fail("mean state durations must be at least one cycle");
        }
        for p in [self.pareto_work, self.pareto_profit] {
            if !(p.shape > 0.0 && p.scale >= 1.0 && p.shape.is_finite() && p.scale.is_finite()) {
                return fail("Pareto shape must be positive and scale at least 1");
            }
        }
        if !self.max_work.is_power_of_two() || !self.max_profit.is_power_of_two() {
            return fail("W and V must be powers of two");
        }
        Ok(())
    }
}

/// Rounds a Pareto draw to the nearest integer and clamps it into `[1, max]`.
/// Draws above `max` land exactly on `max`.
pub fn sample_truncated_pareto<R: Rng + ?Sized>(
    rng: &mut R,
    params: ParetoParams,
    max: u32,
) -> u32 {
    debug_assert!(max >= 1);
    let dist = Pareto::new(params.scale, params.shape).expect("validated Pareto parameters");
    let x = dist.sample(rng).round();
    if x >= f64::from(max) {
        max
    } else {
        (x as u32).max(1)
    }
}

/// Exact mean and standard deviation of [`sample_truncated_pareto`].
pub fn truncated_pareto_moments(params: ParetoParams, max: u32) -> (f64, f64) {
    let cdf = |x: f64| {
        if x < params.scale {
            0.0
        } else {
            1.0 - (params.scale / x).powf(params.shape)
        }
    };
    let mut mean = 0.0;
    let mut second = 0.0;
    for k in 1..=max {
        let kf = f64::from(k);
        let lo = if k == 1 { 0.0 } else { cdf(kf - 0.5) };
        let hi = if k == max { 1.0 } else { cdf(kf + 0.5) };
        let p = hi - lo;
        mean += p * kf;
        second += p * kf * kf;
    }
    (mean, (second - mean * mean).max(0.0).sqrt())
}

/// Finds Pareto parameters whose truncated, rounded distribution on
/// `[1, max]` has the requested mean and standard deviation.
///
/// For a fixed shape the mean is increasing in the scale, and along the
/// resulting mean-matched curve the standard deviation decreases with the
/// shape, so two nested bisections suffice.
pub fn calibrate_pareto(target_mean: f64, target_std: f64, max: u32) -> Option<ParetoParams> {
    let scale_for = |shape: f64| -> Option<f64> {
        let mean_at = |scale: f64| truncated_pareto_moments(ParetoParams { shape, scale }, max).0;
        let (mut lo, mut hi) = (1.0, f64::from(max));
        if mean_at(lo) > target_mean || mean_at(hi) < target_mean {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) < target_mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    let std_at = |shape: f64| {
        scale_for(shape).map(|scale| truncated_pareto_moments(ParetoParams { shape, scale }, max).1)
    };
    let (mut lo, mut hi) = (0.05, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match std_at(mid) {
            Some(s) if s > target_std => lo = mid,
            Some(_) => hi = mid,
            // even scale 1 overshoots the mean: the tail is too heavy
            None => lo = mid,
        }
    }
    let shape = 0.5 * (lo + hi);
    let scale = scale_for(shape)?;
    let (m, s) = truncated_pareto_moments(ParetoParams { shape, scale }, max);
    ((m - target_mean).abs() < 1e-6 && (s - target_std).abs() < 1e-6)
        .then_some(ParetoParams { shape, scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmppState {
    High,
    Low,
}

/// Cycle-by-cycle MMPP arrivals, including empty cycles.
///
/// Starts in the HIGH state; sojourns are geometric with the configured
/// means. Ends once `total_packets` packets have been emitted.
pub struct MmppArrivals<'a, R: Rng + ?Sized> {
    cfg: &'a TrafficConfig,
    rng: &'a mut R,
    state: MmppState,
    cycle: u64,
    emitted: usize,
    high: Option<Poisson<f64>>,
    low: Option<Poisson<f64>>,
}

impl<'a, R: Rng + ?Sized> MmppArrivals<'a, R> {
    pub fn new(cfg: &'a TrafficConfig, rng: &'a mut R) -> Self {
        let poisson =
            |lambda: f64| (lambda > 0.0).then(|| Poisson::new(lambda).expect("finite rate"));
        Self {
            cfg,
            rng,
            state: MmppState::High,
            cycle: 0,
            emitted: 0,
            high: poisson(cfg.lambda_high),
            low: poisson(cfg.lambda_low),
        }
    }
}

impl<R: Rng + ?Sized> Iterator for MmppArrivals<'_, R> {
    type Item = (MmppState, ArrivalBatch);

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.cfg.total_packets {
            return None;
        }
        let (dist, mean_duration) = match self.state {
            MmppState::High => (&self.high, self.cfg.mean_high_duration),
            MmppState::Low => (&self.low, self.cfg.mean_low_duration()),
        };
        let drawn = dist.as_ref().map_or(0, |d| d.sample(self.rng) as usize);
        let n = drawn.min(self.cfg.total_packets - self.emitted);
        let mut packets = Vec::with_capacity(n);
        for _ in 0..n {
            let work = sample_truncated_pareto(self.rng, self.cfg.pareto_work, self.cfg.max_work);
            let profit =
                sample_truncated_pareto(self.rng, self.cfg.pareto_profit, self.cfg.max_profit);
            // always one draw, so traces for different alpha share work/profit values
            let known = self.rng.random::<f64>() >= self.cfg.alpha;
            packets.push(PacketSpec {
                work,
                profit,
                known,
            });
        }
        self.emitted += n;
        let item = (
            self.state,
            ArrivalBatch {
                cycle: self.cycle,
                packets,
            },
        );
        if self.rng.random_bool(1.0 / mean_duration) {
            self.state = match self.state {
                MmppState::High => MmppState::Low,
                MmppState::Low => MmppState::High,
            };
        }
        self.cycle += 1;
        Some(item)
    }
}

pub fn generate_trace<R: Rng + ?Sized>(
    cfg: &TrafficConfig,
    rng: &mut R,
) -> Result<Trace, TrafficConfigError> {
    cfg.validate()?;
    let mut meta = TraceMeta::new(cfg.max_work, cfg.max_profit, cfg.seed);
    meta.generator = Some(cfg.clone());
    let mut trace = Trace::new(meta);
    for (_, batch) in MmppArrivals::new(cfg, rng) {
        trace
            .push_batch(batch)
            .expect("generator emits ordered, in-range batches");
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_one_always_yields_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_truncated_pareto(&mut rng, WORK_PARETO, 1), 1);
        }
    }

    #[test]
    fn committed_constants_hit_published_moments_exactly() {
        let (m, s) = truncated_pareto_moments(WORK_PARETO, 256);
        assert!(
            (m - 17.97).abs() < 1e-6 && (s - 22.22).abs() < 1e-6,
            "{m} {s}"
        );
        let (m, s) = truncated_pareto_moments(PROFIT_PARETO, 16);
        assert!(
            (m - 3.66).abs() < 1e-6 && (s - 3.20).abs() < 1e-6,
            "{m} {s}"
        );
    }

    #[test]
    fn calibration_recovers_committed_constants() {
        let work = calibrate_pareto(17.97, 22.22, 256).unwrap();
        assert!((work.shape - WORK_PARETO.shape).abs() < 1e-6);
        assert!((work.scale - WORK_PARETO.scale).abs() < 1e-6);
        let profit = calibrate_pareto(3.66, 3.20, 16).unwrap();
        assert!((profit.shape - PROFIT_PARETO.shape).abs() < 1e-6);
        assert!((profit.scale - PROFIT_PARETO.scale).abs() < 1e-6);
    }

    #[test]
    fn alpha_extremes() {
        for (alpha, expect_known) in [(0.0, true), (1.0, false)] {
            let cfg = TrafficConfig {
                alpha,
                total_packets: 2000,
                ..TrafficConfig::default()
            };
            let trace = generate_trace(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            assert_eq!(trace.packet_count(), 2000);
            assert!(trace.packets().all(|(_, p)| p.known == expect_known));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            TrafficConfig {
                alpha: 1.5,
                ..TrafficConfig::default()
            },
            TrafficConfig {
                max_work: 100,
                ..TrafficConfig::default()
            },
            TrafficConfig {
                pareto_work: ParetoParams {
                    shape: 0.0,
                    scale: 2.0,
                },
                ..TrafficConfig::default()
            },
            TrafficConfig {
                pareto_profit: ParetoParams {
                    shape: 1.0,
                    scale: 0.5,
                },
                ..TrafficConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn low_state_lasts_ratio_times_longer() {
        let cfg = TrafficConfig::with_max_work(256);
        assert_eq!(cfg.mean_low_duration(), 2560.0);
    }
}
