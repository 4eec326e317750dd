//! Monte Carlo checks of the generator against its configured rates.

use mistqueue::traffic::{
    generate_trace, sample_truncated_pareto, truncated_pareto_moments, MmppArrivals, MmppState,
    TrafficConfig, PROFIT_PARETO, WORK_PARETO,
};
use mistqueue::{derive_seed, substream, Stream};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample_moments(draws: &[u32]) -> (f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let var = draws
        .iter()
        .map(|&x| (f64::from(x) - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn work_draws_match_published_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws: Vec<u32> = (0..1_000_000)
        .map(|_| sample_truncated_pareto(&mut rng, WORK_PARETO, 256))
        .collect();
    let (mean, std) = sample_moments(&draws);
    assert!((mean - 17.97).abs() <= 0.5, "mean {mean}");
    assert!((std - 22.22).abs() <= 1.0, "std {std}");
    assert!(draws.iter().all(|&w| (1..=256).contains(&w)));
}

#[test]
fn profit_draws_match_published_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let draws: Vec<u32> = (0..1_000_000)
        .map(|_| sample_truncated_pareto(&mut rng, PROFIT_PARETO, 16))
        .collect();
    let (mean, std) = sample_moments(&draws);
    assert!((mean - 3.66).abs() <= 0.1, "mean {mean}");
    assert!((std - 3.20).abs() <= 0.2, "std {std}");
}

#[test]
fn exact_moments_agree_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<u32> = (0..200_000)
        .map(|_| sample_truncated_pareto(&mut rng, PROFIT_PARETO, 16))
        .collect();
    let (m, s) = sample_moments(&draws);
    let (em, es) = truncated_pareto_moments(PROFIT_PARETO, 16);
    assert!(
        (m - em).abs() < 0.05 && (s - es).abs() < 0.05,
        "{m} {s} vs {em} {es}"
    );
}

#[test]
fn high_state_rate_and_unknown_fraction() {
    let cfg = TrafficConfig::default();
    let (mut high_cycles, mut high_packets, mut high_unknown) = (0u64, 0u64, 0u64);
    let (mut total, mut unknown) = (0u64, 0u64);
    for k in 0..100 {
        let seed = derive_seed(31, k);
        let mut rng = substream(seed, Stream::Traffic);
        let mut arrivals = MmppArrivals::new(&cfg, &mut rng).peekable();
        while let Some((state, batch)) = arrivals.next() {
            let n = batch.packets.len() as u64;
            let u = batch.packets.iter().filter(|p| !p.known).count() as u64;
            // the final batch may be cut short by the packet budget
            if state == MmppState::High && arrivals.peek().is_some() {
                high_cycles += 1;
                high_packets += n;
                high_unknown += u;
            }
            total += n;
            unknown += u;
        }
    }
    let rate = high_packets as f64 / high_cycles as f64;
    assert!((rate - 10.0).abs() <= 0.3, "HIGH rate {rate}");
    let frac = unknown as f64 / total as f64;
    assert!((frac - 0.30).abs() <= 0.01, "unknown fraction {frac}");

    // unknown packets per HIGH cycle is 10 alpha, within 3 standard errors
    let per_cycle = high_unknown as f64 / high_cycles as f64;
    let se = (10.0 * 0.3 / high_cycles as f64).sqrt();
    assert!(
        (per_cycle - 3.0).abs() <= 3.0 * se,
        "U per HIGH cycle {per_cycle} (se {se})"
    );
}

#[test]
fn generation_is_deterministic_per_seed() {
    let cfg = TrafficConfig {
        total_packets: 3_000,
        ..TrafficConfig::default()
    };
    let a = generate_trace(&cfg, &mut substream(4, Stream::Traffic)).unwrap();
    let b = generate_trace(&cfg, &mut substream(4, Stream::Traffic)).unwrap();
    let c = generate_trace(&cfg, &mut substream(5, Stream::Traffic)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.packet_count(), 3_000);
}
