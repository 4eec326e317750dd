//! Recomputes the Pareto parameters behind `WORK_PARETO` and `PROFIT_PARETO`
//! and checks them against a million sampled draws.

use mistqueue::traffic::{
    calibrate_pareto, sample_truncated_pareto, truncated_pareto_moments, ParetoParams,
    PROFIT_PARETO, WORK_PARETO,
};
use mistqueue::{substream, Stream};

const DRAWS: usize = 1_000_000;

fn sampled_moments(params: ParetoParams, max: u32) -> (f64, f64) {
    let mut rng = substream(1, Stream::Traffic);
    let xs: Vec<f64> = (0..DRAWS)
        .map(|_| f64::from(sample_truncated_pareto(&mut rng, params, max)))
        .collect();
    mistqueue::engine::mean_std(&xs)
}

fn main() {
    for (label, mean, std, max, shipped) in [
        ("work", 17.97, 22.22, 256, WORK_PARETO),
        ("profit", 3.66, 3.20, 16, PROFIT_PARETO),
    ] {
        let Some(fit) = calibrate_pareto(mean, std, max) else {
            eprintln!(
                "{label}: no Pareto parameters reach mean {mean} and std {std} on [1, {max}]"
            );
            std::process::exit(1);
        };
        let (em, es) = truncated_pareto_moments(fit, max);
        let (sm, ss) = sampled_moments(fit, max);
        println!(
            "{label}: shape {:.8} scale {:.8} (shipped {:.8} / {:.8})",
            fit.shape, fit.scale, shipped.shape, shipped.scale
        );
        println!("  target mean {mean:.2} std {std:.2}");
        println!("  exact  mean {em:.4} std {es:.4}");
        println!("  {DRAWS} draws: mean {sm:.4} std {ss:.4}");
    }
}
