use rand::Rng;

/// Decides whether the current cycle is an admittance cycle.
pub fn decide_admittance<R: Rng + ?Sized>(rng: &mut R, r: f64) -> bool {
    rng.random_bool(r)
}

/// Reservoir step for the `count`-th unknown arrival of a cycle: it replaces
/// the current admitted candidate with probability `1/count`.
pub fn admit_candidate<R: Rng + ?Sized>(rng: &mut R, count: u32) -> bool {
    assert!(count >= 1, "reservoir count starts at 1");
    count == 1 || rng.random_ratio(1, count)
}
