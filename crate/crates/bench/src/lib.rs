//! Benchmark fixtures shared by the criterion targets.

use sown_core::{solve, Placement, Preset, RateFunction};

pub const LENGTH: f64 = 500.0;

pub fn blue() -> RateFunction {
    RateFunction::preset(Preset::Blue)
}

/// Optimal blue-light placement over [`LENGTH`].
pub fn optimal(n: usize) -> (Placement, f64) {
    let res = solve(&blue(), n, LENGTH, None).expect("preset solve");
    (res.placement, res.q_sup)
}
