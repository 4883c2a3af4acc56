//! Globally optimal relay placement for seafloor optical wireless networks.
//!
//! Relays on a line (or a rectangular grid) forward sensor traffic towards a
//! sink over optical links whose rate decays with distance. The crate
//! computes the placement that maximizes the stability region of the
//! resulting queueing network, evaluates arbitrary placements and baselines
//! against it, and checks the analytic limits with a packet-level simulator.
//!
//! ```
//! use sown_core::{solve, Preset, RateFunction};
//!
//! let rate = RateFunction::preset(Preset::Blue);
//! let best = solve(&rate, 10, 500.0, None).unwrap();
//! assert!(best.q_sup < rate.at_zero() / 500.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod evaluate;
pub mod scalar;
pub mod simqueue;
pub mod solver1d;
pub mod solver2d;

pub use channel::{
    fec_rate, shannon_rate, snr, validate_rate_assumption, ChannelError, ChannelParams,
    FecRateParams, Preset, RateFunction, ShannonRateParams, ValidationReport,
};
pub use evaluate::{
    constant_placement, perturb_eval, qsup_of_placement, tradeoff, vertical_qsup, PerturbStats,
    PlacementLimit, TrafficModel,
};
pub use scalar::{bracket_then_bisect, Direction, MonotoneFn, RootError, Tolerance};
pub use simqueue::{
    simulate, stability_probe, ArrivalProcess, PacketSize, ProbeOptions, ProbeResult, QueueStats,
    SimConfig, SimError,
};
pub use solver1d::{
    coverage, decay_certificate, g, g_inv, gamma, l_zero, q_zero, solve, solve_subproblem, Branch,
    Placement, SolveError, SolveResult, SubproblemResult,
};
pub use solver2d::{
    constant_grid, grid_qsup, solve_2d, solve_2d_with_nl, Grid2D, Grid2DError, Grid2DResult,
};
