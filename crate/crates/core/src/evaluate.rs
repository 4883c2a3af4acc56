//! Stability limits of given placements, baselines, and robustness under
//! localization noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::RateFunction;
use crate::solver1d::{Placement, SolveError};

/// Identifier of the generator behind every seeded computation in this crate.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Packet-level traffic description; `q = λB/L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Packets generated per second over the whole area.
    pub packet_rate: f64,
    /// Mean packet size in bits.
    pub mean_packet_bits: f64,
    pub length: f64,
}

impl TrafficModel {
    pub fn new(packet_rate: f64, mean_packet_bits: f64, length: f64) -> Result<Self, SolveError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(packet_rate.is_finite() && packet_rate >= 0.0) || !ok(mean_packet_bits) || !ok(length)
        {
            return Err(SolveError::Domain(
                "traffic model needs non-negative rate and positive size and length".into(),
            ));
        }
        Ok(TrafficModel {
            packet_rate,
            mean_packet_bits,
            length,
        })
    }

    /// Traffic producing normalized load `q` (bit/s per m).
    pub fn from_load(q: f64, mean_packet_bits: f64, length: f64) -> Result<Self, SolveError> {
        Self::new(q * length / mean_packet_bits, mean_packet_bits, length)
    }

    pub fn load(&self) -> f64 {
        self.packet_rate * self.mean_packet_bits / self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementLimit {
    pub q_sup: f64,
    /// Zero-based index into the spacings of the binding link.
    pub bottleneck: usize,
}

/// Largest load for which every link carries at most its capacity.
///
/// Link `i` (from node `i` to `i-1`) carries the traffic collected beyond
/// the midpoint of its endpoints, `q (L - (x_{i-1} + x_i)/2)`.
pub fn qsup_of_placement(placement: &Placement, rate: &RateFunction) -> PlacementLimit {
    let length = placement.length();
    let mut best = PlacementLimit {
        q_sup: f64::INFINITY,
        bottleneck: 0,
    };
    let mut x_prev = 0.0;
    for (i, &d) in placement.distances().iter().enumerate() {
        let x = x_prev + d;
        let carried = length - 0.5 * (x_prev + x);
        x_prev = x;
        if carried <= 0.0 {
            continue;
        }
        let capacity = rate.eval(d);
        if capacity <= 0.0 {
            return PlacementLimit {
                q_sup: 0.0,
                bottleneck: i,
            };
        }
        let q = capacity / carried;
        if q < best.q_sup {
            best = PlacementLimit {
                q_sup: q,
                bottleneck: i,
            };
        }
    }
    best
}

/// Evenly spaced placement `d_i = L/N`.
pub fn constant_placement(n: usize, length: f64) -> Result<Placement, SolveError> {
    if n == 0 {
        return Err(SolveError::Domain("need at least one node".into()));
    }
    let d = length / n as f64;
    let mut distances = vec![d; n];
    let head: f64 = distances[..n - 1].iter().sum();
    distances[n - 1] = length - head;
    Placement::with_length(distances, length)
}

/// Per-node throughput `δ = q/N`.
pub fn tradeoff(q: f64, n: usize) -> f64 {
    q / n as f64
}

/// Stability limit of a conventional layout: `n_l` seafloor collectors, each
/// feeding a vertical chain of `n_v` relays up a water column of depth `depth`.
pub fn vertical_qsup(rate: &RateFunction, n_l: usize, n_v: usize, depth: f64, length: f64) -> f64 {
    n_l as f64 * rate.eval(depth / n_v as f64) / length
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbStats {
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub rng: String,
    pub nominal_q_sup: f64,
    pub mean_q_sup: f64,
    pub std_q_sup: f64,
    pub mean_delta: f64,
}

/// Default Monte Carlo trial count.
pub const DEFAULT_TRIALS: usize = 10_000;

fn perturbed_qsup(
    positions: &[f64],
    length: f64,
    rate: &RateFunction,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = positions.len() - 1;
    let mut xs = positions.to_vec();
    // interior relays x_2..x_{N-1}; x_0, x_1 and x_N stay put
    for x in xs.iter_mut().take(n).skip(2) {
        *x = (*x + noise.sample(rng)).clamp(0.0, length);
    }
    xs.sort_by(f64::total_cmp);
    xs[0] = 0.0;
    xs[n] = length;
    let distances: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let placement = Placement::with_length(distances, length).expect("repaired placement is valid");
    crate::evaluate::qsup_of_placement(&placement, rate).q_sup
}

/// Monte Carlo estimate of the stability limit when interior relays are
/// displaced by independent zero-mean Gaussian errors of standard deviation
/// `sigma`.
///
/// Trial `k` draws from its own ChaCha8 stream `(seed, k)`, so the result is
/// bit-reproducible regardless of thread scheduling.
pub fn perturb_eval(
    placement: &Placement,
    rate: &RateFunction,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<PerturbStats, SolveError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(SolveError::Domain(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    if trials == 0 {
        return Err(SolveError::Domain("need at least one trial".into()));
    }
    let n = placement.len();
    let nominal = qsup_of_placement(placement, rate).q_sup;
    let stats = |mean: f64, std: f64| PerturbStats {
        sigma,
        trials,
        seed,
        rng: RNG_ALGORITHM.to_string(),
        nominal_q_sup: nominal,
        mean_q_sup: mean,
        std_q_sup: std,
        mean_delta: tradeoff(mean, n),
    };
    if n < 3 || sigma == 0.0 {
        return Ok(stats(nominal, 0.0));
    }

    let positions = placement.positions();
    let length = placement.length();
    let noise = Normal::new(0.0, sigma).expect("sigma validated");
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            perturbed_qsup(&positions, length, rate, &noise, &mut rng)
        })
        .collect();

    let mean = samples.iter().sum::<f64>() / trials as f64;
    let std = if trials > 1 {
        let var = samples.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    Ok(stats(mean, std))
}
