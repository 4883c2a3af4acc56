//! Globally optimal relay spacing on a line.
//!
//! For a fixed normalized load `q` the surplus function
//! `g_q(x) = R(x)/q - x/2` is strictly decreasing, and the placement that
//! covers the longest stretch at that load is built from its inverse by a
//! backward recursion starting at the node farthest from the sink. The
//! covered length shrinks strictly as `q` grows, so the best achievable load
//! for a given area length is found by bisecting on `q` until the coverage
//! matches the length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RateFunction;
use crate::scalar::{find_root, MonotoneFn, RootError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("target {t} exceeds g_q(0) = {g0}")]
    OutOfRange { t: f64, g0: f64 },
    #[error(
        "recursion argument {arg} overshoots g_q(0) = {g0}; rate model violates its assumptions"
    )]
    NumericalInfeasible { arg: f64, g0: f64 },
    #[error("load {q} is not below the threshold q0 = {q0}")]
    WrongBranch { q: f64, q0: f64 },
    #[error("could not bracket the optimal load: {0}")]
    NoBracket(String),
    #[error(transparent)]
    Root(#[from] RootError),
}

fn domain(msg: impl Into<String>) -> SolveError {
    SolveError::Domain(msg.into())
}

/// Node spacings `d_1..d_N`, where `d_1` is the link into the sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    distances: Vec<f64>,
    length: f64,
}

impl Placement {
    /// Relative tolerance on `Σ d_i = L`.
    pub const LENGTH_TOLERANCE: f64 = 1e-6;

    /// Spacings covering exactly `Σ d_i`.
    pub fn new(distances: Vec<f64>) -> Result<Self, SolveError> {
        let length = distances.iter().sum();
        Self::with_length(distances, length)
    }

    pub fn with_length(distances: Vec<f64>, length: f64) -> Result<Self, SolveError> {
        if distances.is_empty() {
            return Err(domain("placement needs at least one node"));
        }
        if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(domain(format!("negative or non-finite spacing {d}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(domain(format!(
                "area length must be positive, got {length}"
            )));
        }
        let total: f64 = distances.iter().sum();
        if (total - length).abs() > Self::LENGTH_TOLERANCE * length {
            return Err(domain(format!(
                "spacings sum to {total}, expected area length {length}"
            )));
        }
        Ok(Placement { distances, length })
    }

    /// Builds spacings from node positions `x_1..x_N` (sink at 0).
    pub fn from_positions(positions: &[f64]) -> Result<Self, SolveError> {
        let mut prev = 0.0;
        let mut distances = Vec::with_capacity(positions.len());
        for &x in positions {
            if x < prev {
                return Err(domain("positions must be non-decreasing and non-negative"));
            }
            distances.push(x - prev);
            prev = x;
        }
        Self::with_length(distances, prev)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Positions `x_0 = 0, x_1, ..., x_N`.
    pub fn positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.distances.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for d in &self.distances {
            acc += d;
            out.push(acc);
        }
        out
    }
}

/// Shape of the optimal spacing for a given load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Only the farthest node has a non-zero link.
    CaseI,
    /// Every constraint tight, spacings strictly increasing away from the sink.
    CaseII,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::CaseI => "case-i",
            Branch::CaseII => "case-ii",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemResult {
    pub distances: Vec<f64>,
    pub coverage: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub q_sup: f64,
    pub placement: Placement,
    pub q0: f64,
    pub l0: f64,
    pub branch: Branch,
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub bracket_width: f64,
    pub tol_q: f64,
    /// `Σd - L` at the final load, before rescaling onto `[0, L]`.
    pub coverage_residual: f64,
}

fn check_load(q: f64) -> Result<(), SolveError> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("load must be positive and finite, got {q}")))
    }
}

/// Bisect until the bracket is exhausted at machine precision; absolute
/// widths are meaningless here because loads span hundreds of decades.
const FULL_PRECISION: Tolerance = Tolerance {
    abs_x: f64::MIN_POSITIVE,
    abs_f: f64::MIN_POSITIVE,
    max_iters: 2200,
};

/// `g_q(x) = R(x)/q - x/2`.
pub fn g(rate: &RateFunction, q: f64, x: f64) -> Result<f64, SolveError> {
    check_load(q)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(domain(format!("x must be non-negative, got {x}")));
    }
    Ok(rate.eval(x) / q - 0.5 * x)
}

/// Unique `x >= 0` with `g_q(x) = t`, for `t <= R(0)/q`.
pub fn g_inv(rate: &RateFunction, q: f64, t: f64) -> Result<f64, SolveError> {
    check_load(q)?;
    let g0 = rate.at_zero() / q;
    if !t.is_finite() {
        return Err(domain(format!("target must be finite, got {t}")));
    }
    if t > g0 {
        return Err(SolveError::OutOfRange { t, g0 });
    }
    if t == g0 {
        return Ok(0.0);
    }
    let f = MonotoneFn::decreasing(|x| rate.eval(x) / q - 0.5 * x, 0.0);
    let scale = g0.max(t.abs()).max(f64::MIN_POSITIVE);
    Ok(find_root(&f, t, scale, FULL_PRECISION)?.x)
}

/// Load threshold `q0` solving `R(R(0)/q) = R(0)/2`.
///
/// Equivalently `q0 = R(0)/d½` with `R(d½) = R(0)/2`; the defining equation is
/// solved directly here.
pub fn q_zero(rate: &RateFunction) -> Result<f64, SolveError> {
    let r0 = rate.at_zero();
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(domain(format!("R(0) must be positive, got {r0}")));
    }
    let phi = |q: f64| {
        if q <= 0.0 {
            -0.5 * r0
        } else {
            rate.eval(r0 / q) - 0.5 * r0
        }
    };
    let f = MonotoneFn::increasing(phi, 0.0);
    find_root(&f, 0.0, r0, FULL_PRECISION)
        .map(|r| r.x)
        .map_err(|e| SolveError::NoBracket(e.to_string()))
}

/// Length threshold `L0 = g_{q0}^{-1}(0)`: below it one relay is as good as many.
pub fn l_zero(rate: &RateFunction) -> Result<f64, SolveError> {
    let q0 = q_zero(rate)?;
    g_inv(rate, q0, 0.0)
}

/// Relative overshoot of `g_q(0)` tolerated in the recursion and clamped away.
const RECURSION_CLAMP: f64 = 1e-9;

/// Maximum-coverage spacing for `n` nodes at fixed load `q`.
pub fn solve_subproblem(
    rate: &RateFunction,
    q: f64,
    n: usize,
) -> Result<SubproblemResult, SolveError> {
    check_load(q)?;
    if n == 0 {
        return Err(domain("need at least one node"));
    }
    let g0 = rate.at_zero() / q;
    let last = g_inv(rate, q, 0.0)?;

    if last >= g0 {
        let mut distances = vec![0.0; n];
        distances[n - 1] = last;
        return Ok(SubproblemResult {
            distances,
            coverage: last,
            branch: Branch::CaseI,
        });
    }

    let mut distances = vec![0.0; n];
    distances[n - 1] = last;
    let mut downstream = last;
    for i in (0..n - 1).rev() {
        let mut arg = downstream;
        if arg > g0 {
            if arg - g0 <= RECURSION_CLAMP * g0 {
                arg = g0;
            } else {
                return Err(SolveError::NumericalInfeasible { arg, g0 });
            }
        }
        let d = g_inv(rate, q, arg)?;
        distances[i] = d;
        downstream += d;
    }
    Ok(SubproblemResult {
        coverage: downstream,
        distances,
        branch: Branch::CaseII,
    })
}

/// Optimal coverage `x*_{q,N}`.
pub fn coverage(rate: &RateFunction, q: f64, n: usize) -> Result<f64, SolveError> {
    solve_subproblem(rate, q, n).map(|s| s.coverage)
}

/// Contraction factor `γ = 1 + 1/g_q'(0)` of the optimal spacing sequence.
///
/// Only defined in the graded regime `q < q0`.
pub fn gamma(rate: &RateFunction, q: f64) -> Result<f64, SolveError> {
    check_load(q)?;
    let g0 = rate.at_zero() / q;
    if g_inv(rate, q, 0.0)? >= g0 {
        return Err(SolveError::WrongBranch {
            q,
            q0: q_zero(rate)?,
        });
    }
    let slope = rate.derivative(0.0) / q - 0.5;
    Ok(1.0 + 1.0 / slope)
}

/// Which exponential envelope bounds the spacings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayBranch {
    /// `d_i <= γ^{N-i} d_N`
    FromLast,
    /// `d_i <= γ^{N-i-1} d_{N-1}`
    FromSecondLast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub gamma: f64,
    pub branch: DecayBranch,
    /// Largest `d_i / envelope_i` over the bounded indices; at most 1 when the bound holds.
    /// Envelopes are floored at the coordinate rounding level.
    pub worst_ratio: f64,
}

impl DecayCertificate {
    pub fn holds(&self) -> bool {
        self.gamma > 0.0 && self.gamma < 1.0 && self.worst_ratio <= 1.0 + 1e-9
    }
}

/// Checks the exponential decay envelope on graded spacings `distances`
/// optimal at load `q`.
pub fn decay_certificate(
    rate: &RateFunction,
    q: f64,
    distances: &[f64],
) -> Result<DecayCertificate, SolveError> {
    let gamma = gamma(rate, q)?;
    let n = distances.len();
    if n == 0 {
        return Err(domain("empty spacing"));
    }
    // (g^{-1})'(0) = 1 / g'(d_N)
    let d_last = distances[n - 1];
    let slope_at_last = rate.derivative(d_last) / q - 0.5;
    let inv_slope = 1.0 / slope_at_last;
    let (branch, anchor, top) = if inv_slope > -1.0 {
        (DecayBranch::FromLast, d_last, n)
    } else {
        (
            DecayBranch::FromSecondLast,
            if n >= 2 { distances[n - 2] } else { 0.0 },
            n - 1,
        )
    };
    // spacings below this are rounding noise on the node coordinates
    let floor = 64.0 * f64::EPSILON * distances.iter().sum::<f64>();
    let mut worst: f64 = 0.0;
    // 1-based index i runs below `top`; exponent is top - i.
    for i in 1..top {
        let envelope = (gamma.powi((top - i) as i32) * anchor).max(floor);
        let d = distances[i - 1];
        let ratio = if envelope > 0.0 {
            d / envelope
        } else if d > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
    }
    Ok(DecayCertificate {
        gamma,
        branch,
        worst_ratio: worst,
    })
}

/// Upper bound on outward doublings/halvings when bracketing the optimal load.
const MAX_BRACKET_STEPS: usize = 2000;

/// Maximum stability-region load for `n` relays over `[0, length]`, with the
/// spacing that attains it.
///
/// `tol_q` is the absolute width at which the load bisection stops; `None`
/// uses `1e-6` times the constant-spacing seed load.
pub fn solve(
    rate: &RateFunction,
    n: usize,
    length: f64,
    tol_q: Option<f64>,
) -> Result<SolveResult, SolveError> {
    if n == 0 {
        return Err(domain("need at least one node"));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(domain(format!(
            "area length must be positive, got {length}"
        )));
    }
    let q_guess = rate.eval(length / n as f64) * n as f64 / length;
    if !(q_guess.is_finite() && q_guess > 0.0) {
        return Err(domain(format!(
            "rate at the constant spacing {} m is not positive",
            length / n as f64
        )));
    }
    let tol_q = tol_q.unwrap_or(1e-6 * q_guess);
    if !(tol_q.is_finite() && tol_q > 0.0) {
        return Err(domain(format!("tol_q must be positive, got {tol_q}")));
    }

    let covers = |q: f64| -> Result<bool, SolveError> { Ok(coverage(rate, q, n)? >= length) };

    let (mut q_low, mut q_up) = if covers(q_guess)? {
        let mut low = q_guess;
        let mut up = None;
        for _ in 0..MAX_BRACKET_STEPS {
            let q = low * 2.0;
            if !q.is_finite() {
                break;
            }
            if covers(q)? {
                low = q;
            } else {
                up = Some(q);
                break;
            }
        }
        (
            low,
            up.ok_or_else(|| SolveError::NoBracket("coverage never fell below L".into()))?,
        )
    } else {
        let mut up = q_guess;
        let mut low = None;
        for _ in 0..MAX_BRACKET_STEPS {
            let q = up * 0.5;
            if q <= 0.0 {
                break;
            }
            if covers(q)? {
                low = Some(q);
                break;
            }
            up = q;
        }
        (
            low.ok_or_else(|| SolveError::NoBracket("coverage never reached L".into()))?,
            up,
        )
    };

    let mut iterations = 0;
    while q_up - q_low >= tol_q {
        let q = 0.5 * (q_low + q_up);
        if q <= q_low || q >= q_up {
            break;
        }
        if covers(q)? {
            q_low = q;
        } else {
            q_up = q;
        }
        iterations += 1;
    }

    let q_sup = 0.5 * (q_low + q_up);
    let sub = solve_subproblem(rate, q_sup, n)?;
    let coverage_residual = sub.coverage - length;
    let scale = length / sub.coverage;
    let mut distances: Vec<f64> = sub.distances.iter().map(|d| d * scale).collect();
    // pin the total to the area length exactly
    let head: f64 = distances[..n - 1].iter().sum();
    distances[n - 1] = (length - head).max(0.0);
    let placement = Placement::with_length(distances, length)?;

    let q0 = q_zero(rate)?;
    let l0 = g_inv(rate, q0, 0.0)?;
    let branch = if length <= l0 {
        Branch::CaseI
    } else {
        Branch::CaseII
    };
    let gamma = match sub.branch {
        Branch::CaseII => gamma(rate, q_sup).ok(),
        Branch::CaseI => None,
    };

    Ok(SolveResult {
        q_sup,
        placement,
        q0,
        l0,
        branch,
        gamma,
        iterations,
        bracket_width: q_up - q_low,
        tol_q,
        coverage_residual,
    })
}
