//! Bracketing bisection for strictly monotone scalar functions.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no bracket for target {target}: function never crossed it (last probe x = {last_x})")]
    NoBracket { target: f64, last_x: f64 },
    #[error("bisection did not reach tolerance in {iters} iterations (bracket [{lo}, {hi}])")]
    MaxIters { iters: usize, lo: f64, hi: f64 },
    #[error("invalid root-finding input: {0}")]
    InvalidInput(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

/// A function declared strictly monotone on `[lower_bound, ∞)`.
pub struct MonotoneFn<F> {
    f: F,
    direction: Direction,
    lower_bound: f64,
}

impl<F: Fn(f64) -> f64> MonotoneFn<F> {
    pub fn new(f: F, direction: Direction, lower_bound: f64) -> Self {
        MonotoneFn {
            f,
            direction,
            lower_bound,
        }
    }

    pub fn increasing(f: F, lower_bound: f64) -> Self {
        Self::new(f, Direction::Increasing, lower_bound)
    }

    pub fn decreasing(f: F, lower_bound: f64) -> Self {
        Self::new(f, Direction::Decreasing, lower_bound)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_x: f64,
    pub abs_f: f64,
    pub max_iters: usize,
}

impl Tolerance {
    pub const DEFAULT_MAX_ITERS: usize = 200;

    /// `abs_x = 1e-9 · x_scale`, `abs_f = 1e-9 · f_scale`, 200 iterations.
    pub fn relative(x_scale: f64, f_scale: f64) -> Self {
        Tolerance {
            abs_x: 1e-9 * x_scale.abs().max(f64::MIN_POSITIVE),
            abs_f: 1e-9 * f_scale.abs().max(f64::MIN_POSITIVE),
            max_iters: Self::DEFAULT_MAX_ITERS,
        }
    }

    fn validate(&self) -> Result<(), RootError> {
        if !(self.abs_x > 0.0) || !(self.abs_f > 0.0) || self.max_iters == 0 {
            return Err(RootError::InvalidInput(
                "tolerances must be positive and max_iters >= 1",
            ));
        }
        Ok(())
    }
}

/// Result of [`find_root`]: the estimate and the final bracket around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Doubling limit for the outward bracket search, as a power of two.
const MAX_DOUBLINGS: i32 = 60;
/// Enough halvings to underflow any positive f64 offset.
const MAX_HALVINGS: usize = 1100;

/// Finds `x` with `f(x) = target` and reports the bracket it came from.
///
/// The bracket is grown geometrically from `seed`: outward by doubling the
/// offset from the lower bound (up to `2^60` times), or inward by halving it
/// towards the lower bound.
pub fn find_root<F: Fn(f64) -> f64>(
    f: &MonotoneFn<F>,
    target: f64,
    seed: f64,
    tol: Tolerance,
) -> Result<Root, RootError> {
    tol.validate()?;
    let lb = f.lower_bound;
    if !(seed > lb) || !seed.is_finite() || !target.is_finite() {
        return Err(RootError::InvalidInput(
            "seed must be finite and above the lower bound",
        ));
    }
    let sign = f.direction.sign();
    // h is increasing in x and vanishes at the root.
    let h = |x: f64| sign * (f.eval(x) - target);

    let h_seed = h(seed);
    if h_seed == 0.0 {
        return Ok(Root {
            x: seed,
            lo: seed,
            hi: seed,
            iterations: 0,
        });
    }

    let (mut lo, mut hi) = if h_seed < 0.0 {
        let span = seed - lb;
        let mut lo = seed;
        let mut hi = None;
        for k in 1..=MAX_DOUBLINGS {
            let x = lb + span * 2f64.powi(k);
            let hx = h(x);
            if hx >= 0.0 {
                hi = Some(x);
                break;
            }
            lo = x;
        }
        match hi {
            Some(hi) => (lo, hi),
            None => return Err(RootError::NoBracket { target, last_x: lo }),
        }
    } else {
        let h_lb = h(lb);
        if h_lb > 0.0 || h_lb.is_nan() {
            return Err(RootError::NoBracket { target, last_x: lb });
        }
        if h_lb == 0.0 {
            return Ok(Root {
                x: lb,
                lo: lb,
                hi: lb,
                iterations: 0,
            });
        }
        let mut hi = seed;
        let mut lo = lb;
        for _ in 0..MAX_HALVINGS {
            let x = lb + (hi - lb) / 2.0;
            if x == hi || x == lb {
                break;
            }
            if h(x) <= 0.0 {
                lo = x;
                break;
            }
            hi = x;
        }
        (lo, hi)
    };

    let abs_f = tol.abs_f;
    for iter in 1..=tol.max_iters {
        if hi - lo <= tol.abs_x {
            return Ok(Root {
                x: 0.5 * (lo + hi),
                lo,
                hi,
                iterations: iter - 1,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket exhausted at machine precision
            return Ok(Root {
                x: mid.clamp(lo, hi),
                lo,
                hi,
                iterations: iter - 1,
            });
        }
        let hm = h(mid);
        if hm.abs() <= abs_f {
            return Ok(Root {
                x: mid,
                lo,
                hi,
                iterations: iter,
            });
        }
        if hm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol.abs_x {
        return Ok(Root {
            x: 0.5 * (lo + hi),
            lo,
            hi,
            iterations: tol.max_iters,
        });
    }
    Err(RootError::MaxIters {
        iters: tol.max_iters,
        lo,
        hi,
    })
}

/// [`find_root`] returning only the abscissa.
pub fn bracket_then_bisect<F: Fn(f64) -> f64>(
    f: &MonotoneFn<F>,
    target: f64,
    seed: f64,
    tol: Tolerance,
) -> Result<f64, RootError> {
    find_root(f, target, seed, tol).map(|r| r.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tight() -> Tolerance {
        Tolerance {
            abs_x: 1e-12,
            abs_f: 1e-14,
            max_iters: 200,
        }
    }

    #[test]
    fn linear_decreasing() {
        let f = MonotoneFn::decreasing(|x| -x, 0.0);
        let x = bracket_then_bisect(&f, -5.0, 1.0, tight()).unwrap();
        assert!((x - 5.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_half_life() {
        let f = MonotoneFn::decreasing(|x: f64| (-x).exp(), 0.0);
        let x = bracket_then_bisect(&f, 0.5, 1.0, tight()).unwrap();
        assert!((x - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn root_at_lower_bound() {
        let f = MonotoneFn::decreasing(|x| 3.0 - x, 0.0);
        assert_eq!(bracket_then_bisect(&f, 3.0, 10.0, tight()).unwrap(), 0.0);
    }

    #[test]
    fn no_bracket_when_target_unreachable() {
        let f = MonotoneFn::decreasing(|x: f64| (-x).exp(), 0.0);
        assert!(matches!(
            bracket_then_bisect(&f, -1.0, 1.0, tight()),
            Err(RootError::NoBracket { .. })
        ));
        assert!(matches!(
            bracket_then_bisect(&f, 2.0, 1.0, tight()),
            Err(RootError::NoBracket { .. })
        ));
    }

    #[test]
    fn max_iters_reported() {
        let f = MonotoneFn::increasing(|x| x, 0.0);
        let tol = Tolerance {
            abs_x: 1e-300,
            abs_f: 1e-300,
            max_iters: 3,
        };
        assert!(matches!(
            bracket_then_bisect(&f, std::f64::consts::PI, 1.0, tol),
            Err(RootError::MaxIters { .. })
        ));
    }

    #[test]
    fn invalid_inputs() {
        let f = MonotoneFn::increasing(|x| x, 0.0);
        assert!(bracket_then_bisect(&f, 1.0, 0.0, tight()).is_err());
        let bad = Tolerance {
            abs_x: 0.0,
            ..tight()
        };
        assert!(bracket_then_bisect(&f, 1.0, 1.0, bad).is_err());
    }

    proptest! {
        #[test]
        fn result_lies_in_straddling_bracket(
            a in 0.01f64..10.0,
            c in -50.0f64..50.0,
            target in -100.0f64..100.0,
            seed in 1e-3f64..1e3,
        ) {
            // f(x) = a x + c on [lb, ∞) with the target reachable.
            let lb = ((target - c) / a - 5.0).min(0.0);
            let seed = lb + seed;
            let f = MonotoneFn::increasing(move |x| a * x + c, lb);
            let r = find_root(&f, target, seed, Tolerance::relative(1.0, 1.0)).unwrap();
            prop_assert!(r.lo <= r.x && r.x <= r.hi);
            prop_assert!(f.eval(r.lo) <= target + 1e-9 && f.eval(r.hi) >= target - 1e-9);
            prop_assert!((r.x - (target - c) / a).abs() < 1e-6);
            let again = find_root(&f, target, seed, Tolerance::relative(1.0, 1.0)).unwrap();
            prop_assert_eq!(r, again);
        }
    }
}
