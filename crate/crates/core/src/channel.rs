//! Link-budget models: SNR as a function of inter-node distance and the
//! effective transmission rate built on top of it.
//!
//! Every rate model used by the solvers is wrapped in a [`RateFunction`],
//! an immutable, cheaply clonable handle that can be shared across threads.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be a finite non-negative number, got {0}")]
    NegativeDistance(f64),
    #[error("invalid channel parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown preset `{0}` (expected red, green or blue)")]
    UnknownPreset(String),
}

fn check_distance(d: f64) -> Result<(), ChannelError> {
    if d.is_finite() && d >= 0.0 {
        Ok(())
    } else {
        Err(ChannelError::NegativeDistance(d))
    }
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ChannelError {
    ChannelError::InvalidParameter {
        name,
        value,
        reason,
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, value, "must be finite and strictly positive"))
    }
}

/// Water type / wavelength presets with their beam attenuation coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 650 nm
    Red,
    /// 550 nm
    Green,
    /// 450 nm
    Blue,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Red, Preset::Green, Preset::Blue];

    /// Beam attenuation coefficient K in 1/m.
    pub fn attenuation_per_m(self) -> f64 {
        match self {
            Preset::Red => 3e-1,
            Preset::Green => 7e-2,
            Preset::Blue => 2e-2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Red => "red",
            Preset::Green => "green",
            Preset::Blue => "blue",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "red" => Ok(Preset::Red),
            "green" => Ok(Preset::Green),
            "blue" => Ok(Preset::Blue),
            _ => Err(ChannelError::UnknownPreset(s.to_string())),
        }
    }
}

/// Physical parameters of an optical link.
///
/// Serialized key names match the configuration file format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(rename = "transmit_power_W")]
    pub transmit_power_w: f64,
    #[serde(rename = "noise_power_W")]
    pub noise_power_w: f64,
    pub aperture_diameter_m: f64,
    pub misalignment_deg: f64,
    pub half_beamwidth_deg: f64,
    pub attenuation_per_m: f64,
    pub epsilon_m: f64,
    #[serde(default = "default_attenuation_exponent")]
    pub attenuation_exponent: f64,
    #[serde(default = "default_geometric_exponent")]
    pub geometric_exponent: f64,
}

fn default_attenuation_exponent() -> f64 {
    1.0
}

fn default_geometric_exponent() -> f64 {
    2.0
}

impl ChannelParams {
    /// Default deep-sea parameter set with the attenuation of `preset`.
    pub fn preset(preset: Preset) -> Self {
        ChannelParams {
            transmit_power_w: 0.5,
            noise_power_w: 2e-6,
            aperture_diameter_m: 0.2,
            misalignment_deg: 10.0,
            half_beamwidth_deg: 10.0,
            attenuation_per_m: preset.attenuation_per_m(),
            epsilon_m: 1.0,
            attenuation_exponent: 1.0,
            geometric_exponent: 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        require_positive("transmit_power_W", self.transmit_power_w)?;
        require_positive("noise_power_W", self.noise_power_w)?;
        require_positive("aperture_diameter_m", self.aperture_diameter_m)?;
        require_positive("attenuation_per_m", self.attenuation_per_m)?;
        require_positive("epsilon_m", self.epsilon_m)?;
        require_positive("geometric_exponent", self.geometric_exponent)?;
        let phi = self.misalignment_deg;
        if !(phi.is_finite() && (0.0..90.0).contains(&phi)) {
            return Err(invalid("misalignment_deg", phi, "must lie in [0, 90)"));
        }
        let theta = self.half_beamwidth_deg;
        if !(theta.is_finite() && theta > 0.0 && theta < 90.0) {
            return Err(invalid("half_beamwidth_deg", theta, "must lie in (0, 90)"));
        }
        let beta = self.attenuation_exponent;
        if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
            return Err(invalid("attenuation_exponent", beta, "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Distance-independent gain `P_t D² cos φ / (4 tan² θ P_n)`.
    pub fn gain(&self) -> f64 {
        let cos_phi = self.misalignment_deg.to_radians().cos();
        let tan_theta = self.half_beamwidth_deg.to_radians().tan();
        self.transmit_power_w * self.aperture_diameter_m.powi(2) * cos_phi
            / (4.0 * tan_theta * tan_theta * self.noise_power_w)
    }

    fn snr_unchecked(&self, d: f64) -> f64 {
        snr_with_gain(self, self.gain(), d)
    }
}

fn snr_with_gain(p: &ChannelParams, gain: f64, d: f64) -> f64 {
    let beta = p.attenuation_exponent;
    let decay = if beta == 1.0 { d } else { d.powf(beta) };
    gain * (-p.attenuation_per_m * decay).exp() * (p.epsilon_m + d).powf(-p.geometric_exponent)
}

/// Electrical SNR at distance `d`: `A e^{-K d^β} (ε + d)^{-α}`.
pub fn snr(params: &ChannelParams, d: f64) -> Result<f64, ChannelError> {
    check_distance(d)?;
    params.validate()?;
    Ok(params.snr_unchecked(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShannonRateParams {
    #[serde(flatten)]
    pub channel: ChannelParams,
    #[serde(rename = "bandwidth_Hz")]
    pub bandwidth_hz: f64,
}

impl ShannonRateParams {
    pub fn preset(preset: Preset) -> Self {
        ShannonRateParams {
            channel: ChannelParams::preset(preset),
            bandwidth_hz: 5e8,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.channel.validate()?;
        require_positive("bandwidth_Hz", self.bandwidth_hz)
    }

    fn rate_unchecked(&self, d: f64) -> f64 {
        self.bandwidth_hz * self.channel.snr_unchecked(d).ln_1p()
    }
}

/// Shannon capacity `W ln(1 + SNR(d))` in bit/s (natural logarithm).
pub fn shannon_rate(params: &ShannonRateParams, d: f64) -> Result<f64, ChannelError> {
    check_distance(d)?;
    params.validate()?;
    Ok(params.rate_unchecked(d))
}

/// Rate model for a fixed-SNR-threshold coded link whose symbol rate adapts
/// to the received signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FecRateParams {
    pub modulation_bits_per_symbol: u32,
    pub code_rate: f64,
    pub snr_threshold: f64,
    pub scaled_gain: f64,
    pub attenuation_per_m: f64,
    pub epsilon_m: f64,
    #[serde(default = "default_geometric_exponent")]
    pub geometric_exponent: f64,
}

impl FecRateParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.modulation_bits_per_symbol < 1 {
            return Err(invalid(
                "modulation_bits_per_symbol",
                f64::from(self.modulation_bits_per_symbol),
                "must be at least 1",
            ));
        }
        let eta = self.code_rate;
        if !(eta.is_finite() && eta > 0.0 && eta < 1.0) {
            return Err(invalid("code_rate", eta, "must lie in (0, 1)"));
        }
        require_positive("snr_threshold", self.snr_threshold)?;
        require_positive("scaled_gain", self.scaled_gain)?;
        require_positive("epsilon_m", self.epsilon_m)?;
        require_positive("geometric_exponent", self.geometric_exponent)?;
        let k = self.attenuation_per_m;
        if !(k.is_finite() && k >= 0.0) {
            return Err(invalid("attenuation_per_m", k, "must be non-negative"));
        }
        Ok(())
    }

    fn rate_unchecked(&self, d: f64) -> f64 {
        self.code_rate * f64::from(self.modulation_bits_per_symbol) * self.scaled_gain
            / self.snr_threshold
            * (-self.attenuation_per_m * d).exp()
            * (self.epsilon_m + d).powf(-self.geometric_exponent)
    }
}

/// `η M A' e^{-K d} (ε + d)^{-α} / ζ` in bit/s.
pub fn fec_rate(params: &FecRateParams, d: f64) -> Result<f64, ChannelError> {
    check_distance(d)?;
    params.validate()?;
    Ok(params.rate_unchecked(d))
}

/// Effective transmission rate as a function of link length.
///
/// The solvers assume the wrapped map is strictly decreasing, convex and
/// vanishing at infinity; [`validate_rate_assumption`] checks this
/// numerically but construction does not enforce it.
#[derive(Clone)]
pub struct RateFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl RateFunction {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        RateFunction {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn shannon(params: ShannonRateParams) -> Result<Self, ChannelError> {
        params.validate()?;
        let gain = params.channel.gain();
        Ok(Self::new("shannon", move |d| {
            params.bandwidth_hz * snr_with_gain(&params.channel, gain, d).ln_1p()
        }))
    }

    pub fn fec(params: FecRateParams) -> Result<Self, ChannelError> {
        params.validate()?;
        Ok(Self::new("fec", move |d| params.rate_unchecked(d)))
    }

    /// Shannon rate with the default parameter set for `preset`.
    pub fn preset(preset: Preset) -> Self {
        Self::shannon(ShannonRateParams::preset(preset)).expect("built-in preset is valid")
    }

    /// Rate in bit/s at distance `d` (m). Callers pass `d >= 0`.
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        debug_assert!(d >= 0.0, "rate evaluated at negative distance {d}");
        (self.f)(d)
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Numeric derivative `R'(d)`.
    ///
    /// Central difference with step `max(1e-6, 1e-6 d)`; within one step of
    /// the origin a second-order forward difference is used so the rate is
    /// never evaluated at a negative distance.
    pub fn derivative(&self, d: f64) -> f64 {
        let h = (1e-6 * d).max(1e-6);
        if d >= h {
            (self.eval(d + h) - self.eval(d - h)) / (2.0 * h)
        } else {
            (-3.0 * self.eval(d) + 4.0 * self.eval(d + h) - self.eval(d + 2.0 * h)) / (2.0 * h)
        }
    }

    /// `d ↦ factor · R(d)`.
    pub fn scaled(&self, factor: f64) -> Self {
        let inner = Arc::clone(&self.f);
        RateFunction {
            f: Arc::new(move |d| factor * inner(d)),
            label: format!("{}*{factor}", self.label),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Outcome of a grid scan of a rate function against the standing
/// assumptions (decreasing, convex, vanishing tail).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub d_max: f64,
    pub n_grid: usize,
    pub rate_at_zero: f64,
    /// Largest forward difference `R(d_{k+1}) - R(d_k)`; negative when decreasing.
    pub max_forward_diff: f64,
    /// Smallest second difference on the grid.
    pub min_second_diff: f64,
    pub tail_value: f64,
    pub convexity_tolerance: f64,
    pub tail_threshold: f64,
    pub decreasing: bool,
    pub convex: bool,
    pub tail_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.decreasing && self.convex && self.tail_ok
    }
}

/// Relative tolerance on second differences, as a fraction of `R(0)`.
pub const CONVEXITY_TOLERANCE: f64 = 1e-6;
/// The tail `R(d_max)` is flagged when it exceeds this fraction of `R(0)`.
pub const TAIL_THRESHOLD: f64 = 1e-2;

pub fn validate_rate_assumption(
    rate: &RateFunction,
    d_max: f64,
    n_grid: usize,
) -> ValidationReport {
    assert!(d_max > 0.0 && n_grid >= 3, "need d_max > 0 and n_grid >= 3");
    let step = d_max / (n_grid - 1) as f64;
    let values: Vec<f64> = (0..n_grid).map(|k| rate.eval(k as f64 * step)).collect();

    let max_forward_diff = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_second_diff = values
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .fold(f64::INFINITY, f64::min);

    let r0 = values[0];
    let tail_value = values[n_grid - 1];
    let convexity_tolerance = CONVEXITY_TOLERANCE * r0.abs();
    let tail_threshold = TAIL_THRESHOLD * r0.abs();
    ValidationReport {
        d_max,
        n_grid,
        rate_at_zero: r0,
        max_forward_diff,
        min_second_diff,
        tail_value,
        convexity_tolerance,
        tail_threshold,
        decreasing: max_forward_diff < 0.0,
        convex: min_second_diff >= -convexity_tolerance,
        tail_ok: tail_value.abs() <= tail_threshold,
    }
}
