//! Layered run configuration: built-in preset, preset directory, config file,
//! then command-line flags, each overriding the last.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sown_core::{
    validate_rate_assumption, ChannelParams, FecRateParams, Preset, RateFunction, ShannonRateParams,
};
use toml::{Table, Value};

use crate::error::CliError;

/// Environment variable naming a directory of `<preset>.toml` files.
pub const PRESET_DIR_VAR: &str = "SOWN_PRESET_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    Shannon,
    Fec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every key accepted in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub rate_model: RateModel,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "H")]
    pub height: f64,
    #[serde(rename = "N_H")]
    pub n_h: usize,
    pub tol_q: Option<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub format: Format,
    pub output: Option<PathBuf>,

    #[serde(rename = "transmit_power_W")]
    pub transmit_power_w: f64,
    #[serde(rename = "noise_power_W")]
    pub noise_power_w: f64,
    pub aperture_diameter_m: f64,
    pub misalignment_deg: f64,
    pub half_beamwidth_deg: f64,
    pub attenuation_per_m: f64,
    pub epsilon_m: f64,
    #[serde(rename = "bandwidth_Hz")]
    pub bandwidth_hz: f64,
    pub attenuation_exponent: f64,
    pub geometric_exponent: f64,

    pub modulation_bits_per_symbol: Option<u32>,
    pub code_rate: Option<f64>,
    pub snr_threshold: Option<f64>,
    pub scaled_gain: Option<f64>,
}

fn defaults(preset: Preset) -> Table {
    let p = ShannonRateParams::preset(preset);
    let c = p.channel;
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    put("preset", Value::String(preset.name().into()));
    put("rate_model", Value::String("shannon".into()));
    put("N", Value::Integer(10));
    put("L", Value::Float(500.0));
    put("H", Value::Float(500.0));
    put("N_H", Value::Integer(5));
    put("sigma", Value::Float(1.0));
    put("trials", Value::Integer(10_000));
    put("seed", Value::Integer(0));
    put("format", Value::String("csv".into()));
    put("transmit_power_W", Value::Float(c.transmit_power_w));
    put("noise_power_W", Value::Float(c.noise_power_w));
    put("aperture_diameter_m", Value::Float(c.aperture_diameter_m));
    put("misalignment_deg", Value::Float(c.misalignment_deg));
    put("half_beamwidth_deg", Value::Float(c.half_beamwidth_deg));
    put("attenuation_per_m", Value::Float(c.attenuation_per_m));
    put("epsilon_m", Value::Float(c.epsilon_m));
    put("bandwidth_Hz", Value::Float(p.bandwidth_hz));
    put("attenuation_exponent", Value::Float(c.attenuation_exponent));
    put("geometric_exponent", Value::Float(c.geometric_exponent));
    t
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse::<Table>().map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Base table for a preset name: a file in the preset directory wins over
/// the built-in set of the same name.
fn preset_table(name: &str) -> Result<Table, CliError> {
    let builtin = name.parse::<Preset>().ok();
    if let Some(dir) = std::env::var_os(PRESET_DIR_VAR) {
        let path = Path::new(&dir).join(format!("{name}.toml"));
        if path.is_file() {
            let mut base = defaults(builtin.unwrap_or(Preset::Blue));
            base.extend(read_table(&path)?);
            base.insert("preset".into(), Value::String(name.into()));
            return Ok(base);
        }
    }
    builtin
        .map(defaults)
        .ok_or_else(|| CliError::Config(format!("unknown preset '{name}'")))
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to
/// a bare string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got '{s}'")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

impl RunConfig {
    /// Resolves the configuration from an optional file and flag overrides.
    pub fn resolve(file: Option<&Path>, overrides: Table) -> Result<Self, CliError> {
        let mut layer = match file {
            Some(path) => read_table(path)?,
            None => Table::new(),
        };
        layer.extend(overrides);
        let name = match layer.get("preset") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                return Err(CliError::Config(format!(
                    "preset must be a string, got {other}"
                )))
            }
            None => "blue".to_string(),
        };
        let mut table = preset_table(&name)?;
        table.extend(layer);
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.n == 0 || self.n_h == 0 {
            return Err(CliError::Config("N and N_H must be at least 1".into()));
        }
        for (name, v) in [("L", self.length), ("H", self.height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(CliError::Config(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if let Some(t) = self.tol_q {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("tol_q must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn shannon_params(&self) -> ShannonRateParams {
        ShannonRateParams {
            channel: ChannelParams {
                transmit_power_w: self.transmit_power_w,
                noise_power_w: self.noise_power_w,
                aperture_diameter_m: self.aperture_diameter_m,
                misalignment_deg: self.misalignment_deg,
                half_beamwidth_deg: self.half_beamwidth_deg,
                attenuation_per_m: self.attenuation_per_m,
                epsilon_m: self.epsilon_m,
                attenuation_exponent: self.attenuation_exponent,
                geometric_exponent: self.geometric_exponent,
            },
            bandwidth_hz: self.bandwidth_hz,
        }
    }

    pub fn fec_params(&self) -> Result<FecRateParams, CliError> {
        let missing: Vec<&str> = [
            (
                "modulation_bits_per_symbol",
                self.modulation_bits_per_symbol.is_none(),
            ),
            ("code_rate", self.code_rate.is_none()),
            ("snr_threshold", self.snr_threshold.is_none()),
            ("scaled_gain", self.scaled_gain.is_none()),
        ]
        .into_iter()
        .filter_map(|(k, absent)| absent.then_some(k))
        .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "rate_model = \"fec\" needs {}",
                missing.join(", ")
            )));
        }
        Ok(FecRateParams {
            modulation_bits_per_symbol: self.modulation_bits_per_symbol.unwrap_or_default(),
            code_rate: self.code_rate.unwrap_or_default(),
            snr_threshold: self.snr_threshold.unwrap_or_default(),
            scaled_gain: self.scaled_gain.unwrap_or_default(),
            attenuation_per_m: self.attenuation_per_m,
            epsilon_m: self.epsilon_m,
            geometric_exponent: self.geometric_exponent,
        })
    }

    /// Builds the rate function and checks it is decreasing and convex.
    pub fn rate(&self) -> Result<RateFunction, CliError> {
        let rate = match self.rate_model {
            RateModel::Shannon => RateFunction::shannon(self.shannon_params()),
            RateModel::Fec => RateFunction::fec(self.fec_params()?),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let d_max = 2000f64.max(4.0 * self.length.max(self.height));
        let report = validate_rate_assumption(&rate, d_max, 10_000);
        if !(report.decreasing && report.convex) {
            return Err(CliError::Config(format!(
                "rate function must be decreasing and convex on [0, {d_max}] m (decreasing: {}, convex: {})",
                report.decreasing, report.convex
            )));
        }
        if !report.tail_ok {
            eprintln!("warning: rate at {d_max} m is still above 1% of R(0)");
        }
        Ok(rate)
    }

    /// Short digest of the resolved configuration.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output = None;
        cfg.format = Format::Csv;
        let text = toml::to_string(&cfg).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }
}
