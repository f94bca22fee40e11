//! Run configuration, read from TOML. Every field has a default, so an empty
//! file (or no file) is a valid configuration.
//!
//! ```toml
//! liquid = "galinstan"            # or a table: { name, density, viscosity }
//!
//! [geometry]
//! plunger_radius = 10.0           # mm
//! receptacle_far_pos = 120.0      # mm from grip
//!
//! [noise]
//! relative_sigma = 0.02
//! step_volume = 0.0126            # mL per step
//!
//! [[catalog]]
//! id = "sword"
//! mass = 40.0
//! com_offset = 110.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControllerConfig;
use crate::fluid::{ActuatorGeometry, FluidError, Liquid};
use crate::harness::catalog::{Catalog, CatalogEntry, CatalogError};
use crate::protocol::Session;
use crate::sim::{NoiseModel, SimError};
use crate::vibration::{ImpactMapping, VibrationBurst, VibrationError, DEFAULT_TRIGGER_THRESHOLD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown liquid `{0}` (expected water or galinstan, or a table with density and viscosity)")]
    UnknownLiquid(String),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Noise(#[from] SimError),
    #[error(transparent)]
    Vibration(#[from] VibrationError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Either a built-in liquid name or a full definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LiquidSpec {
    Named(String),
    Custom(Liquid),
}

impl Default for LiquidSpec {
    fn default() -> Self {
        LiquidSpec::Named("water".into())
    }
}

impl LiquidSpec {
    pub fn resolve(&self) -> Result<Liquid, ConfigError> {
        match self {
            LiquidSpec::Named(name) => Liquid::by_name(name).ok_or_else(|| ConfigError::UnknownLiquid(name.clone())),
            LiquidSpec::Custom(l) => {
                l.validate()?;
                Ok(l.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VibrationConfig {
    /// m/s²
    pub threshold: f64,
    /// Seconds; defaults to the burst duration when absent.
    pub refractory: Option<f64>,
    /// Template for triggered bursts; the amplitude comes from the impact.
    pub burst: VibrationBurst,
    pub impact: ImpactMapping,
}

impl Default for VibrationConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_TRIGGER_THRESHOLD,
            refractory: None,
            burst: VibrationBurst::default(),
            impact: ImpactMapping::default(),
        }
    }
}

impl VibrationConfig {
    pub fn refractory(&self) -> f64 {
        self.refractory.unwrap_or(self.burst.duration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Seconds before an unacknowledged message is resent.
    pub retransmit_interval: f64,
    /// Probability that any single line is lost, each direction.
    pub drop_probability: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            retransmit_interval: Session::DEFAULT_RETRANSMIT_INTERVAL,
            drop_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    /// Seconds between STATE reports.
    pub telemetry_period: f64,
    /// Run near and far strokes at the same time (two independent syringes).
    pub concurrent_strokes: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let c = ControllerConfig::default();
        Self {
            telemetry_period: c.telemetry_period,
            concurrent_strokes: c.concurrent_strokes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Virtual clock quantum, seconds.
    pub tick: f64,
    /// Seconds between SET_TARGET updates while spraying.
    pub spray_update_period: f64,
    /// Idle time simulated after the last event, seconds.
    pub settle_time: f64,
    /// Hard cap on simulated time, seconds.
    pub max_time: f64,
    /// Centre of gravity used for stability runs; receptacle midpoint if absent.
    pub stability_com: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick: 0.001,
            spray_update_period: 0.25,
            settle_time: 0.5,
            max_time: 3600.0,
            stability_com: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub liquid: LiquidSpec,
    pub geometry: ActuatorGeometry,
    pub noise: NoiseModel,
    pub vibration: VibrationConfig,
    pub link: LinkConfig,
    pub device: DeviceConfig,
    pub sim: SimConfig,
    /// Replaces the built-in catalog when non-empty.
    pub catalog: Vec<CatalogEntry>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.liquid.resolve()?;
        self.geometry.validate()?;
        self.noise.validate()?;
        self.vibration.burst.validate()?;
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.vibration.threshold.is_finite()) {
            return invalid("vibration.threshold must be finite".into());
        }
        if self.vibration.refractory().is_nan() || self.vibration.refractory() < 0.0 {
            return invalid("vibration.refractory must be >= 0".into());
        }
        let imp = self.vibration.impact;
        if !(imp.gain.is_finite() && imp.gain >= 0.0 && imp.max_drive.is_finite() && imp.max_drive >= 0.0) {
            return invalid("vibration.impact gain and max_drive must be >= 0".into());
        }
        if self.link.retransmit_interval.is_nan() || self.link.retransmit_interval <= 0.0 {
            return invalid("link.retransmit_interval must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.link.drop_probability) {
            return invalid("link.drop_probability must be in [0, 1)".into());
        }
        if self.device.telemetry_period.is_nan() || self.device.telemetry_period <= 0.0 {
            return invalid("device.telemetry_period must be > 0".into());
        }
        if !(self.sim.tick > 0.0 && self.sim.tick.is_finite()) {
            return invalid("sim.tick must be > 0".into());
        }
        if self.sim.spray_update_period.is_nan() || self.sim.spray_update_period <= 0.0 {
            return invalid("sim.spray_update_period must be > 0".into());
        }
        if !(self.sim.settle_time >= 0.0 && self.sim.max_time > 0.0) {
            return invalid("sim.settle_time must be >= 0 and sim.max_time > 0".into());
        }
        if !self.catalog.is_empty() {
            Catalog::from_entries(self.catalog.clone())?;
        }
        Ok(())
    }

    pub fn liquid(&self) -> Liquid {
        self.liquid.resolve().unwrap_or_else(|_| Liquid::water())
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            liquid: self.liquid(),
            geometry: self.geometry.clone(),
            telemetry_period: self.device.telemetry_period,
            concurrent_strokes: self.device.concurrent_strokes,
        }
    }

    pub fn catalog(&self) -> Result<Catalog, ConfigError> {
        if self.catalog.is_empty() {
            Ok(Catalog::builtin())
        } else {
            Ok(Catalog::from_entries(self.catalog.clone())?)
        }
    }

    pub fn stability_com(&self) -> f64 {
        self.sim.stability_com.unwrap_or(self.geometry.midpoint())
    }
}
