//! Mass, volume, plunger travel and fill-time conversions.
//!
//! Units used throughout the crate: grams, cubic centimetres (= millilitres),
//! millimetres and seconds. The syringe is modelled as a rigid cylinder, so a
//! plunger travel `d` displaces `d * pi * r^2` cubic millimetres of fluid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Density of water at room temperature, g/cm³.
pub const WATER_DENSITY: f64 = 1.0;
/// Dynamic viscosity of water at room temperature, Pa·s.
pub const WATER_VISCOSITY: f64 = 1.0e-3;
/// Density of Galinstan, g/cm³.
pub const GALINSTAN_DENSITY: f64 = 6.44;
/// Dynamic viscosity of Galinstan, Pa·s.
pub const GALINSTAN_VISCOSITY: f64 = 24.0e-4;

/// Device mass with empty receptacles, grams.
pub const DEVICE_EMPTY_MASS: f64 = 130.0;
/// Maximum total mass the structure supports, grams.
pub const DEVICE_MAX_TOTAL_MASS: f64 = 902.8;
/// Pushrod injection speed, mm/s.
pub const PUSHROD_SPEED: f64 = 60.0;

const MM3_PER_CM3: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("{quantity} must be non-negative and finite, got {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error("invalid liquid: {0}")]
    InvalidLiquid(String),
    #[error("invalid actuator geometry: {0}")]
    InvalidGeometry(String),
}

pub type Result<T> = std::result::Result<T, FluidError>;

pub(crate) fn non_negative(quantity: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(FluidError::Domain { quantity, value })
    }
}

/// A working fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Liquid {
    pub name: String,
    /// g/cm³
    pub density: f64,
    /// Pa·s. Stored for reporting; the kinematics ignore it.
    pub viscosity: f64,
}

impl Liquid {
    pub fn new(name: impl Into<String>, density: f64, viscosity: f64) -> Result<Self> {
        let liquid = Self {
            name: name.into(),
            density,
            viscosity,
        };
        liquid.validate()?;
        Ok(liquid)
    }

    pub fn water() -> Self {
        Self {
            name: "water".into(),
            density: WATER_DENSITY,
            viscosity: WATER_VISCOSITY,
        }
    }

    pub fn galinstan() -> Self {
        Self {
            name: "galinstan".into(),
            density: GALINSTAN_DENSITY,
            viscosity: GALINSTAN_VISCOSITY,
        }
    }

    /// Looks up one of the built-in liquids by (case-insensitive) name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "water" => Some(Self::water()),
            "galinstan" => Some(Self::galinstan()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(FluidError::InvalidLiquid("name is empty".into()));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(FluidError::InvalidLiquid(format!(
                "density must be positive, got {}",
                self.density
            )));
        }
        if !(self.viscosity.is_finite() && self.viscosity > 0.0) {
            return Err(FluidError::InvalidLiquid(format!(
                "viscosity must be positive, got {}",
                self.viscosity
            )));
        }
        Ok(())
    }
}

/// Syringe and receptacle layout of the device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorGeometry {
    /// mm
    pub plunger_radius: f64,
    /// mm/s, same for injection and withdrawal
    pub pushrod_speed: f64,
    /// mm from the grip
    pub receptacle_near_pos: f64,
    /// mm from the grip
    pub receptacle_far_pos: f64,
    /// mL per receptacle
    pub receptacle_capacity: f64,
    /// g
    pub device_empty_mass: f64,
    /// g
    pub max_total_mass: f64,
}

impl Default for ActuatorGeometry {
    fn default() -> Self {
        Self {
            plunger_radius: 10.0,
            pushrod_speed: PUSHROD_SPEED,
            receptacle_near_pos: 0.0,
            receptacle_far_pos: 120.0,
            receptacle_capacity: 50.0,
            device_empty_mass: DEVICE_EMPTY_MASS,
            max_total_mass: DEVICE_MAX_TOTAL_MASS,
        }
    }
}

impl ActuatorGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FluidError::InvalidGeometry(msg));
        let all = [
            self.plunger_radius,
            self.pushrod_speed,
            self.receptacle_near_pos,
            self.receptacle_far_pos,
            self.receptacle_capacity,
            self.device_empty_mass,
            self.max_total_mass,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all fields must be finite".into());
        }
        if self.plunger_radius <= 0.0 {
            return bad(format!("plunger_radius must be positive, got {}", self.plunger_radius));
        }
        if self.pushrod_speed <= 0.0 {
            return bad(format!("pushrod_speed must be positive, got {}", self.pushrod_speed));
        }
        if self.receptacle_far_pos <= self.receptacle_near_pos {
            return bad(format!(
                "receptacle_far_pos ({}) must exceed receptacle_near_pos ({})",
                self.receptacle_far_pos, self.receptacle_near_pos
            ));
        }
        if self.receptacle_capacity <= 0.0 {
            return bad(format!(
                "receptacle_capacity must be positive, got {}",
                self.receptacle_capacity
            ));
        }
        if self.device_empty_mass < 0.0 || self.device_empty_mass >= self.max_total_mass {
            return bad(format!(
                "device_empty_mass ({}) must be non-negative and below max_total_mass ({})",
                self.device_empty_mass, self.max_total_mass
            ));
        }
        Ok(())
    }

    /// Plunger cross-section, mm².
    pub fn plunger_area(&self) -> f64 {
        PI * self.plunger_radius * self.plunger_radius
    }

    /// Volume displaced per second of pushrod motion, mL/s.
    pub fn flow_rate(&self) -> f64 {
        self.pushrod_speed * self.plunger_area() / MM3_PER_CM3
    }

    /// Fluid payload the structure can carry on top of the empty device, grams.
    pub fn payload_limit(&self) -> f64 {
        self.max_total_mass - self.device_empty_mass
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.receptacle_near_pos + self.receptacle_far_pos)
    }

    pub fn span(&self) -> f64 {
        self.receptacle_far_pos - self.receptacle_near_pos
    }
}

/// `V = m / rho`, cm³.
pub fn volume_for_mass(mass: f64, liquid: &Liquid) -> Result<f64> {
    Ok(non_negative("mass", mass)? / liquid.density)
}

/// `m = V * rho`, grams.
pub fn mass_for_volume(volume: f64, liquid: &Liquid) -> Result<f64> {
    Ok(non_negative("volume", volume)? * liquid.density)
}

/// Plunger travel needed to displace `volume` cm³, mm.
pub fn plunger_travel(volume: f64, geometry: &ActuatorGeometry) -> Result<f64> {
    Ok(non_negative("volume", volume)? * MM3_PER_CM3 / geometry.plunger_area())
}

/// Time for the pushrod to displace `volume` cm³, seconds.
pub fn fill_duration(volume: f64, geometry: &ActuatorGeometry) -> Result<f64> {
    Ok(plunger_travel(volume, geometry)? / geometry.pushrod_speed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r10() -> ActuatorGeometry {
        ActuatorGeometry::default()
    }

    #[test]
    fn volume_for_mass_examples() {
        assert_eq!(volume_for_mass(0.0, &Liquid::water()).unwrap(), 0.0);
        assert_eq!(volume_for_mass(50.0, &Liquid::water()).unwrap(), 50.0);
        let v = volume_for_mass(50.0, &Liquid::galinstan()).unwrap();
        assert!((v - 7.764).abs() < 1e-3, "{v}");
    }

    #[test]
    fn negative_inputs_are_domain_errors() {
        assert!(matches!(
            volume_for_mass(-1.0, &Liquid::water()),
            Err(FluidError::Domain { quantity: "mass", .. })
        ));
        assert!(mass_for_volume(-0.5, &Liquid::water()).is_err());
        assert!(plunger_travel(-0.5, &r10()).is_err());
        assert!(fill_duration(f64::NAN, &r10()).is_err());
    }

    #[test]
    fn mass_for_volume_examples() {
        assert_eq!(mass_for_volume(0.0, &Liquid::galinstan()).unwrap(), 0.0);
        assert_eq!(mass_for_volume(50.0, &Liquid::water()).unwrap(), 50.0);
        let m = mass_for_volume(7.764, &Liquid::galinstan()).unwrap();
        assert!((m - 50.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn travel_and_duration_examples() {
        let g = r10();
        assert_eq!(plunger_travel(0.0, &g).unwrap(), 0.0);
        assert!((plunger_travel(50.0, &g).unwrap() - 159.155).abs() < 1e-2);
        assert!((plunger_travel(7.764, &g).unwrap() - 24.713).abs() < 1e-2);
        assert_eq!(fill_duration(0.0, &g).unwrap(), 0.0);
        assert!((fill_duration(50.0, &g).unwrap() - 2.653).abs() < 1e-3);
        assert!((fill_duration(7.764, &g).unwrap() - 0.412).abs() < 1e-3);
    }

    #[test]
    fn flow_rate_matches_duration() {
        let g = r10();
        let d = fill_duration(12.5, &g).unwrap();
        assert!((12.5 / g.flow_rate() - d).abs() < 1e-12);
    }

    #[test]
    fn liquid_validation() {
        assert!(Liquid::new("x", 0.0, 1.0).is_err());
        assert!(Liquid::new("x", 1.0, -1.0).is_err());
        assert!(Liquid::new("", 1.0, 1.0).is_err());
        assert!(Liquid::new("oil", 0.9, 0.05).is_ok());
        assert_eq!(Liquid::by_name("Galinstan"), Some(Liquid::galinstan()));
        assert_eq!(Liquid::by_name("mercury"), None);
    }

    #[test]
    fn geometry_validation() {
        assert!(r10().validate().is_ok());
        let mut g = r10();
        g.receptacle_far_pos = g.receptacle_near_pos;
        assert!(g.validate().is_err());
        let mut g = r10();
        g.device_empty_mass = 1000.0;
        assert!(g.validate().is_err());
        let mut g = r10();
        g.plunger_radius = 0.0;
        assert!(g.validate().is_err());
    }
}
