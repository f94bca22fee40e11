//! Turning a requested (mass, centre of gravity) into receptacle fills and
//! actuator transfer plans.
//!
//! The device axis runs from the grip outwards. Two receptacles sit at
//! `receptacle_near_pos` and `receptacle_far_pos`; a target is rendered by the
//! two-point torque balance
//!
//! ```text
//! m_near + m_far                 = mass
//! m_near * x_near + m_far * x_far = mass * com
//! ```
//!
//! The empty device's own mass distribution is not part of the balance.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fluid::{self, fill_duration, mass_for_volume, ActuatorGeometry, FluidError, Liquid};

/// Relative slack for capacity and envelope comparisons, absorbing f64
/// rounding in `m / rho` round-trips.
const LIMIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error("centre of gravity {com} mm lies outside the receptacle span [{near}, {far}] mm")]
    InfeasibleCom { com: f64, near: f64, far: f64 },
    #[error("{receptacle} receptacle needs {volume} mL but holds {capacity} mL; at this centre of gravity at most {max_mass} g can be rendered")]
    Capacity {
        receptacle: Receptacle,
        volume: f64,
        capacity: f64,
        max_mass: f64,
    },
    #[error("total device mass {total} g exceeds the {limit} g structural limit")]
    Envelope { total: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, WeightError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Receptacle {
    Near,
    Far,
}

impl fmt::Display for Receptacle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Receptacle::Near => "near",
            Receptacle::Far => "far",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Inject,
    Withdraw,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Inject => "inject",
            Direction::Withdraw => "withdraw",
        })
    }
}

/// Requested payload mass (g) and centre of gravity (mm from the grip).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTarget {
    pub mass: f64,
    pub com_offset: f64,
}

impl WeightTarget {
    pub fn new(mass: f64, com_offset: f64) -> Self {
        Self { mass, com_offset }
    }
}

/// Fluid volume held by each receptacle, mL.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleFill {
    pub near_volume: f64,
    pub far_volume: f64,
}

impl ReceptacleFill {
    pub const EMPTY: Self = Self {
        near_volume: 0.0,
        far_volume: 0.0,
    };

    pub fn new(near_volume: f64, far_volume: f64) -> Self {
        Self {
            near_volume,
            far_volume,
        }
    }

    pub fn get(&self, receptacle: Receptacle) -> f64 {
        match receptacle {
            Receptacle::Near => self.near_volume,
            Receptacle::Far => self.far_volume,
        }
    }

    pub fn set(&mut self, receptacle: Receptacle, volume: f64) {
        match receptacle {
            Receptacle::Near => self.near_volume = volume,
            Receptacle::Far => self.far_volume = volume,
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.near_volume + self.far_volume
    }

    pub fn is_empty(&self) -> bool {
        self.near_volume == 0.0 && self.far_volume == 0.0
    }

    pub fn fluid_mass(&self, liquid: &Liquid) -> f64 {
        self.total_volume() * liquid.density
    }

    /// Centre of gravity of the fluid payload, or `None` when empty.
    pub fn com_offset(&self, geometry: &ActuatorGeometry) -> Option<f64> {
        let total = self.total_volume();
        (total > 0.0).then(|| {
            (self.near_volume * geometry.receptacle_near_pos + self.far_volume * geometry.receptacle_far_pos) / total
        })
    }

    /// L1 distance in mL.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.near_volume - other.near_volume).abs() + (self.far_volume - other.far_volume).abs()
    }
}

/// One stroke of one syringe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferCommand {
    pub receptacle: Receptacle,
    pub direction: Direction,
    /// Magnitude of the volume change, mL. Always positive.
    pub volume: f64,
    /// Stroke time at pushrod speed, seconds.
    pub duration: f64,
    /// Receptacle level once the stroke completes, mL.
    pub to_volume: f64,
}

/// Ordered actuator commands moving the device from one fill to another.
///
/// With `concurrent` set, the per-receptacle commands may run at the same time
/// on separate syringes; otherwise they run one after another.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    pub commands: Vec<TransferCommand>,
    pub concurrent: bool,
}

impl TransferPlan {
    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn with_concurrency(mut self, concurrent: bool) -> Self {
        self.concurrent = concurrent;
        self
    }

    pub fn total_volume(&self) -> f64 {
        self.commands.iter().map(|c| c.volume).sum()
    }

    /// Time to execute the whole plan at pushrod speed.
    pub fn duration(&self) -> f64 {
        if self.concurrent {
            self.commands.iter().map(|c| c.duration).fold(0.0, f64::max)
        } else {
            self.commands.iter().map(|c| c.duration).sum()
        }
    }

    /// Fill obtained by running every command to completion on `source`.
    pub fn apply(&self, source: ReceptacleFill) -> ReceptacleFill {
        let mut fill = source;
        for c in &self.commands {
            fill.set(c.receptacle, c.to_volume);
        }
        fill
    }
}

/// Receptacle volumes realising `target` with the given liquid.
///
/// A zero-mass target yields an empty fill regardless of `com_offset`.
pub fn split_for_com(target: WeightTarget, liquid: &Liquid, geometry: &ActuatorGeometry) -> Result<ReceptacleFill> {
    let mass = fluid::non_negative("mass", target.mass)?;
    if mass == 0.0 {
        return Ok(ReceptacleFill::EMPTY);
    }
    let (near, far) = (geometry.receptacle_near_pos, geometry.receptacle_far_pos);
    let com = target.com_offset;
    if !com.is_finite() || com < near || com > far {
        return Err(WeightError::InfeasibleCom { com, near, far });
    }

    let far_share = (com - near) / (far - near);
    let far_mass = mass * far_share;
    let near_mass = mass - far_mass;
    let fill = ReceptacleFill::new(near_mass / liquid.density, far_mass / liquid.density);

    let capacity = geometry.receptacle_capacity;
    for receptacle in [Receptacle::Near, Receptacle::Far] {
        let volume = fill.get(receptacle);
        if volume > capacity * (1.0 + LIMIT_SLACK) {
            return Err(WeightError::Capacity {
                receptacle,
                volume,
                capacity,
                max_mass: max_renderable_mass(com, liquid, geometry),
            });
        }
    }
    let total = geometry.device_empty_mass + mass;
    if total > geometry.max_total_mass * (1.0 + LIMIT_SLACK) {
        return Err(WeightError::Envelope {
            total,
            limit: geometry.max_total_mass,
        });
    }
    Ok(fill)
}

/// Largest payload mass renderable at `com` (assumed inside the span).
pub fn max_renderable_mass(com: f64, liquid: &Liquid, geometry: &ActuatorGeometry) -> f64 {
    let far_share = ((com - geometry.receptacle_near_pos) / geometry.span()).clamp(0.0, 1.0);
    let per_receptacle = geometry.receptacle_capacity * liquid.density;
    let mut max_mass = geometry.payload_limit();
    for share in [1.0 - far_share, far_share] {
        if share > 0.0 {
            max_mass = max_mass.min(per_receptacle / share);
        }
    }
    max_mass
}

/// Closest renderable target: the centre of gravity is clamped into the
/// receptacle span, then the mass is capped at what that position allows.
pub fn nearest_feasible(target: WeightTarget, liquid: &Liquid, geometry: &ActuatorGeometry) -> WeightTarget {
    let com = if target.com_offset.is_nan() {
        geometry.midpoint()
    } else {
        target
            .com_offset
            .clamp(geometry.receptacle_near_pos, geometry.receptacle_far_pos)
    };
    let mass = if target.mass.is_nan() { 0.0 } else { target.mass };
    let mass = mass.clamp(0.0, max_renderable_mass(com, liquid, geometry));
    WeightTarget::new(mass, com)
}

/// Accepts `fill` when every receptacle is within capacity and the loaded
/// device stays under the structural limit. Never rescales.
pub fn clamp_to_envelope(fill: ReceptacleFill, liquid: &Liquid, geometry: &ActuatorGeometry) -> Result<ReceptacleFill> {
    let capacity = geometry.receptacle_capacity;
    for receptacle in [Receptacle::Near, Receptacle::Far] {
        let volume = fluid::non_negative("volume", fill.get(receptacle))?;
        if volume > capacity * (1.0 + LIMIT_SLACK) {
            let com = fill.com_offset(geometry).unwrap_or(geometry.midpoint());
            return Err(WeightError::Capacity {
                receptacle,
                volume,
                capacity,
                max_mass: max_renderable_mass(com, liquid, geometry),
            });
        }
    }
    let fluid_mass = mass_for_volume(fill.total_volume(), liquid)?;
    let total = geometry.device_empty_mass + fluid_mass;
    if total > geometry.max_total_mass * (1.0 + LIMIT_SLACK) {
        return Err(WeightError::Envelope {
            total,
            limit: geometry.max_total_mass,
        });
    }
    Ok(fill)
}

/// Per-receptacle strokes taking `current` to `goal`, near receptacle first.
/// The plan is sequential; see [`TransferPlan::with_concurrency`].
pub fn plan_transfer(current: ReceptacleFill, goal: ReceptacleFill, geometry: &ActuatorGeometry) -> TransferPlan {
    let commands = [Receptacle::Near, Receptacle::Far]
        .into_iter()
        .filter_map(|receptacle| {
            let from = current.get(receptacle);
            let to = goal.get(receptacle);
            if from == to {
                return None;
            }
            let volume = (to - from).abs();
            let direction = if to > from {
                Direction::Inject
            } else {
                Direction::Withdraw
            };
            Some(TransferCommand {
                receptacle,
                direction,
                volume,
                duration: fill_duration(volume, geometry).unwrap_or(0.0),
                to_volume: to,
            })
        })
        .collect();
    TransferPlan {
        commands,
        concurrent: false,
    }
}
