//! Simulated transfer mechanism, electronic scale and virtual clock.
//!
//! Each stroke delivers `quantize(volume * (1 + eps))` with
//! `eps ~ Normal(0, relative_sigma)` drawn once per stroke, then truncated to
//! the receptacle bounds. Quantization models whole stepper steps.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ActuatorFault, ActuatorPort};
use crate::fluid::{ActuatorGeometry, Liquid};
use crate::weight::{Direction, Receptacle, ReceptacleFill};

/// Resolution of the electronic scale, grams.
pub const SCALE_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid clock quantum {0}")]
    InvalidQuantum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Standard deviation of the multiplicative volume error.
    pub relative_sigma: f64,
    /// Volume displaced per stepper step, mL.
    pub step_volume: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    /// 2% stroke error; 0.04 mm per step (200 steps/rev, 8 mm lead) on a
    /// 10 mm plunger gives 0.0126 mL per step.
    fn default() -> Self {
        Self {
            relative_sigma: 0.02,
            step_volume: 0.0126,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            relative_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.relative_sigma.is_finite() && self.relative_sigma >= 0.0) {
            return Err(SimError::InvalidNoise(format!(
                "relative_sigma must be >= 0, got {}",
                self.relative_sigma
            )));
        }
        if !(self.step_volume.is_finite() && self.step_volume > 0.0) {
            return Err(SimError::InvalidNoise(format!(
                "step_volume must be > 0, got {}",
                self.step_volume
            )));
        }
        Ok(())
    }

    pub fn quantize(&self, volume: f64) -> f64 {
        (volume / self.step_volume).round() * self.step_volume
    }

    /// Standard deviation, in grams, of the delivered fluid mass for `fill`
    /// when each non-empty receptacle is filled by one stroke from empty.
    pub fn fill_mass_sigma(&self, fill: &ReceptacleFill, liquid: &Liquid) -> f64 {
        let var: f64 = [fill.near_volume, fill.far_volume]
            .iter()
            .map(|v| (self.relative_sigma * v * liquid.density).powi(2))
            .sum();
        var.sqrt()
    }
}

/// Deterministic RNG stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Volume delivered by one stroke of `volume` mL.
pub fn actuate<R: Rng + ?Sized>(volume: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    let eps: f64 = if noise.relative_sigma > 0.0 {
        noise.relative_sigma * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    noise.quantize((volume * (1.0 + eps)).max(0.0))
}

/// Displayed reading for `mass` grams: nearest 0.1 g, ties away from zero.
pub fn read_scale(mass: f64) -> f64 {
    let tenths = mass * 10.0;
    // Nudge off exact decimal ties that binary f64 lands just below.
    let nudged = tenths + tenths.signum() * 1e-9 * tenths.abs().max(1.0);
    nudged.round() / 10.0
}

/// Virtual time in whole ticks, so long runs accumulate no rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    ticks: u64,
    quantum: f64,
}

impl SimClock {
    pub fn new(quantum: f64) -> Result<Self, SimError> {
        if !(quantum.is_finite() && quantum > 0.0) {
            return Err(SimError::InvalidQuantum(quantum));
        }
        Ok(Self { ticks: 0, quantum })
    }

    pub fn now(&self) -> f64 {
        self.ticks as f64 * self.quantum
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Time after the next [`advance`](Self::advance).
    pub fn next(&self) -> f64 {
        (self.ticks + 1) as f64 * self.quantum
    }

    pub fn advance(&mut self) -> f64 {
        self.ticks += 1;
        self.now()
    }
}

/// Something the simulated hardware did that telemetry should record.
#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    StrokeStart {
        receptacle: Receptacle,
        direction: Direction,
        requested: f64,
        delivered: f64,
    },
    Truncated {
        receptacle: Receptacle,
        requested_level: f64,
        level: f64,
    },
}

impl SimEvent {
    pub fn name(&self) -> &'static str {
        match self {
            SimEvent::StrokeStart { .. } => "stroke",
            SimEvent::Truncated { .. } => "truncate",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            SimEvent::StrokeStart {
                receptacle,
                direction,
                requested,
                delivered,
            } => format!("{receptacle} {direction} requested={requested:.6} delivered={delivered:.6}"),
            SimEvent::Truncated {
                receptacle,
                requested_level,
                level,
            } => format!("{receptacle} requested_level={requested_level:.6} level={level:.6}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Stroke {
    origin: f64,
    signed_delivery: f64,
}

/// Simulated pair of syringes feeding two receptacles.
#[derive(Debug, Clone)]
pub struct SimActuator {
    noise: NoiseModel,
    capacity: f64,
    rng: ChaCha8Rng,
    fill: ReceptacleFill,
    strokes: [Option<Stroke>; 2],
    events: Vec<SimEvent>,
    drive: f64,
    steps: i64,
}

fn slot(r: Receptacle) -> usize {
    match r {
        Receptacle::Near => 0,
        Receptacle::Far => 1,
    }
}

impl SimActuator {
    /// RNG seeded from `noise.seed`.
    pub fn new(noise: NoiseModel, geometry: &ActuatorGeometry) -> Self {
        Self::with_rng(noise, geometry, rng_stream(noise.seed, 0))
    }

    pub fn with_rng(noise: NoiseModel, geometry: &ActuatorGeometry, rng: ChaCha8Rng) -> Self {
        Self {
            noise,
            capacity: geometry.receptacle_capacity,
            rng,
            fill: ReceptacleFill::EMPTY,
            strokes: [None, None],
            events: Vec::new(),
            drive: 0.0,
            steps: 0,
        }
    }

    /// Physical fluid actually in the receptacles.
    pub fn fill(&self) -> ReceptacleFill {
        self.fill
    }

    /// Mass on the scale for the whole device.
    pub fn device_mass(&self, liquid: &Liquid, geometry: &ActuatorGeometry) -> f64 {
        geometry.device_empty_mass + self.fill.fluid_mass(liquid)
    }

    pub fn drive_level(&self) -> f64 {
        self.drive
    }

    /// Net stepper steps issued (inject positive).
    pub fn steps(&self) -> i64 {
        self.steps
    }

    pub fn take_events(&mut self) -> Vec<SimEvent> {
        std::mem::take(&mut self.events)
    }

    fn begin(&mut self, receptacle: Receptacle, direction: Direction, volume: f64) {
        let delivered = actuate(volume.max(0.0), &self.noise, &mut self.rng);
        let sign = match direction {
            Direction::Inject => 1.0,
            Direction::Withdraw => -1.0,
        };
        self.steps += (sign * delivered / self.noise.step_volume).round() as i64;
        self.strokes[slot(receptacle)] = Some(Stroke {
            origin: self.fill.get(receptacle),
            signed_delivery: sign * delivered,
        });
        self.events.push(SimEvent::StrokeStart {
            receptacle,
            direction,
            requested: volume,
            delivered,
        });
    }
}

impl ActuatorPort for SimActuator {
    fn inject(&mut self, receptacle: Receptacle, volume: f64) -> Result<(), ActuatorFault> {
        self.begin(receptacle, Direction::Inject, volume);
        Ok(())
    }

    fn withdraw(&mut self, receptacle: Receptacle, volume: f64) -> Result<(), ActuatorFault> {
        self.begin(receptacle, Direction::Withdraw, volume);
        Ok(())
    }

    fn step(&mut self, receptacle: Receptacle, fraction: f64) -> Result<(), ActuatorFault> {
        let stroke = self.strokes[slot(receptacle)]
            .ok_or_else(|| ActuatorFault(format!("step on {receptacle} without a stroke")))?;
        let fraction = fraction.clamp(0.0, 1.0);
        let wanted = stroke.origin + stroke.signed_delivery * fraction;
        let level = wanted.clamp(0.0, self.capacity);
        if level != wanted && self.fill.get(receptacle) != level {
            self.events.push(SimEvent::Truncated {
                receptacle,
                requested_level: wanted,
                level,
            });
        }
        self.fill.set(receptacle, level);
        if fraction >= 1.0 {
            self.strokes[slot(receptacle)] = None;
        }
        Ok(())
    }

    fn drive(&mut self, value: f64) {
        self.drive = value;
    }
}

/// `time_s,event,detail` CSV log with fixed-precision timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    entries: Vec<(f64, String, String)>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, event: impl Into<String>, detail: impl Into<String>) {
        self.entries.push((time, event.into(), detail.into()));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (f64, &str, &str)> {
        self.entries.iter().map(|(t, e, d)| (*t, e.as_str(), d.as_str()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_s", "event", "detail"])?;
        for (t, e, d) in &self.entries {
            w.write_record([format!("{t:.6}").as_str(), e, d])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}
