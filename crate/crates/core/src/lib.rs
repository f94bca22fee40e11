//! Control engine and hardware-in-the-loop simulator for a handheld haptic
//! proxy that renders weight and centre of gravity by pumping liquid between
//! two receptacles, and adds damped-sine vibration on impacts.
//!
//! The crate is layered bottom-up:
//!
//! - [`fluid`]: mass/volume/plunger-travel/fill-time conversions.
//! - [`weight`]: torque-balance split of a target into receptacle fills and
//!   transfer plans.
//! - [`vibration`]: burst synthesis, impact amplitude and threshold triggers.
//! - [`protocol`]: the line-based host/device wire format and host session.
//! - [`controller`]: the device state machine behind an [`controller::ActuatorPort`].
//! - [`sim`]: simulated actuator with stepper quantization and stroke noise,
//!   the 0.1 g scale and a virtual clock.
//! - [`harness`]: scenario replay and the repeatability benchmark.

pub mod config;
pub mod controller;
pub mod fluid;
pub mod harness;
pub mod protocol;
pub mod sim;
pub mod vibration;
pub mod weight;

pub use config::{Config, ConfigError};
pub use controller::{ActuatorPort, Controller, ControllerConfig, DeviceState, Mode};
pub use fluid::{fill_duration, mass_for_volume, plunger_travel, volume_for_mass, ActuatorGeometry, Liquid};
pub use protocol::{decode, encode, DeviceReport, HostCommand, Message, Session};
pub use sim::{read_scale, NoiseModel, SimActuator, SimClock};
pub use vibration::{detect_triggers, render_burst, waveform_sample, AccelSample, VibrationBurst};
pub use weight::{clamp_to_envelope, plan_transfer, split_for_com, ReceptacleFill, TransferPlan, WeightTarget};
