//! Firmware-equivalent device controller.
//!
//! The controller consumes decoded host commands, plans fluid transfers and
//! integrates their progress open-loop from the commanded pushrod speed. The
//! physical actuator sits behind [`ActuatorPort`]; the controller never reads
//! back delivered volumes.
//!
//! Fluid modes move through `Idle -> Filling -> Holding -> Draining -> Idle`;
//! a new target may preempt an in-flight transfer and re-plan from the
//! integrated fill. Vibration runs alongside and never changes the fluid mode.

use std::fmt;

use thiserror::Error;

use crate::fluid::{ActuatorGeometry, Liquid};
use crate::protocol::{self, err_code, DeviceReport, HostCommand, Message, VibrateParams};
use crate::vibration::VibrationBurst;
use crate::weight::{
    clamp_to_envelope, plan_transfer, split_for_com, Direction, Receptacle, ReceptacleFill, TransferPlan, WeightError,
    WeightTarget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Idle,
    Filling,
    Holding,
    Draining,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Idle => "Idle",
            Mode::Filling => "Filling",
            Mode::Holding => "Holding",
            Mode::Draining => "Draining",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Idle" => Some(Mode::Idle),
            "Filling" => Some(Mode::Filling),
            "Holding" => Some(Mode::Holding),
            "Draining" => Some(Mode::Draining),
            _ => None,
        }
    }

    pub fn is_transferring(&self) -> bool {
        matches!(self, Mode::Filling | Mode::Draining)
    }

    /// Whether the controller may move from `self` to `next` in one step.
    ///
    /// Leaving a transfer for `Idle` is only legal when the fill is empty,
    /// which callers check separately.
    pub fn can_transition_to(&self, next: Mode) -> bool {
        use Mode::*;
        match (self, next) {
            (Idle, Idle | Filling) => true,
            (Idle, _) => false,
            (Holding, Idle) => false,
            (Holding, _) => true,
            (Filling | Draining, _) => true,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("actuator fault: {0}")]
pub struct ActuatorFault(pub String);

/// Hardware boundary for the transfer mechanism and vibration motor.
pub trait ActuatorPort {
    /// Starts a stroke pushing `volume` mL into `receptacle`.
    fn inject(&mut self, receptacle: Receptacle, volume: f64) -> Result<(), ActuatorFault>;
    /// Starts a stroke drawing `volume` mL out of `receptacle`.
    fn withdraw(&mut self, receptacle: Receptacle, volume: f64) -> Result<(), ActuatorFault>;
    /// Moves the active stroke on `receptacle` to `fraction` (0..=1) complete.
    fn step(&mut self, receptacle: Receptacle, fraction: f64) -> Result<(), ActuatorFault>;
    /// Sets the vibration motor drive level.
    fn drive(&mut self, _value: f64) {}
}

/// An actuator that accepts everything and does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullActuator;

impl ActuatorPort for NullActuator {
    fn inject(&mut self, _: Receptacle, _: f64) -> Result<(), ActuatorFault> {
        Ok(())
    }
    fn withdraw(&mut self, _: Receptacle, _: f64) -> Result<(), ActuatorFault> {
        Ok(())
    }
    fn step(&mut self, _: Receptacle, _: f64) -> Result<(), ActuatorFault> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub liquid: Liquid,
    pub geometry: ActuatorGeometry,
    /// Seconds between STATE reports.
    pub telemetry_period: f64,
    /// Run near and far strokes simultaneously on separate syringes.
    pub concurrent_strokes: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            liquid: Liquid::water(),
            geometry: ActuatorGeometry::default(),
            telemetry_period: 0.05,
            concurrent_strokes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveBurst {
    pub burst: VibrationBurst,
    pub elapsed: f64,
}

/// Progress of one plan command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeProgress {
    pub fraction: f64,
    /// Receptacle level when the stroke began.
    pub origin: f64,
    pub started: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub mode: Mode,
    /// Open-loop integrated fill.
    pub current: ReceptacleFill,
    pub goal: ReceptacleFill,
    pub plan: TransferPlan,
    pub progress: Vec<StrokeProgress>,
    pub burst: Option<ActiveBurst>,
    pub fault: Option<String>,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self {
            mode: Mode::Idle,
            current: ReceptacleFill::EMPTY,
            goal: ReceptacleFill::EMPTY,
            plan: TransferPlan::default(),
            progress: Vec::new(),
            burst: None,
            fault: None,
        }
    }
}

/// Everything a tick produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickOutput {
    pub reports: Vec<DeviceReport>,
    /// Vibration drive level sampled this tick, if a burst is active.
    pub drive: Option<f64>,
    /// Controller time at which the active transfer completed, if it did.
    pub settled_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    state: DeviceState,
    clock: f64,
    since_telemetry: f64,
    highest_seq: Option<u64>,
    episode_start: Option<f64>,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Self {
        Self {
            config,
            state: DeviceState::default(),
            clock: 0.0,
            since_telemetry: 0.0,
            highest_seq: None,
            episode_start: None,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    /// Controller-local time, seconds since construction.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Time the active transfer plan was created.
    pub fn episode_start(&self) -> Option<f64> {
        self.episode_start
    }

    pub fn state_report(&self) -> DeviceReport {
        DeviceReport::State {
            mode: self.state.mode,
            near: self.state.current.near_volume,
            far: self.state.current.far_volume,
        }
    }

    /// Decodes and handles one wire line. Malformed lines produce an `ERR`
    /// without an `ACK`, since no sequence number can be trusted.
    pub fn handle_line(
        &mut self,
        line: &[u8],
        resolve: impl FnOnce(&str) -> Option<WeightTarget>,
    ) -> Vec<DeviceReport> {
        match protocol::decode(line) {
            Ok(Message::Host { seq, command }) => {
                let resolved = match &command {
                    HostCommand::Pickup { object_id } => resolve(object_id),
                    _ => None,
                };
                self.handle_message(seq, &command, resolved)
            }
            Ok(Message::Device(_)) => vec![DeviceReport::Err {
                code: err_code::MALFORMED,
                detail: "device report sent to device".into(),
            }],
            Err(e) => vec![DeviceReport::Err {
                code: err_code::MALFORMED,
                detail: ascii_detail(&e.to_string()),
            }],
        }
    }

    /// Applies one host command. `resolved` is the catalog target for a
    /// `PICKUP`, looked up host-side.
    ///
    /// Every command is acknowledged. Commands whose sequence number is not
    /// above the highest one already applied are duplicates or stale
    /// retransmissions: they are acknowledged again and otherwise ignored.
    pub fn handle_message(
        &mut self,
        seq: u64,
        command: &HostCommand,
        resolved: Option<WeightTarget>,
    ) -> Vec<DeviceReport> {
        let mut replies = vec![DeviceReport::Ack { seq }];
        if self.highest_seq.is_some_and(|h| seq <= h) {
            return replies;
        }
        self.highest_seq = Some(seq);

        let outcome = match command {
            HostCommand::SetTarget { mass, com } => self.apply_target(WeightTarget::new(*mass, *com)),
            HostCommand::Pickup { object_id } => match resolved {
                Some(target) => self.apply_target(target),
                None => Err((
                    err_code::UNRESOLVED_OBJECT,
                    format!("object {object_id} has no resolved target"),
                )),
            },
            HostCommand::Release => self.apply_goal(ReceptacleFill::EMPTY),
            HostCommand::Vibrate(params) => self.start_burst(params),
        };
        if let Err((code, detail)) = outcome {
            replies.push(DeviceReport::Err {
                code,
                detail: ascii_detail(&detail),
            });
        }
        replies
    }

    fn apply_target(&mut self, target: WeightTarget) -> Result<(), (u16, String)> {
        let liquid = &self.config.liquid;
        let geometry = &self.config.geometry;
        let goal = split_for_com(target, liquid, geometry)
            .and_then(|fill| clamp_to_envelope(fill, liquid, geometry))
            .map_err(|e| {
                let code = match e {
                    WeightError::Capacity { .. } | WeightError::Envelope { .. } => err_code::ENVELOPE,
                    _ => err_code::INFEASIBLE,
                };
                (code, e.to_string())
            })?;
        self.apply_goal(goal)
    }

    fn apply_goal(&mut self, goal: ReceptacleFill) -> Result<(), (u16, String)> {
        if let Some(fault) = &self.state.fault {
            return Err((err_code::ACTUATOR_FAULT, fault.clone()));
        }
        let current = self.state.current;
        let plan = plan_transfer(current, goal, &self.config.geometry).with_concurrency(self.config.concurrent_strokes);
        self.state.goal = goal;
        if plan.is_empty() {
            self.finish_plan();
            return Ok(());
        }
        self.state.mode = if goal.total_volume() < current.total_volume() {
            Mode::Draining
        } else {
            Mode::Filling
        };
        self.state.progress = plan
            .commands
            .iter()
            .map(|c| StrokeProgress {
                fraction: 0.0,
                origin: current.get(c.receptacle),
                started: false,
            })
            .collect();
        self.state.plan = plan;
        self.episode_start = Some(self.clock);
        Ok(())
    }

    fn start_burst(&mut self, params: &VibrateParams) -> Result<(), (u16, String)> {
        let burst = VibrationBurst {
            amplitude: params.amplitude,
            decay: params.decay,
            angular_frequency: params.angular_frequency,
            phase: params.phase,
            duration: f64::from(params.duration_ms) / 1000.0,
        };
        burst.validate().map_err(|e| (err_code::INVALID_BURST, e.to_string()))?;
        self.state.burst = Some(ActiveBurst { burst, elapsed: 0.0 });
        Ok(())
    }

    fn finish_plan(&mut self) {
        self.state.current = self.state.goal;
        self.state.plan = TransferPlan::default();
        self.state.progress.clear();
        self.state.mode = if self.state.current.is_empty() {
            Mode::Idle
        } else {
            Mode::Holding
        };
        self.episode_start = None;
    }

    /// Advances the controller by `dt` seconds.
    pub fn tick(&mut self, dt: f64, actuator: &mut dyn ActuatorPort) -> TickOutput {
        let mut out = TickOutput::default();
        if !(dt > 0.0 && dt.is_finite()) {
            return out;
        }
        let start = self.clock;

        if self.state.fault.is_none() && self.state.mode.is_transferring() {
            match self.advance_plan(dt, actuator) {
                Ok(Some(used)) => {
                    self.finish_plan();
                    out.settled_at = Some(start + used);
                }
                Ok(None) => {}
                Err(fault) => {
                    out.reports.push(DeviceReport::Err {
                        code: err_code::ACTUATOR_FAULT,
                        detail: ascii_detail(&fault.0),
                    });
                    self.state.fault = Some(fault.0);
                }
            }
        }

        if self.state.fault.is_none() {
            if let Some(active) = &mut self.state.burst {
                let value = active.burst.eval(active.elapsed);
                actuator.drive(value);
                out.drive = Some(value);
                active.elapsed += dt;
                if active.elapsed > active.burst.duration {
                    self.state.burst = None;
                    actuator.drive(0.0);
                }
            }
        }

        self.clock = start + dt;
        self.since_telemetry += dt;
        let period = self.config.telemetry_period;
        if period > 0.0 && self.since_telemetry >= period - 1e-12 {
            self.since_telemetry = (self.since_telemetry - period).max(0.0) % period;
            out.reports.push(self.state_report());
        }
        out
    }

    /// Runs plan strokes for up to `dt` seconds. Returns the time consumed if
    /// the plan completed during this tick.
    fn advance_plan(&mut self, dt: f64, actuator: &mut dyn ActuatorPort) -> Result<Option<f64>, ActuatorFault> {
        let concurrent = self.state.plan.concurrent;
        let mut budget = dt;
        let mut used_max: f64 = 0.0;
        for i in 0..self.state.plan.commands.len() {
            let cmd = self.state.plan.commands[i];
            let progress = &mut self.state.progress[i];
            if progress.fraction >= 1.0 {
                continue;
            }
            if !concurrent && budget <= 0.0 {
                break;
            }
            let available = if concurrent { dt } else { budget };
            if !progress.started {
                match cmd.direction {
                    Direction::Inject => actuator.inject(cmd.receptacle, cmd.volume)?,
                    Direction::Withdraw => actuator.withdraw(cmd.receptacle, cmd.volume)?,
                }
                progress.started = true;
            }
            let remaining = (1.0 - progress.fraction) * cmd.duration;
            let used = if available >= remaining {
                progress.fraction = 1.0;
                self.state.current.set(cmd.receptacle, cmd.to_volume);
                remaining
            } else {
                progress.fraction += available / cmd.duration;
                let sign = match cmd.direction {
                    Direction::Inject => 1.0,
                    Direction::Withdraw => -1.0,
                };
                let level = progress.origin + sign * cmd.volume * progress.fraction;
                let capacity = self.config.geometry.receptacle_capacity;
                self.state.current.set(cmd.receptacle, level.clamp(0.0, capacity));
                available
            };
            actuator.step(cmd.receptacle, progress.fraction)?;
            if concurrent {
                used_max = used_max.max(used);
            } else {
                budget -= used;
            }
        }
        let done = self.state.progress.iter().all(|p| p.fraction >= 1.0);
        Ok(done.then(|| if concurrent { used_max } else { dt - budget.max(0.0) }))
    }
}

fn ascii_detail(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_graphic() || c == ' ' { c } else { '?' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::fill_duration;

    fn set_target(mass: f64, com: f64) -> HostCommand {
        HostCommand::SetTarget { mass, com }
    }

    fn run_until_settled(c: &mut Controller, dt: f64) -> f64 {
        let mut act = NullActuator;
        for _ in 0..1_000_000 {
            if let Some(t) = c.tick(dt, &mut act).settled_at {
                return t;
            }
        }
        panic!("never settled");
    }

    #[test]
    fn set_target_enters_filling_with_split_goal() {
        let mut c = Controller::new(ControllerConfig::default());
        let replies = c.handle_message(1, &set_target(50.0, 60.0), None);
        assert_eq!(replies, vec![DeviceReport::Ack { seq: 1 }]);
        assert_eq!(c.mode(), Mode::Filling);
        assert_eq!(c.state().goal, ReceptacleFill::new(25.0, 25.0));
    }

    #[test]
    fn fifty_millilitres_settle_at_fill_duration() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(50.0, 120.0), None);
        let dt = 0.001;
        let t = run_until_settled(&mut c, dt);
        assert!((t - 2.653).abs() <= 1e-3 + dt, "{t}");
        assert!((t - fill_duration(50.0, &c.config().geometry).unwrap()).abs() < 1e-9);
        assert_eq!(c.mode(), Mode::Holding);
        assert_eq!(c.state().current, ReceptacleFill::new(0.0, 50.0));
        assert!(c.state().plan.is_empty());
    }

    #[test]
    fn sub_stroke_tick_advances_linearly() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(30.0, 0.0), None);
        let duration = c.state().plan.commands[0].duration;
        c.tick(0.1, &mut NullActuator);
        let f = c.state().progress[0].fraction;
        assert!((f - 0.1 / duration).abs() < 1e-15);
        c.tick(0.1, &mut NullActuator);
        assert!((c.state().progress[0].fraction - 0.2 / duration).abs() < 1e-15);
    }

    #[test]
    fn idle_tick_is_fixpoint() {
        let mut c = Controller::new(ControllerConfig {
            telemetry_period: 0.0,
            ..Default::default()
        });
        let before = c.state().clone();
        let out = c.tick(0.01, &mut NullActuator);
        assert_eq!(c.state(), &before);
        assert_eq!(out, TickOutput::default());
    }

    #[test]
    fn release_from_holding_drains() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(20.0, 60.0), None);
        run_until_settled(&mut c, 0.01);
        assert_eq!(c.mode(), Mode::Holding);
        c.handle_message(2, &HostCommand::Release, None);
        assert_eq!(c.mode(), Mode::Draining);
        assert_eq!(c.state().goal, ReceptacleFill::EMPTY);
        run_until_settled(&mut c, 0.01);
        assert_eq!(c.mode(), Mode::Idle);
    }

    #[test]
    fn same_target_holds_immediately() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(20.0, 60.0), None);
        run_until_settled(&mut c, 0.01);
        let before = c.state().clone();
        c.handle_message(2, &set_target(20.0, 60.0), None);
        assert_eq!(c.state(), &before);
        assert_eq!(c.mode(), Mode::Holding);
    }

    #[test]
    fn infeasible_target_replies_err_and_keeps_state() {
        let mut c = Controller::new(ControllerConfig::default());
        let before = c.state().clone();
        let r = c.handle_message(1, &set_target(20.0, 500.0), None);
        assert_eq!(r[0], DeviceReport::Ack { seq: 1 });
        assert!(matches!(&r[1], DeviceReport::Err { code, .. } if *code == err_code::INFEASIBLE));
        assert_eq!(c.state(), &before);
        let r = c.handle_message(2, &set_target(500.0, 60.0), None);
        assert!(matches!(&r[1], DeviceReport::Err { code, .. } if *code == err_code::ENVELOPE));
    }

    #[test]
    fn pickup_uses_resolved_target() {
        let mut c = Controller::new(ControllerConfig::default());
        let pickup = HostCommand::Pickup {
            object_id: "sword".into(),
        };
        let r = c.handle_message(1, &pickup, None);
        assert!(matches!(&r[1], DeviceReport::Err { code, .. } if *code == err_code::UNRESOLVED_OBJECT));
        c.handle_message(2, &pickup, Some(WeightTarget::new(40.0, 110.0)));
        assert_eq!(c.mode(), Mode::Filling);
    }

    #[test]
    fn duplicate_sequence_is_ignored() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(5, &set_target(20.0, 60.0), None);
        c.tick(0.1, &mut NullActuator);
        let before = c.state().clone();
        let r = c.handle_message(5, &set_target(20.0, 60.0), None);
        assert_eq!(r, vec![DeviceReport::Ack { seq: 5 }]);
        assert_eq!(c.state(), &before);
        // Stale retransmission of an older command.
        c.handle_message(4, &HostCommand::Release, None);
        assert_eq!(c.state(), &before);
    }

    #[test]
    fn preemption_replans_from_integrated_fill() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(40.0, 0.0), None);
        c.tick(1.0, &mut NullActuator);
        let mid = c.state().current.near_volume;
        assert!(mid > 0.0 && mid < 40.0);
        c.handle_message(2, &set_target(10.0, 0.0), None);
        assert_eq!(c.mode(), Mode::Draining);
        assert_eq!(c.state().progress[0].origin, mid);
        run_until_settled(&mut c, 0.01);
        assert_eq!(c.state().current, ReceptacleFill::new(10.0, 0.0));
    }

    #[test]
    fn vibration_does_not_touch_fluid_mode() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(20.0, 60.0), None);
        let vib = HostCommand::Vibrate(VibrateParams {
            amplitude: 2.0,
            decay: 8.0,
            angular_frequency: 314.0,
            phase: 0.0,
            duration_ms: 20,
        });
        c.handle_message(2, &vib, None);
        assert_eq!(c.mode(), Mode::Filling);
        let out = c.tick(0.001, &mut NullActuator);
        assert_eq!(out.drive, Some(2.0));
        for _ in 0..25 {
            c.tick(0.001, &mut NullActuator);
        }
        assert!(c.state().burst.is_none());
        assert_eq!(c.mode(), Mode::Filling);

        let bad = HostCommand::Vibrate(VibrateParams {
            amplitude: 1.0,
            decay: -1.0,
            angular_frequency: 1.0,
            phase: 0.0,
            duration_ms: 10,
        });
        let r = c.handle_message(3, &bad, None);
        assert!(matches!(&r[1], DeviceReport::Err { code, .. } if *code == err_code::INVALID_BURST));
    }

    #[test]
    fn telemetry_period() {
        let mut c = Controller::new(ControllerConfig::default());
        let mut states = 0;
        for _ in 0..1000 {
            states += c.tick(0.001, &mut NullActuator).reports.len();
        }
        assert_eq!(states, 20);
    }

    struct Broken;
    impl ActuatorPort for Broken {
        fn inject(&mut self, _: Receptacle, _: f64) -> Result<(), ActuatorFault> {
            Err(ActuatorFault("stall".into()))
        }
        fn withdraw(&mut self, _: Receptacle, _: f64) -> Result<(), ActuatorFault> {
            Ok(())
        }
        fn step(&mut self, _: Receptacle, _: f64) -> Result<(), ActuatorFault> {
            Ok(())
        }
    }

    #[test]
    fn actuator_fault_freezes_mode() {
        let mut c = Controller::new(ControllerConfig::default());
        c.handle_message(1, &set_target(20.0, 60.0), None);
        let out = c.tick(0.01, &mut Broken);
        assert!(out
            .reports
            .iter()
            .any(|r| matches!(r, DeviceReport::Err { code, .. } if *code == err_code::ACTUATOR_FAULT)));
        let frozen = c.state().clone();
        c.tick(0.5, &mut Broken);
        assert_eq!(c.state(), &frozen);
        assert_eq!(c.mode(), Mode::Filling);
        let r = c.handle_message(2, &HostCommand::Release, None);
        assert!(matches!(&r[1], DeviceReport::Err { code, .. } if *code == err_code::ACTUATOR_FAULT));
    }

    #[test]
    fn handle_line_rejects_garbage_without_ack() {
        let mut c = Controller::new(ControllerConfig::default());
        let r = c.handle_line(b"nonsense\n", |_| None);
        assert_eq!(r.len(), 1);
        assert!(matches!(&r[0], DeviceReport::Err { code, .. } if *code == err_code::MALFORMED));
        let r = c.handle_line(b"3 PICKUP ball\n", |id| {
            (id == "ball").then(|| WeightTarget::new(20.0, 30.0))
        });
        assert_eq!(r, vec![DeviceReport::Ack { seq: 3 }]);
        assert_eq!(c.mode(), Mode::Filling);
    }

    #[test]
    fn concurrent_strokes_overlap() {
        let mut c = Controller::new(ControllerConfig {
            concurrent_strokes: true,
            ..Default::default()
        });
        c.handle_message(1, &set_target(50.0, 60.0), None);
        let t = run_until_settled(&mut c, 0.001);
        let half = fill_duration(25.0, &c.config().geometry).unwrap();
        assert!((t - half).abs() < 1e-9, "{t} vs {half}");
    }
}
