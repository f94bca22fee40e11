//! Deterministic virtual-time replay of a scenario through the full stack:
//! host session, lossy link, device controller and simulated hardware.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::catalog::{Catalog, CatalogEntry};
use super::scenario::{EventKind, Scenario};
use crate::config::Config;
use crate::controller::Controller;
use crate::protocol::{self, DeviceReport, HostCommand, Message, ProtocolError, Session, VibrateParams};
use crate::sim::{read_scale, rng_stream, EventLog, SimActuator, SimClock, SimError};
use crate::vibration::{amplitude_from_impact, find_triggers, read_trace, VibrationError};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("scenario line {line}: {source}")]
    Trace {
        line: usize,
        #[source]
        source: VibrationError,
    },
    #[error("scenario line {line}: reading trace {path}: {message}")]
    TraceIo { line: usize, path: String, message: String },
    #[error("scenario line {line}: {message}")]
    Event { line: usize, message: String },
    #[error("scenario line {line}: {source}")]
    Protocol {
        line: usize,
        #[source]
        source: ProtocolError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("run did not settle within {0} s of virtual time")]
    Timeout(f64),
}

/// Outcome of one pickup.
#[derive(Debug, Clone, PartialEq)]
pub struct PickupRecord {
    pub object_id: String,
    pub pickup_time: f64,
    pub target_mass: f64,
    pub target_com: f64,
    /// Scale reading of the loaded device minus that of the empty device.
    pub achieved_mass: Option<f64>,
    /// From sending the target to the device settling.
    pub fill_latency: Option<f64>,
    /// Vibration bursts sent while this object was held.
    pub bursts: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub pickups: Vec<PickupRecord>,
    pub bursts: usize,
    pub retransmissions: u64,
    pub dropped_lines: u64,
    pub log: EventLog,
}

fn opt(v: Option<f64>, precision: usize) -> String {
    v.map(|x| format!("{x:.precision$}")).unwrap_or_default()
}

impl RunReport {
    pub fn is_empty(&self) -> bool {
        self.pickups.is_empty() && self.bursts == 0 && self.log.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "object_id",
            "pickup_time_s",
            "target_mass_g",
            "target_com_mm",
            "achieved_mass_g",
            "fill_latency_s",
            "bursts",
        ])?;
        for p in &self.pickups {
            w.write_record([
                p.object_id.clone(),
                format!("{:.6}", p.pickup_time),
                format!("{:.3}", p.target_mass),
                format!("{:.3}", p.target_com),
                opt(p.achieved_mass, 1),
                opt(p.fill_latency, 6),
                p.bursts.to_string(),
            ])?;
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

/// A host-side send scheduled at a virtual time.
#[derive(Debug, Clone)]
struct Action {
    time: f64,
    command: HostCommand,
    line: usize,
    /// Index of the pickup this send starts, if any.
    pickup: Option<usize>,
    /// Index of the pickup this burst belongs to, if any.
    burst_for: Option<usize>,
}

fn schedule(
    scenario: &Scenario,
    catalog: &Catalog,
    config: &Config,
    report: &mut RunReport,
) -> Result<Vec<Action>, ReplayError> {
    let mut actions = Vec::new();
    let mut held: Option<(CatalogEntry, usize, f64)> = None;
    let burst = config.vibration.burst;

    for event in &scenario.events {
        let line = event.line;
        match &event.kind {
            EventKind::Pickup(id) => {
                let entry = catalog.get(id).ok_or_else(|| ReplayError::Event {
                    line,
                    message: format!("object `{id}` is not in the catalog"),
                })?;
                let index = report.pickups.len();
                report.pickups.push(PickupRecord {
                    object_id: id.clone(),
                    pickup_time: event.time,
                    target_mass: entry.mass,
                    target_com: entry.com_offset,
                    achieved_mass: None,
                    fill_latency: None,
                    bursts: 0,
                });
                actions.push(Action {
                    time: event.time,
                    command: HostCommand::SetTarget {
                        mass: entry.mass,
                        com: entry.com_offset,
                    },
                    line,
                    pickup: Some(index),
                    burst_for: None,
                });
                held = Some((entry.clone(), index, entry.mass));
            }
            EventKind::Release => {
                actions.push(Action {
                    time: event.time,
                    command: HostCommand::Release,
                    line,
                    pickup: None,
                    burst_for: None,
                });
                held = None;
            }
            EventKind::AccelTrace(path) => {
                let file = std::fs::File::open(path).map_err(|e| ReplayError::TraceIo {
                    line,
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let trace = read_trace(file).map_err(|source| ReplayError::Trace { line, source })?;
                let triggers = find_triggers(&trace, config.vibration.threshold, config.vibration.refractory())
                    .map_err(|source| ReplayError::Trace { line, source })?;
                let origin = trace.first().map_or(0.0, |s| s.time);
                let mass = held.as_ref().map_or(0.0, |(_, _, m)| *m);
                for trig in triggers {
                    let amplitude = amplitude_from_impact(mass, trig.magnitude.max(0.0), config.vibration.impact)
                        .map_err(|source| ReplayError::Trace { line, source })?;
                    actions.push(Action {
                        time: event.time + (trig.time - origin),
                        command: HostCommand::Vibrate(VibrateParams {
                            amplitude,
                            decay: burst.decay,
                            angular_frequency: burst.angular_frequency,
                            phase: burst.phase,
                            duration_ms: (burst.duration * 1000.0).round() as u32,
                        }),
                        line,
                        pickup: None,
                        burst_for: held.as_ref().map(|(_, i, _)| *i),
                    });
                }
            }
            EventKind::Spray(duration) => {
                let (entry, _, mass) = held.as_mut().ok_or_else(|| ReplayError::Event {
                    line,
                    message: "spray with no object held".into(),
                })?;
                if entry.drain_rate == 0.0 || *duration == 0.0 {
                    continue;
                }
                let period = config.sim.spray_update_period;
                let steps = (duration / period).ceil().max(1.0) as usize;
                let start_mass = *mass;
                for k in 1..=steps {
                    let elapsed = (k as f64 * period).min(*duration);
                    let remaining = (start_mass - entry.drain_rate * elapsed).max(0.0);
                    actions.push(Action {
                        time: event.time + elapsed,
                        command: HostCommand::SetTarget {
                            mass: remaining,
                            com: entry.com_offset,
                        },
                        line,
                        pickup: None,
                        burst_for: None,
                    });
                    *mass = remaining;
                    if remaining == 0.0 {
                        break;
                    }
                }
            }
        }
    }
    actions.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(actions)
}

struct Link {
    rng: ChaCha8Rng,
    drop_probability: f64,
    dropped: u64,
}

impl Link {
    fn delivers(&mut self) -> bool {
        let keep = self.rng.random::<f64>() >= self.drop_probability;
        if !keep {
            self.dropped += 1;
        }
        keep
    }
}

fn line_text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes.strip_suffix(b"\n").unwrap_or(bytes)).into_owned()
}

struct Run<'a> {
    config: &'a Config,
    controller: Controller,
    actuator: SimActuator,
    session: Session,
    link: Link,
    report: RunReport,
    /// Pickup waiting for its fill to settle.
    open_pickup: Option<usize>,
    pickup_seqs: Vec<(u64, usize)>,
    empty_reading: f64,
}

impl Run<'_> {
    fn log(&mut self, time: f64, event: &str, detail: impl Into<String>) {
        self.report.log.push(time, event, detail);
    }

    fn host_receive(&mut self, now: f64, report: &DeviceReport) {
        let bytes = protocol::encode(&Message::Device(report.clone())).expect("device reports encode");
        self.log(now, "device_tx", line_text(&bytes));
        if !self.link.delivers() {
            self.log(now, "link_drop", line_text(&bytes));
            return;
        }
        self.log(now, "host_rx", line_text(&bytes));
        if let DeviceReport::Ack { seq } = report {
            if !self.session.on_ack(*seq) {
                self.log(now, "ack_unknown", seq.to_string());
            }
        }
    }

    fn transmit(&mut self, now: f64, seq: u64, bytes: &[u8]) {
        if !self.link.delivers() {
            self.log(now, "link_drop", line_text(bytes));
            return;
        }
        self.log(now, "device_rx", line_text(bytes));
        let replies = self.controller.handle_line(bytes, |_| None);
        if let Some(pos) = self.pickup_seqs.iter().position(|(s, _)| *s == seq) {
            let (_, index) = self.pickup_seqs.remove(pos);
            self.open_pickup = Some(index);
            if replies.iter().any(|r| matches!(r, DeviceReport::Err { .. })) {
                self.open_pickup = None;
            } else if !self.controller.mode().is_transferring() {
                self.settle(now);
            }
        }
        for r in &replies {
            self.host_receive(now, r);
        }
    }

    fn settle(&mut self, at: f64) {
        let liquid = self.config.liquid();
        let mass = self.actuator.device_mass(&liquid, &self.config.geometry);
        let reading = read_scale(mass);
        let achieved = reading - self.empty_reading;
        self.log(
            at,
            "settled",
            format!("mode={} scale={reading:.1}", self.controller.mode()),
        );
        if let Some(index) = self.open_pickup.take() {
            let record = &mut self.report.pickups[index];
            record.achieved_mass = Some(read_scale(achieved));
            record.fill_latency = Some(at - record.pickup_time);
        }
    }
}

/// Replays `scenario` and returns the per-pickup report with the full log.
pub fn replay(scenario: &Scenario, catalog: &Catalog, config: &Config, seed: u64) -> Result<RunReport, ReplayError> {
    let mut report = RunReport::default();
    if scenario.is_empty() {
        return Ok(report);
    }
    let actions = schedule(scenario, catalog, config, &mut report)?;
    let last_action = actions.last().map_or(0.0, |a| a.time);
    let end = scenario.events.last().map_or(0.0, |e| e.time).max(last_action) + config.sim.settle_time;

    let mut noise = config.noise;
    noise.seed = seed;
    let mut clock = SimClock::new(config.sim.tick)?;
    let mut run = Run {
        config,
        controller: Controller::new(config.controller_config()),
        actuator: SimActuator::with_rng(noise, &config.geometry, rng_stream(seed, 0)),
        session: Session::new(config.link.retransmit_interval),
        link: Link {
            rng: rng_stream(seed, 1),
            drop_probability: config.link.drop_probability,
            dropped: 0,
        },
        report,
        open_pickup: None,
        pickup_seqs: Vec::new(),
        empty_reading: read_scale(config.geometry.device_empty_mass),
    };

    let dt = clock.quantum();
    let mut next = 0;
    loop {
        let now = clock.now();
        while next < actions.len() && actions[next].time <= now + 1e-9 {
            let action = &actions[next];
            next += 1;
            let (seq, bytes) =
                run.session
                    .send(action.command.clone(), now)
                    .map_err(|source| ReplayError::Protocol {
                        line: action.line,
                        source,
                    })?;
            match &action.command {
                HostCommand::SetTarget { .. } if action.pickup.is_some() => {
                    let index = action.pickup.expect("checked");
                    let id = run.report.pickups[index].object_id.clone();
                    run.log(now, "pickup", id);
                    run.pickup_seqs.push((seq, index));
                }
                HostCommand::Release => run.log(now, "release", ""),
                HostCommand::Vibrate(p) => {
                    run.report.bursts += 1;
                    if let Some(i) = action.burst_for {
                        run.report.pickups[i].bursts += 1;
                    }
                    run.log(now, "trigger", format!("amplitude={:.6}", p.amplitude));
                }
                _ => {}
            }
            run.log(now, "host_tx", line_text(&bytes));
            run.transmit(now, seq, &bytes);
        }
        for (seq, bytes) in run.session.tick(now) {
            run.log(now, "host_retx", line_text(&bytes));
            run.transmit(now, seq, &bytes);
        }

        let before = run.controller.clock();
        let out = run.controller.tick(dt, &mut run.actuator);
        for e in run.actuator.take_events() {
            run.log(now, e.name(), e.detail());
        }
        let after = clock.next();
        if let Some(at) = out.settled_at {
            run.settle((now + (at - before)).min(after));
        }
        for r in &out.reports {
            run.host_receive(after, r);
        }

        let now = clock.advance();
        let quiet = next >= actions.len()
            && run.session.is_settled()
            && !run.controller.mode().is_transferring()
            && run.controller.state().burst.is_none();
        if quiet && now >= end {
            break;
        }
        if now > config.sim.max_time {
            return Err(ReplayError::Timeout(config.sim.max_time));
        }
    }

    run.report.retransmissions = run.session.retransmissions();
    run.report.dropped_lines = run.link.dropped;
    Ok(run.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::parse_scenario;

    fn noiseless() -> Config {
        let mut c = Config::default();
        c.noise.relative_sigma = 0.0;
        c
    }

    #[test]
    fn empty_scenario_gives_empty_report() {
        let r = replay(&Scenario::default(), &Catalog::builtin(), &Config::default(), 1).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn noiseless_pickup_latency() {
        let s = parse_scenario("t=0 pickup square_stone").unwrap();
        let r = replay(&s, &Catalog::builtin(), &noiseless(), 3).unwrap();
        let p = &r.pickups[0];
        assert_eq!(p.achieved_mass, Some(50.0));
        let latency = p.fill_latency.unwrap();
        assert!((latency - 2.653).abs() <= 1e-3 + 0.001, "{latency}");
    }

    #[test]
    fn spray_drains_water_gun() {
        let s = parse_scenario("t=0 pickup water_gun\nt=3 spray 2.0\n").unwrap();
        let r = replay(&s, &Catalog::builtin(), &noiseless(), 3).unwrap();
        let sends = r
            .log
            .entries()
            .filter(|(_, e, d)| *e == "host_tx" && d.contains("SET_TARGET"))
            .count();
        assert_eq!(sends, 1 + 8);
        assert!(r
            .log
            .entries()
            .any(|(_, e, d)| e == "host_tx" && d.ends_with("SET_TARGET 30.0 60.0")));
    }

    #[test]
    fn spray_without_object_is_an_error() {
        let s = parse_scenario("t=0 spray 1").unwrap();
        assert!(matches!(
            replay(&s, &Catalog::builtin(), &noiseless(), 3),
            Err(ReplayError::Event { line: 1, .. })
        ));
    }

    #[test]
    fn missing_trace_reports_line() {
        let s = parse_scenario("t=0 pickup sword\nt=1 accel_trace /no/such/file.csv").unwrap();
        assert!(matches!(
            replay(&s, &Catalog::builtin(), &noiseless(), 3),
            Err(ReplayError::TraceIo { line: 2, .. })
        ));
    }

    #[test]
    fn lossy_link_still_converges() {
        let mut c = noiseless();
        c.link.drop_probability = 0.3;
        let s = parse_scenario("t=0 pickup ball_stone\nt=3 release\n").unwrap();
        let r = replay(&s, &Catalog::builtin(), &c, 11).unwrap();
        assert!(r.dropped_lines > 0);
        assert_eq!(r.pickups[0].achieved_mass, Some(20.0));
        assert!(r.log.entries().any(|(_, e, _)| e == "host_retx"));
    }
}
