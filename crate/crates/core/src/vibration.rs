//! Damped-sine vibration bursts and acceleration-threshold triggering.
//!
//! A burst drives the vibration motor with
//!
//! ```text
//! y(t) = A * exp(-lambda * t) * (cos(omega * t + phi) + sin(omega * t + phi))
//! ```
//!
//! Bursts are started when the tracked acceleration of the held virtual
//! object crosses a threshold; the strength of the burst follows `F = m * a`.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Acceleration above which a burst is triggered, m/s².
pub const DEFAULT_TRIGGER_THRESHOLD: f64 = 800.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VibrationError {
    #[error("invalid burst: {0}")]
    InvalidBurst(String),
    #[error("time {t} s outside burst window [0, {duration}] s")]
    OutOfWindow { t: f64, duration: f64 },
    #[error("{quantity} must be non-negative and finite, got {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error("acceleration trace is not time-sorted at sample {index} ({time} s after {previous} s)")]
    Unsorted { index: usize, time: f64, previous: f64 },
    #[error("acceleration trace: {0}")]
    Trace(String),
}

pub type Result<T> = std::result::Result<T, VibrationError>;

/// Parameters of one damped-sine burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VibrationBurst {
    /// Drive units.
    pub amplitude: f64,
    /// 1/s
    pub decay: f64,
    /// rad/s
    pub angular_frequency: f64,
    /// rad
    pub phase: f64,
    /// s
    pub duration: f64,
}

impl Default for VibrationBurst {
    /// Unit amplitude, 50 Hz, decaying to under 2% of its start within 0.5 s.
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            decay: 8.0,
            angular_frequency: 2.0 * PI * 50.0,
            phase: 0.0,
            duration: 0.5,
        }
    }
}

impl VibrationBurst {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(VibrationError::InvalidBurst(msg));
        if !(self.amplitude.is_finite() && self.phase.is_finite()) {
            return bad("amplitude and phase must be finite".into());
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return bad(format!("decay must be >= 0, got {}", self.decay));
        }
        if !(self.angular_frequency.is_finite() && self.angular_frequency > 0.0) {
            return bad(format!("angular_frequency must be > 0, got {}", self.angular_frequency));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        Ok(())
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Upper bound on `|y(t)|`: `sqrt(2) * |A| * exp(-lambda t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        std::f64::consts::SQRT_2 * self.amplitude.abs() * (-self.decay * t).exp()
    }

    /// Evaluates the waveform without checking the burst window.
    pub fn eval(&self, t: f64) -> f64 {
        let theta = self.angular_frequency * t + self.phase;
        self.amplitude * (-self.decay * t).exp() * (theta.cos() + theta.sin())
    }
}

/// Drive value of `burst` at `t` seconds after its start.
pub fn waveform_sample(burst: &VibrationBurst, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= burst.duration) {
        return Err(VibrationError::OutOfWindow {
            t,
            duration: burst.duration,
        });
    }
    Ok(burst.eval(t))
}

/// Number of samples [`render_burst`] produces.
pub fn sample_count(duration: f64, sample_rate: f64) -> usize {
    // Guard against products like 0.3 * 10 = 3.0000000000000004.
    let periods = duration * sample_rate;
    let rounded = periods.round();
    let whole = if (periods - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        periods.ceil()
    };
    whole as usize + 1
}

/// Samples the burst at `k / sample_rate` for `k = 0..=ceil(duration * rate)`;
/// the final timestamp is clamped to the burst duration.
pub fn render_burst(burst: &VibrationBurst, sample_rate: f64) -> Result<Vec<f64>> {
    burst.validate()?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(VibrationError::Domain {
            quantity: "sample_rate",
            value: sample_rate,
        });
    }
    let n = sample_count(burst.duration, sample_rate);
    (0..n)
        .map(|k| waveform_sample(burst, (k as f64 / sample_rate).min(burst.duration)))
        .collect()
}

/// Maps an impact to a burst amplitude through `F = m * a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactMapping {
    /// Drive units per newton.
    pub gain: f64,
    /// Amplitude ceiling, drive units.
    pub max_drive: f64,
}

impl Default for ImpactMapping {
    fn default() -> Self {
        Self {
            gain: 1.0,
            max_drive: 100.0,
        }
    }
}

/// `gain * (mass_g / 1000) * peak_accel`, capped at `max_drive`.
pub fn amplitude_from_impact(mass: f64, peak_accel: f64, mapping: ImpactMapping) -> Result<f64> {
    let check = |quantity, value: f64| {
        if value.is_finite() && value >= 0.0 {
            Ok(value)
        } else {
            Err(VibrationError::Domain { quantity, value })
        }
    };
    let mass = check("mass", mass)?;
    let peak_accel = check("peak_accel", peak_accel)?;
    let force = mass / 1000.0 * peak_accel;
    Ok((mapping.gain * force).min(mapping.max_drive))
}

/// One acceleration reading of the tracked virtual object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    /// s
    pub time: f64,
    /// m/s²
    pub magnitude: f64,
}

impl AccelSample {
    pub fn new(time: f64, magnitude: f64) -> Self {
        Self { time, magnitude }
    }
}

/// A trigger emitted by [`TriggerDetector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    /// Position of the sample within the stream.
    pub index: usize,
    pub time: f64,
    /// Magnitude of the crossing sample.
    pub magnitude: f64,
}

/// Streaming threshold-crossing detector.
///
/// A trigger fires on a sample whose magnitude is strictly greater than the
/// threshold when the previous sample was at or below it. The stream is
/// considered to start below the threshold. Crossings less than `refractory`
/// seconds after the last accepted trigger are suppressed and do not extend
/// the window.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerDetector {
    threshold: f64,
    refractory: f64,
    above: bool,
    last_time: Option<f64>,
    last_trigger: Option<f64>,
    seen: usize,
}

impl TriggerDetector {
    pub fn new(threshold: f64, refractory: f64) -> Self {
        Self {
            threshold,
            refractory: refractory.max(0.0),
            above: false,
            last_time: None,
            last_trigger: None,
            seen: 0,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Feeds one sample; returns the trigger it fires, if any.
    pub fn push(&mut self, sample: AccelSample) -> Result<Option<Trigger>> {
        if let Some(previous) = self.last_time {
            if sample.time.is_nan() || sample.time < previous {
                return Err(VibrationError::Unsorted {
                    index: self.seen,
                    time: sample.time,
                    previous,
                });
            }
        }
        let index = self.seen;
        self.seen += 1;
        self.last_time = Some(sample.time);

        let above = sample.magnitude > self.threshold;
        let crossing = above && !self.above;
        self.above = above;
        if !crossing {
            return Ok(None);
        }
        if let Some(last) = self.last_trigger {
            if sample.time - last < self.refractory {
                return Ok(None);
            }
        }
        self.last_trigger = Some(sample.time);
        Ok(Some(Trigger {
            index,
            time: sample.time,
            magnitude: sample.magnitude,
        }))
    }
}

/// All triggers in `trace`.
pub fn find_triggers(trace: &[AccelSample], threshold: f64, refractory: f64) -> Result<Vec<Trigger>> {
    let mut detector = TriggerDetector::new(threshold, refractory);
    let mut out = Vec::new();
    for &sample in trace {
        if let Some(t) = detector.push(sample)? {
            out.push(t);
        }
    }
    Ok(out)
}

/// Times, in seconds, at which bursts start for `trace`.
pub fn detect_triggers(trace: &[AccelSample], threshold: f64, refractory: f64) -> Result<Vec<f64>> {
    Ok(find_triggers(trace, threshold, refractory)?
        .into_iter()
        .map(|t| t.time)
        .collect())
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    time_s: f64,
    accel_ms2: f64,
}

/// Reads a `time_s,accel_ms2` CSV trace.
pub fn read_trace<R: Read>(reader: R) -> Result<Vec<AccelSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| VibrationError::Trace(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "accel_ms2"] {
        return Err(VibrationError::Trace(format!(
            "expected header `time_s,accel_ms2`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut trace = Vec::new();
    for (i, row) in rdr.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| VibrationError::Trace(format!("line {}: {e}", i + 2)))?;
        if !(row.time_s.is_finite() && row.accel_ms2.is_finite()) {
            return Err(VibrationError::Trace(format!("line {}: non-finite value", i + 2)));
        }
        trace.push(AccelSample::new(row.time_s, row.accel_ms2));
    }
    Ok(trace)
}
