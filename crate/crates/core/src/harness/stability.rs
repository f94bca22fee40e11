//! Open-loop fill repeatability benchmark.
//!
//! For each target weight the simulated device is filled from empty
//! `reps` times. Each repetition weighs the loaded device on the simulated
//! scale and subtracts the separately weighed empty device.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::config::Config;
use crate::controller::Controller;
use crate::protocol::{encode, HostCommand, Message};
use crate::sim::{read_scale, rng_stream, SimActuator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("reps must be at least 1")]
    NoReps,
    #[error("no targets given")]
    NoTargets,
    #[error("target {target} g rejected by the device: {detail}")]
    Rejected { target: f64, detail: String },
    #[error("target {0} g did not settle")]
    NoSettle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repetition {
    pub target: f64,
    pub rep: usize,
    pub measured: f64,
}

impl Repetition {
    pub fn deviation(&self) -> f64 {
        self.measured - self.target
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetStats {
    pub target: f64,
    pub reps: usize,
    pub mean_abs_deviation: f64,
    /// Fraction, not percent.
    pub mean_rel_deviation: f64,
    pub max_abs_deviation: f64,
    pub mean_signed_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<TargetStats>,
    pub raw: Vec<Repetition>,
    /// Mean of `|deviation| / target` over every repetition.
    pub overall_mean_rel_deviation: f64,
}

impl StabilityReport {
    pub fn row(&self, target: f64) -> Option<&TargetStats> {
        self.rows.iter().find(|r| r.target == target)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "target_g",
            "reps",
            "mean_abs_dev_g",
            "mean_rel_dev_pct",
            "max_abs_dev_g",
            "mean_signed_dev_g",
        ])?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.target),
                r.reps.to_string(),
                format!("{:.4}", r.mean_abs_deviation),
                format!("{:.4}", 100.0 * r.mean_rel_deviation),
                format!("{:.4}", r.max_abs_deviation),
                format!("{:.4}", r.mean_signed_deviation),
            ])?;
        }
        let total: usize = self.rows.iter().map(|r| r.reps).sum();
        let max = self.rows.iter().map(|r| r.max_abs_deviation).fold(0.0, f64::max);
        let n = self.raw.len().max(1) as f64;
        let mean_abs = self.raw.iter().map(|r| r.deviation().abs()).sum::<f64>() / n;
        let mean_signed = self.raw.iter().map(|r| r.deviation()).sum::<f64>() / n;
        w.write_record([
            "all".to_string(),
            total.to_string(),
            format!("{mean_abs:.4}"),
            format!("{:.4}", 100.0 * self.overall_mean_rel_deviation),
            format!("{max:.4}"),
            format!("{mean_signed:.4}"),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn write_raw_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["target_g", "rep", "measured_g", "deviation_g"])?;
        for r in &self.raw {
            w.write_record([
                format!("{}", r.target),
                r.rep.to_string(),
                format!("{:.1}", r.measured),
                format!("{:.1}", r.deviation()),
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

    pub fn to_raw_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_raw_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Bar chart of mean absolute deviation per target with max-deviation
    /// whiskers.
    pub fn to_svg(&self) -> String {
        let (w, h) = (480.0, 320.0);
        let (left, bottom, top) = (56.0, 40.0, 24.0);
        let plot_h = h - bottom - top;
        let y_max = self.rows.iter().map(|r| r.max_abs_deviation).fold(0.5, f64::max) * 1.15;
        let slot = (w - left - 16.0) / self.rows.len().max(1) as f64;
        let y = |v: f64| top + plot_h * (1.0 - v / y_max);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#,
            h - bottom
        );
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="black"/>"#,
            h - bottom,
            w - 16.0
        );
        for k in 0..=4 {
            let v = y_max * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
                left - 4.0,
                y(v) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">deviation (g)</text>"#,
            top + plot_h / 2.0,
            top + plot_h / 2.0
        );
        for (i, r) in self.rows.iter().enumerate() {
            let cx = left + slot * (i as f64 + 0.5);
            let bw = slot * 0.5;
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{bw:.1}" height="{:.1}" fill="#4a78b5"/>"##,
                cx - bw / 2.0,
                y(r.mean_abs_deviation),
                y(0.0) - y(r.mean_abs_deviation)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(r.mean_abs_deviation),
                y(r.max_abs_deviation)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="black"/>"#,
                cx - bw / 4.0,
                y(r.max_abs_deviation),
                cx + bw / 4.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}g</text>"#,
                h - bottom + 16.0,
                r.target
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="14" text-anchor="middle">mean |deviation| per target, whisker = max (overall {:.2}%)</text>"#,
            w / 2.0,
            100.0 * self.overall_mean_rel_deviation
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Aggregates raw repetitions into per-target statistics, keeping the
/// order in which targets first appear.
pub fn summarize(raw: Vec<Repetition>) -> StabilityReport {
    let mut targets: Vec<f64> = Vec::new();
    for r in &raw {
        if !targets.contains(&r.target) {
            targets.push(r.target);
        }
    }
    let rows = targets
        .iter()
        .map(|&target| {
            let devs: Vec<f64> = raw
                .iter()
                .filter(|r| r.target == target)
                .map(Repetition::deviation)
                .collect();
            let n = devs.len() as f64;
            let mean_abs = devs.iter().map(|d| d.abs()).sum::<f64>() / n;
            TargetStats {
                target,
                reps: devs.len(),
                mean_abs_deviation: mean_abs,
                mean_rel_deviation: if target > 0.0 { mean_abs / target } else { 0.0 },
                max_abs_deviation: devs.iter().map(|d| d.abs()).fold(0.0, f64::max),
                mean_signed_deviation: devs.iter().sum::<f64>() / n,
            }
        })
        .collect();
    let rel: Vec<f64> = raw
        .iter()
        .filter(|r| r.target > 0.0)
        .map(|r| r.deviation().abs() / r.target)
        .collect();
    let overall = if rel.is_empty() {
        0.0
    } else {
        rel.iter().sum::<f64>() / rel.len() as f64
    };
    StabilityReport {
        rows,
        raw,
        overall_mean_rel_deviation: overall,
    }
}

/// Fills the device from empty to `target` grams once and weighs it.
fn fill_once(config: &Config, target: f64, com: f64, stream: u64, seed: u64) -> Result<f64, StabilityError> {
    let geometry = &config.geometry;
    let liquid = config.liquid();
    let mut noise = config.noise;
    noise.seed = seed;
    let mut actuator = SimActuator::with_rng(noise, geometry, rng_stream(seed, stream));
    let mut controller = Controller::new(config.controller_config());

    let line = encode(&Message::Host {
        seq: 1,
        command: HostCommand::SetTarget { mass: target, com },
    })
    .map_err(|e| StabilityError::Rejected {
        target,
        detail: e.to_string(),
    })?;
    let replies = controller.handle_line(&line, |_| None);
    if let Some(crate::protocol::DeviceReport::Err { detail, .. }) = replies.get(1) {
        return Err(StabilityError::Rejected {
            target,
            detail: detail.clone(),
        });
    }

    let dt = config.sim.tick;
    let max_ticks = (config.sim.max_time / dt).ceil() as u64;
    let mut ticks = 0;
    while controller.mode().is_transferring() {
        controller.tick(dt, &mut actuator);
        ticks += 1;
        if ticks > max_ticks {
            return Err(StabilityError::NoSettle(target));
        }
    }
    let loaded = read_scale(actuator.device_mass(&liquid, geometry));
    let empty = read_scale(geometry.device_empty_mass);
    Ok(read_scale(loaded - empty))
}

/// Runs `reps` fills for every target. Repetition `k` overall draws from RNG
/// stream `k + 1` of `seed`, so results do not depend on execution order.
pub fn run_stability(
    targets: &[f64],
    reps: usize,
    config: &Config,
    seed: u64,
) -> Result<StabilityReport, StabilityError> {
    if reps == 0 {
        return Err(StabilityError::NoReps);
    }
    if targets.is_empty() {
        return Err(StabilityError::NoTargets);
    }
    let com = config.stability_com();
    let mut raw = Vec::with_capacity(targets.len() * reps);
    for (ti, &target) in targets.iter().enumerate() {
        for rep in 0..reps {
            let stream = (ti * reps + rep) as u64 + 1;
            let measured = fill_once(config, target, com, stream, seed)?;
            raw.push(Repetition { target, rep, measured });
        }
    }
    Ok(summarize(raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rep_one_target() {
        let r = run_stability(&[30.0], 1, &Config::default(), 5).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.raw.len(), 1);
        assert_eq!(r.rows[0].reps, 1);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            run_stability(&[10.0], 0, &Config::default(), 1),
            Err(StabilityError::NoReps)
        );
        assert_eq!(
            run_stability(&[], 3, &Config::default(), 1),
            Err(StabilityError::NoTargets)
        );
        assert!(matches!(
            run_stability(&[5000.0], 1, &Config::default(), 1),
            Err(StabilityError::Rejected { .. })
        ));
    }

    #[test]
    fn summarize_by_hand() {
        let raw = vec![
            Repetition {
                target: 10.0,
                rep: 0,
                measured: 10.2,
            },
            Repetition {
                target: 10.0,
                rep: 1,
                measured: 9.6,
            },
            Repetition {
                target: 20.0,
                rep: 0,
                measured: 20.0,
            },
        ];
        let s = summarize(raw);
        let r10 = s.row(10.0).unwrap();
        assert!((r10.mean_abs_deviation - 0.3).abs() < 1e-9);
        assert!((r10.max_abs_deviation - 0.4).abs() < 1e-9);
        assert!((r10.mean_signed_deviation + 0.1).abs() < 1e-9);
        assert!((s.overall_mean_rel_deviation - (0.02 + 0.04 + 0.0) / 3.0).abs() < 1e-9);
    }

    #[test]
    fn svg_has_one_bar_per_target() {
        let r = run_stability(&[10.0, 20.0], 2, &Config::default(), 5).unwrap();
        let svg = r.to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("fill=\"#4a78b5\"").count(), 2);
    }
}
