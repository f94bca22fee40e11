//! Scenario files: one timed interaction per line.
//!
//! ```text
//! # comment
//! t=0.0 pickup sword
//! t=3.0 accel_trace swing.csv
//! t=6.0 spray 2.5
//! t=9.0 release
//! ```
//!
//! Times are seconds and must not decrease. Trace paths are relative to the
//! scenario file.

use std::path::{Path, PathBuf};

use thiserror::Error;

use super::catalog::Catalog;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: time {time} s is earlier than the previous event at {previous} s")]
    NonMonotone { line: usize, time: f64, previous: f64 },
    #[error("line {line}: object `{id}` is not in the catalog")]
    UnknownObject { line: usize, id: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Pickup(String),
    Release,
    AccelTrace(PathBuf),
    /// Spray for this many seconds.
    Spray(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    /// s
    pub time: f64,
    pub kind: EventKind,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks every pickup against `catalog`.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), ScenarioError> {
        for e in &self.events {
            if let EventKind::Pickup(id) = &e.kind {
                if !catalog.contains(id) {
                    return Err(ScenarioError::UnknownObject {
                        line: e.line,
                        id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Resolves relative trace paths against `base`.
    pub fn with_base_dir(mut self, base: &Path) -> Self {
        for e in &mut self.events {
            if let EventKind::AccelTrace(p) = &mut e.kind {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        self
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_seconds(line: usize, token: &str, what: &str) -> Result<f64, ScenarioError> {
    let v: f64 = token
        .parse()
        .map_err(|_| syntax(line, format!("{what} `{token}` is not a number")))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(syntax(
            line,
            format!("{what} must be a non-negative number, got `{token}`"),
        ))
    }
}

/// Parses scenario text without consulting a catalog.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut events = Vec::new();
    let mut previous: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let stamp = tokens.next().expect("non-empty line has a token");
        let time = stamp
            .strip_prefix("t=")
            .ok_or_else(|| syntax(line, format!("expected `t=<seconds>`, got `{stamp}`")))
            .and_then(|t| parse_seconds(line, t, "time"))?;
        if let Some(prev) = previous {
            if time < prev {
                return Err(ScenarioError::NonMonotone {
                    line,
                    time,
                    previous: prev,
                });
            }
        }
        previous = Some(time);

        let verb = tokens
            .next()
            .ok_or_else(|| syntax(line, "missing event kind after time"))?;
        let args: Vec<&str> = tokens.collect();
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(syntax(
                    line,
                    format!("`{verb}` takes {n} argument(s), got {}", args.len()),
                ))
            }
        };
        let kind = match verb {
            "pickup" => {
                want(1)?;
                EventKind::Pickup(args[0].to_string())
            }
            "release" => {
                want(0)?;
                EventKind::Release
            }
            "accel_trace" => {
                want(1)?;
                EventKind::AccelTrace(PathBuf::from(args[0]))
            }
            "spray" => {
                want(1)?;
                EventKind::Spray(parse_seconds(line, args[0], "spray duration")?)
            }
            other => return Err(syntax(line, format!("unknown event kind `{other}`"))),
        };
        events.push(ScenarioEvent { time, kind, line });
    }
    Ok(Scenario { events })
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path, catalog: &Catalog) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let scenario = parse_scenario(&text)?;
    scenario.validate(catalog)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(scenario.with_base_dir(base))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_comments() {
        assert!(parse_scenario("").unwrap().is_empty());
        assert!(parse_scenario("# nothing\n\n   # more\n").unwrap().is_empty());
    }

    #[test]
    fn single_pickup() {
        let s = parse_scenario("t=0.0 pickup sword").unwrap();
        assert_eq!(
            s.events,
            vec![ScenarioEvent {
                time: 0.0,
                kind: EventKind::Pickup("sword".into()),
                line: 1
            }]
        );
    }

    #[test]
    fn all_kinds() {
        let s = parse_scenario("t=0 pickup water_gun # grab\nt=2.5 accel_trace a.csv\nt=3 spray 1.5\nt=3 release\n")
            .unwrap();
        let kinds: Vec<_> = s.events.iter().map(|e| e.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::Pickup("water_gun".into()),
                EventKind::AccelTrace("a.csv".into()),
                EventKind::Spray(1.5),
                EventKind::Release,
            ]
        );
        let s = s.with_base_dir(Path::new("/data"));
        assert_eq!(s.events[1].kind, EventKind::AccelTrace("/data/a.csv".into()));
    }

    #[test]
    fn unknown_object_fails_validation() {
        let s = parse_scenario("t=1.0 pickup x").unwrap();
        assert_eq!(
            s.validate(&Catalog::builtin()),
            Err(ScenarioError::UnknownObject {
                line: 1,
                id: "x".into()
            })
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_scenario("t=0 release\n\nt=x pickup a\n").unwrap_err();
        assert!(matches!(e, ScenarioError::Syntax { line: 3, .. }));
        let e = parse_scenario("0 release").unwrap_err();
        assert!(matches!(e, ScenarioError::Syntax { line: 1, .. }));
        let e = parse_scenario("t=1 release\nt=0.5 release").unwrap_err();
        assert!(matches!(e, ScenarioError::NonMonotone { line: 2, .. }));
        let e = parse_scenario("t=1 jump").unwrap_err();
        assert!(matches!(e, ScenarioError::Syntax { line: 1, .. }));
        assert!(parse_scenario("t=1 release now").is_err());
        assert!(parse_scenario("t=1 pickup").is_err());
        assert!(parse_scenario("t=1 spray -2").is_err());
        assert!(parse_scenario("t=-1 release").is_err());
        assert!(parse_scenario("t=1").is_err());
    }
}
