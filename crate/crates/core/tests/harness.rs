use std::path::Path;

use haptoflow::config::Config;
use haptoflow::harness::{
    load_scenario, parse_scenario, replay, run_stability, summarize, Catalog, EventKind, Repetition, ScenarioError,
};

fn scenarios() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios"))
}

#[test]
fn scenario_syntax_errors_name_the_line() {
    let cases = [
        ("t=0 pickup sword\nt=1 jump\n", 2),
        ("pickup sword\n", 1),
        ("t=0 pickup\n", 1),
        ("t=-1 release\n", 1),
        ("# c\n\nt=x release\n", 3),
    ];
    for (text, line) in cases {
        match parse_scenario(text) {
            Err(ScenarioError::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(
        parse_scenario("t=2 release\nt=1 release\n"),
        Err(ScenarioError::NonMonotone { line: 2, .. })
    ));
    let s = parse_scenario("t=0 pickup unicorn # comment\n").unwrap();
    assert!(matches!(
        s.validate(&Catalog::builtin()),
        Err(ScenarioError::UnknownObject { .. })
    ));
}

#[test]
fn parses_every_event_kind() {
    let s = parse_scenario("t=0 pickup water_gun\nt=1.5 spray 2\nt=4 accel_trace a.csv\nt=5 release\n").unwrap();
    let kinds: Vec<_> = s.events.iter().map(|e| &e.kind).collect();
    assert!(matches!(kinds[0], EventKind::Pickup(id) if id == "water_gun"));
    assert!(matches!(kinds[1], EventKind::Spray(d) if *d == 2.0));
    assert!(matches!(kinds[2], EventKind::AccelTrace(_)));
    assert!(matches!(kinds[3], EventKind::Release));
}

#[test]
fn stability_stats_match_raw_csv() {
    let report = run_stability(&[10.0, 30.0, 50.0], 20, &Config::default(), 9).unwrap();
    let text = report.to_raw_csv_string();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        raw.push((rec[0].parse().unwrap(), rec[2].parse().unwrap()));
    }
    assert_eq!(raw.len(), 60);
    for row in &report.rows {
        let devs: Vec<f64> = raw
            .iter()
            .filter(|(t, _)| *t == row.target)
            .map(|(t, m)| m - t)
            .collect();
        let n = devs.len() as f64;
        let mad = devs.iter().map(|d| d.abs()).sum::<f64>() / n;
        assert!((mad - row.mean_abs_deviation).abs() < 1e-9);
        assert!((mad / row.target - row.mean_rel_deviation).abs() < 1e-9);
        let max = devs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        assert!((max - row.max_abs_deviation).abs() < 1e-9);
        let signed = devs.iter().sum::<f64>() / n;
        assert!((signed - row.mean_signed_deviation).abs() < 1e-9);
    }
    let overall = raw.iter().map(|(t, m)| (m - t).abs() / t).sum::<f64>() / 60.0;
    assert!((overall - report.overall_mean_rel_deviation).abs() < 1e-9);
}

#[test]
fn summarize_groups_by_target() {
    let raw = vec![
        Repetition {
            target: 10.0,
            rep: 0,
            measured: 10.2,
        },
        Repetition {
            target: 10.0,
            rep: 1,
            measured: 9.9,
        },
        Repetition {
            target: 20.0,
            rep: 0,
            measured: 20.0,
        },
    ];
    let r = summarize(raw);
    assert_eq!(r.rows.len(), 2);
    assert!((r.row(10.0).unwrap().mean_abs_deviation - 0.15).abs() < 1e-9);
    assert_eq!(r.row(20.0).unwrap().max_abs_deviation, 0.0);
}

#[test]
fn lossy_link_still_settles() {
    let mut config = Config::default();
    config.link.drop_probability = 0.3;
    let catalog = config.catalog().unwrap();
    let s = load_scenario(&scenarios().join("playthrough.scn"), &catalog).unwrap();
    let report = replay(&s, &catalog, &config, 11).unwrap();
    assert!(report.dropped_lines > 0);
    assert!(report.retransmissions > 0);
    assert_eq!(report.pickups.len(), 4);
    assert!(report.pickups.iter().all(|p| p.achieved_mass.is_some()));
    let again = replay(&s, &catalog, &config, 11).unwrap();
    assert_eq!(report.to_csv_string(), again.to_csv_string());
    assert_eq!(report.log.to_csv_string(), again.log.to_csv_string());
}

#[test]
fn seeds_change_outcomes() {
    let config = Config::default();
    let catalog = config.catalog().unwrap();
    let s = load_scenario(&scenarios().join("playthrough.scn"), &catalog).unwrap();
    let a = replay(&s, &catalog, &config, 1).unwrap();
    let b = replay(&s, &catalog, &config, 2).unwrap();
    assert_ne!(a.log.to_csv_string(), b.log.to_csv_string());
}

#[test]
fn spray_drains_the_water_gun() {
    let config = Config::default();
    let catalog = config.catalog().unwrap();
    let s = parse_scenario("t=0 pickup water_gun\nt=3 spray 2\n").unwrap();
    let report = replay(&s, &catalog, &config, 1).unwrap();
    let targets: Vec<f64> = report
        .log
        .entries()
        .filter(|(_, e, d)| *e == "host_tx" && d.contains("SET_TARGET"))
        .map(|(_, _, d)| d.split(' ').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(targets.len() > 2, "{targets:?}");
    assert!(targets.windows(2).all(|w| w[1] < w[0]), "{targets:?}");
    // 10 g/s for 2 s out of 50 g.
    assert!((targets.last().unwrap() - 30.0).abs() < 1e-9, "{targets:?}");
}

#[test]
fn spray_without_object_is_rejected() {
    let config = Config::default();
    let catalog = config.catalog().unwrap();
    let s = parse_scenario("t=0 spray 1\n").unwrap();
    assert!(replay(&s, &catalog, &config, 1).is_err());
}

#[test]
fn latency_matches_sequential_strokes() {
    let config = Config::default();
    let catalog = Catalog::builtin();
    let s = parse_scenario("t=0 pickup square_stone\n").unwrap();
    let report = replay(&s, &catalog, &config, 1).unwrap();
    let latency = report.pickups[0].fill_latency.unwrap();
    let expected = 50.0 * 1000.0 / (std::f64::consts::PI * 100.0) / 60.0;
    assert!((latency - expected).abs() < 1e-6, "{latency}");
}

#[test]
fn noiseless_pickup_is_exact() {
    let config = Config {
        noise: haptoflow::NoiseModel::noiseless(),
        ..Config::default()
    };
    let catalog = Catalog::builtin();
    let s = parse_scenario("t=0.0 pickup square_stone\n").unwrap();
    let report = replay(&s, &catalog, &config, 1).unwrap();
    assert_eq!(report.pickups[0].achieved_mass, Some(50.0));
}

#[test]
fn event_log_is_time_ordered_and_complete() {
    let mut config = Config::default();
    config.link.drop_probability = 0.2;
    let catalog = config.catalog().unwrap();
    let s = load_scenario(&scenarios().join("playthrough.scn"), &catalog).unwrap();
    let report = replay(&s, &catalog, &config, 4).unwrap();
    let entries: Vec<_> = report.log.entries().collect();
    for w in entries.windows(2) {
        assert!(w[0].0 <= w[1].0, "{:?} then {:?}", w[0], w[1]);
    }
    // Every line put on the wire shows up as delivered or dropped.
    let sent = entries
        .iter()
        .filter(|e| matches!(e.1, "host_tx" | "host_retx" | "device_tx"))
        .count();
    let fate = entries
        .iter()
        .filter(|e| matches!(e.1, "device_rx" | "host_rx" | "link_drop"))
        .count();
    assert_eq!(sent, fate);
}

#[test]
fn empty_scenario_gives_empty_report() {
    let config = Config::default();
    let report = replay(&parse_scenario("# nothing\n").unwrap(), &Catalog::builtin(), &config, 1).unwrap();
    assert!(report.is_empty());
}

#[test]
fn single_rep_single_target() {
    let r = run_stability(&[25.0], 1, &Config::default(), 1).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.raw.len(), 1);
}

#[test]
fn concurrent_strokes_halve_balanced_latency() {
    let mut config = Config {
        noise: haptoflow::NoiseModel::noiseless(),
        ..Config::default()
    };
    let s = parse_scenario("t=0.0 pickup water_gun\n").unwrap();
    let seq = replay(&s, &Catalog::builtin(), &config, 1).unwrap().pickups[0]
        .fill_latency
        .unwrap();
    config.device.concurrent_strokes = true;
    let par = replay(&s, &Catalog::builtin(), &config, 1).unwrap().pickups[0]
        .fill_latency
        .unwrap();
    assert!((par - seq / 2.0).abs() < 1e-6, "{seq} vs {par}");
}
