use haptoflow::controller::ActuatorPort;
use haptoflow::sim::{actuate, read_scale, rng_stream, NoiseModel, SimActuator, SimClock};
use haptoflow::weight::Receptacle;
use haptoflow::ActuatorGeometry;
use proptest::prelude::*;

#[test]
fn stroke_error_is_unbiased() {
    let noise = NoiseModel::default();
    let mut rng = rng_stream(99, 0);
    let volume = 25.0;
    let n = 10_000;
    let draws: Vec<f64> = (0..n).map(|_| actuate(volume, &noise, &mut rng) - volume).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean error {mean}, standard error {se}");
    // Spread matches the configured relative sigma.
    let sd = var.sqrt();
    assert!((sd / (volume * noise.relative_sigma) - 1.0).abs() < 0.05, "sd {sd}");
}

#[test]
fn noiseless_strokes_are_exact_to_a_step() {
    let noise = NoiseModel::noiseless();
    let mut rng = rng_stream(1, 0);
    for k in 0..1000 {
        let v = k as f64 * 0.0371;
        let got = actuate(v, &noise, &mut rng);
        assert!((got - v).abs() <= noise.step_volume / 2.0 + 1e-12);
    }
}

#[test]
fn scale_rounds_half_away_from_zero() {
    assert_eq!(read_scale(0.05), 0.1);
    assert_eq!(read_scale(0.15), 0.2);
    assert_eq!(read_scale(130.0), 130.0);
    assert_eq!(read_scale(172.25), 172.3);
    assert_eq!(read_scale(-0.05), -0.1);
}

#[test]
fn clock_counts_integer_ticks() {
    let mut c = SimClock::new(0.001).unwrap();
    for _ in 0..1_000_000 {
        c.advance();
    }
    assert_eq!(c.ticks(), 1_000_000);
    assert_eq!(c.now(), 1000.0);
}

#[test]
fn same_seed_same_strokes() {
    let run = |seed| {
        let mut a = SimActuator::with_rng(NoiseModel::default(), &ActuatorGeometry::default(), rng_stream(seed, 0));
        a.inject(Receptacle::Near, 20.0).unwrap();
        a.step(Receptacle::Near, 1.0).unwrap();
        a.fill()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

proptest! {
    #[test]
    fn scale_reading_is_nearest_tenth(m in 0.0f64..1000.0) {
        let r = read_scale(m);
        prop_assert!((r - m).abs() <= 0.05 + 1e-9);
        prop_assert!(((r * 10.0).round() - r * 10.0).abs() < 1e-6);
    }

    #[test]
    fn actuator_stays_in_bounds(
        seed in any::<u64>(),
        strokes in prop::collection::vec((any::<bool>(), any::<bool>(), 0.0f64..80.0), 1..30),
    ) {
        let geo = ActuatorGeometry::default();
        let mut a = SimActuator::with_rng(NoiseModel { relative_sigma: 0.2, ..NoiseModel::default() }, &geo, rng_stream(seed, 0));
        for (near, inject, v) in strokes {
            let r = if near { Receptacle::Near } else { Receptacle::Far };
            if inject { a.inject(r, v).unwrap() } else { a.withdraw(r, v).unwrap() }
            for k in 1..=4 {
                a.step(r, k as f64 / 4.0).unwrap();
                let f = a.fill();
                prop_assert!((0.0..=geo.receptacle_capacity).contains(&f.near_volume));
                prop_assert!((0.0..=geo.receptacle_capacity).contains(&f.far_volume));
            }
        }
    }

    #[test]
    fn delivered_volume_is_quantized(v in 0.0f64..50.0, seed in any::<u64>()) {
        let noise = NoiseModel::default();
        let got = actuate(v, &noise, &mut rng_stream(seed, 3));
        let steps = got / noise.step_volume;
        prop_assert!((steps - steps.round()).abs() < 1e-6);
        prop_assert!(got >= 0.0);
    }
}
