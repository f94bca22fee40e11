use haptoflow::vibration::{
    amplitude_from_impact, find_triggers, render_burst, sample_count, waveform_sample, AccelSample, ImpactMapping,
    TriggerDetector, VibrationBurst,
};
use proptest::prelude::*;

fn bursts() -> impl Strategy<Value = VibrationBurst> {
    (0.0f64..50.0, 0.0f64..40.0, 1.0f64..3000.0, -3.2f64..3.2, 0.01f64..2.0).prop_map(|(a, l, w, p, d)| {
        VibrationBurst {
            amplitude: a,
            decay: l,
            angular_frequency: w,
            phase: p,
            duration: d,
        }
    })
}

proptest! {
    #[test]
    fn rendered_samples_match_pointwise(b in bursts(), rate in 10.0f64..5000.0) {
        let samples = render_burst(&b, rate).unwrap();
        prop_assert_eq!(samples.len(), sample_count(b.duration, rate));
        for (k, y) in samples.iter().enumerate().step_by(7) {
            let t = (k as f64 / rate).min(b.duration);
            prop_assert_eq!(*y, waveform_sample(&b, t).unwrap());
        }
    }

    #[test]
    fn envelope_bounds_samples(b in bursts(), frac in 0.0f64..=1.0) {
        let t = frac * b.duration;
        let y = waveform_sample(&b, t).unwrap();
        prop_assert!(y.abs() <= b.envelope(t) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn impact_amplitude_is_capped_newton(mass in 0.0f64..1000.0, accel in 0.0f64..5000.0) {
        let mapping = ImpactMapping::default();
        let a = amplitude_from_impact(mass, accel, mapping).unwrap();
        let force = mapping.gain * mass / 1000.0 * accel;
        prop_assert!((a - force.min(mapping.max_drive)).abs() <= 1e-9 * (1.0 + force));
    }

    #[test]
    fn streaming_matches_batch(
        mags in prop::collection::vec(0.0f64..1600.0, 0..200),
        refractory in 0.0f64..0.5,
    ) {
        let trace: Vec<AccelSample> = mags.iter().enumerate().map(|(k, &m)| AccelSample::new(k as f64 * 0.01, m)).collect();
        let batch = find_triggers(&trace, 800.0, refractory).unwrap();
        let mut det = TriggerDetector::new(800.0, refractory);
        let streamed: Vec<_> = trace.iter().filter_map(|s| det.push(*s).unwrap()).collect();
        prop_assert_eq!(batch, streamed);
    }
}

#[test]
fn out_of_window_and_invalid_bursts() {
    let b = VibrationBurst::default();
    assert!(waveform_sample(&b, -0.01).is_err());
    assert!(waveform_sample(&b, b.duration + 0.01).is_err());
    assert_eq!(waveform_sample(&b, 0.0).unwrap(), 1.0);
    for bad in [
        VibrationBurst { decay: -1.0, ..b },
        VibrationBurst {
            angular_frequency: 0.0,
            ..b
        },
        VibrationBurst { duration: 0.0, ..b },
    ] {
        assert!(bad.validate().is_err());
        assert!(render_burst(&bad, 1000.0).is_err());
    }
}

#[test]
fn unsorted_trace_is_rejected() {
    let trace = [AccelSample::new(0.1, 0.0), AccelSample::new(0.0, 900.0)];
    assert!(find_triggers(&trace, 800.0, 0.5).is_err());
}

#[test]
fn sample_exactly_at_threshold_does_not_fire() {
    let trace: Vec<_> = [0.0, 800.0, 800.0, 800.0001, 0.0]
        .iter()
        .enumerate()
        .map(|(k, &m)| AccelSample::new(k as f64, m))
        .collect();
    let hits = find_triggers(&trace, 800.0, 0.0).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].index, 3);
}
