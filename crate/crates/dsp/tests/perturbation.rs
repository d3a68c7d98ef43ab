mod common;

use common::*;
use ddsd_dsp::{extract_jitter_shimmer, extract_pitch_voicing, DspError, Perturbation, PitchFrame};

fn voiced_perturbations(samples: Vec<f64>) -> Vec<Perturbation> {
    let a = audio(samples);
    let pitch = extract_pitch_voicing(&a).unwrap();
    let js = extract_jitter_shimmer(&a, &pitch).unwrap();
    let voiced: Vec<Perturbation> = pitch
        .iter()
        .zip(js)
        .filter(|(f, _)| f.is_voiced())
        .map(|(_, j)| j)
        .collect();
    assert!(voiced.len() > 80, "only {} voiced frames", voiced.len());
    voiced
}

/// Definition applied directly to the generated periods / amplitudes.
fn scalar_oracle(values: &[f64]) -> f64 {
    let diffs: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (values.len() - 1) as f64;
    diffs / (values.iter().sum::<f64>() / values.len() as f64)
}

#[test]
fn periodic_pulse_train_is_unperturbed() {
    let times = onsets(&[1.0 / 150.0], 1.0);
    for p in voiced_perturbations(pulse_train(&times, &vec![0.5; times.len()], 1.0)) {
        assert!(p.jitter < 0.005 && p.shimmer < 0.005, "{p:?}");
    }
}

#[test]
fn alternating_periods_give_closed_form_jitter() {
    let periods = [0.0066, 0.0067];
    let expected = scalar_oracle(&[0.0066, 0.0067, 0.0066, 0.0067, 0.0066, 0.0067]);
    assert!((expected - 0.1 / 6.65).abs() < 1e-12);
    let times = onsets(&periods, 1.0);
    let voiced = voiced_perturbations(pulse_train(&times, &vec![0.5; times.len()], 1.0));
    let med = median(voiced.iter().map(|p| p.jitter).collect());
    assert!((med - expected).abs() / expected < 0.2, "jitter {med} vs {expected}");
    for p in &voiced {
        assert!((p.jitter - expected).abs() / expected < 0.2);
    }
}

#[test]
fn alternating_peaks_give_closed_form_shimmer() {
    let times = onsets(&[1.0 / 150.0], 1.0);
    let amps: Vec<f64> = (0..times.len()).map(|k| if k % 2 == 0 { 0.55 } else { 0.45 }).collect();
    let expected = scalar_oracle(&amps[..12]);
    assert!((expected - 0.2).abs() < 1e-9);
    let voiced = voiced_perturbations(pulse_train(&times, &amps, 1.0));
    for p in &voiced {
        assert!((p.shimmer - expected).abs() / expected < 0.2, "shimmer {}", p.shimmer);
        assert!(p.jitter < 0.005);
    }
}

#[test]
fn unvoiced_frames_are_zero() {
    let mut x = vec![0.0; 8000];
    let times = onsets(&[0.0066, 0.0067], 0.5);
    x.extend(pulse_train(&times, &vec![0.5; times.len()], 0.5));
    let a = audio(x);
    let pitch = extract_pitch_voicing(&a).unwrap();
    let js = extract_jitter_shimmer(&a, &pitch).unwrap();
    assert!(pitch.iter().any(|f| f.is_voiced()) && pitch.iter().any(|f| !f.is_voiced()));
    for (f, p) in pitch.iter().zip(&js) {
        if !f.is_voiced() {
            assert_eq!(*p, Perturbation::default());
        }
        assert!((0.0..=1.0).contains(&p.jitter) && (0.0..=1.0).contains(&p.shimmer));
    }
}

#[test]
fn misaligned_pitch_track_is_rejected() {
    let a = audio(vec![0.0; 16000]);
    let short = vec![
        PitchFrame {
            pitch_hz: 0.0,
            voicing: 0.0
        };
        10
    ];
    assert!(matches!(
        extract_jitter_shimmer(&a, &short),
        Err(DspError::Alignment {
            expected: 97,
            found: 10
        })
    ));
}
