mod common;

use common::*;
use ddsd_dsp::{extract_vad, frame_speech_probabilities, hmm_posteriors, FrameGrid, VadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn tone_silence_alternation_matches_mask() {
    let mut x = Vec::new();
    for k in 0..4 {
        if k % 2 == 0 {
            x.extend(sine(200.0, 0.5, 0.3));
        } else {
            x.extend(vec![0.0; 8000]);
        }
    }
    let vad = extract_vad(&audio(x)).unwrap();
    let grid = FrameGrid::new(32000, SR).unwrap();
    let (mut correct, mut total) = (0, 0);
    for (t, v) in vad.iter().enumerate() {
        let center = grid.center(t) / SR as f64;
        let nearest_boundary = (center / 0.5).round() * 0.5;
        if (center - nearest_boundary).abs() <= 0.030 {
            continue;
        }
        let speech = ((center / 0.5).floor() as usize).is_multiple_of(2);
        total += 1;
        if (*v >= 0.5) == speech {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;
    assert!(accuracy > 0.95, "accuracy {accuracy}");
}

#[test]
fn silence_has_low_vad() {
    let vad = extract_vad(&audio(vec![0.0; 16000])).unwrap();
    assert!(vad.iter().sum::<f64>() / (vad.len() as f64) < 0.1);
}

#[test]
fn click_in_silence_never_becomes_speech() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = vec![0.0; 16000];
    for v in &mut x[8000..8080] {
        *v = rng.random_range(-1.0..1.0);
    }
    let vad = extract_vad(&audio(x)).unwrap();
    assert!(
        vad.iter().all(|v| *v < 0.5),
        "max {}",
        vad.iter().cloned().fold(0.0, f64::max)
    );
}

#[test]
fn hmm_removes_one_frame_islands() {
    let mut probs = vec![0.01; 40];
    probs[20] = 0.85;
    let smoothed = hmm_posteriors(&probs, 0.9);
    assert!(smoothed[20] < 0.5, "{}", smoothed[20]);
    let mut run = vec![0.01; 40];
    for p in &mut run[10..30] {
        *p = 0.85;
    }
    let smoothed = hmm_posteriors(&run, 0.9);
    assert!(smoothed[12..28].iter().all(|v| *v > 0.9));
}

#[test]
fn classifier_prefers_loud_tonal_frames() {
    let cfg = VadConfig::default();
    let tone = frame_speech_probabilities(&audio(sine(300.0, 0.3, 0.3)), &cfg).unwrap();
    let silence = frame_speech_probabilities(&audio(vec![0.0; 4800]), &cfg).unwrap();
    assert!(tone.iter().all(|p| *p > 0.9));
    assert!(silence.iter().all(|p| *p < 0.01));
}
