//! Voice activity: a logistic frame classifier on log-energy and spectral
//! flatness, smoothed by a two-state (silence/speech) HMM.

use crate::audio::{AudioBuffer, Result};
use crate::frames::{slice_padded, FrameGrid, SHORT_WINDOW_SECS};
use crate::spectrum::PowerSpectrum;

#[derive(Clone, Debug, PartialEq)]
pub struct VadConfig {
    /// Log-energy (dB re. full scale) is clamped to this range before scoring.
    pub energy_floor_db: f64,
    pub energy_ceiling_db: f64,
    pub energy_center_db: f64,
    pub energy_slope: f64,
    pub flatness_center: f64,
    pub flatness_slope: f64,
    /// HMM probability of staying in the same state between frames.
    pub self_transition: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            energy_floor_db: -80.0,
            energy_ceiling_db: -30.0,
            energy_center_db: -50.0,
            energy_slope: 0.1,
            flatness_center: 0.35,
            flatness_slope: 12.0,
            self_transition: 0.9,
        }
    }
}

pub fn extract_vad(audio: &AudioBuffer) -> Result<Vec<f64>> {
    extract_vad_with(audio, &VadConfig::default())
}

pub fn extract_vad_with(audio: &AudioBuffer, config: &VadConfig) -> Result<Vec<f64>> {
    let frame_probs = frame_speech_probabilities(audio, config)?;
    Ok(hmm_posteriors(&frame_probs, config.self_transition))
}

/// Unsmoothed per-frame speech probabilities from the logistic classifier.
pub fn frame_speech_probabilities(audio: &AudioBuffer, config: &VadConfig) -> Result<Vec<f64>> {
    let grid = FrameGrid::new(audio.len(), audio.sample_rate())?;
    let len = (SHORT_WINDOW_SECS * audio.sample_rate() as f64).round() as usize;
    let mut spectrum = PowerSpectrum::new(len);
    let window_power: f64 = spectrum.window().iter().map(|w| w * w).sum();
    let mut frame = Vec::with_capacity(len);
    let mut power = Vec::new();
    let mut out = Vec::with_capacity(grid.frames);
    for t in 0..grid.frames {
        slice_padded(audio.samples(), grid.centered_start(t, len), len, &mut frame);
        spectrum.compute(&frame, &mut power);
        let energy: f64 = frame.iter().zip(spectrum.window()).map(|(x, w)| (x * w).powi(2)).sum();
        let db = 10.0 * (energy / window_power).max(1e-30).log10();
        let db = db.clamp(config.energy_floor_db, config.energy_ceiling_db);
        let z = config.energy_slope * (db - config.energy_center_db)
            + config.flatness_slope * (config.flatness_center - spectral_flatness(&power[1..]));
        out.push(1.0 / (1.0 + (-z).exp()));
    }
    Ok(out)
}

/// Geometric over arithmetic mean of a power spectrum; 1 for an all-zero spectrum.
pub fn spectral_flatness(power: &[f64]) -> f64 {
    let mean = power.iter().sum::<f64>() / power.len() as f64;
    if mean <= 1e-20 {
        return 1.0;
    }
    let log_mean = power.iter().map(|p| (p + 1e-20 * mean).ln()).sum::<f64>() / power.len() as f64;
    (log_mean.exp() / mean).clamp(0.0, 1.0)
}

/// Speech-state posteriors of a symmetric two-state HMM whose emission
/// likelihoods are `p` (speech) and `1 - p` (silence), via scaled
/// forward-backward with a uniform initial state.
pub fn hmm_posteriors(probs: &[f64], self_transition: f64) -> Vec<f64> {
    let n = probs.len();
    if n == 0 {
        return Vec::new();
    }
    let stay = self_transition;
    let switch = 1.0 - self_transition;
    let emit = |p: f64| [(1.0 - p).max(1e-300), p.max(1e-300)];
    let mut alpha = vec![[0.0f64; 2]; n];
    let e0 = emit(probs[0]);
    let mut a = [0.5 * e0[0], 0.5 * e0[1]];
    let s = a[0] + a[1];
    alpha[0] = [a[0] / s, a[1] / s];
    for t in 1..n {
        let prev = alpha[t - 1];
        let e = emit(probs[t]);
        a = [
            (prev[0] * stay + prev[1] * switch) * e[0],
            (prev[0] * switch + prev[1] * stay) * e[1],
        ];
        let s = a[0] + a[1];
        alpha[t] = [a[0] / s, a[1] / s];
    }
    let mut out = vec![0.0; n];
    let mut beta = [1.0f64, 1.0];
    for t in (0..n).rev() {
        let g = [alpha[t][0] * beta[0], alpha[t][1] * beta[1]];
        out[t] = g[1] / (g[0] + g[1]);
        if t > 0 {
            let e = emit(probs[t]);
            let b = [
                stay * e[0] * beta[0] + switch * e[1] * beta[1],
                switch * e[0] * beta[0] + stay * e[1] * beta[1],
            ];
            let s = b[0] + b[1];
            beta = [b[0] / s, b[1] / s];
        }
    }
    out
}
