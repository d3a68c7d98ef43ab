//! Normalized cross-correlation pitch tracking with Viterbi smoothing.
//!
//! The signal is low-passed and resampled to 8 kHz. For every 40 ms grid
//! frame the NCCF is evaluated over all lags in the 60-400 Hz range; local
//! NCCF maxima become candidates and a Viterbi pass picks one per frame,
//! penalizing jumps in log-pitch. Voicing is a logistic map of the chosen
//! NCCF peak.

use crate::audio::{AudioBuffer, DspError, Result};
use crate::frames::FrameGrid;
use crate::resample::resample;

#[derive(Clone, Debug, PartialEq)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    pub analysis_rate: u32,
    pub lowpass_hz: f64,
    /// Local cost is `1 - nccf * (1 - lag_penalty * lag_seconds)`; prefers the
    /// shortest of several equally periodic lags.
    pub lag_penalty: f64,
    /// Viterbi cost per unit of `|ln(f_t / f_{t-1})|`.
    pub transition_weight: f64,
    pub max_candidates: usize,
    pub voicing_slope: f64,
    /// NCCF value that maps to voicing 0.5; frames below it are unvoiced.
    pub voicing_center: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            min_hz: 60.0,
            max_hz: 400.0,
            analysis_rate: 8000,
            lowpass_hz: 1000.0,
            lag_penalty: 5.0,
            transition_weight: 0.3,
            max_candidates: 6,
            voicing_slope: 12.0,
            voicing_center: 0.5,
        }
    }
}

/// Pitch (Hz, 0 when unvoiced) and voicing in `[0, 1]` for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PitchFrame {
    pub pitch_hz: f64,
    pub voicing: f64,
}

impl PitchFrame {
    pub fn is_voiced(&self) -> bool {
        self.pitch_hz > 0.0
    }
}

pub fn extract_pitch_voicing(audio: &AudioBuffer) -> Result<Vec<PitchFrame>> {
    extract_pitch_voicing_with(audio, &PitchConfig::default())
}

#[derive(Clone, Copy)]
struct Candidate {
    hz: f64,
    nccf: f64,
    cost: f64,
}

pub fn extract_pitch_voicing_with(audio: &AudioBuffer, config: &PitchConfig) -> Result<Vec<PitchFrame>> {
    if audio.sample_rate() < 8000 {
        return Err(DspError::SampleRate(audio.sample_rate()));
    }
    let grid = FrameGrid::new(audio.len(), audio.sample_rate())?;
    let rate = config.analysis_rate as f64;
    let signal = if audio.sample_rate() == config.analysis_rate {
        audio.samples().to_vec()
    } else {
        resample(
            audio.samples(),
            audio.sample_rate(),
            config.analysis_rate,
            config.lowpass_hz,
        )
    };
    let ratio = rate / audio.sample_rate() as f64;
    let win = (grid.window as f64 * ratio).round() as usize;
    let min_lag = (rate / config.max_hz).floor().max(2.0) as usize;
    let max_lag = ((rate / config.min_hz).ceil() as usize).min(win.saturating_sub(win / 3));

    let mut frames_candidates = Vec::with_capacity(grid.frames);
    let mut frame = vec![0.0; win];
    let mut prefix = vec![0.0; win + 1];
    let mut nccf = vec![0.0; max_lag + 2];
    for t in 0..grid.frames {
        let start = ((t * grid.hop) as f64 * ratio).round() as usize;
        for (i, slot) in frame.iter_mut().enumerate() {
            *slot = signal.get(start + i).copied().unwrap_or(0.0);
        }
        let mean = frame.iter().sum::<f64>() / win as f64;
        for v in &mut frame {
            *v -= mean;
        }
        for i in 0..win {
            prefix[i + 1] = prefix[i] + frame[i] * frame[i];
        }
        let lo = min_lag.saturating_sub(1).max(1);
        for lag in lo..=max_lag + 1 {
            let n = win - lag;
            let mut num = 0.0;
            for i in 0..n {
                num += frame[i] * frame[i + lag];
            }
            let e1 = prefix[n];
            let e2 = prefix[win] - prefix[lag];
            let den = (e1 * e2).sqrt();
            nccf[lag] = if den > 0.0 { num / den } else { 0.0 };
        }
        frames_candidates.push(candidates(&nccf, min_lag, max_lag, rate, config));
    }
    Ok(viterbi(&frames_candidates, config))
}

fn candidates(nccf: &[f64], min_lag: usize, max_lag: usize, rate: f64, config: &PitchConfig) -> Vec<Candidate> {
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for lag in min_lag..=max_lag {
        let v = nccf[lag];
        if v >= nccf[lag - 1] && v >= nccf[lag + 1] && v > 0.0 {
            peaks.push((lag, v));
        }
    }
    if peaks.is_empty() {
        let best = (min_lag..=max_lag)
            .max_by(|a, b| nccf[*a].total_cmp(&nccf[*b]))
            .unwrap_or(min_lag);
        peaks.push((best, nccf[best].max(0.0)));
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(config.max_candidates.max(1));
    peaks
        .into_iter()
        .map(|(lag, v)| {
            let (a, b, c) = (nccf[lag - 1], v, nccf[lag + 1]);
            let denom = a - 2.0 * b + c;
            let (shift, peak) = if denom < 0.0 {
                let s = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
                (s, b - 0.25 * (a - c) * s)
            } else {
                (0.0, b)
            };
            let lag_f = lag as f64 + shift;
            let nccf = peak.clamp(0.0, 1.0);
            let hz = (rate / lag_f).clamp(config.min_hz, config.max_hz);
            Candidate {
                hz,
                nccf,
                cost: 1.0 - nccf * (1.0 - config.lag_penalty * lag_f / rate),
            }
        })
        .collect()
}

fn viterbi(frames: &[Vec<Candidate>], config: &PitchConfig) -> Vec<PitchFrame> {
    if frames.is_empty() {
        return Vec::new();
    }
    let mut cost: Vec<f64> = frames[0].iter().map(|c| c.cost).collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; frames[0].len()]];
    for t in 1..frames.len() {
        let prev = &frames[t - 1];
        let mut next_cost = Vec::with_capacity(frames[t].len());
        let mut next_back = Vec::with_capacity(frames[t].len());
        for cand in &frames[t] {
            let (arg, best) = prev
                .iter()
                .enumerate()
                .map(|(j, p)| (j, cost[j] + config.transition_weight * (cand.hz / p.hz).ln().abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty candidate list");
            next_cost.push(best + cand.cost);
            next_back.push(arg);
        }
        cost = next_cost;
        back.push(next_back);
    }
    let mut idx = cost
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut out = vec![
        PitchFrame {
            pitch_hz: 0.0,
            voicing: 0.0
        };
        frames.len()
    ];
    for t in (0..frames.len()).rev() {
        let c = frames[t][idx];
        let voicing = 1.0 / (1.0 + (-config.voicing_slope * (c.nccf - config.voicing_center)).exp());
        out[t] = PitchFrame {
            pitch_hz: if voicing >= 0.5 { c.hz } else { 0.0 },
            voicing,
        };
        idx = back[t][idx];
    }
    out
}
