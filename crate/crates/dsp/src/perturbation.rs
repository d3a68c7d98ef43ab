//! Local jitter and shimmer from per-period peak marks.
//!
//! Inside each voiced run the waveform maximum of every pitch period is
//! located (the search for the next mark spans 0.8-1.2 expected periods)
//! and refined by parabolic interpolation. For a frame, the marks inside its
//! 40 ms window give
//!
//! ```text
//! jitter  = mean |T_i - T_{i-1}| / mean T_i
//! shimmer = mean |A_i - A_{i-1}| / mean A_i
//! ```
//!
//! both clipped to `[0, 1]` and zero on unvoiced frames.

use crate::audio::{AudioBuffer, DspError, Result};
use crate::frames::FrameGrid;
use crate::pitch::PitchFrame;

/// Jitter and shimmer for one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Perturbation {
    pub jitter: f64,
    pub shimmer: f64,
}

/// A located period peak: fractional sample position and amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodMark {
    pub position: f64,
    pub amplitude: f64,
    /// Index of the voiced run the mark belongs to.
    pub run: usize,
}

pub fn extract_jitter_shimmer(audio: &AudioBuffer, pitch: &[PitchFrame]) -> Result<Vec<Perturbation>> {
    let grid = FrameGrid::new(audio.len(), audio.sample_rate())?;
    if pitch.len() != grid.frames {
        return Err(DspError::Alignment {
            expected: grid.frames,
            found: pitch.len(),
        });
    }
    let marks = period_marks(audio, &grid, pitch);
    let half = grid.window as f64 / 2.0;
    let mut out = vec![Perturbation::default(); grid.frames];
    let mut first = 0;
    for (t, frame) in pitch.iter().enumerate() {
        if !frame.is_voiced() {
            continue;
        }
        let (lo, hi) = (grid.center(t) - half, grid.center(t) + half);
        while first < marks.len() && marks[first].position < lo {
            first += 1;
        }
        let inside: Vec<PeriodMark> = marks[first..]
            .iter()
            .take_while(|m| m.position <= hi)
            .copied()
            .collect();
        out[t] = perturbation_of(&inside);
    }
    Ok(out)
}

/// Jitter/shimmer over a run of consecutive marks (marks from different
/// voiced runs never form a period).
pub fn perturbation_of(marks: &[PeriodMark]) -> Perturbation {
    let mut periods = Vec::new();
    let mut amp_diffs = Vec::new();
    for w in marks.windows(2) {
        if w[0].run == w[1].run {
            periods.push(w[1].position - w[0].position);
            amp_diffs.push((w[1].amplitude - w[0].amplitude).abs());
        }
    }
    let mean_amp = if marks.is_empty() {
        0.0
    } else {
        marks.iter().map(|m| m.amplitude).sum::<f64>() / marks.len() as f64
    };
    let shimmer = if amp_diffs.is_empty() || mean_amp <= 0.0 {
        0.0
    } else {
        amp_diffs.iter().sum::<f64>() / amp_diffs.len() as f64 / mean_amp
    };
    let jitter = if periods.len() < 2 {
        0.0
    } else {
        let diffs: f64 = periods.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
        let mean_period = periods.iter().sum::<f64>() / periods.len() as f64;
        diffs / (periods.len() - 1) as f64 / mean_period
    };
    Perturbation {
        jitter: jitter.clamp(0.0, 1.0),
        shimmer: shimmer.clamp(0.0, 1.0),
    }
}

/// Period peaks within every voiced run of `pitch`.
pub fn period_marks(audio: &AudioBuffer, grid: &FrameGrid, pitch: &[PitchFrame]) -> Vec<PeriodMark> {
    let x = audio.samples();
    let sr = audio.sample_rate() as f64;
    let mut marks = Vec::new();
    let mut t = 0;
    let mut run = 0;
    while t < pitch.len() {
        if !pitch[t].is_voiced() {
            t += 1;
            continue;
        }
        let start_frame = t;
        while t < pitch.len() && pitch[t].is_voiced() {
            t += 1;
        }
        let end_frame = t - 1;
        let lo = (grid.center(start_frame) - grid.hop as f64 / 2.0).max(0.0);
        let hi = (grid.center(end_frame) + grid.hop as f64 / 2.0).min((x.len() - 1) as f64);
        let period_at = |pos: f64| -> f64 {
            let f = (((pos - grid.window as f64 / 2.0) / grid.hop as f64).round().max(0.0) as usize)
                .clamp(start_frame, end_frame);
            sr / pitch[f].pitch_hz
        };
        let first_end = (lo + period_at(lo)).min(hi);
        let mut current = match peak_in(x, lo, first_end) {
            Some(m) => m,
            None => continue,
        };
        marks.push(PeriodMark {
            position: current.0,
            amplitude: current.1,
            run,
        });
        loop {
            let p = period_at(current.0);
            let (a, b) = (current.0 + 0.8 * p, current.0 + 1.2 * p);
            if b > hi {
                break;
            }
            match peak_in(x, a, b) {
                Some(next) => {
                    marks.push(PeriodMark {
                        position: next.0,
                        amplitude: next.1,
                        run,
                    });
                    current = next;
                }
                None => break,
            }
        }
        run += 1;
    }
    marks
}

/// Parabolic-refined maximum of `x` over sample range `[lo, hi]`.
fn peak_in(x: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let a = lo.ceil().max(0.0) as usize;
    let b = (hi.floor() as usize).min(x.len().saturating_sub(1));
    if a > b {
        return None;
    }
    let mut best = a;
    for i in a..=b {
        if x[i] > x[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 >= x.len() {
        return Some((best as f64, x[best].abs()));
    }
    let (l, c, r) = (x[best - 1], x[best], x[best + 1]);
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return Some((best as f64, c.abs()));
    }
    let shift = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
    Some((best as f64 + shift, (c - 0.25 * (l - r) * shift).abs()))
}
