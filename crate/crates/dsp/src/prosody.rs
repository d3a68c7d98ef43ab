use std::fmt::Write as _;

use crate::audio::{AudioBuffer, DspError, Result};
use crate::frames::FRAME_RATE_HZ;
use crate::perturbation::extract_jitter_shimmer;
use crate::pitch::extract_pitch_voicing;
use crate::vad::extract_vad;

pub const PROSODY_DIM: usize = 5;
pub const PROSODY_COLUMNS: [&str; PROSODY_DIM] = ["log_pitch", "voicing", "jitter", "shimmer", "vad"];

/// Per-frame `[ln(pitch Hz) or 0, voicing, jitter, shimmer, vad]` at 100 Hz, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProsodyTrack {
    pub frames: usize,
    pub data: Vec<f64>,
}

impl ProsodyTrack {
    pub fn new(frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * PROSODY_DIM {
            return Err(DspError::Alignment {
                expected: frames * PROSODY_DIM,
                found: data.len(),
            });
        }
        Ok(Self { frames, data })
    }

    pub fn frame_rate(&self) -> u32 {
        FRAME_RATE_HZ
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * PROSODY_DIM..(t + 1) * PROSODY_DIM]
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(PROSODY_DIM).copied()
    }

    /// Whitespace-separated text, one frame per line after a header.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# frames={} rate={}Hz {}\n",
            self.frames,
            FRAME_RATE_HZ,
            PROSODY_COLUMNS.join(" ")
        );
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }
}

pub fn assemble_prosody_track(audio: &AudioBuffer) -> Result<ProsodyTrack> {
    let pitch = extract_pitch_voicing(audio)?;
    let perturbation = extract_jitter_shimmer(audio, &pitch)?;
    let vad = extract_vad(audio)?;
    if vad.len() != pitch.len() {
        return Err(DspError::Alignment {
            expected: pitch.len(),
            found: vad.len(),
        });
    }
    let mut data = Vec::with_capacity(pitch.len() * PROSODY_DIM);
    for ((p, j), v) in pitch.iter().zip(&perturbation).zip(&vad) {
        let log_pitch = if p.is_voiced() { p.pitch_hz.ln() } else { 0.0 };
        data.extend([log_pitch, p.voicing, j.jitter, j.shimmer, *v]);
    }
    ProsodyTrack::new(pitch.len(), data)
}
