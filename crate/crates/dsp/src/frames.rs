use crate::audio::{DspError, Result};

/// Frame rate shared by every feature track.
pub const FRAME_RATE_HZ: u32 = 100;
/// Window that defines the frame grid (pitch, jitter, shimmer).
pub const GRID_WINDOW_SECS: f64 = 0.040;
/// Short window used by VAD and filterbanks, centered on the same grid.
pub const SHORT_WINDOW_SECS: f64 = 0.025;

/// The 10 ms frame grid. Frame `t` covers `[t * hop, t * hop + window)`;
/// shorter analysis windows are centered on the same point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameGrid {
    pub sample_rate: u32,
    pub hop: usize,
    pub window: usize,
    pub frames: usize,
}

impl FrameGrid {
    pub fn new(num_samples: usize, sample_rate: u32) -> Result<Self> {
        if sample_rate < FRAME_RATE_HZ {
            return Err(DspError::SampleRate(sample_rate));
        }
        let hop = (sample_rate / FRAME_RATE_HZ) as usize;
        let window = (GRID_WINDOW_SECS * sample_rate as f64).round() as usize;
        if num_samples < window {
            return Err(DspError::TooShort {
                samples: num_samples,
                needed: window,
            });
        }
        Ok(Self {
            sample_rate,
            hop,
            window,
            frames: (num_samples - window) / hop + 1,
        })
    }

    /// Center of frame `t` in (fractional) samples.
    pub fn center(&self, t: usize) -> f64 {
        (t * self.hop) as f64 + self.window as f64 / 2.0
    }

    /// Start index of a window of `len` samples centered on frame `t` (may be negative).
    pub fn centered_start(&self, t: usize, len: usize) -> isize {
        (t * self.hop + self.window / 2) as isize - (len / 2) as isize
    }
}

/// Copies `len` samples starting at `start`, zero-filling outside the buffer.
pub(crate) fn slice_padded(samples: &[f64], start: isize, len: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..len).map(|i| {
        let idx = start + i as isize;
        if idx < 0 || idx as usize >= samples.len() {
            0.0
        } else {
            samples[idx as usize]
        }
    }));
}
