//! 40-band log-mel filterbank energies on the shared 100 Hz grid.

use crate::audio::{AudioBuffer, DspError, Result};
use crate::frames::{slice_padded, FrameGrid, SHORT_WINDOW_SECS};
use crate::resample::resample;
use crate::spectrum::PowerSpectrum;

pub const NUM_MEL_BANDS: usize = 40;
pub const FILTERBANK_RATE: u32 = 16000;
pub const LOG_FLOOR: f64 = 1e-10;

/// `frames x 40` log-mel energies, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterbankTrack {
    pub frames: usize,
    pub data: Vec<f64>,
}

impl FilterbankTrack {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * NUM_MEL_BANDS..(t + 1) * NUM_MEL_BANDS]
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over FFT bins, spanning 0 Hz to Nyquist.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// `(first_bin, weights)` per band.
    bands: Vec<(usize, Vec<f64>)>,
    edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(num_bands: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges_hz: Vec<f64> = (0..num_bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (num_bands + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let bands = (0..num_bands)
            .map(|b| {
                let (lo, mid, hi) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
                let first = (lo / bin_hz).floor() as usize;
                let last = ((hi / bin_hz).ceil() as usize).min(n_fft / 2);
                let weights = (first..=last)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    })
                    .collect();
                (first, weights)
            })
            .collect();
        Self { bands, edges_hz }
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    /// Band edges in Hz: band `b` spans `edges[b]..edges[b + 2]` and peaks at `edges[b + 1]`.
    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    /// Sum of the filter weights of band `b`.
    pub fn weight_sum(&self, b: usize) -> f64 {
        self.bands[b].1.iter().sum()
    }

    pub fn apply(&self, power: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bands
                .iter()
                .map(|(first, w)| w.iter().zip(&power[*first..]).map(|(w, p)| w * p).sum::<f64>()),
        );
    }
}

pub fn extract_filterbank(audio: &AudioBuffer) -> Result<FilterbankTrack> {
    let grid = FrameGrid::new(audio.len(), audio.sample_rate())?;
    let resampled;
    let samples = if audio.sample_rate() == FILTERBANK_RATE {
        audio.samples()
    } else {
        if audio.sample_rate() < 8000 {
            return Err(DspError::SampleRate(audio.sample_rate()));
        }
        resampled = resample(
            audio.samples(),
            audio.sample_rate(),
            FILTERBANK_RATE,
            FILTERBANK_RATE as f64 / 2.0,
        );
        &resampled[..]
    };
    let scale = FILTERBANK_RATE as f64 / audio.sample_rate() as f64;
    let len = (SHORT_WINDOW_SECS * FILTERBANK_RATE as f64).round() as usize;
    let mut spectrum = PowerSpectrum::new(len);
    let mel = MelFilterbank::new(NUM_MEL_BANDS, spectrum.n_fft(), FILTERBANK_RATE);
    let mut frame = Vec::with_capacity(len);
    let mut power = Vec::new();
    let mut bands = Vec::with_capacity(NUM_MEL_BANDS);
    let mut data = Vec::with_capacity(grid.frames * NUM_MEL_BANDS);
    for t in 0..grid.frames {
        let start = (grid.center(t) * scale).round() as isize - (len / 2) as isize;
        slice_padded(samples, start, len, &mut frame);
        spectrum.compute(&frame, &mut power);
        mel.apply(&power, &mut bands);
        data.extend(bands.iter().map(|e| e.max(LOG_FLOOR).ln()));
    }
    Ok(FilterbankTrack {
        frames: grid.frames,
        data,
    })
}
