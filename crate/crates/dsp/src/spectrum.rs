use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Symmetric-periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Windowed power spectrum `|FFT(w * x)|^2` for bins `0..=n_fft/2`.
pub(crate) struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    n_fft: usize,
    buf: Vec<Complex<f64>>,
}

impl PowerSpectrum {
    pub fn new(window_len: usize) -> Self {
        let n_fft = window_len.next_power_of_two();
        Self {
            fft: FftPlanner::new().plan_fft_forward(n_fft),
            window: hann(window_len),
            n_fft,
            buf: vec![Complex::new(0.0, 0.0); n_fft],
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn compute(&mut self, frame: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(frame.len(), self.window.len());
        for (slot, (x, w)) in self.buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in &mut self.buf[self.window.len()..] {
            *slot = Complex::new(0.0, 0.0);
        }
        self.fft.process(&mut self.buf);
        out.clear();
        out.extend(self.buf[..=self.n_fft / 2].iter().map(|c| c.norm_sqr()));
    }
}
