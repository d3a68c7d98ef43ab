#![allow(dead_code)]

use std::f64::consts::PI;

use ddsd_dsp::AudioBuffer;

pub const SR: u32 = 16000;

pub fn audio(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, SR).unwrap()
}

pub fn sine(hz: f64, secs: f64, amp: f64) -> Vec<f64> {
    let n = (secs * SR as f64) as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * hz * i as f64 / SR as f64).sin())
        .collect()
}

pub fn sawtooth(hz: f64, secs: f64, amp: f64) -> Vec<f64> {
    let n = (secs * SR as f64) as usize;
    (0..n)
        .map(|i| {
            let phase = (hz * i as f64 / SR as f64).fract();
            amp * (2.0 * phase - 1.0)
        })
        .collect()
}

/// Smooth pulses (Gaussian, 0.3 ms wide) at the given onset times with the given amplitudes.
pub fn pulse_train(times: &[f64], amps: &[f64], secs: f64) -> Vec<f64> {
    let n = (secs * SR as f64) as usize;
    let sigma = 0.0003 * SR as f64;
    let mut out = vec![0.0; n];
    for (&t, &a) in times.iter().zip(amps) {
        let c = t * SR as f64;
        let lo = (c - 6.0 * sigma).floor().max(0.0) as usize;
        let hi = ((c + 6.0 * sigma).ceil() as usize).min(n.saturating_sub(1));
        for (i, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *slot += a * (-0.5 * ((i as f64 - c) / sigma).powi(2)).exp();
        }
    }
    out
}

/// Onset times for a train whose periods cycle through `periods` (seconds).
pub fn onsets(periods: &[f64], secs: f64) -> Vec<f64> {
    let mut t = 0.002;
    let mut out = Vec::new();
    let mut k = 0;
    while t < secs - 0.002 {
        out.push(t);
        t += periods[k % periods.len()];
        k += 1;
    }
    out
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
