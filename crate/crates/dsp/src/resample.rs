//! Band-limited resampling with a Hann-windowed sinc kernel.

const ZERO_CROSSINGS: f64 = 6.0;

/// Resamples `samples` from `from_hz` to `to_hz`, low-passing at `cutoff_hz`
/// (clamped below both Nyquist rates).
pub fn resample(samples: &[f64], from_hz: u32, to_hz: u32, cutoff_hz: f64) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let from = from_hz as f64;
    let to = to_hz as f64;
    let cutoff = cutoff_hz.min(0.99 * from.min(to) / 2.0);
    let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
    let n_out = ((samples.len() as f64) * to / from).floor() as usize;
    // Output j sits at input position j * from / to; its fractional part cycles
    // with period to / gcd, so the kernel taps can be tabulated per phase.
    let g = gcd(from_hz, to_hz);
    let (step, phases) = ((from_hz / g) as usize, (to_hz / g) as usize);
    let reach = (half_width * from).ceil() as usize + 1;
    let taps = 2 * reach + 1;
    let table: Option<Vec<f64>> = (phases * taps <= MAX_TABLE).then(|| {
        let mut table = Vec::with_capacity(phases * taps);
        for phase in 0..phases {
            let frac = (phase * step % phases) as f64 / phases as f64;
            for k in 0..taps {
                let tau = (frac - (k as f64 - reach as f64)) / from;
                table.push(kernel(tau, cutoff, half_width) / from);
            }
        }
        table
    });
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let base = j * step / phases;
        let mut acc = 0.0;
        match &table {
            Some(table) => {
                let row = &table[(j % phases) * taps..(j % phases + 1) * taps];
                let lo = base.saturating_sub(reach);
                let hi = (base + reach).min(samples.len() - 1);
                for i in lo..=hi {
                    acc += samples[i] * row[i + reach - base];
                }
            }
            None => {
                let t = j as f64 / to;
                let first = ((t - half_width) * from).ceil().max(0.0) as usize;
                let last = (((t + half_width) * from).floor() as usize).min(samples.len() - 1);
                for (i, &x) in samples.iter().enumerate().take(last + 1).skip(first) {
                    acc += x * kernel(t - i as f64 / from, cutoff, half_width) / from;
                }
            }
        }
        out.push(acc);
    }
    out
}

const MAX_TABLE: usize = 1 << 20;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn kernel(tau: f64, cutoff: f64, half_width: f64) -> f64 {
    if tau.abs() >= half_width {
        return 0.0;
    }
    let window = 0.5 * (1.0 + (std::f64::consts::PI * tau / half_width).cos());
    let arg = 2.0 * cutoff * tau;
    let sinc = if arg.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
    };
    2.0 * cutoff * sinc * window
}
