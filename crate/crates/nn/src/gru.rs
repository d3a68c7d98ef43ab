//! Cho-style GRU over padded batches.
//!
//! Gate layout along the `3 * hidden` axis is `[update | reset | candidate]`:
//!
//! ```text
//! z  = sigmoid(x Wz + bz_in + h Uz + bz_rec)
//! r  = sigmoid(x Wr + br_in + h Ur + br_rec)
//! h~ = tanh(x Wh + bh_in + (r * h) Uh + bh_rec)
//! h' = (1 - z) * h + z * h~
//! ```
//!
//! Rows whose step index is at or past their valid length keep `h' = h`.

#![allow(clippy::needless_range_loop)]

use crate::error::{shape_err, Result};
use crate::layer::sigmoid;
use crate::linalg::{gemm, MatMut, MatRef};

/// Borrowed GRU parameters.
#[derive(Clone, Copy)]
pub struct GruParams<'a> {
    pub w_input: &'a [f64],
    pub w_recurrent: &'a [f64],
    pub b_input: &'a [f64],
    pub b_recurrent: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

impl GruParams<'_> {
    fn validate(&self) -> Result<()> {
        let h3 = 3 * self.hidden;
        let checks = [
            ("w_input", self.w_input.len(), self.input * h3),
            ("w_recurrent", self.w_recurrent.len(), self.hidden * h3),
            ("b_input", self.b_input.len(), h3),
            ("b_recurrent", self.b_recurrent.len(), h3),
        ];
        for (name, found, expected) in checks {
            if found != expected {
                return Err(shape_err(
                    format!("gru.{name}"),
                    expected.to_string(),
                    found.to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// One GRU step for a single sample.
pub fn gru_cell(x_t: &[f64], h_prev: &[f64], params: GruParams<'_>) -> Result<Vec<f64>> {
    params.validate()?;
    if x_t.len() != params.input {
        return Err(shape_err(
            "gru_cell input",
            params.input.to_string(),
            x_t.len().to_string(),
        ));
    }
    if h_prev.len() != params.hidden {
        return Err(shape_err(
            "gru_cell state",
            params.hidden.to_string(),
            h_prev.len().to_string(),
        ));
    }
    let (out, _) = forward_with_state(&params, x_t, h_prev, 1, 1, &[1], false);
    Ok(out)
}

pub(crate) struct GruCache {
    /// States h_0..h_T, each `[B, H]`.
    states: Vec<f64>,
    update: Vec<f64>,
    reset: Vec<f64>,
    candidate: Vec<f64>,
    steps: usize,
}

pub(crate) fn forward(
    p: &GruParams<'_>,
    x: &[f64],
    batch: usize,
    steps: usize,
    lengths: &[usize],
    record: bool,
) -> (Vec<f64>, Option<GruCache>) {
    let h0 = vec![0.0; batch * p.hidden];
    forward_with_state(p, x, &h0, batch, steps, lengths, record)
}

fn forward_with_state(
    p: &GruParams<'_>,
    x: &[f64],
    h0: &[f64],
    batch: usize,
    steps: usize,
    lengths: &[usize],
    record: bool,
) -> (Vec<f64>, Option<GruCache>) {
    let hd = p.hidden;
    let h3 = 3 * hd;
    let bh = batch * hd;
    let steps_eff = lengths.iter().copied().max().unwrap_or(0).min(steps);

    let mut xw = vec![0.0; batch * steps * h3];
    gemm(
        MatRef::new(x, batch * steps, p.input),
        false,
        MatRef::new(p.w_input, p.input, h3),
        false,
        0.0,
        MatMut::new(&mut xw, batch * steps, h3),
    );
    for row in xw.chunks_exact_mut(h3) {
        for (v, b) in row.iter_mut().zip(p.b_input) {
            *v += b;
        }
    }

    let n_states = if record { steps_eff + 1 } else { 2 };
    let mut states = vec![0.0; n_states * bh];
    states[..bh].copy_from_slice(h0);
    let cache_len = if record { steps_eff * bh } else { 0 };
    let mut update_all = vec![0.0; cache_len];
    let mut reset_all = vec![0.0; cache_len];
    let mut cand_all = vec![0.0; cache_len];

    let mut rec = vec![0.0; batch * 2 * hd];
    let mut z = vec![0.0; bh];
    let mut rh = vec![0.0; bh];
    let mut cand_rec = vec![0.0; bh];

    for t in 0..steps_eff {
        let (prev_slot, next_slot) = if record { (t, t + 1) } else { (t % 2, (t + 1) % 2) };
        let (prev_h, next_h) = if prev_slot < next_slot {
            let (a, b) = states.split_at_mut(next_slot * bh);
            (&a[prev_slot * bh..], &mut b[..bh])
        } else {
            let (a, b) = states.split_at_mut(prev_slot * bh);
            (&b[..bh], &mut a[next_slot * bh..next_slot * bh + bh])
        };
        let prev_h: &[f64] = &prev_h[..bh];

        gemm(
            MatRef::new(prev_h, batch, hd),
            false,
            MatRef::block(p.w_recurrent, hd, h3, 0, 2 * hd),
            false,
            0.0,
            MatMut::new(&mut rec, batch, 2 * hd),
        );
        for b in 0..batch {
            let hrow = b * hd;
            if t >= lengths[b] {
                rh[hrow..hrow + hd].fill(0.0);
                continue;
            }
            let xrow = (b * steps + t) * h3;
            let rrow = b * 2 * hd;
            for j in 0..hd {
                let zj = sigmoid(xw[xrow + j] + rec[rrow + j] + p.b_recurrent[j]);
                let rj = sigmoid(xw[xrow + hd + j] + rec[rrow + hd + j] + p.b_recurrent[hd + j]);
                z[hrow + j] = zj;
                rh[hrow + j] = rj * prev_h[hrow + j];
                if record {
                    update_all[t * bh + hrow + j] = zj;
                    reset_all[t * bh + hrow + j] = rj;
                }
            }
        }
        gemm(
            MatRef::new(&rh, batch, hd),
            false,
            MatRef::block(p.w_recurrent, hd, h3, 2 * hd, hd),
            false,
            0.0,
            MatMut::new(&mut cand_rec, batch, hd),
        );
        for b in 0..batch {
            let hrow = b * hd;
            if t >= lengths[b] {
                next_h[hrow..hrow + hd].copy_from_slice(&prev_h[hrow..hrow + hd]);
                continue;
            }
            let xrow = (b * steps + t) * h3 + 2 * hd;
            for j in 0..hd {
                let c = (xw[xrow + j] + cand_rec[hrow + j] + p.b_recurrent[2 * hd + j]).tanh();
                let zj = z[hrow + j];
                next_h[hrow + j] = (1.0 - zj) * prev_h[hrow + j] + zj * c;
                if record {
                    cand_all[t * bh + hrow + j] = c;
                }
            }
        }
    }

    let last_slot = if record { steps_eff } else { steps_eff % 2 };
    let out = states[last_slot * bh..(last_slot + 1) * bh].to_vec();
    let cache = record.then_some(GruCache {
        states,
        update: update_all,
        reset: reset_all,
        candidate: cand_all,
        steps: steps_eff,
    });
    (out, cache)
}

pub(crate) struct GruGrads {
    pub dx: Vec<f64>,
    pub w_input: Vec<f64>,
    pub w_recurrent: Vec<f64>,
    pub b_input: Vec<f64>,
    pub b_recurrent: Vec<f64>,
}

pub(crate) fn backward(
    p: &GruParams<'_>,
    cache: &GruCache,
    x: &[f64],
    batch: usize,
    steps: usize,
    lengths: &[usize],
    dout: &[f64],
) -> GruGrads {
    let hd = p.hidden;
    let h3 = 3 * hd;
    let bh = batch * hd;

    let mut dh = dout.to_vec();
    let mut dpre = vec![0.0; batch * steps * h3];
    let mut dw_rec = vec![0.0; hd * h3];
    let mut db_rec = vec![0.0; h3];

    let mut da_zr = vec![0.0; batch * 2 * hd];
    let mut da_c = vec![0.0; bh];
    let mut d_rh = vec![0.0; bh];
    let mut rh = vec![0.0; bh];
    let mut dh_next = vec![0.0; bh];

    for t in (0..cache.steps).rev() {
        let prev_h = &cache.states[t * bh..(t + 1) * bh];
        let zs = &cache.update[t * bh..(t + 1) * bh];
        let rs = &cache.reset[t * bh..(t + 1) * bh];
        let cs = &cache.candidate[t * bh..(t + 1) * bh];

        for b in 0..batch {
            let hrow = b * hd;
            let zrow = b * 2 * hd;
            if t >= lengths[b] {
                da_zr[zrow..zrow + 2 * hd].fill(0.0);
                da_c[hrow..hrow + hd].fill(0.0);
                rh[hrow..hrow + hd].fill(0.0);
                continue;
            }
            for j in 0..hd {
                let i = hrow + j;
                let g = dh[i];
                let zj = zs[i];
                let c = cs[i];
                da_zr[zrow + j] = g * (c - prev_h[i]) * zj * (1.0 - zj);
                da_c[i] = g * zj * (1.0 - c * c);
                rh[i] = rs[i] * prev_h[i];
            }
        }
        gemm(
            MatRef::new(&da_c, batch, hd),
            false,
            MatRef::block(p.w_recurrent, hd, h3, 2 * hd, hd),
            true,
            0.0,
            MatMut::new(&mut d_rh, batch, hd),
        );
        for b in 0..batch {
            let hrow = b * hd;
            let zrow = b * 2 * hd;
            if t >= lengths[b] {
                dh_next[hrow..hrow + hd].copy_from_slice(&dh[hrow..hrow + hd]);
                continue;
            }
            for j in 0..hd {
                let i = hrow + j;
                let rj = rs[i];
                da_zr[zrow + hd + j] = d_rh[i] * prev_h[i] * rj * (1.0 - rj);
                dh_next[i] = dh[i] * (1.0 - zs[i]) + d_rh[i] * rj;
            }
        }
        gemm(
            MatRef::new(&da_zr, batch, 2 * hd),
            false,
            MatRef::block(p.w_recurrent, hd, h3, 0, 2 * hd),
            true,
            1.0,
            MatMut::new(&mut dh_next, batch, hd),
        );
        gemm(
            MatRef::new(prev_h, batch, hd),
            true,
            MatRef::new(&da_zr, batch, 2 * hd),
            false,
            1.0,
            MatMut::block(&mut dw_rec, hd, h3, 0, 2 * hd),
        );
        gemm(
            MatRef::new(&rh, batch, hd),
            true,
            MatRef::new(&da_c, batch, hd),
            false,
            1.0,
            MatMut::block(&mut dw_rec, hd, h3, 2 * hd, hd),
        );
        for b in 0..batch {
            if t >= lengths[b] {
                continue;
            }
            let row = (b * steps + t) * h3;
            let zrow = b * 2 * hd;
            let hrow = b * hd;
            dpre[row..row + 2 * hd].copy_from_slice(&da_zr[zrow..zrow + 2 * hd]);
            dpre[row + 2 * hd..row + h3].copy_from_slice(&da_c[hrow..hrow + hd]);
            for j in 0..2 * hd {
                db_rec[j] += da_zr[zrow + j];
            }
            for j in 0..hd {
                db_rec[2 * hd + j] += da_c[hrow + j];
            }
        }
        std::mem::swap(&mut dh, &mut dh_next);
    }

    let mut dw_in = vec![0.0; p.input * h3];
    gemm(
        MatRef::new(x, batch * steps, p.input),
        true,
        MatRef::new(&dpre, batch * steps, h3),
        false,
        0.0,
        MatMut::new(&mut dw_in, p.input, h3),
    );
    let mut db_in = vec![0.0; h3];
    for row in dpre.chunks_exact(h3) {
        for (acc, v) in db_in.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut dx = vec![0.0; batch * steps * p.input];
    gemm(
        MatRef::new(&dpre, batch * steps, h3),
        false,
        MatRef::new(p.w_input, p.input, h3),
        true,
        0.0,
        MatMut::new(&mut dx, batch * steps, p.input),
    );
    GruGrads {
        dx,
        w_input: dw_in,
        w_recurrent: dw_rec,
        b_input: db_in,
        b_recurrent: db_rec,
    }
}
