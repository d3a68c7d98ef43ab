//! Single-file model container.
//!
//! ```text
//! magic "DDSDMODL" | version u32 | seed u64
//! layers   : u32 count, then tagged descriptors (parallel blocks nest)
//! params   : u32 count, each { name: u32 len + utf8, ndim u32, dims u32*, values f64* }
//! buffers  : same layout as params
//! attrs    : u32 count, each { key, value } as u32 len + utf8
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{NnError, Result};
use crate::graph::{ModelGraph, Param};
use crate::layer::{Activation, Branch, LayerSpec};
use crate::tensor::Tensor;

pub const MODEL_MAGIC: &[u8; 8] = b"DDSDMODL";
pub const MODEL_VERSION: u32 = 1;
const MAX_DEPTH: usize = 8;

pub fn encode_model(graph: &ModelGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&graph.seed().to_le_bytes());
    encode_layers(&mut out, graph.layers());
    encode_tensors(&mut out, graph.params());
    encode_tensors(&mut out, &graph.buffers);
    put_u32(&mut out, graph.attrs.len());
    for (k, v) in &graph.attrs {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelGraph> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(8)?;
    if magic != MODEL_MAGIC {
        return Err(r.err_at(0, "bad magic"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(r.err_at(8, &format!("unsupported version {version}")));
    }
    let seed = r.u64()?;
    let layers = decode_layers(&mut r, 0)?;
    let params = decode_tensors(&mut r)?;
    let buffers = decode_tensors(&mut r)?;
    let n_attrs = r.count(8)?;
    let mut attrs = BTreeMap::new();
    for _ in 0..n_attrs {
        let k = r.string()?;
        let v = r.string()?;
        attrs.insert(k, v);
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes"));
    }
    let mut graph = ModelGraph::from_parts(layers, params, seed).map_err(|e| NnError::Format {
        offset: bytes.len(),
        msg: e.to_string(),
    })?;
    graph.buffers = buffers;
    graph.attrs = attrs;
    Ok(graph)
}

pub fn save_model(graph: &ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_model(graph))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelGraph> {
    decode_model(&std::fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn encode_layers(out: &mut Vec<u8>, layers: &[LayerSpec]) {
    put_u32(out, layers.len());
    for layer in layers {
        match layer {
            LayerSpec::Mask => out.push(0),
            LayerSpec::Gru { input, hidden } => {
                out.push(1);
                put_u32(out, *input);
                put_u32(out, *hidden);
            }
            LayerSpec::Dense {
                input,
                output,
                activation,
            } => {
                out.push(2);
                put_u32(out, *input);
                put_u32(out, *output);
                out.push(activation.tag());
            }
            LayerSpec::LayerNorm { dim } => {
                out.push(3);
                put_u32(out, *dim);
            }
            LayerSpec::Dropout { rate } => {
                out.push(4);
                out.extend_from_slice(&rate.to_le_bytes());
            }
            LayerSpec::InverseSoftmax { dim } => {
                out.push(5);
                put_u32(out, *dim);
            }
            LayerSpec::Parallel { branches } => {
                out.push(6);
                put_u32(out, branches.len());
                for b in branches {
                    put_u32(out, b.width);
                    encode_layers(out, &b.layers);
                }
            }
        }
    }
}

fn encode_tensors(out: &mut Vec<u8>, tensors: &[Param]) {
    put_u32(out, tensors.len());
    for p in tensors {
        put_str(out, &p.name);
        put_u32(out, p.value.shape().len());
        for &d in p.value.shape() {
            put_u32(out, d);
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err_at(&self, offset: usize, msg: &str) -> NnError {
        NnError::Format {
            offset,
            msg: msg.to_string(),
        }
    }

    fn err(&self, msg: &str) -> NnError {
        self.err_at(self.pos, msg)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(&format!(
                "truncated: need {n} bytes, {} left",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// Reads a count whose items need at least `min_item_bytes` each.
    fn count(&mut self, min_item_bytes: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item_bytes) > self.buf.len() - self.pos {
            return Err(self.err_at(at, &format!("count {n} exceeds remaining input")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.count(1)?;
        let at = self.pos;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err_at(at, "invalid utf-8"))
    }
}

fn decode_layers(r: &mut Reader<'_>, depth: usize) -> Result<Vec<LayerSpec>> {
    if depth > MAX_DEPTH {
        return Err(r.err("layer nesting too deep"));
    }
    let n = r.count(1)?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.pos;
        let layer = match r.u8()? {
            0 => LayerSpec::Mask,
            1 => LayerSpec::Gru {
                input: r.u32()? as usize,
                hidden: r.u32()? as usize,
            },
            2 => {
                let input = r.u32()? as usize;
                let output = r.u32()? as usize;
                let tag_at = r.pos;
                let activation = Activation::from_tag(r.u8()?).ok_or_else(|| r.err_at(tag_at, "unknown activation"))?;
                LayerSpec::Dense {
                    input,
                    output,
                    activation,
                }
            }
            3 => LayerSpec::LayerNorm { dim: r.u32()? as usize },
            4 => LayerSpec::Dropout { rate: r.f64()? },
            5 => LayerSpec::InverseSoftmax { dim: r.u32()? as usize },
            6 => {
                let nb = r.count(8)?;
                let mut branches = Vec::with_capacity(nb);
                for _ in 0..nb {
                    let width = r.u32()? as usize;
                    let layers = decode_layers(r, depth + 1)?;
                    branches.push(Branch { width, layers });
                }
                LayerSpec::Parallel { branches }
            }
            t => return Err(r.err_at(at, &format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    Ok(layers)
}

fn decode_tensors(r: &mut Reader<'_>) -> Result<Vec<Param>> {
    let n = r.count(8)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.string()?;
        let ndim = r.count(4)?;
        let mut shape = Vec::with_capacity(ndim);
        let mut total: usize = 1;
        for _ in 0..ndim {
            let d = r.u32()? as usize;
            total = total.checked_mul(d).ok_or_else(|| r.err("tensor size overflow"))?;
            shape.push(d);
        }
        if total.saturating_mul(8) > r.buf.len() - r.pos {
            return Err(r.err(&format!("tensor `{name}` needs {total} values, input truncated")));
        }
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            data.push(r.f64()?);
        }
        out.push(Param {
            name,
            value: Tensor::new(shape, data)?,
        });
    }
    Ok(out)
}
