//! Binary record container for features, scores and embeddings.
//!
//! A file is a sequence of records, each laid out little-endian as
//!
//! ```text
//! magic "DDRC" | version u16 | flags u8 (bit 0: present) | modality u8 | kind u8
//! | id_len u16 | utterance id (UTF-8) | ndim u8 | dims u32 x ndim | payload f32 x prod(dims)
//! ```

use std::io::Write;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::modality::{Modality, EMBEDDING_SENTINEL, SCORE_SENTINEL};

pub const RECORD_MAGIC: &[u8; 4] = b"DDRC";
pub const RECORD_VERSION: u16 = 1;
const MAX_DIMS: usize = 4;
const MAX_ELEMENTS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecordKind {
    /// Raw model input: a `T x F` sequence or an `F` vector.
    Features,
    Score,
    Embedding,
}

impl RecordKind {
    fn tag(self) -> u8 {
        match self {
            RecordKind::Features => 0,
            RecordKind::Score => 1,
            RecordKind::Embedding => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(RecordKind::Features),
            1 => Some(RecordKind::Score),
            2 => Some(RecordKind::Embedding),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub utterance_id: String,
    pub modality: Modality,
    pub kind: RecordKind,
    pub present: bool,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Record {
    pub fn new(
        utterance_id: &str,
        modality: Modality,
        kind: RecordKind,
        shape: Vec<usize>,
        data: Vec<f32>,
    ) -> Result<Self> {
        let r = Record {
            utterance_id: utterance_id.to_string(),
            modality,
            kind,
            present: true,
            shape,
            data,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn score(utterance_id: &str, modality: Modality, score: f64) -> Self {
        Record {
            utterance_id: utterance_id.to_string(),
            modality,
            kind: RecordKind::Score,
            present: true,
            shape: vec![1],
            data: vec![score as f32],
        }
    }

    pub fn embedding(utterance_id: &str, modality: Modality, values: &[f64]) -> Self {
        Record {
            utterance_id: utterance_id.to_string(),
            modality,
            kind: RecordKind::Embedding,
            present: true,
            shape: vec![values.len()],
            data: values.iter().map(|v| *v as f32).collect(),
        }
    }

    /// Absent score or embedding, filled with the sentinel encoding.
    pub fn absent(utterance_id: &str, modality: Modality, kind: RecordKind) -> Self {
        let (shape, fill) = match kind {
            RecordKind::Score => (vec![1], SCORE_SENTINEL),
            _ => (vec![modality.embedding_dim()], EMBEDDING_SENTINEL),
        };
        let n = shape[0];
        Record {
            utterance_id: utterance_id.to_string(),
            modality,
            kind,
            present: false,
            shape,
            data: vec![fill as f32; n],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.data.iter().map(|v| f64::from(*v)).collect()
    }

    fn validate(&self) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if self.shape.is_empty() || self.shape.len() > MAX_DIMS || n != self.data.len() {
            return Err(CoreError::utt(
                &self.utterance_id,
                format!("shape {:?} does not match {} values", self.shape, self.data.len()),
            ));
        }
        if self.utterance_id.len() > u16::MAX as usize {
            let short: String = self.utterance_id.chars().take(64).collect();
            return Err(CoreError::utt(&short, "utterance id too long"));
        }
        Ok(())
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<()> {
        self.validate()?;
        out.extend_from_slice(RECORD_MAGIC);
        out.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        out.push(u8::from(self.present));
        out.push(self.modality.tag());
        out.push(self.kind.tag());
        out.extend_from_slice(&(self.utterance_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.utterance_id.as_bytes());
        out.push(self.shape.len() as u8);
        for d in &self.shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(())
    }
}

pub fn encode_records(records: &[Record]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        r.encode_into(&mut out)?;
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(CoreError::Format {
                offset: self.pos,
                msg: format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn fail<T>(&self, offset: usize, msg: impl Into<String>) -> Result<T> {
        Err(CoreError::Format {
            offset,
            msg: msg.into(),
        })
    }
}

pub fn decode_records(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut c = Cursor { bytes, pos: 0 };
    let mut out = Vec::new();
    while c.pos < bytes.len() {
        let start = c.pos;
        if c.take(4, "magic")? != RECORD_MAGIC {
            return c.fail(start, "bad magic");
        }
        let version = c.u16("version")?;
        if version != RECORD_VERSION {
            return c.fail(start + 4, format!("unsupported version {version}"));
        }
        let flags = c.u8("flags")?;
        if flags > 1 {
            return c.fail(c.pos - 1, format!("unknown flags {flags:#x}"));
        }
        let tag = c.u8("modality")?;
        let modality = match Modality::from_tag(tag) {
            Some(m) => m,
            None => return c.fail(c.pos - 1, format!("unknown modality tag {tag}")),
        };
        let kind_tag = c.u8("kind")?;
        let kind = match RecordKind::from_tag(kind_tag) {
            Some(k) => k,
            None => return c.fail(c.pos - 1, format!("unknown record kind {kind_tag}")),
        };
        let id_len = c.u16("id length")? as usize;
        let id_at = c.pos;
        let utterance_id = match std::str::from_utf8(c.take(id_len, "utterance id")?) {
            Ok(s) => s.to_string(),
            Err(_) => return c.fail(id_at, "utterance id is not UTF-8"),
        };
        let ndim_at = c.pos;
        let ndim = c.u8("ndim")? as usize;
        if ndim == 0 || ndim > MAX_DIMS {
            return c.fail(ndim_at, format!("ndim {ndim} outside 1..={MAX_DIMS}"));
        }
        let mut shape = Vec::with_capacity(ndim);
        let mut n: usize = 1;
        for _ in 0..ndim {
            let d = c.u32("dimension")? as usize;
            n = n.saturating_mul(d);
            shape.push(d);
        }
        if n > MAX_ELEMENTS {
            return c.fail(ndim_at, format!("{n} elements exceeds limit"));
        }
        let payload = c.take(n * 4, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        out.push(Record {
            utterance_id,
            modality,
            kind,
            present: flags == 1,
            shape,
            data,
        });
    }
    Ok(out)
}

pub fn write_records(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    let bytes = encode_records(records)?;
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| CoreError::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode_records(&bytes)
}
