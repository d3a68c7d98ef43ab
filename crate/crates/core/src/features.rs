//! Model-input features per modality and their on-disk form.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use ddsd_dsp::{assemble_prosody_track, extract_filterbank, read_wav, AudioBuffer, NUM_MEL_BANDS, PROSODY_DIM};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::manifest::{relative_to, Manifest, ManifestRecord};
use crate::modality::Modality;
use crate::record::{read_records, write_records, Record, RecordKind};

pub const TEXT_HASH_DIM: usize = 4096;
pub const ASR_FEATURE_DIM: usize = 8;

/// Row-major `rows x dim` feature block; sequence modalities have one row per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 || rows * dim != data.len() {
            return Err(CoreError::Data(format!(
                "{rows}x{dim} feature block with {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("feature matrix".into()));
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(1, data.len(), data)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-frame (or per-utterance) input width of a modality's component model.
pub fn feature_dim(m: Modality) -> usize {
    match m {
        Modality::Acoustic => NUM_MEL_BANDS,
        Modality::Text => TEXT_HASH_DIM,
        Modality::Asr => ASR_FEATURE_DIM,
        Modality::Prosody => PROSODY_DIM,
    }
}

pub fn is_sequence(m: Modality) -> bool {
    matches!(m, Modality::Acoustic | Modality::Prosody)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Bag of hashed character trigrams over the lowercased, space-padded transcript.
pub fn text_features(transcript: &str) -> FeatureMatrix {
    let padded: Vec<char> = format!(" {} ", transcript.trim().to_lowercase()).chars().collect();
    let mut bag = vec![0.0; TEXT_HASH_DIM];
    let mut buf = String::new();
    for w in padded.windows(3) {
        buf.clear();
        buf.extend(w);
        bag[(fnv1a(buf.as_bytes()) % TEXT_HASH_DIM as u64) as usize] += 1.0;
    }
    FeatureMatrix {
        rows: 1,
        dim: TEXT_HASH_DIM,
        data: bag,
    }
}

/// Prosody or filterbank features computed from audio.
pub fn audio_features(audio: &AudioBuffer, m: Modality) -> Result<FeatureMatrix> {
    match m {
        Modality::Prosody => {
            let t = assemble_prosody_track(audio)?;
            FeatureMatrix::new(t.frames, PROSODY_DIM, t.data)
        }
        Modality::Acoustic => {
            let t = extract_filterbank(audio)?;
            FeatureMatrix::new(t.frames, NUM_MEL_BANDS, t.data)
        }
        other => Err(CoreError::Data(format!("{other} features are not derived from audio"))),
    }
}

pub fn feature_record(utterance_id: &str, m: Modality, f: &FeatureMatrix) -> Result<Record> {
    let shape = if is_sequence(m) {
        vec![f.rows, f.dim]
    } else {
        vec![f.dim]
    };
    Record::new(
        utterance_id,
        m,
        RecordKind::Features,
        shape,
        f.data.iter().map(|v| *v as f32).collect(),
    )
}

pub fn features_from_record(rec: &Record, m: Modality) -> Result<FeatureMatrix> {
    let bad = |msg: String| CoreError::utt(&rec.utterance_id, msg);
    if rec.kind != RecordKind::Features || rec.modality != m || !rec.present {
        return Err(bad(format!("record is not a present {m} feature record")));
    }
    let dim = feature_dim(m);
    let (rows, cols) = match rec.shape.as_slice() {
        [t, f] if is_sequence(m) => (*t, *f),
        [f] if !is_sequence(m) => (1, *f),
        s => return Err(bad(format!("{m} features have shape {s:?}"))),
    };
    if cols != dim {
        return Err(bad(format!("{m} features have {cols} columns, expected {dim}")));
    }
    FeatureMatrix::new(rows, cols, rec.values()).map_err(|e| bad(e.to_string()))
}

/// Loads features for manifest entries, reading each record file at most once.
type RecordIndex = Arc<HashMap<(String, Modality, RecordKind), Record>>;

#[derive(Default)]
pub struct FeatureLoader {
    files: Mutex<HashMap<PathBuf, RecordIndex>>,
}

impl FeatureLoader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads a record file into an `(utterance, modality tag)` index, cached.
    pub fn records(&self, path: &Path) -> Result<RecordIndex> {
        if let Some(f) = self.files.lock().expect("loader lock").get(path) {
            return Ok(f.clone());
        }
        let mut index = HashMap::new();
        for r in read_records(path)? {
            index.insert((r.utterance_id.clone(), r.modality, r.kind), r);
        }
        let index = Arc::new(index);
        self.files
            .lock()
            .expect("loader lock")
            .insert(path.to_path_buf(), index.clone());
        Ok(index)
    }

    pub fn lookup(&self, path: &Path, utterance_id: &str, m: Modality, kind: RecordKind) -> Result<Option<Record>> {
        let index = self.records(path)?;
        Ok(index.get(&(utterance_id.to_string(), m, kind)).cloned())
    }

    /// Features for one entry: a feature record file if listed, otherwise
    /// the transcript (text) or the audio (prosody, acoustic).
    pub fn load(&self, manifest: &Manifest, rec: &ManifestRecord, m: Modality) -> Result<FeatureMatrix> {
        if let Some(p) = rec.feature_path(m) {
            let path = manifest.resolve(p);
            let r = self
                .lookup(&path, &rec.utterance_id, m, RecordKind::Features)?
                .ok_or_else(|| CoreError::utt(&rec.utterance_id, format!("no {m} features in {}", path.display())))?;
            return features_from_record(&r, m);
        }
        match m {
            Modality::Text => match &rec.transcript {
                Some(t) => Ok(text_features(t)),
                None => Err(CoreError::utt(&rec.utterance_id, "no transcript or text features")),
            },
            Modality::Prosody | Modality::Acoustic => match &rec.audio_path {
                Some(a) => {
                    let audio = read_wav(manifest.resolve(a))?;
                    audio_features(&audio, m).map_err(|e| CoreError::utt(&rec.utterance_id, e.to_string()))
                }
                None => Err(CoreError::utt(&rec.utterance_id, format!("no audio or {m} features"))),
            },
            Modality::Asr => Err(CoreError::utt(&rec.utterance_id, "no asr features")),
        }
    }

    /// Loads a modality's features for several entries in parallel, in order.
    pub fn load_all(&self, manifest: &Manifest, recs: &[&ManifestRecord], m: Modality) -> Result<Vec<FeatureMatrix>> {
        recs.par_iter().map(|r| self.load(manifest, r, m)).collect()
    }
}

/// Extracts audio-derived features for every entry with audio and writes one
/// record file per modality (`<modality>.features.ddrc` in `out_dir`). Returns the
/// manifest with `feature_paths` pointing at the new files.
pub fn extract_manifest(manifest: &Manifest, modalities: &[Modality], out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| CoreError::io(out_dir, e))?;
    let mut out = manifest.clone();
    let with_audio: Vec<usize> = (0..manifest.len())
        .filter(|i| manifest.records[*i].audio_path.is_some())
        .collect();
    let audio_mods: Vec<Modality> = modalities.iter().copied().filter(|m| is_sequence(*m)).collect();
    if audio_mods.is_empty() {
        return Ok(out);
    }
    let extracted: Vec<Vec<Record>> = with_audio
        .par_iter()
        .map(|&i| {
            let rec = &manifest.records[i];
            let path = manifest.resolve(rec.audio_path.as_deref().expect("filtered"));
            let audio = read_wav(&path).map_err(|e| CoreError::utt(&rec.utterance_id, e.to_string()))?;
            audio_mods
                .iter()
                .map(|m| {
                    let f = audio_features(&audio, *m).map_err(|e| CoreError::utt(&rec.utterance_id, e.to_string()))?;
                    feature_record(&rec.utterance_id, *m, &f)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    for (k, m) in audio_mods.iter().enumerate() {
        let file = format!("{}.features.ddrc", m.name());
        let records: Vec<Record> = extracted.iter().map(|r| r[k].clone()).collect();
        write_records(out_dir.join(&file), &records)?;
        let rel = relative_to(&out.base_dir, &out_dir.join(&file));
        for &i in &with_audio {
            out.records[i].feature_paths.insert(m.name().to_string(), rel.clone());
        }
    }
    Ok(out)
}
