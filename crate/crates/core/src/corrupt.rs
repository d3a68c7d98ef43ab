//! Missing-modality corruption of fusion inputs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::features::FeatureLoader;
use crate::fusion::FusionSample;
use crate::manifest::{relative_to, Manifest};
use crate::modality::Modality;
use crate::record::{write_records, Record, RecordKind};

/// Realized drop counts per modality.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorruptionReport {
    pub rate: f64,
    pub seed: u64,
    pub utterances: usize,
    pub dropped: BTreeMap<String, usize>,
}

impl CorruptionReport {
    pub fn realized_rate(&self, m: Modality) -> f64 {
        if self.utterances == 0 {
            return 0.0;
        }
        self.dropped.get(m.name()).copied().unwrap_or(0) as f64 / self.utterances as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "rate {:.4} seed {} utterances {}\n",
            self.rate, self.seed, self.utterances
        );
        for m in Modality::ALL {
            s.push_str(&format!("{}\t{:.4}\n", m.name(), self.realized_rate(m)));
        }
        s
    }
}

/// Per utterance and modality, one Bernoulli(rate) draw in canonical modality
/// order; `true` means drop.
pub fn corruption_mask(n: usize, rate: f64, seed: u64) -> Result<Vec<[bool; 4]>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(CoreError::Config(format!("corruption rate {rate} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mut row = [false; 4];
            for m in Modality::ALL {
                row[m.index()] = rng.random::<f64>() < rate;
            }
            row
        })
        .collect())
}

fn report(mask: &[[bool; 4]], rate: f64, seed: u64) -> CorruptionReport {
    let mut dropped = BTreeMap::new();
    for m in Modality::ALL {
        dropped.insert(m.name().to_string(), mask.iter().filter(|r| r[m.index()]).count());
    }
    CorruptionReport {
        rate,
        seed,
        utterances: mask.len(),
        dropped,
    }
}

/// Marks each modality of each sample absent with probability `rate`.
pub fn corrupt_missing(
    samples: &[FusionSample],
    rate: f64,
    seed: u64,
) -> Result<(Vec<FusionSample>, CorruptionReport)> {
    let mask = corruption_mask(samples.len(), rate, seed)?;
    let out = samples
        .iter()
        .zip(&mask)
        .map(|(s, row)| {
            let mut s = s.clone();
            for m in Modality::ALL {
                if row[m.index()] {
                    s.drop_modality(m);
                }
            }
            s
        })
        .collect();
    Ok((out, report(&mask, rate, seed)))
}

/// File-level corruption: rewrites every referenced directedness record file
/// into `out_dir` with dropped modalities replaced by sentinel-filled absent
/// records, and returns the manifest pointing at the new files.
pub fn corrupt_manifest(
    manifest: &Manifest,
    rate: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<(Manifest, CorruptionReport)> {
    let mask = corruption_mask(manifest.len(), rate, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CoreError::io(out_dir, e))?;
    let loader = FeatureLoader::new();
    let mut per_modality: BTreeMap<Modality, Vec<Record>> = BTreeMap::new();
    for (rec, row) in manifest.records.iter().zip(&mask) {
        for m in Modality::ALL {
            let Some(p) = rec.directedness_path(m) else { continue };
            let path = manifest.resolve(p);
            let out = per_modality.entry(m).or_default();
            for kind in [RecordKind::Score, RecordKind::Embedding] {
                let r = loader.lookup(&path, &rec.utterance_id, m, kind)?;
                match (r, row[m.index()]) {
                    (Some(_), true) => out.push(Record::absent(&rec.utterance_id, m, kind)),
                    (Some(r), false) => out.push(r),
                    (None, _) => {}
                }
            }
        }
    }
    let mut out = manifest.clone();
    for (m, records) in per_modality {
        let file = out_dir.join(format!("{}.directedness.ddrc", m.name()));
        write_records(&file, &records)?;
        let rel = relative_to(&out.base_dir, &file);
        for r in &mut out.records {
            if r.directedness_paths.contains_key(m.name()) {
                r.directedness_paths.insert(m.name().to_string(), rel.clone());
            }
        }
    }
    Ok((out, report(&mask, rate, seed)))
}
