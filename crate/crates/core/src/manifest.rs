//! JSON-lines dataset manifests and the five-way split.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::modality::Modality;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "directed")]
    Directed,
    #[serde(rename = "not-directed")]
    NotDirected,
}

impl Label {
    pub fn from_bool(directed: bool) -> Self {
        if directed {
            Label::Directed
        } else {
            Label::NotDirected
        }
    }

    pub fn is_directed(self) -> bool {
        self == Label::Directed
    }

    /// 1.0 for directed, 0.0 otherwise.
    pub fn target(self) -> f64 {
        if self.is_directed() {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train-comp")]
    TrainComp,
    #[serde(rename = "train-fus")]
    TrainFus,
    #[serde(rename = "val-comp")]
    ValComp,
    #[serde(rename = "val-fus")]
    ValFus,
    #[serde(rename = "test")]
    Test,
}

impl Split {
    pub const ALL: [Split; 5] = [
        Split::TrainComp,
        Split::TrainFus,
        Split::ValComp,
        Split::ValFus,
        Split::Test,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Split::TrainComp => "train-comp",
            Split::TrainFus => "train-fus",
            Split::ValComp => "val-comp",
            Split::ValFus => "val-fus",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CoreError::Config(format!("unknown split '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub utterance_id: String,
    pub label: Label,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    /// Record files holding this utterance's features, keyed by modality name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feature_paths: BTreeMap<String, String>,
    /// Record files holding exported scores and embeddings, keyed by modality name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub directedness_paths: BTreeMap<String, String>,
}

impl ManifestRecord {
    pub fn feature_path(&self, m: Modality) -> Option<&str> {
        self.feature_paths.get(m.name()).map(String::as_str)
    }

    pub fn directedness_path(&self, m: Modality) -> Option<&str> {
        self.directedness_paths.get(m.name()).map(String::as_str)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let m = Manifest {
            records,
            base_dir: PathBuf::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.utterance_id.is_empty() {
                return Err(CoreError::Manifest {
                    line: i + 1,
                    msg: "empty utterance_id".into(),
                });
            }
            if !ids.insert(r.utterance_id.as_str()) {
                return Err(CoreError::Manifest {
                    line: i + 1,
                    msg: format!("duplicate utterance_id '{}'", r.utterance_id),
                });
            }
            for key in r.feature_paths.keys().chain(r.directedness_paths.keys()) {
                key.parse::<Modality>().map_err(|_| CoreError::Manifest {
                    line: i + 1,
                    msg: format!("unknown modality '{key}' in feature or directedness paths"),
                })?;
            }
        }
        let mut speaker_split: BTreeMap<&str, Split> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            if let Some(s) = &r.speaker_id {
                if let Some(prev) = speaker_split.insert(s, r.split) {
                    if prev != r.split {
                        return Err(CoreError::Manifest {
                            line: i + 1,
                            msg: format!("speaker '{s}' appears in splits {prev} and {}", r.split),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("manifest records serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(parse_manifest_line(line).map_err(|msg| CoreError::Manifest { line: i + 1, msg })?);
        }
        Manifest::new(records)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let mut m = Self::from_jsonl(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    /// Same records with every path re-expressed relative to `new_base`.
    pub fn rebase(&self, new_base: &Path) -> Manifest {
        let mut out = self.clone();
        let fix = |p: &mut String| *p = relative_to(new_base, &self.resolve(p));
        for r in &mut out.records {
            if let Some(p) = r.audio_path.as_mut() {
                fix(p);
            }
            r.feature_paths.values_mut().for_each(fix);
            r.directedness_paths.values_mut().for_each(fix);
        }
        out.base_dir = new_base.to_path_buf();
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| CoreError::io(path, e))
    }
}

fn normalized(p: &Path) -> PathBuf {
    let abs = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            c => out.push(c),
        }
    }
    out
}

/// `path` relative to `base` (with `..` steps as needed), or absolute when
/// the two share nothing below the filesystem root.
pub fn relative_to(base: &Path, path: &Path) -> String {
    let (b, p) = (normalized(base), normalized(path));
    let (bc, pc): (Vec<_>, Vec<_>) = (b.components().collect(), p.components().collect());
    let common = bc.iter().zip(&pc).take_while(|(x, y)| x == y).count();
    if common <= 1 {
        return p.to_string_lossy().into_owned();
    }
    let mut rel = PathBuf::new();
    for _ in common..bc.len() {
        rel.push("..");
    }
    for c in &pc[common..] {
        rel.push(c);
    }
    rel.to_string_lossy().into_owned()
}

pub fn parse_manifest_line(line: &str) -> std::result::Result<ManifestRecord, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

/// Relative sizes of the five splits.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitRatios(pub [f64; 5]);

impl Default for SplitRatios {
    /// Per-split totals (directed + not-directed, thousands of queries) of the reference corpus.
    fn default() -> Self {
        SplitRatios([35.2, 21.4, 15.1, 8.9, 20.1])
    }
}

/// Reassigns every record to one of the five splits. Records sharing a
/// speaker id stay together; records without one are grouped on their own.
pub fn split_manifest(manifest: &Manifest, ratios: &SplitRatios, seed: u64) -> Result<Manifest> {
    let total_ratio: f64 = ratios.0.iter().sum();
    if ratios.0.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(CoreError::Config("split ratios must be positive".into()));
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        let key = match &r.speaker_id {
            Some(s) => format!("s:{s}"),
            None => format!("u:{}", r.utterance_id),
        };
        groups.entry(key).or_default().push(i);
    }
    if groups.len() < Split::ALL.len() {
        return Err(CoreError::Data(format!(
            "{} speaker groups cannot fill {} disjoint splits",
            groups.len(),
            Split::ALL.len()
        )));
    }
    let mut order: Vec<Vec<usize>> = groups.into_values().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = manifest.records.len() as f64;
    let targets: Vec<f64> = ratios.0.iter().map(|r| r / total_ratio * n).collect();
    let mut assigned = [0.0f64; 5];
    let mut out = manifest.clone();
    // Seed every split with one group, then fill by largest remaining deficit.
    for (k, group) in order.iter().enumerate() {
        let s = if k < 5 {
            k
        } else {
            (0..5)
                .max_by(|a, b| (targets[*a] - assigned[*a]).total_cmp(&(targets[*b] - assigned[*b])))
                .expect("five splits")
        };
        assigned[s] += group.len() as f64;
        for &i in group {
            out.records[i].split = Split::ALL[s];
        }
    }
    Ok(out)
}

/// Utterance ids (and speaker ids) per split, for disjointness checks.
pub fn split_members(manifest: &Manifest) -> BTreeMap<Split, (BTreeSet<String>, BTreeSet<String>)> {
    let mut out: BTreeMap<Split, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    for r in &manifest.records {
        let e = out.entry(r.split).or_default();
        e.0.insert(r.utterance_id.clone());
        if let Some(s) = &r.speaker_id {
            e.1.insert(s.clone());
        }
    }
    out
}
