use std::fmt;
use std::str::FromStr;

use crate::error::CoreError;

/// Embedding fill written for an absent modality.
pub const EMBEDDING_SENTINEL: f64 = -99999.0;
pub use ddsd_nn::SCORE_SENTINEL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Acoustic,
    Text,
    Asr,
    Prosody,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Acoustic, Modality::Text, Modality::Asr, Modality::Prosody];
    pub const VERBAL: [Modality; 3] = [Modality::Acoustic, Modality::Text, Modality::Asr];

    pub fn embedding_dim(self) -> usize {
        match self {
            Modality::Acoustic => 256,
            Modality::Text => 128,
            Modality::Asr => 16,
            Modality::Prosody => 128,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Acoustic => "acoustic",
            Modality::Text => "text",
            Modality::Asr => "asr",
            Modality::Prosody => "prosody",
        }
    }

    /// Short symbol used in table labels (`a`, `t`, `asr`, `p`).
    pub fn symbol(self) -> &'static str {
        match self {
            Modality::Acoustic => "a",
            Modality::Text => "t",
            Modality::Asr => "asr",
            Modality::Prosody => "p",
        }
    }

    pub fn tag(self) -> u8 {
        self.index() as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn index(self) -> usize {
        match self {
            Modality::Acoustic => 0,
            Modality::Text => 1,
            Modality::Asr => 2,
            Modality::Prosody => 3,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "acoustic" | "a" => Ok(Modality::Acoustic),
            "text" | "t" => Ok(Modality::Text),
            "asr" => Ok(Modality::Asr),
            "prosody" | "p" => Ok(Modality::Prosody),
            other => Err(CoreError::Config(format!("unknown modality '{other}'"))),
        }
    }
}

/// Parses a comma-separated modality list such as `a,t,asr,p`, keeping canonical order.
pub fn parse_modalities(s: &str) -> Result<Vec<Modality>, CoreError> {
    let mut out: Vec<Modality> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(CoreError::Config("empty modality list".into()));
    }
    Ok(out)
}
