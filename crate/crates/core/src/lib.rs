//! Device-directed speech detection: component models, score and embedding
//! fusion with modality dropout, evaluation metrics, record and manifest
//! formats, and a synthetic multimodal corpus.

mod component;
mod corrupt;
mod error;
mod experiment;
mod features;
mod fusion;
mod manifest;
mod metrics;
mod modality;
mod record;
mod synth;
mod train;

pub use component::*;
pub use corrupt::*;
pub use error::{CoreError, Result};
pub use experiment::*;
pub use features::*;
pub use fusion::*;
pub use manifest::*;
pub use metrics::*;
pub use modality::*;
pub use record::*;
pub use synth::*;
pub use train::*;
