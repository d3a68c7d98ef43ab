//! Prosody (pitch, voicing, jitter, shimmer, VAD) and log-mel filterbank
//! features on a shared 100 Hz frame grid.

mod audio;
mod filterbank;
mod frames;
mod perturbation;
mod pitch;
mod prosody;
mod resample;
mod spectrum;
mod vad;

pub use audio::{decode_wav, read_wav, write_wav, AudioBuffer, DspError, Result};
pub use filterbank::{
    extract_filterbank, hz_to_mel, mel_to_hz, FilterbankTrack, MelFilterbank, FILTERBANK_RATE, LOG_FLOOR, NUM_MEL_BANDS,
};
pub use frames::{FrameGrid, FRAME_RATE_HZ, GRID_WINDOW_SECS, SHORT_WINDOW_SECS};
pub use perturbation::{extract_jitter_shimmer, period_marks, perturbation_of, PeriodMark, Perturbation};
pub use pitch::{extract_pitch_voicing, extract_pitch_voicing_with, PitchConfig, PitchFrame};
pub use prosody::{assemble_prosody_track, ProsodyTrack, PROSODY_COLUMNS, PROSODY_DIM};
pub use resample::resample;
pub use spectrum::hann;
pub use vad::{
    extract_vad, extract_vad_with, frame_speech_probabilities, hmm_posteriors, spectral_flatness, VadConfig,
};
