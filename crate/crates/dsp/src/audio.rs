use std::io::{Read, Seek};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio buffer is empty")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample {value} at index {index} outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("buffer of {samples} samples is shorter than one {needed}-sample analysis window")]
    TooShort { samples: usize, needed: usize },
    #[error("unsupported sample rate {0} Hz")]
    SampleRate(u32),
    #[error("unsupported wav encoding: {0}")]
    WavFormat(String),
    #[error("track of {found} frames does not match the {expected}-frame grid")]
    Alignment { expected: usize, found: usize },
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Mono PCM audio in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(DspError::Empty);
        }
        if sample_rate == 0 {
            return Err(DspError::SampleRate(0));
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() {
                return Err(DspError::NonFinite(index));
            }
            if value.abs() > 1.0 {
                return Err(DspError::OutOfRange { index, value });
            }
        }
        Ok(Self { samples, sample_rate })
    }

    /// Scales the signal down to unit peak when it exceeds `[-1, 1]`.
    pub fn normalized(mut samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 1.0 && peak.is_finite() {
            for v in &mut samples {
                *v /= peak;
            }
        }
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads 16-bit PCM WAV; multi-channel input is averaged to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    decode_wav(std::io::BufReader::new(
        std::fs::File::open(path.as_ref()).map_err(hound::Error::IoError)?,
    ))
}

pub fn decode_wav<R: Read + Seek>(reader: R) -> Result<AudioBuffer> {
    let wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(DspError::WavFormat(format!(
            "{:?} {}-bit (expected 16-bit integer PCM)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels == 0 {
        return Err(DspError::WavFormat("zero channels".into()));
    }
    let channels = spec.channels as usize;
    let mut mono = Vec::with_capacity(wav.len() as usize / channels);
    let mut acc = 0.0;
    let mut n = 0;
    for s in wav.into_samples::<i16>() {
        acc += s? as f64 / 32768.0;
        n += 1;
        if n == channels {
            mono.push(acc / channels as f64);
            acc = 0.0;
            n = 0;
        }
    }
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes mono 16-bit PCM.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &v in &audio.samples {
        w.write_sample(quantize(v))?;
    }
    w.finalize()?;
    Ok(())
}

fn quantize(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}
