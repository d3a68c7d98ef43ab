//! Synthetic multimodal corpus with controllable per-modality separability.
//!
//! Each utterance draws a class `y` and, per modality, a latent
//! `s_m = d_m * y + sqrt(rho) * c + sqrt(1 - rho) * e_m` with a shared
//! nuisance `c` and per-modality noise `e_m`, all standard normal. Text and
//! ASR noise share a recognition-error term `r`:
//! `e_m = sqrt(kappa) * r + sqrt(1 - kappa) * u_m`. The nuisance also
//! sets the audio noise floor. Prosody latents drive jitter, shimmer and
//! intonation range; acoustic latents move the formants; text latents set the
//! share of command-like words; ASR latents shape an 8-dim confidence vector.

use std::f64::consts::PI;
use std::path::Path;

use ddsd_dsp::{write_wav, AudioBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::features::ASR_FEATURE_DIM;
use crate::manifest::{relative_to, Label, Manifest, ManifestRecord, Split};
use crate::modality::Modality;
use crate::record::{write_records, Record, RecordKind};

pub const SYNTH_SAMPLE_RATE: u32 = 16000;

/// Directed / not-directed counts per split of the reference corpus, in
/// split order train-comp, train-fus, val-comp, val-fus, test.
pub const REFERENCE_DIRECTED: [usize; 5] = [5200, 3400, 2600, 1500, 3100];
pub const REFERENCE_NOT_DIRECTED: [usize; 5] = [30000, 18000, 12500, 7400, 17000];
/// Not-directed : directed ratio of the reference train-comp split.
pub const REFERENCE_IMBALANCE: f64 = 30000.0 / 5200.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Fraction of the reference split sizes.
    pub scale: f64,
    /// Class-mean distance in latent noise units, indexed by [`Modality::index`].
    pub separability: [f64; 4],
    /// Cross-modal latent correlation.
    pub rho: f64,
    /// Share of text and ASR noise that comes from common recognition errors.
    pub recognition: f64,
    /// Not-directed : directed ratio.
    pub imbalance: f64,
    pub utterances_per_speaker: usize,
    /// Synthesize waveforms (needed for prosody and acoustic features).
    pub audio: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scale: 0.1,
            separability: [0.5, 1.8, 1.0, 1.0],
            rho: 0.5,
            recognition: 0.7,
            imbalance: REFERENCE_IMBALANCE,
            utterances_per_speaker: 8,
            audio: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::Config(m));
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale {} must be positive", self.scale));
        }
        if self.separability.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return bad(format!("separabilities {:?} must be >= 0", self.separability));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho {} outside [0, 1]", self.rho));
        }
        if !(0.0..=1.0).contains(&self.recognition) {
            return bad(format!("recognition {} outside [0, 1]", self.recognition));
        }
        if !(self.imbalance > 0.0 && self.imbalance.is_finite()) {
            return bad(format!("imbalance {} must be positive", self.imbalance));
        }
        if self.utterances_per_speaker == 0 {
            return bad("utterances_per_speaker must be positive".into());
        }
        Ok(())
    }

    /// (directed, not-directed) counts per split.
    pub fn split_counts(&self) -> [(usize, usize); 5] {
        let mut out = [(0, 0); 5];
        for (s, o) in out.iter_mut().enumerate() {
            let d = (REFERENCE_DIRECTED[s] as f64 * self.scale).round().max(1.0);
            let n = (REFERENCE_NOT_DIRECTED[s] as f64 * self.scale * self.imbalance / REFERENCE_IMBALANCE)
                .round()
                .max(1.0);
            *o = (d as usize, n as usize);
        }
        out
    }
}

/// Latent draws behind one utterance, kept for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceLatents {
    pub nuisance: f64,
    /// Indexed by [`Modality::index`].
    pub modality: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct SynthUtterance {
    pub record: ManifestRecord,
    pub audio: Option<AudioBuffer>,
    pub asr: [f64; ASR_FEATURE_DIM],
    pub latents: UtteranceLatents,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub utterances: Vec<SynthUtterance>,
}

impl SynthCorpus {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            records: self.utterances.iter().map(|u| u.record.clone()).collect(),
            base_dir: Default::default(),
        }
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.utterances.len())
            .filter(|i| self.utterances[*i].record.split == split)
            .collect()
    }
}

const COMMAND_WORDS: [&str; 20] = [
    "set",
    "timer",
    "call",
    "play",
    "turn",
    "lights",
    "weather",
    "remind",
    "open",
    "send",
    "volume",
    "alarm",
    "navigate",
    "message",
    "stop",
    "pause",
    "forecast",
    "temperature",
    "skip",
    "music",
];
const CHAT_WORDS: [&str; 20] = [
    "yeah", "honestly", "dinner", "tomorrow", "funny", "guess", "friend", "later", "kind", "really", "maybe",
    "weekend", "sure", "anyway", "movie", "work", "traffic", "nice", "okay", "thought",
];
const FILLER_WORDS: [&str; 10] = ["the", "a", "to", "and", "my", "for", "is", "it", "on", "you"];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Per-speaker constants.
#[derive(Clone, Copy, Debug)]
struct Speaker {
    f0: f64,
    tract: f64,
}

fn draw_speaker(rng: &mut ChaCha8Rng) -> Speaker {
    let f0: f64 = if rng.random::<bool>() {
        Normal::new(115.0, 15.0).expect("valid").sample(rng)
    } else {
        Normal::new(205.0, 25.0).expect("valid").sample(rng)
    };
    Speaker {
        f0: f0.clamp(85.0, 290.0),
        tract: rng.random_range(0.96..1.04),
    }
}

fn transcript(s_t: f64, center: f64, rng: &mut ChaCha8Rng) -> String {
    let q = sigmoid(2.0 * (s_t - center));
    let n = rng.random_range(4..=8);
    let mut words = Vec::new();
    for _ in 0..n {
        if rng.random::<f64>() < 0.3 {
            words.push(FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())]);
        }
        let pool = if rng.random::<f64>() < q {
            &COMMAND_WORDS
        } else {
            &CHAT_WORDS
        };
        words.push(pool[rng.random_range(0..pool.len())]);
    }
    words.join(" ")
}

fn asr_vector(s: f64, center: f64, rng: &mut ChaCha8Rng) -> [f64; ASR_FEATURE_DIM] {
    let b = s - center;
    [
        b + 0.5 * normal(rng),
        (0.8 * b).tanh() + 0.3 * normal(rng),
        (0.4 * b + 0.2 * normal(rng)).exp(),
        0.5 * b + 0.6 * normal(rng),
        normal(rng),
        rng.random::<f64>(),
        (0.5 * normal(rng)).exp(),
        rng.random_range(3..=12) as f64,
    ]
}

/// Two-pole resonator at `freq` Hz with bandwidth `bw` Hz, unit DC gain.
fn resonate(x: &mut [f64], freq: f64, bw: f64, sr: f64) {
    let r = (-PI * bw / sr).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / sr).cos();
    let a2 = -r * r;
    let g = 1.0 - a1 - a2;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = g * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

struct VoiceParams {
    f0: f64,
    jitter: f64,
    shimmer: f64,
    range: f64,
    f1: f64,
    f2: f64,
}

/// One voiced syllable: jittered, shimmered Gaussian glottal pulses through
/// three formant resonators, with 10 ms raised-cosine ramps.
fn syllable(len: usize, v: &VoiceParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sr = f64::from(SYNTH_SAMPLE_RATE);
    let mut x = vec![0.0; len];
    let offset = v.range * rng.random_range(-1.0..1.0);
    let slope = v.range * rng.random_range(-1.0..1.0);
    let sigma = 0.00025 * sr;
    let mut t = rng.random_range(0.0..sr / v.f0);
    while t < len as f64 {
        let frac = t / len as f64;
        let f0 = (v.f0 * (offset + slope * (frac - 0.5)).exp()).clamp(70.0, 380.0);
        let amp = (1.0 + v.shimmer * normal(rng)).max(0.05);
        let lo = (t - 4.0 * sigma).floor().max(0.0) as usize;
        let hi = ((t + 4.0 * sigma).ceil() as usize).min(len - 1);
        for (i, xi) in x.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = (i as f64 - t) / sigma;
            *xi += amp * (-0.5 * d * d).exp();
        }
        t += sr / f0 * (1.0 + v.jitter * normal(rng)).max(0.5);
    }
    resonate(&mut x, v.f1, 80.0, sr);
    resonate(&mut x, v.f2, 100.0, sr);
    resonate(&mut x, 2600.0, 150.0, sr);
    let mean = x.iter().sum::<f64>() / len as f64;
    let rms = (x.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / len as f64)
        .sqrt()
        .max(1e-12);
    let ramp = (0.010 * sr) as usize;
    for (i, s) in x.iter_mut().enumerate() {
        let edge = i.min(len - 1 - i);
        let w = if edge < ramp {
            0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        *s = (*s - mean) / rms * w;
    }
    x
}

fn synth_audio(
    speaker: Speaker,
    s_a: f64,
    s_p: f64,
    c: f64,
    d: &[f64; 4],
    rng: &mut ChaCha8Rng,
) -> Result<AudioBuffer> {
    let sr = f64::from(SYNTH_SAMPLE_RATE);
    let secs = |a: f64, b: f64, rng: &mut ChaCha8Rng| (rng.random_range(a..b) * sr) as usize;
    let a = (s_a - d[Modality::Acoustic.index()] / 2.0).clamp(-3.0, 3.0);
    let p = 1.0 - sigmoid(1.5 * (s_p - d[Modality::Prosody.index()] / 2.0));
    let vowel = |rng: &mut ChaCha8Rng| rng.random_range(0.97..1.03);
    let gain = 0.1 * rng.random_range(0.7..1.3);
    let noise_sigma = 10f64.powf((-42.0 + 5.0 * c) / 20.0);
    let n_syll = rng.random_range(2..=3);
    let mut x = vec![0.0; secs(0.03, 0.07, rng)];
    for k in 0..n_syll {
        if k > 0 {
            x.extend(std::iter::repeat_n(0.0, secs(0.03, 0.10, rng)));
        }
        let v = VoiceParams {
            f0: speaker.f0,
            jitter: 0.003 + 0.025 * p,
            shimmer: 0.02 + 0.2 * p,
            range: 0.04 + 0.22 * p,
            f1: 550.0 * speaker.tract * (1.0 + 0.12 * a) * vowel(rng),
            f2: 1500.0 * speaker.tract * (1.0 - 0.10 * a) * vowel(rng),
        };
        let len = secs(0.08, 0.14, rng);
        x.extend(syllable(len, &v, rng).into_iter().map(|s| s * gain));
    }
    x.extend(std::iter::repeat_n(0.0, secs(0.03, 0.07, rng)));
    let q = f64::from(i16::MAX);
    let samples = x
        .into_iter()
        .map(|s| ((s + noise_sigma * normal(rng)).clamp(-1.0, 1.0) * q).round() / q)
        .collect();
    Ok(AudioBuffer::new(samples, SYNTH_SAMPLE_RATE)?)
}

struct Slot {
    split: Split,
    label: Label,
    speaker: usize,
}

/// Generates the corpus in memory. Identical configs give identical corpora.
pub fn generate_synthetic_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut plan_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut slots = Vec::new();
    let mut speakers = Vec::new();
    for (s, (n_dir, n_not)) in config.split_counts().into_iter().enumerate() {
        let mut labels: Vec<Label> = std::iter::repeat_n(Label::Directed, n_dir)
            .chain(std::iter::repeat_n(Label::NotDirected, n_not))
            .collect();
        rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut plan_rng);
        for chunk in labels.chunks(config.utterances_per_speaker) {
            speakers.push(draw_speaker(&mut plan_rng));
            for &label in chunk {
                slots.push(Slot {
                    split: Split::ALL[s],
                    label,
                    speaker: speakers.len() - 1,
                });
            }
        }
    }
    let utterances = slots
        .par_iter()
        .enumerate()
        .map(|(i, slot)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            generate_one(config, i, slot, speakers[slot.speaker], &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCorpus {
        config: config.clone(),
        utterances,
    })
}

fn generate_one(
    config: &SynthConfig,
    i: usize,
    slot: &Slot,
    speaker: Speaker,
    rng: &mut ChaCha8Rng,
) -> Result<SynthUtterance> {
    let y = if slot.label.is_directed() { 1.0 } else { 0.0 };
    let c = normal(rng);
    let r = normal(rng);
    let mut s = [0.0; 4];
    for m in Modality::ALL {
        let mut e = normal(rng);
        if matches!(m, Modality::Text | Modality::Asr) {
            e = config.recognition.sqrt() * r + (1.0 - config.recognition).sqrt() * e;
        }
        s[m.index()] = config.separability[m.index()] * y + config.rho.sqrt() * c + (1.0 - config.rho).sqrt() * e;
    }
    let d = &config.separability;
    let text = transcript(s[Modality::Text.index()], d[Modality::Text.index()] / 2.0, rng);
    let asr = asr_vector(s[Modality::Asr.index()], d[Modality::Asr.index()] / 2.0, rng);
    let audio = if config.audio {
        Some(synth_audio(
            speaker,
            s[Modality::Acoustic.index()],
            s[Modality::Prosody.index()],
            c,
            d,
            rng,
        )?)
    } else {
        None
    };
    Ok(SynthUtterance {
        record: ManifestRecord {
            utterance_id: format!("utt{i:06}"),
            label: slot.label,
            split: slot.split,
            speaker_id: Some(format!("spk{:05}", slot.speaker)),
            audio_path: None,
            transcript: Some(text),
            feature_paths: Default::default(),
            directedness_paths: Default::default(),
        },
        audio,
        asr,
        latents: UtteranceLatents {
            nuisance: c,
            modality: s,
        },
    })
}

/// Writes `manifest.jsonl`, `audio/<id>.wav` and `features/asr.features.ddrc` under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<Manifest> {
    let audio_dir = dir.join("audio");
    let feat_dir = dir.join("features");
    for d in [&audio_dir, &feat_dir] {
        std::fs::create_dir_all(d).map_err(|e| CoreError::io(d, e))?;
    }
    let mut manifest = corpus.manifest();
    manifest.base_dir = dir.to_path_buf();
    corpus.utterances.par_iter().try_for_each(|u| -> Result<()> {
        if let Some(a) = &u.audio {
            write_wav(audio_dir.join(format!("{}.wav", u.record.utterance_id)), a)?;
        }
        Ok(())
    })?;
    let asr_file = feat_dir.join("asr.features.ddrc");
    let records = corpus
        .utterances
        .iter()
        .map(|u| {
            Record::new(
                &u.record.utterance_id,
                Modality::Asr,
                RecordKind::Features,
                vec![ASR_FEATURE_DIM],
                u.asr.iter().map(|v| *v as f32).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    write_records(&asr_file, &records)?;
    let asr_rel = relative_to(dir, &asr_file);
    for (r, u) in manifest.records.iter_mut().zip(&corpus.utterances) {
        if u.audio.is_some() {
            r.audio_path = Some(format!("audio/{}.wav", r.utterance_id));
        }
        r.feature_paths.insert(Modality::Asr.name().into(), asr_rel.clone());
    }
    manifest.write(dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
