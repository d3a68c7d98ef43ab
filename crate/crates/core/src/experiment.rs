//! End-to-end in-memory pipeline on a synthetic corpus: component models on
//! the component splits, fusion on the fusion splits, evaluation on test,
//! clean and with missing modalities.

use std::time::Instant;

use ddsd_nn::TrainConfig;
use rayon::prelude::*;
use serde::Serialize;

use crate::component::{
    component_scored_set, infer_component_batch, train_component, ComponentData, ComponentModel, ComponentTrainOptions,
};
use crate::corrupt::{corrupt_missing, CorruptionReport};
use crate::error::Result;
use crate::features::{audio_features, text_features, FeatureMatrix};
use crate::fusion::{
    fusion_scored_set, train_fusion, FusionKind, FusionModel, FusionSample, FusionTrainOptions, ModalityDropoutConfig,
};
use crate::manifest::Split;
use crate::metrics::EvalReport;
use crate::modality::Modality;
use crate::synth::{generate_synthetic_corpus, SynthConfig, SynthCorpus};
use crate::train::TrainHistory;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    /// Component training, with per-modality epoch counts indexed by [`Modality::index`].
    pub component: TrainConfig,
    pub component_epochs: [usize; 4],
    pub component_patience: Option<usize>,
    pub fusion: TrainConfig,
    pub fusion_patience: Option<usize>,
    pub dropout_p: f64,
    pub corruption_rate: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            component: TrainConfig::default(),
            component_epochs: [4, 20, 50, 15],
            component_patience: Some(5),
            fusion: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            fusion_patience: None,
            dropout_p: 0.3,
            corruption_rate: 0.3,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    /// (directed, not-directed) per split.
    pub split_counts: Vec<(String, usize, usize)>,
    pub single: Vec<EvalReport>,
    pub fusion_clean: Vec<EvalReport>,
    pub fusion_corrupted: Vec<EvalReport>,
    pub corruption: CorruptionReport,
    pub component_histories: Vec<(String, TrainHistory)>,
    pub fusion_histories: Vec<(String, TrainHistory)>,
    pub timings: Vec<(String, f64)>,
}

fn find<'a>(reports: &'a [EvalReport], name: &str) -> Option<&'a EvalReport> {
    reports.iter().find(|r| r.name == name)
}

impl ExperimentReport {
    pub fn single_fa(&self, m: Modality) -> Option<f64> {
        find(&self.single, m.name()).map(|r| r.fa_at_fr10)
    }

    pub fn clean_fa(&self, name: &str) -> Option<f64> {
        find(&self.fusion_clean, name).map(|r| r.fa_at_fr10)
    }

    pub fn corrupted_fa(&self, name: &str) -> Option<f64> {
        find(&self.fusion_corrupted, name).map(|r| r.fa_at_fr10)
    }

    /// The table-analog summary: corpus, single modalities, fusion, prosody
    /// benefit and missing-modality robustness.
    pub fn to_text(&self) -> String {
        let mut s = format!("seed {}\n\n[corpus]\nsplit\tdirected\tnot-directed\n", self.seed);
        for (name, d, n) in &self.split_counts {
            s.push_str(&format!("{name}\t{d}\t{n}\n"));
        }
        let table = |s: &mut String, title: &str, rows: &[EvalReport]| {
            s.push_str(&format!("\n[{title}]\n"));
            for r in rows {
                s.push_str(&format!("{}\t{}\n", r.name, r.summary_line()));
            }
        };
        table(&mut s, "single modality, test", &self.single);
        table(&mut s, "fusion, clean test", &self.fusion_clean);
        table(
            &mut s,
            &format!("fusion, test with {:.0}% missing", 100.0 * self.corruption.rate),
            &self.fusion_corrupted,
        );
        s
    }
}

pub const VERBAL_TAG: &str = "a,t,asr";
pub const ALL_TAG: &str = "a,t,asr,p";

pub fn fusion_name(kind: FusionKind, modalities: &[Modality], md: bool) -> String {
    let tag = modalities.iter().map(|m| m.symbol()).collect::<Vec<_>>().join(",");
    format!("{}{}({tag})", kind.name().to_uppercase(), if md { "+MD" } else { "" })
}

/// Component-model inputs for every utterance of the corpus.
pub fn corpus_features(corpus: &SynthCorpus, m: Modality) -> Result<Vec<FeatureMatrix>> {
    corpus
        .utterances
        .par_iter()
        .map(|u| match m {
            Modality::Text => Ok(text_features(u.record.transcript.as_deref().unwrap_or(""))),
            Modality::Asr => FeatureMatrix::vector(u.asr.to_vec()),
            _ => {
                let audio = u.audio.as_ref().ok_or_else(|| {
                    crate::error::CoreError::utt(&u.record.utterance_id, "corpus generated without audio")
                })?;
                audio_features(audio, m)
            }
        })
        .collect()
}

fn subset(corpus: &SynthCorpus, feats: &[FeatureMatrix], idx: &[usize]) -> ComponentData {
    ComponentData {
        ids: idx
            .iter()
            .map(|i| corpus.utterances[*i].record.utterance_id.clone())
            .collect(),
        features: idx.iter().map(|i| feats[*i].clone()).collect(),
        labels: idx.iter().map(|i| corpus.utterances[*i].record.label).collect(),
    }
}

/// Trained component models plus fusion samples for the fusion and test splits.
pub struct ComponentStage {
    pub models: Vec<ComponentModel>,
    pub single: Vec<EvalReport>,
    pub histories: Vec<(String, TrainHistory)>,
    pub train_fus: Vec<FusionSample>,
    pub val_fus: Vec<FusionSample>,
    pub test: Vec<FusionSample>,
    pub timings: Vec<(String, f64)>,
}

pub fn run_component_stage(corpus: &SynthCorpus, config: &ExperimentConfig) -> Result<ComponentStage> {
    let idx = |s| corpus.indices(s);
    let (tc, vc, tf, vf, te) = (
        idx(Split::TrainComp),
        idx(Split::ValComp),
        idx(Split::TrainFus),
        idx(Split::ValFus),
        idx(Split::Test),
    );
    let mk = |ids: &[usize]| -> Vec<FusionSample> {
        ids.iter()
            .map(|i| {
                let r = &corpus.utterances[*i].record;
                FusionSample::new(&r.utterance_id, r.label)
            })
            .collect()
    };
    let mut stage = ComponentStage {
        models: Vec::new(),
        single: Vec::new(),
        histories: Vec::new(),
        train_fus: mk(&tf),
        val_fus: mk(&vf),
        test: mk(&te),
        timings: Vec::new(),
    };
    for m in Modality::ALL {
        let t0 = Instant::now();
        let feats = corpus_features(corpus, m)?;
        stage
            .timings
            .push((format!("features.{}", m.name()), t0.elapsed().as_secs_f64()));
        let t0 = Instant::now();
        let model = ComponentModel::build(m, config.seed.wrapping_mul(31).wrapping_add(m.index() as u64 + 1))?;
        let cfg = TrainConfig {
            epochs: config.component_epochs[m.index()],
            seed: config.seed.wrapping_mul(131).wrapping_add(m.index() as u64),
            ..config.component.clone()
        };
        let options = ComponentTrainOptions {
            patience: config.component_patience,
            ..ComponentTrainOptions::default()
        };
        let (model, history) = train_component(
            &model,
            &subset(corpus, &feats, &tc),
            &subset(corpus, &feats, &vc),
            &cfg,
            &options,
        )?;
        stage
            .timings
            .push((format!("train.{}", m.name()), t0.elapsed().as_secs_f64()));
        let test_data = subset(corpus, &feats, &te);
        stage.single.push(EvalReport::evaluate(
            m.name(),
            &component_scored_set(&model, &test_data)?,
        )?);
        for (ids, samples) in [
            (&tf, &mut stage.train_fus),
            (&vf, &mut stage.val_fus),
            (&te, &mut stage.test),
        ] {
            let data = subset(corpus, &feats, ids);
            for (s, o) in samples.iter_mut().zip(infer_component_batch(&model, &data.features)?) {
                s.scores.set(m, Some(o.score));
                s.embeddings.set(m, Some(o.embedding));
            }
        }
        stage.histories.push((m.name().to_string(), history));
        stage.models.push(model);
    }
    Ok(stage)
}

/// One trained fusion configuration.
pub struct FusionRun {
    pub name: String,
    pub model: FusionModel,
    pub history: TrainHistory,
}

pub fn run_fusion(
    stage: &ComponentStage,
    kind: FusionKind,
    modalities: &[Modality],
    md: Option<&ModalityDropoutConfig>,
    config: &ExperimentConfig,
) -> Result<FusionRun> {
    let seed = config.seed.wrapping_mul(1009).wrapping_add(modalities.len() as u64);
    let model = FusionModel::build(kind, modalities, seed)?;
    let cfg = TrainConfig {
        seed: seed ^ 0x5eed,
        ..config.fusion.clone()
    };
    let options = FusionTrainOptions {
        patience: config.fusion_patience,
        ..FusionTrainOptions::default()
    };
    let (model, history) = train_fusion(&model, &stage.train_fus, &stage.val_fus, &cfg, md, &options)?;
    Ok(FusionRun {
        name: fusion_name(kind, modalities, md.is_some()),
        model,
        history,
    })
}

/// Runs the whole pipeline for `config.seed`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let t0 = Instant::now();
    let corpus = generate_synthetic_corpus(&config.synth)?;
    let mut timings = vec![("synth".to_string(), t0.elapsed().as_secs_f64())];
    let stage = run_component_stage(&corpus, config)?;
    timings.extend(stage.timings.iter().cloned());
    let md = ModalityDropoutConfig::uniform(config.dropout_p, config.seed.wrapping_add(77));
    let verbal = Modality::VERBAL.to_vec();
    let all = Modality::ALL.to_vec();
    let plan: Vec<(FusionKind, &[Modality], bool)> = vec![
        (FusionKind::Avg, &verbal, false),
        (FusionKind::Sl, &verbal, false),
        (FusionKind::El, &verbal, false),
        (FusionKind::Avg, &all, false),
        (FusionKind::Sl, &all, false),
        (FusionKind::El, &all, false),
        (FusionKind::El, &all, true),
    ];
    let (test_corrupted, corruption) =
        corrupt_missing(&stage.test, config.corruption_rate, config.seed.wrapping_add(1))?;
    let mut fusion_clean = Vec::new();
    let mut fusion_corrupted = Vec::new();
    let mut fusion_histories = Vec::new();
    for (kind, mods, use_md) in plan {
        let t = Instant::now();
        let run = run_fusion(&stage, kind, mods, use_md.then_some(&md), config)?;
        timings.push((format!("fusion.{}", run.name), t.elapsed().as_secs_f64()));
        fusion_clean.push(EvalReport::evaluate(
            &run.name,
            &fusion_scored_set(&run.model, &stage.test)?,
        )?);
        if kind == FusionKind::El || kind == FusionKind::Sl {
            fusion_corrupted.push(EvalReport::evaluate(
                &run.name,
                &fusion_scored_set(&run.model, &test_corrupted)?,
            )?);
        } else {
            let keep: Vec<FusionSample> = test_corrupted
                .iter()
                .filter(|s| mods.iter().any(|m| s.scores.get(*m).is_some()))
                .cloned()
                .collect();
            fusion_corrupted.push(EvalReport::evaluate(&run.name, &fusion_scored_set(&run.model, &keep)?)?);
        }
        fusion_histories.push((run.name, run.history));
    }
    timings.push(("total".into(), t0.elapsed().as_secs_f64()));
    Ok(ExperimentReport {
        seed: config.seed,
        split_counts: Split::ALL
            .iter()
            .zip(config.synth.split_counts())
            .map(|(s, (d, n))| (s.name().to_string(), d, n))
            .collect(),
        single: stage.single,
        fusion_clean,
        fusion_corrupted,
        corruption,
        component_histories: stage.histories,
        fusion_histories,
        timings,
    })
}
