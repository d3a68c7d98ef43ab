//! Score averaging (AVG), learned score fusion (SL), embedding fusion (EL)
//! and modality dropout.

use std::collections::BTreeMap;

use ddsd_nn::{
    inverse_softmax, Activation, Adam, Branch, ClassWeights, LayerSpec, Mode, ModelGraph, Tensor, TrainConfig,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::manifest::Label;
use crate::metrics::ScoredSet;
use crate::modality::{Modality, EMBEDDING_SENTINEL, SCORE_SENTINEL};
use crate::train::{select_metric, EpochLog, Selection, TrainHistory};

pub const FUSION_BRANCH_UNITS: usize = 128;
pub const FUSION_HIDDEN_UNITS: usize = 128;

/// Optional per-modality scores, indexed by [`Modality::index`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSet(pub [Option<f64>; 4]);

impl ScoreSet {
    pub fn get(&self, m: Modality) -> Option<f64> {
        self.0[m.index()]
    }

    pub fn set(&mut self, m: Modality, v: Option<f64>) {
        self.0[m.index()] = v;
    }
}

/// Optional per-modality embeddings, indexed by [`Modality::index`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingSet(pub [Option<Vec<f64>>; 4]);

impl EmbeddingSet {
    pub fn get(&self, m: Modality) -> Option<&[f64]> {
        self.0[m.index()].as_deref()
    }

    pub fn set(&mut self, m: Modality, v: Option<Vec<f64>>) {
        self.0[m.index()] = v;
    }
}

/// One query's directedness features and label.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionSample {
    pub utterance_id: String,
    pub label: Label,
    pub scores: ScoreSet,
    pub embeddings: EmbeddingSet,
}

impl FusionSample {
    pub fn new(utterance_id: &str, label: Label) -> Self {
        FusionSample {
            utterance_id: utterance_id.to_string(),
            label,
            scores: ScoreSet::default(),
            embeddings: EmbeddingSet::default(),
        }
    }

    /// Marks a modality absent for both its score and embedding.
    pub fn drop_modality(&mut self, m: Modality) {
        self.scores.set(m, None);
        self.embeddings.set(m, None);
    }

    pub fn is_present(&self, m: Modality) -> bool {
        self.scores.get(m).is_some() || self.embeddings.get(m).is_some()
    }
}

/// Mean of the present scores among `modalities`.
pub fn fuse_avg(scores: &ScoreSet, modalities: &[Modality]) -> Result<f64> {
    let present: Vec<f64> = modalities.iter().filter_map(|m| scores.get(*m)).collect();
    if present.is_empty() {
        return Err(CoreError::Data("AVG fusion needs at least one present score".into()));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionKind {
    Avg,
    Sl,
    El,
}

impl FusionKind {
    pub fn name(self) -> &'static str {
        match self {
            FusionKind::Avg => "avg",
            FusionKind::Sl => "sl",
            FusionKind::El => "el",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avg" => Ok(FusionKind::Avg),
            "sl" => Ok(FusionKind::Sl),
            "el" => Ok(FusionKind::El),
            other => Err(CoreError::Config(format!("unknown fusion kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionModel {
    pub kind: FusionKind,
    pub modalities: Vec<Modality>,
    /// Parameter-free placeholder for AVG.
    pub graph: ModelGraph,
}

fn fusion_trunk(width: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense {
            input: width,
            output: FUSION_HIDDEN_UNITS,
            activation: Activation::Relu,
        },
        LayerSpec::LayerNorm {
            dim: FUSION_HIDDEN_UNITS,
        },
        LayerSpec::Dense {
            input: FUSION_HIDDEN_UNITS,
            output: 1,
            activation: Activation::Sigmoid,
        },
    ]
}

fn canonical(modalities: &[Modality]) -> Result<Vec<Modality>> {
    let mut m = modalities.to_vec();
    m.sort();
    m.dedup();
    if m.is_empty() {
        return Err(CoreError::Config("fusion needs at least one modality".into()));
    }
    Ok(m)
}

impl FusionModel {
    pub fn avg(modalities: &[Modality]) -> Result<Self> {
        let modalities = canonical(modalities)?;
        let graph = ModelGraph::new(vec![LayerSpec::InverseSoftmax { dim: modalities.len() }], 0)?;
        Ok(Self::finish(FusionKind::Avg, modalities, graph))
    }

    /// Per modality: inverse softmax, dense(1 -> 128, tanh); then the shared trunk.
    pub fn sl(modalities: &[Modality], seed: u64) -> Result<Self> {
        let modalities = canonical(modalities)?;
        let branches = modalities
            .iter()
            .map(|_| Branch {
                width: 1,
                layers: vec![
                    LayerSpec::InverseSoftmax { dim: 1 },
                    LayerSpec::Dense {
                        input: 1,
                        output: FUSION_BRANCH_UNITS,
                        activation: Activation::Tanh,
                    },
                ],
            })
            .collect();
        let mut layers = vec![LayerSpec::Parallel { branches }];
        layers.extend(fusion_trunk(FUSION_BRANCH_UNITS * modalities.len()));
        let graph = ModelGraph::new(layers, seed)?;
        Ok(Self::finish(FusionKind::Sl, modalities, graph))
    }

    /// Per modality: dense(dim -> 128, tanh); then the shared trunk.
    pub fn el(modalities: &[Modality], seed: u64) -> Result<Self> {
        let modalities = canonical(modalities)?;
        let branches = modalities
            .iter()
            .map(|m| Branch {
                width: m.embedding_dim(),
                layers: vec![LayerSpec::Dense {
                    input: m.embedding_dim(),
                    output: FUSION_BRANCH_UNITS,
                    activation: Activation::Tanh,
                }],
            })
            .collect();
        let mut layers = vec![LayerSpec::Parallel { branches }];
        layers.extend(fusion_trunk(FUSION_BRANCH_UNITS * modalities.len()));
        let graph = ModelGraph::new(layers, seed)?;
        Ok(Self::finish(FusionKind::El, modalities, graph))
    }

    pub fn build(kind: FusionKind, modalities: &[Modality], seed: u64) -> Result<Self> {
        match kind {
            FusionKind::Avg => Self::avg(modalities),
            FusionKind::Sl => Self::sl(modalities, seed),
            FusionKind::El => Self::el(modalities, seed),
        }
    }

    fn finish(kind: FusionKind, modalities: Vec<Modality>, mut graph: ModelGraph) -> Self {
        graph.attrs.insert("role".into(), "fusion".into());
        graph.attrs.insert("kind".into(), kind.name().into());
        graph.attrs.insert(
            "modalities".into(),
            modalities.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        FusionModel {
            kind,
            modalities,
            graph,
        }
    }

    /// Rebuilds a fusion model from a deserialized graph.
    pub fn from_graph(graph: ModelGraph) -> Result<Self> {
        let attr = |k: &str| {
            graph
                .attrs
                .get(k)
                .cloned()
                .ok_or_else(|| CoreError::Data(format!("model file lacks '{k}' attribute; not a fusion model")))
        };
        if attr("role")? != "fusion" {
            return Err(CoreError::Data("model file is not a fusion model".into()));
        }
        let kind = FusionKind::parse(&attr("kind")?)?;
        let modalities = crate::modality::parse_modalities(&attr("modalities")?)?;
        let expected = Self::build(kind, &modalities, graph.seed())?;
        if expected.graph.layers() != graph.layers() {
            return Err(CoreError::Data(format!(
                "{} fusion graph does not match its declared modalities",
                kind.name()
            )));
        }
        Ok(FusionModel {
            kind,
            modalities,
            graph,
        })
    }

    /// Width of the concatenated branch outputs (0 for AVG).
    pub fn concat_width(&self) -> usize {
        match self.kind {
            FusionKind::Avg => 0,
            _ => FUSION_BRANCH_UNITS * self.modalities.len(),
        }
    }

    pub fn input_width(&self) -> usize {
        match self.kind {
            FusionKind::Avg | FusionKind::Sl => self.modalities.len(),
            FusionKind::El => self.modalities.iter().map(|m| m.embedding_dim()).sum(),
        }
    }

    /// Network input row, with absent modalities encoded by their sentinels.
    pub fn input_row(&self, sample: &FusionSample) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.input_width());
        for &m in &self.modalities {
            match self.kind {
                FusionKind::Avg | FusionKind::Sl => row.push(sample.scores.get(m).unwrap_or(SCORE_SENTINEL)),
                FusionKind::El => match sample.embeddings.get(m) {
                    Some(e) if e.len() == m.embedding_dim() => row.extend_from_slice(e),
                    Some(e) => {
                        return Err(CoreError::utt(
                            &sample.utterance_id,
                            format!("{m} embedding has {} values, expected {}", e.len(), m.embedding_dim()),
                        ))
                    }
                    None => row.extend(std::iter::repeat_n(EMBEDDING_SENTINEL, m.embedding_dim())),
                },
            }
        }
        Ok(row)
    }

    fn input_tensor(&self, samples: &[&FusionSample]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(samples.len() * self.input_width());
        for s in samples {
            data.extend(self.input_row(s)?);
        }
        Ok(Tensor::new(vec![samples.len(), self.input_width()], data)?)
    }
}

/// Fused directedness probability.
pub fn infer_fusion(model: &FusionModel, sample: &FusionSample) -> Result<f64> {
    Ok(infer_fusion_batch(model, std::slice::from_ref(sample))?[0])
}

pub fn infer_fusion_batch(model: &FusionModel, samples: &[FusionSample]) -> Result<Vec<f64>> {
    if model.kind == FusionKind::Avg {
        return samples
            .iter()
            .map(|s| {
                fuse_avg(&s.scores, &model.modalities).map_err(|_| CoreError::utt(&s.utterance_id, "no score present"))
            })
            .collect();
    }
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(512) {
        let refs: Vec<&FusionSample> = chunk.iter().collect();
        let x = model.input_tensor(&refs)?;
        out.extend_from_slice(model.graph.forward(&x, None, Mode::Eval)?.data());
    }
    Ok(out)
}

pub fn fusion_scored_set(model: &FusionModel, samples: &[FusionSample]) -> Result<ScoredSet> {
    let scores = infer_fusion_batch(model, samples)?;
    Ok(ScoredSet::new(
        scores
            .into_iter()
            .zip(samples)
            .map(|(s, x)| (s, x.label.is_directed()))
            .collect(),
    ))
}

/// How training-time dropped modalities are encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    /// Same encoding as missing data at inference: score -1, embedding filled with -99999.
    Sentinel,
    /// Classic dropout: dropped embeddings zeroed and kept ones scaled by `1 / (1 - p)`;
    /// dropped scores set to 0.5 (logit 0).
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalityDropoutConfig {
    /// Drop probability per modality, indexed by [`Modality::index`].
    pub p: [f64; 4],
    pub seed: u64,
    pub mode: DropoutMode,
}

impl ModalityDropoutConfig {
    pub fn uniform(p: f64, seed: u64) -> Self {
        ModalityDropoutConfig {
            p: [p; 4],
            seed,
            mode: DropoutMode::Sentinel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(CoreError::Config(format!(
                "modality dropout probabilities {:?} outside [0, 1)",
                self.p
            )));
        }
        Ok(())
    }
}

/// Independently drops each modality of `sample` with its probability.
/// Draws happen for every modality in canonical order, present or not, so
/// the random stream does not depend on the data.
pub fn apply_modality_dropout(
    sample: &FusionSample,
    config: &ModalityDropoutConfig,
    rng: &mut dyn RngCore,
    train_mode: bool,
) -> FusionSample {
    if !train_mode {
        return sample.clone();
    }
    let mut out = sample.clone();
    for m in Modality::ALL {
        let p = config.p[m.index()];
        let drop = rng.random::<f64>() < p;
        match config.mode {
            DropoutMode::Sentinel => {
                if drop {
                    out.drop_modality(m);
                }
            }
            DropoutMode::Zero => {
                if drop {
                    if out.scores.get(m).is_some() {
                        out.scores.set(m, Some(0.5));
                    }
                    if let Some(e) = out.embeddings.0[m.index()].as_mut() {
                        e.iter_mut().for_each(|v| *v = 0.0);
                    }
                } else if let Some(e) = out.embeddings.0[m.index()].as_mut() {
                    e.iter_mut().for_each(|v| *v /= 1.0 - p);
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionTrainOptions {
    pub selection: Selection,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for FusionTrainOptions {
    fn default() -> Self {
        FusionTrainOptions {
            selection: Selection::Eer,
            patience: None,
        }
    }
}

/// Trains SL/EL fusion with weighted BCE; returns the best-validation
/// checkpoint. AVG has nothing to train and is returned unchanged.
pub fn train_fusion(
    model: &FusionModel,
    train: &[FusionSample],
    val: &[FusionSample],
    config: &TrainConfig,
    md: Option<&ModalityDropoutConfig>,
    options: &FusionTrainOptions,
) -> Result<(FusionModel, TrainHistory)> {
    config.validate()?;
    if let Some(md) = md {
        md.validate()?;
    }
    if train.is_empty() || val.is_empty() {
        return Err(CoreError::Data(
            "fusion training needs non-empty train and validation sets".into(),
        ));
    }
    if model.kind == FusionKind::Avg {
        return Ok((model.clone(), TrainHistory::default()));
    }
    let val_rows: Vec<&FusionSample> = val.iter().collect();
    let val_x = model.input_tensor(&val_rows)?;
    let val_labels: Vec<bool> = val.iter().map(|s| s.label.is_directed()).collect();
    let weights = class_weights(train.iter().map(|s| s.label));
    let mut graph = model.graph.clone();
    let mut adam = Adam::new(&graph, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut md_rng = ChaCha8Rng::seed_from_u64(md.map_or(0, |m| m.seed));
    let cfg = TrainConfig {
        class_weights: weights,
        ..config.clone()
    };
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelGraph)> = None;
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        let epoch_samples: Vec<FusionSample> = match md {
            Some(md) => train
                .iter()
                .map(|s| apply_modality_dropout(s, md, &mut md_rng, true))
                .collect(),
            None => train.to_vec(),
        };
        let mut loss_sum = 0.0;
        let batches = ddsd_nn::shuffled_batches(epoch_samples.len(), config.batch_size, &mut rng);
        for batch in &batches {
            let rows: Vec<&FusionSample> = batch.iter().map(|i| &epoch_samples[*i]).collect();
            let x = model.input_tensor(&rows)?;
            let labels: Vec<f64> = rows.iter().map(|s| s.label.target()).collect();
            loss_sum +=
                ddsd_nn::train_step(&mut graph, &mut adam, &x, None, &labels, &cfg, &mut rng)? * rows.len() as f64;
        }
        let val_scores = graph.forward(&val_x, None, Mode::Eval)?;
        let set = ScoredSet::from_parts(val_scores.data(), &val_labels);
        let metric = select_metric(options.selection, &set)?;
        history.epochs.push(EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / train.len() as f64,
            val_metric: metric,
        });
        if best.as_ref().is_none_or(|(b, _)| metric < *b) {
            best = Some((metric, graph.clone()));
            history.best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if options.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    let (_, graph) = best.expect("at least one epoch");
    Ok((
        FusionModel {
            kind: model.kind,
            modalities: model.modalities.clone(),
            graph,
        },
        history,
    ))
}

/// Positive-class weight `n_not_directed / n_directed`, negative weight 1.
pub fn class_weights(labels: impl Iterator<Item = Label>) -> ClassWeights {
    let (mut pos, mut neg) = (0usize, 0usize);
    for l in labels {
        if l.is_directed() {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    if pos == 0 || neg == 0 {
        return ClassWeights::default();
    }
    ClassWeights {
        positive: neg as f64 / pos as f64,
        negative: 1.0,
    }
}

/// Per-modality presence counts, for reporting realized drop rates.
pub fn presence_counts(samples: &[FusionSample]) -> BTreeMap<Modality, usize> {
    let mut out = BTreeMap::new();
    for m in Modality::ALL {
        out.insert(m, samples.iter().filter(|s| s.is_present(m)).count());
    }
    out
}

/// The scalar logit used by SL branches, exposed for reporting.
pub fn score_logit(score: f64) -> f64 {
    inverse_softmax(score)
}
