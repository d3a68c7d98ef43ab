//! Single-modality directedness models: the prosody GRU classifier and the
//! acoustic, text and ASR stand-ins.

use ddsd_nn::{pad_sequences, Activation, Adam, LayerSpec, Mode, ModelGraph, Param, Tensor, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::features::{feature_dim, is_sequence, FeatureLoader, FeatureMatrix};
use crate::fusion::{class_weights, FusionSample};
use crate::manifest::{Label, Manifest, ManifestRecord};
use crate::metrics::ScoredSet;
use crate::modality::Modality;
use crate::record::{Record, RecordKind};
use crate::train::{select_metric, EpochLog, Selection, TrainHistory};

pub const PROSODY_HIDDEN: usize = 128;
pub const PROSODY_DROPOUT: f64 = 0.2;
pub const ACOUSTIC_HIDDEN: usize = 256;
pub const TEXT_HIDDEN: usize = 128;
pub const ASR_HIDDEN: usize = 16;

const STD_MEAN: &str = "standardizer.mean";
const STD_SCALE: &str = "standardizer.inv_std";
const INFER_BATCH: usize = 256;

/// Score and penultimate embedding of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectnessOutput {
    pub score: f64,
    pub embedding: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentModel {
    pub modality: Modality,
    pub graph: ModelGraph,
}

fn layers_for(m: Modality) -> Vec<LayerSpec> {
    let head = |input| LayerSpec::Dense {
        input,
        output: 1,
        activation: Activation::Sigmoid,
    };
    match m {
        Modality::Prosody => vec![
            LayerSpec::Mask,
            LayerSpec::Gru {
                input: feature_dim(m),
                hidden: PROSODY_HIDDEN,
            },
            LayerSpec::LayerNorm { dim: PROSODY_HIDDEN },
            LayerSpec::Dropout { rate: PROSODY_DROPOUT },
            head(PROSODY_HIDDEN),
        ],
        Modality::Acoustic => vec![
            LayerSpec::Mask,
            LayerSpec::Gru {
                input: feature_dim(m),
                hidden: ACOUSTIC_HIDDEN,
            },
            head(ACOUSTIC_HIDDEN),
        ],
        Modality::Text | Modality::Asr => {
            let hidden = if m == Modality::Text { TEXT_HIDDEN } else { ASR_HIDDEN };
            vec![
                LayerSpec::Dense {
                    input: feature_dim(m),
                    output: hidden,
                    activation: Activation::Relu,
                },
                head(hidden),
            ]
        }
    }
}

/// Mask, GRU(5 -> 128), layer norm, dropout 0.2, dense(128 -> 1, sigmoid).
pub fn build_prosody_model(seed: u64) -> Result<ComponentModel> {
    ComponentModel::build(Modality::Prosody, seed)
}

/// Acoustic: GRU(40 -> 256) over filterbanks. Text: hashed trigrams through
/// dense(4096 -> 128, ReLU). ASR: dense(8 -> 16, ReLU). Each with a sigmoid head.
pub fn build_standin(m: Modality, seed: u64) -> Result<ComponentModel> {
    if m == Modality::Prosody {
        return Err(CoreError::Config(
            "prosody is not a stand-in; use build_prosody_model".into(),
        ));
    }
    ComponentModel::build(m, seed)
}

impl ComponentModel {
    pub fn build(m: Modality, seed: u64) -> Result<Self> {
        let mut graph = ModelGraph::new(layers_for(m), seed)?;
        let dim = feature_dim(m);
        graph.buffers = vec![
            Param {
                name: STD_MEAN.into(),
                value: Tensor::zeros(&[dim]),
            },
            Param {
                name: STD_SCALE.into(),
                value: Tensor::filled(&[dim], 1.0),
            },
        ];
        graph.attrs.insert("role".into(), "component".into());
        graph.attrs.insert("modality".into(), m.name().into());
        Ok(ComponentModel { modality: m, graph })
    }

    /// Rebuilds a component model from a deserialized graph.
    pub fn from_graph(graph: ModelGraph) -> Result<Self> {
        let role = graph.attrs.get("role").map(String::as_str);
        if role != Some("component") {
            return Err(CoreError::Data("model file is not a component model".into()));
        }
        let m: Modality = graph
            .attrs
            .get("modality")
            .ok_or_else(|| CoreError::Data("component model lacks a modality attribute".into()))?
            .parse()?;
        if graph.layers() != layers_for(m).as_slice() {
            return Err(CoreError::Data(format!(
                "model layers do not match the {m} architecture"
            )));
        }
        let dim = feature_dim(m);
        for name in [STD_MEAN, STD_SCALE] {
            if graph.buffer(name).map(|b| b.shape().to_vec()) != Some(vec![dim]) {
                return Err(CoreError::Data(format!(
                    "component model lacks a {dim}-dim '{name}' buffer"
                )));
            }
        }
        Ok(ComponentModel { modality: m, graph })
    }

    /// Index of the layer whose output is the exported embedding: the GRU's
    /// last valid step for sequence models, the hidden dense layer otherwise.
    pub fn embedding_layer(&self) -> usize {
        if is_sequence(self.modality) {
            1
        } else {
            0
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.modality.embedding_dim()
    }

    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    fn buffer_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self
            .graph
            .buffers
            .iter_mut()
            .find(|b| b.name == name)
            .expect("component buffers")
            .value
    }

    /// Fits per-dimension z-scoring on the given features.
    pub fn fit_standardizer(&mut self, features: &[FeatureMatrix]) -> Result<()> {
        let dim = feature_dim(self.modality);
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for f in features {
            self.check_features(f)?;
            for r in 0..f.rows {
                for (j, v) in f.row(r).iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
            }
            n += f.rows;
        }
        if n == 0 {
            return Err(CoreError::Data("cannot fit a standardizer on no data".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let inv: Vec<f64> = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n as f64 - m * m).max(0.0);
                if var > 1e-12 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        self.buffer_mut(STD_MEAN).data_mut().copy_from_slice(&mean);
        self.buffer_mut(STD_SCALE).data_mut().copy_from_slice(&inv);
        Ok(())
    }

    fn check_features(&self, f: &FeatureMatrix) -> Result<()> {
        let dim = feature_dim(self.modality);
        if f.dim != dim || (!is_sequence(self.modality) && f.rows != 1) {
            return Err(CoreError::Data(format!(
                "{} model expects {}x{dim} features, got {}x{}",
                self.modality,
                if is_sequence(self.modality) { "T" } else { "1" },
                f.rows,
                f.dim
            )));
        }
        Ok(())
    }

    pub fn standardize(&self, f: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check_features(f)?;
        let mean = self.graph.buffer(STD_MEAN).expect("component buffers").data();
        let inv = self.graph.buffer(STD_SCALE).expect("component buffers").data();
        let mut data = f.data.clone();
        for row in data.chunks_mut(f.dim) {
            for ((v, m), s) in row.iter_mut().zip(mean).zip(inv) {
                *v = (*v - m) * s;
            }
        }
        Ok(FeatureMatrix {
            rows: f.rows,
            dim: f.dim,
            data,
        })
    }

    /// Batches already-standardized features into a network input.
    fn batch_input(&self, feats: &[&FeatureMatrix]) -> Result<(Tensor, Option<Vec<usize>>)> {
        if is_sequence(self.modality) {
            let seqs: Vec<&[f64]> = feats.iter().map(|f| f.data.as_slice()).collect();
            let (x, lengths) = pad_sequences(&seqs, feature_dim(self.modality))?;
            Ok((x, Some(lengths)))
        } else {
            let dim = feature_dim(self.modality);
            let mut data = Vec::with_capacity(feats.len() * dim);
            for f in feats {
                data.extend_from_slice(&f.data);
            }
            Ok((Tensor::new(vec![feats.len(), dim], data)?, None))
        }
    }

    fn infer_standardized(&self, feats: &[&FeatureMatrix]) -> Result<Vec<DirectnessOutput>> {
        let mut out = Vec::with_capacity(feats.len());
        for chunk in feats.chunks(INFER_BATCH) {
            let (x, lengths) = self.batch_input(chunk)?;
            let tape = self.graph.forward_layers(&x, lengths.as_deref())?;
            let emb = tape.layer_output(self.embedding_layer()).expect("embedding layer");
            let scores = tape.output();
            for i in 0..chunk.len() {
                out.push(DirectnessOutput {
                    score: scores.row(i)[0],
                    embedding: emb.row(i).to_vec(),
                });
            }
        }
        Ok(out)
    }

    fn scores_standardized(&self, feats: &[&FeatureMatrix]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(feats.len());
        for chunk in feats.chunks(INFER_BATCH) {
            let (x, lengths) = self.batch_input(chunk)?;
            out.extend_from_slice(self.graph.forward(&x, lengths.as_deref(), Mode::Eval)?.data());
        }
        Ok(out)
    }

    /// Re-applies the layers after the embedding (eval path) to an embedding.
    pub fn head_score(&self, embedding: &[f64]) -> Result<f64> {
        let x = Tensor::new(vec![1, embedding.len()], embedding.to_vec())?;
        Ok(self.graph.forward_range(self.embedding_layer() + 1, &x)?.data()[0])
    }
}

/// Score and embedding for one utterance's raw features.
pub fn infer_component(model: &ComponentModel, features: &FeatureMatrix) -> Result<DirectnessOutput> {
    Ok(infer_component_batch(model, std::slice::from_ref(features))?.remove(0))
}

pub fn infer_component_batch(model: &ComponentModel, features: &[FeatureMatrix]) -> Result<Vec<DirectnessOutput>> {
    let std: Vec<FeatureMatrix> = features.iter().map(|f| model.standardize(f)).collect::<Result<_>>()?;
    let refs: Vec<&FeatureMatrix> = std.iter().collect();
    model.infer_standardized(&refs)
}

/// Features and labels of one split for one modality.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComponentData {
    pub ids: Vec<String>,
    pub features: Vec<FeatureMatrix>,
    pub labels: Vec<Label>,
}

impl ComponentData {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn from_manifest(
        manifest: &Manifest,
        records: &[&ManifestRecord],
        m: Modality,
        loader: &FeatureLoader,
    ) -> Result<Self> {
        Ok(ComponentData {
            ids: records.iter().map(|r| r.utterance_id.clone()).collect(),
            features: loader.load_all(manifest, records, m)?,
            labels: records.iter().map(|r| r.label).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentTrainOptions {
    pub selection: Selection,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Refit the standardizer on the training features before training.
    pub fit_standardizer: bool,
}

impl Default for ComponentTrainOptions {
    fn default() -> Self {
        ComponentTrainOptions {
            selection: Selection::Eer,
            patience: None,
            fit_standardizer: true,
        }
    }
}

/// Trains with weighted BCE and returns the best-validation checkpoint.
pub fn train_component(
    model: &ComponentModel,
    train: &ComponentData,
    val: &ComponentData,
    config: &TrainConfig,
    options: &ComponentTrainOptions,
) -> Result<(ComponentModel, TrainHistory)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(CoreError::Data(
            "component training needs non-empty train and validation sets".into(),
        ));
    }
    for d in [train, val] {
        if d.features.len() != d.len() || d.labels.len() != d.len() {
            return Err(CoreError::Data("feature and label counts differ".into()));
        }
    }
    let mut model = model.clone();
    if options.fit_standardizer {
        model.fit_standardizer(&train.features)?;
    }
    let train_x: Vec<FeatureMatrix> = train
        .features
        .iter()
        .map(|f| model.standardize(f))
        .collect::<Result<_>>()?;
    let val_x: Vec<FeatureMatrix> = val
        .features
        .iter()
        .map(|f| model.standardize(f))
        .collect::<Result<_>>()?;
    let val_refs: Vec<&FeatureMatrix> = val_x.iter().collect();
    let val_labels: Vec<bool> = val.labels.iter().map(|l| l.is_directed()).collect();
    let cfg = TrainConfig {
        class_weights: class_weights(train.labels.iter().copied()),
        ..config.clone()
    };
    let mut adam = Adam::new(&model.graph, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelGraph)> = None;
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        for batch in ddsd_nn::shuffled_batches(train_x.len(), config.batch_size, &mut rng) {
            let feats: Vec<&FeatureMatrix> = batch.iter().map(|i| &train_x[*i]).collect();
            let labels: Vec<f64> = batch.iter().map(|i| train.labels[*i].target()).collect();
            let (x, lengths) = model.batch_input(&feats)?;
            let loss = ddsd_nn::train_step(
                &mut model.graph,
                &mut adam,
                &x,
                lengths.as_deref(),
                &labels,
                &cfg,
                &mut rng,
            )?;
            loss_sum += loss * batch.len() as f64;
        }
        let scores = model.scores_standardized(&val_refs)?;
        let metric = select_metric(options.selection, &ScoredSet::from_parts(&scores, &val_labels))?;
        history.epochs.push(EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / train_x.len() as f64,
            val_metric: metric,
        });
        if best.as_ref().is_none_or(|(b, _)| metric < *b) {
            best = Some((metric, model.graph.clone()));
            history.best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if options.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    model.graph = best.expect("at least one epoch").1;
    Ok((model, history))
}

/// Scores of a trained model on labelled data.
pub fn component_scored_set(model: &ComponentModel, data: &ComponentData) -> Result<ScoredSet> {
    let out = infer_component_batch(model, &data.features)?;
    Ok(ScoredSet::new(
        out.iter()
            .zip(&data.labels)
            .map(|(o, l)| (o.score, l.is_directed()))
            .collect(),
    ))
}

/// Score and embedding records for every utterance in `data`.
pub fn export_directedness(model: &ComponentModel, data: &ComponentData) -> Result<Vec<Record>> {
    let out = infer_component_batch(model, &data.features)?;
    let mut records = Vec::with_capacity(2 * out.len());
    for (id, o) in data.ids.iter().zip(out) {
        records.push(Record::score(id, model.modality, o.score));
        records.push(Record::embedding(id, model.modality, &o.embedding));
    }
    Ok(records)
}

/// Builds fusion samples from exported score/embedding records referenced by
/// each entry's `directedness_paths`. Modalities without a path or with a
/// record flagged absent are left absent.
pub fn ingest_precomputed(
    manifest: &Manifest,
    records: &[&ManifestRecord],
    loader: &FeatureLoader,
) -> Result<Vec<FusionSample>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let mut sample = FusionSample::new(&rec.utterance_id, rec.label);
        for m in Modality::ALL {
            let Some(p) = rec.directedness_path(m) else { continue };
            let path = manifest.resolve(p);
            let id = rec.utterance_id.as_str();
            if let Some(r) = loader.lookup(&path, id, m, RecordKind::Score)? {
                if r.present {
                    if r.data.len() != 1 {
                        return Err(CoreError::utt(
                            id,
                            format!("{m} score record has {} values", r.data.len()),
                        ));
                    }
                    let s = f64::from(r.data[0]);
                    if !s.is_finite() {
                        return Err(CoreError::NonFinite(format!("utterance {id}: {m} score")));
                    }
                    if !(0.0..=1.0).contains(&s) {
                        return Err(CoreError::utt(id, format!("{m} score {s} outside [0, 1]")));
                    }
                    sample.scores.set(m, Some(s));
                }
            }
            if let Some(r) = loader.lookup(&path, id, m, RecordKind::Embedding)? {
                if r.present {
                    if r.data.len() != m.embedding_dim() {
                        return Err(CoreError::utt(
                            id,
                            format!(
                                "{m} embedding has {} values, expected {}",
                                r.data.len(),
                                m.embedding_dim()
                            ),
                        ));
                    }
                    let v = r.values();
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(CoreError::NonFinite(format!("utterance {id}: {m} embedding")));
                    }
                    sample.embeddings.set(m, Some(v));
                }
            }
        }
        out.push(sample);
    }
    Ok(out)
}
