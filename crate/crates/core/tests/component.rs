use ddsd_core::{
    build_prosody_model, build_standin, export_directedness, feature_dim, feature_record, features_from_record,
    infer_component, infer_component_batch, ingest_precomputed, text_features, train_component, write_records,
    ComponentData, ComponentModel, ComponentTrainOptions, FeatureLoader, FeatureMatrix, Label, Manifest,
    ManifestRecord, Modality, Record, RecordKind, Split, TEXT_HASH_DIM,
};
use ddsd_nn::{decode_model, encode_model, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_features(m: Modality, rows: usize, rng: &mut ChaCha8Rng) -> FeatureMatrix {
    let dim = feature_dim(m);
    let rows = if matches!(m, Modality::Acoustic | Modality::Prosody) {
        rows
    } else {
        1
    };
    FeatureMatrix::new(
        rows,
        dim,
        (0..rows * dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

fn zero_head(model: &mut ComponentModel) {
    let last = model.graph.layers().len() - 1;
    for p in model.graph.params_mut() {
        if p.name.starts_with(&format!("layer{last}.")) {
            p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[test]
fn prosody_parameter_budget() {
    let model = build_prosody_model(0).unwrap();
    let gru = 3 * (128 * 5 + 128 * 128 + 2 * 128);
    let expected = gru + 2 * 128 + 129;
    assert_eq!(model.param_count(), expected);
    assert!((45_000..=56_000).contains(&model.param_count()));
}

#[test]
fn embedding_dimensions_per_modality() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (m, dim) in [
        (Modality::Acoustic, 256),
        (Modality::Text, 128),
        (Modality::Asr, 16),
        (Modality::Prosody, 128),
    ] {
        let model = ComponentModel::build(m, 2).unwrap();
        assert_eq!(model.embedding_dim(), dim);
        let out = infer_component(&model, &random_features(m, 12, &mut rng)).unwrap();
        assert_eq!(out.embedding.len(), dim);
        assert!(out.score > 0.0 && out.score < 1.0);
    }
    assert!(build_standin(Modality::Prosody, 0).is_err());
    assert!(build_standin(Modality::Text, 0).is_ok());
}

#[test]
fn zero_heads_score_one_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in Modality::ALL {
        let mut model = ComponentModel::build(m, 3).unwrap();
        zero_head(&mut model);
        for _ in 0..3 {
            assert_eq!(
                infer_component(&model, &random_features(m, 9, &mut rng)).unwrap().score,
                0.5
            );
        }
    }
}

#[test]
fn head_on_embedding_reproduces_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in Modality::ALL {
        let model = ComponentModel::build(m, 4).unwrap();
        for _ in 0..5 {
            let out = infer_component(&model, &random_features(m, 15, &mut rng)).unwrap();
            assert!((model.head_score(&out.embedding).unwrap() - out.score).abs() < 1e-10);
        }
    }
}

#[test]
fn padded_batches_match_single_inference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in [Modality::Prosody, Modality::Acoustic] {
        let model = ComponentModel::build(m, 5).unwrap();
        let feats: Vec<FeatureMatrix> = [3, 17, 8, 30, 1]
            .iter()
            .map(|t| random_features(m, *t, &mut rng))
            .collect();
        let batch = infer_component_batch(&model, &feats).unwrap();
        for (f, b) in feats.iter().zip(&batch) {
            let single = infer_component(&model, f).unwrap();
            assert!((single.score - b.score).abs() < 1e-10);
            for (x, y) in single.embedding.iter().zip(&b.embedding) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn identical_inputs_identical_outputs_and_dimension_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = build_prosody_model(1).unwrap();
    let f = random_features(Modality::Prosody, 20, &mut rng);
    assert_eq!(
        infer_component(&model, &f).unwrap(),
        infer_component(&model, &f.clone()).unwrap()
    );
    let wrong = FeatureMatrix::new(20, 6, vec![0.0; 120]).unwrap();
    assert!(infer_component(&model, &wrong).is_err());
    let text = build_standin(Modality::Text, 0).unwrap();
    assert!(infer_component(
        &text,
        &FeatureMatrix::new(2, TEXT_HASH_DIM, vec![0.0; 2 * TEXT_HASH_DIM]).unwrap()
    )
    .is_err());
}

#[test]
fn serialized_component_reproduces_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut model = build_prosody_model(7).unwrap();
    let feats: Vec<FeatureMatrix> = (0..4)
        .map(|_| random_features(Modality::Prosody, 10, &mut rng))
        .collect();
    model.fit_standardizer(&feats).unwrap();
    let back = ComponentModel::from_graph(decode_model(&encode_model(&model.graph)).unwrap()).unwrap();
    assert_eq!(back, model);
    assert_eq!(
        infer_component_batch(&model, &feats).unwrap(),
        infer_component_batch(&back, &feats).unwrap()
    );
    let mut other = model.graph.clone();
    other.attrs.insert("modality".into(), "acoustic".into());
    assert!(ComponentModel::from_graph(other).is_err());
}

#[test]
fn standardizer_centers_training_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut model = build_standin(Modality::Asr, 0).unwrap();
    let feats: Vec<FeatureMatrix> = (0..500)
        .map(|_| {
            FeatureMatrix::vector(
                (0..8)
                    .map(|j| 3.0 * f64::from(j) + rng.random_range(0.0..f64::from(j + 1)))
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    model.fit_standardizer(&feats).unwrap();
    let z: Vec<FeatureMatrix> = feats.iter().map(|f| model.standardize(f).unwrap()).collect();
    for j in 0..8 {
        let col: Vec<f64> = z.iter().map(|f| f.data[j]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);
    }
}

fn asr_data(n: usize, shift: f64, seed: u64) -> ComponentData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = ComponentData::default();
    for i in 0..n {
        let directed = i % 5 == 0;
        let mu = if directed { shift } else { 0.0 };
        d.ids.push(format!("u{i}"));
        d.labels.push(Label::from_bool(directed));
        d.features.push(
            FeatureMatrix::vector(
                (0..8)
                    .map(|j| {
                        if j < 3 {
                            mu + rng.random_range(-1.0..1.0)
                        } else {
                            rng.random_range(-1.0..1.0)
                        }
                    })
                    .collect(),
            )
            .unwrap(),
        );
    }
    d
}

#[test]
fn training_learns_and_is_deterministic() {
    let (train, val) = (asr_data(600, 1.5, 1), asr_data(300, 1.5, 2));
    let model = build_standin(Modality::Asr, 3).unwrap();
    let config = TrainConfig {
        epochs: 20,
        batch_size: 50,
        learning_rate: 0.01,
        seed: 9,
        ..TrainConfig::default()
    };
    let opts = ComponentTrainOptions::default();
    let (a, ha) = train_component(&model, &train, &val, &config, &opts).unwrap();
    let (b, hb) = train_component(&model, &train, &val, &config, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert!(ha.best_metric().unwrap() < 10.0, "{:?}", ha.epochs);
    assert_eq!(ha.epochs.len(), 20);
    let early = ComponentTrainOptions {
        patience: Some(1),
        ..ComponentTrainOptions::default()
    };
    let (_, hc) = train_component(&model, &train, &val, &config, &early).unwrap();
    assert!(hc.epochs.len() <= 20);
    assert!(train_component(&model, &ComponentData::default(), &val, &config, &opts).is_err());
}

#[test]
fn text_features_hash_character_trigrams() {
    let f = text_features("Set a timer");
    assert_eq!(f.dim, TEXT_HASH_DIM);
    // " set a timer " has 13 characters and 11 trigrams.
    assert_eq!(f.data.iter().sum::<f64>(), 11.0);
    assert_eq!(f, text_features("  set a TIMER "));
    assert_ne!(f, text_features("set a timet"));
}

#[test]
fn feature_records_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let f = random_features(Modality::Prosody, 7, &mut rng);
    let rec = feature_record("u", Modality::Prosody, &f).unwrap();
    assert_eq!(rec.shape, vec![7, 5]);
    let back = features_from_record(&rec, Modality::Prosody).unwrap();
    for (a, b) in back.data.iter().zip(&f.data) {
        assert_eq!(*a, f64::from(*b as f32));
    }
    assert!(features_from_record(&rec, Modality::Acoustic).is_err());
}

fn manifest_entry(id: &str, dir_path: Option<&str>) -> ManifestRecord {
    let mut r = ManifestRecord {
        utterance_id: id.into(),
        label: Label::Directed,
        split: Split::Test,
        speaker_id: None,
        audio_path: None,
        transcript: None,
        feature_paths: Default::default(),
        directedness_paths: Default::default(),
    };
    if let Some(p) = dir_path {
        r.directedness_paths.insert("asr".into(), p.into());
    }
    r
}

#[test]
fn ingest_sets_presence_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_standin(Modality::Asr, 0).unwrap();
    let data = asr_data(3, 1.0, 4);
    let mut records = export_directedness(&model, &data).unwrap();
    records.retain(|r| r.utterance_id != "u1" || r.kind != RecordKind::Embedding);
    records.push(Record::absent("u1", Modality::Asr, RecordKind::Embedding));
    write_records(dir.path().join("asr.ddrc"), &records).unwrap();
    let mut manifest = Manifest::new(vec![
        manifest_entry("u0", Some("asr.ddrc")),
        manifest_entry("u1", Some("asr.ddrc")),
        manifest_entry("u2", None),
    ])
    .unwrap();
    manifest.base_dir = dir.path().to_path_buf();
    let refs: Vec<&ManifestRecord> = manifest.records.iter().collect();
    let samples = ingest_precomputed(&manifest, &refs, &FeatureLoader::new()).unwrap();
    assert!(samples[0].scores.get(Modality::Asr).is_some());
    assert_eq!(samples[0].embeddings.get(Modality::Asr).unwrap().len(), 16);
    assert!(samples[1].scores.get(Modality::Asr).is_some());
    assert!(samples[1].embeddings.get(Modality::Asr).is_none());
    assert!(!samples[2].is_present(Modality::Asr));
    for s in &samples {
        for m in [Modality::Acoustic, Modality::Text, Modality::Prosody] {
            assert!(!s.is_present(m));
        }
    }

    write_records(
        dir.path().join("bad.ddrc"),
        &[Record::embedding("u0", Modality::Asr, &[0.0; 15])],
    )
    .unwrap();
    let mut bad = Manifest::new(vec![manifest_entry("u0", Some("bad.ddrc"))]).unwrap();
    bad.base_dir = dir.path().to_path_buf();
    let refs: Vec<&ManifestRecord> = bad.records.iter().collect();
    let err = ingest_precomputed(&bad, &refs, &FeatureLoader::new())
        .unwrap_err()
        .to_string();
    assert!(err.contains("u0") && err.contains("15"), "{err}");
}
