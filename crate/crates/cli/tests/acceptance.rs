//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ddsd_core::{
    component_scored_set, compute_eer, compute_fa_at_fr, corpus_features, decode_records, encode_records, fusion_name,
    generate_synthetic_corpus, run_experiment, train_component, ComponentData, ComponentModel, ComponentTrainOptions,
    EvalReport, ExperimentConfig, ExperimentReport, FusionKind, FusionModel, Label, Modality, ScoredSet, Split,
    SynthConfig, SynthCorpus,
};
use ddsd_dsp::{extract_jitter_shimmer, extract_pitch_voicing, extract_vad, AudioBuffer, FrameGrid};
use ddsd_nn::{
    batch_weighted_bce, decode_model, encode_model, Activation, ClassWeights, LayerSpec, Mode, ModelGraph, Tensor,
    TrainConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

// ---- 1. gradients ----

enum Objective {
    Bce(Vec<f64>),
    Projection(Vec<f64>),
}

impl Objective {
    fn value_and_grad(&self, out: &Tensor) -> (f64, Tensor) {
        let w = ClassWeights {
            positive: 3.0,
            negative: 1.0,
        };
        match self {
            Objective::Bce(labels) => batch_weighted_bce(out, labels, w).unwrap(),
            Objective::Projection(c) => (
                out.data().iter().zip(c).map(|(a, b)| a * b).sum(),
                Tensor::new(out.shape().to_vec(), c.clone()).unwrap(),
            ),
        }
    }
}

/// Worst relative error between backprop and central differences over
/// `coords` parameter coordinates, at least one per parameter tensor.
fn fd_error(
    graph: &mut ModelGraph,
    x: &Tensor,
    lengths: Option<&[usize]>,
    obj: &Objective,
    coords: usize,
    seed: u64,
) -> f64 {
    let tape = graph.forward_record(x, lengths, Mode::Eval).unwrap();
    let (_, dout) = obj.value_and_grad(tape.output());
    let grads = graph.backward(&tape, &dout).unwrap();
    let mut r = rng(seed);
    let mut picks: Vec<(usize, usize)> = graph
        .params()
        .iter()
        .enumerate()
        .map(|(i, p)| (i, r.random_range(0..p.value.len())))
        .collect();
    while picks.len() < coords {
        let i = r.random_range(0..graph.params().len());
        picks.push((i, r.random_range(0..graph.params()[i].value.len())));
    }
    let value = |g: &ModelGraph| obj.value_and_grad(&g.forward(x, lengths, Mode::Eval).unwrap()).0;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (pi, ci) in picks {
        let orig = graph.params()[pi].value.data()[ci];
        graph.params_mut()[pi].value.data_mut()[ci] = orig + h;
        let up = value(graph);
        graph.params_mut()[pi].value.data_mut()[ci] = orig - h;
        let down = value(graph);
        graph.params_mut()[pi].value.data_mut()[ci] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.0[pi].data()[ci];
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
    }
    worst
}

fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

fn perturb(graph: &mut ModelGraph, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for p in graph.params_mut() {
        for v in p.value.data_mut() {
            *v += r.random_range(-scale..scale);
        }
    }
}

fn alternating(n: usize) -> Objective {
    Objective::Bce((0..n).map(|i| (i % 2) as f64).collect())
}

fn gradients() -> Outcome {
    let mut errors = Vec::new();

    let mut dense = ModelGraph::new(
        vec![
            LayerSpec::Dense {
                input: 6,
                output: 5,
                activation: Activation::Tanh,
            },
            LayerSpec::Dense {
                input: 5,
                output: 4,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                input: 4,
                output: 1,
                activation: Activation::Sigmoid,
            },
        ],
        1,
    )
    .unwrap();
    perturb(&mut dense, 2, 0.1);
    let x = random_tensor(&mut rng(3), &[7, 6], -1.0, 1.0);
    errors.push(("dense", fd_error(&mut dense, &x, None, &alternating(7), 120, 4)));

    let mut gru = ModelGraph::new(
        vec![
            LayerSpec::Mask,
            LayerSpec::Gru { input: 5, hidden: 6 },
            LayerSpec::Dense {
                input: 6,
                output: 1,
                activation: Activation::Sigmoid,
            },
        ],
        5,
    )
    .unwrap();
    perturb(&mut gru, 6, 0.2);
    let x = random_tensor(&mut rng(7), &[4, 7, 5], -1.0, 1.0);
    errors.push((
        "gru",
        fd_error(&mut gru, &x, Some(&[7, 3, 1, 5]), &alternating(4), 150, 8),
    ));

    let mut ln = ModelGraph::new(
        vec![
            LayerSpec::Dense {
                input: 4,
                output: 8,
                activation: Activation::Linear,
            },
            LayerSpec::LayerNorm { dim: 8 },
        ],
        9,
    )
    .unwrap();
    perturb(&mut ln, 10, 0.3);
    let x = random_tensor(&mut rng(11), &[5, 4], -2.0, 2.0);
    let mut r = rng(12);
    let projection = Objective::Projection((0..40).map(|_| r.random_range(-1.0..1.0)).collect());
    errors.push(("layer-norm", fd_error(&mut ln, &x, None, &projection, 100, 13)));

    let mut sl = FusionModel::sl(&Modality::ALL, 14).unwrap();
    perturb(&mut sl.graph, 15, 0.05);
    let mut x = random_tensor(&mut rng(16), &[6, 4], 0.05, 0.95);
    x.data_mut()[5] = -1.0;
    errors.push(("SL fusion", fd_error(&mut sl.graph, &x, None, &alternating(6), 200, 17)));

    let mut el = FusionModel::el(&Modality::ALL, 18).unwrap();
    perturb(&mut el.graph, 19, 0.02);
    let width = el.input_width();
    let mut x = random_tensor(&mut rng(20), &[6, width], -1.0, 1.0);
    let asr_start = Modality::Acoustic.embedding_dim() + Modality::Text.embedding_dim();
    for v in &mut x.data_mut()[width + asr_start..width + asr_start + Modality::Asr.embedding_dim()] {
        *v = 0.0;
    }
    errors.push(("EL fusion", fd_error(&mut el.graph, &x, None, &alternating(6), 200, 21)));

    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let parts: Vec<String> = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    outcome(
        worst < 1e-4,
        format!("max relative error {} (< 1e-4)", parts.join(", ")),
    )
}

// ---- 2. metrics ----

fn brute_force_curve(entries: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = entries.iter().map(|e| e.0).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let pos = entries.iter().filter(|e| e.1).count() as f64;
    let neg = entries.len() as f64 - pos;
    thresholds
        .into_iter()
        .map(|t| {
            let fr = entries.iter().filter(|e| e.1 && e.0 < t).count() as f64;
            let fa = entries.iter().filter(|e| !e.1 && e.0 >= t).count() as f64;
            (100.0 * fr / pos, 100.0 * fa / neg)
        })
        .collect()
}

fn brute_force_eer(entries: &[(f64, bool)]) -> f64 {
    let curve = brute_force_curve(entries);
    for w in curve.windows(2) {
        let ((fr_a, fa_a), (fr_b, fa_b)) = (w[0], w[1]);
        let (da, db) = (fa_a - fr_a, fa_b - fr_b);
        if da == 0.0 {
            return fa_a;
        }
        if da > 0.0 && db <= 0.0 {
            return fa_a + (fa_b - fa_a) * da / (da - db);
        }
    }
    unreachable!()
}

fn brute_force_fa(entries: &[(f64, bool)], target: f64) -> f64 {
    let curve = brute_force_curve(entries);
    let j = curve.iter().rposition(|p| p.0 <= target).unwrap();
    let (fr_a, fa_a) = curve[j];
    if fr_a == target || j + 1 == curve.len() {
        return fa_a;
    }
    let (fr_b, fa_b) = curve[j + 1];
    fa_a + (target - fr_a) / (fr_b - fr_a) * (fa_b - fa_a)
}

fn metrics() -> Outcome {
    let mut r = rng(100);
    let mut mismatches = 0;
    for k in 0..1000 {
        let n = r.random_range(2..=50);
        let levels = if k % 2 == 0 { 5 } else { 1000 };
        let mut e: Vec<(f64, bool)> = (0..n)
            .map(|_| (f64::from(r.random_range(0..levels)) / f64::from(levels), r.random()))
            .collect();
        e[0].1 = true;
        e[1].1 = false;
        let set = ScoredSet::new(e.clone());
        let eer = compute_eer(&set).unwrap();
        let fa = compute_fa_at_fr(&set, 10.0).unwrap().0;
        if eer != brute_force_eer(&e) || fa != brute_force_fa(&e, 10.0) {
            mismatches += 1;
        }
    }
    let random: Vec<(f64, bool)> = (0..10_000).map(|i| (r.random::<f64>(), i % 2 == 0)).collect();
    let set = ScoredSet::new(random);
    let eer = compute_eer(&set).unwrap();
    let fa = compute_fa_at_fr(&set, 10.0).unwrap().0;
    outcome(
        mismatches == 0 && (eer - 50.0).abs() <= 3.0 && (fa - 90.0).abs() <= 3.0,
        format!("{mismatches}/1000 oracle mismatches; random classifier EER {eer:.2}, FA@10%FR {fa:.2}"),
    )
}

// ---- 3. DSP ----

const SR: u32 = 16000;

fn audio(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, SR).unwrap()
}

fn sine(hz: f64, secs: f64) -> Vec<f64> {
    (0..(secs * SR as f64) as usize)
        .map(|i| 0.5 * (2.0 * PI * hz * i as f64 / SR as f64).sin())
        .collect()
}

fn sawtooth(hz: f64, secs: f64) -> Vec<f64> {
    (0..(secs * SR as f64) as usize)
        .map(|i| 0.5 * (2.0 * (hz * i as f64 / SR as f64).fract() - 1.0))
        .collect()
}

/// Gaussian pulses (0.3 ms wide) with periods cycling through `periods`.
fn pulses(periods: &[f64], amps: &[f64], secs: f64) -> Vec<f64> {
    let n = (secs * SR as f64) as usize;
    let sigma = 0.0003 * SR as f64;
    let mut out = vec![0.0; n];
    let (mut t, mut k) = (0.002, 0);
    while t < secs - 0.002 {
        let c = t * SR as f64;
        let lo = (c - 6.0 * sigma).max(0.0) as usize;
        let hi = ((c + 6.0 * sigma) as usize).min(n - 1);
        for (i, v) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *v += amps[k % amps.len()] * (-0.5 * ((i as f64 - c) / sigma).powi(2)).exp();
        }
        t += periods[k % periods.len()];
        k += 1;
    }
    out
}

/// Mean absolute successive difference over the mean.
fn relative_perturbation(cycle: &[f64]) -> f64 {
    let v: Vec<f64> = cycle.iter().cycle().take(12).copied().collect();
    let diffs = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (v.len() - 1) as f64;
    diffs / (v.iter().sum::<f64>() / v.len() as f64)
}

fn voiced_perturbations(samples: Vec<f64>) -> Vec<(f64, f64)> {
    let a = audio(samples);
    let pitch = extract_pitch_voicing(&a).unwrap();
    let js = extract_jitter_shimmer(&a, &pitch).unwrap();
    pitch
        .iter()
        .zip(js)
        .filter(|(f, _)| f.is_voiced())
        .map(|(_, p)| (p.jitter, p.shimmer))
        .collect()
}

fn dsp() -> Outcome {
    let t0 = Instant::now();
    let mut worst_pitch: f64 = 0.0;
    for hz in (80..=400).step_by(10).map(f64::from) {
        for x in [sine(hz, 0.6), sawtooth(hz, 0.6)] {
            let track = extract_pitch_voicing(&audio(x)).unwrap();
            let voiced: Vec<f64> = track.iter().filter(|f| f.is_voiced()).map(|f| f.pitch_hz).collect();
            let err = if voiced.is_empty() {
                1.0
            } else {
                (median(voiced) - hz).abs() / hz
            };
            worst_pitch = worst_pitch.max(err);
        }
    }

    let clean = voiced_perturbations(pulses(&[1.0 / 150.0], &[0.5], 1.0));
    let clean_max = clean.iter().map(|p| p.0.max(p.1)).fold(0.0, f64::max);
    let jitter_expected = relative_perturbation(&[0.0066, 0.0067]);
    let jittered = voiced_perturbations(pulses(&[0.0066, 0.0067], &[0.5], 1.0));
    let jitter_err = jittered
        .iter()
        .map(|p| (p.0 - jitter_expected).abs() / jitter_expected)
        .fold(0.0, f64::max);
    let shimmer_expected = relative_perturbation(&[0.55, 0.45]);
    let shimmered = voiced_perturbations(pulses(&[1.0 / 150.0], &[0.55, 0.45], 1.0));
    let shimmer_err = shimmered
        .iter()
        .map(|p| (p.1 - shimmer_expected).abs() / shimmer_expected)
        .fold(0.0, f64::max);
    let enough = clean.len() > 80 && jittered.len() > 80 && shimmered.len() > 80;

    let mut x = Vec::new();
    for k in 0..6 {
        x.extend(if k % 2 == 0 {
            sine(200.0, 0.5).iter().map(|v| v * 0.6).collect()
        } else {
            vec![0.0; 8000]
        });
    }
    let n = x.len();
    let vad = extract_vad(&audio(x)).unwrap();
    let grid = FrameGrid::new(n, SR).unwrap();
    let (mut correct, mut total) = (0, 0);
    for (t, v) in vad.iter().enumerate() {
        let center = grid.center(t) / SR as f64;
        if (center - (center / 0.5).round() * 0.5).abs() <= 0.030 {
            continue;
        }
        total += 1;
        if (*v >= 0.5) == ((center / 0.5).floor() as usize).is_multiple_of(2) {
            correct += 1;
        }
    }
    let vad_acc = 100.0 * correct as f64 / total as f64;
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst_pitch < 0.02 && enough && clean_max < 0.005 && jitter_err < 0.2 && shimmer_err < 0.2 && vad_acc > 95.0 && secs < 120.0,
        format!(
            "pitch worst {:.2}%; clean jitter/shimmer max {clean_max:.4}; perturbed rel. error jitter {:.1}%, shimmer {:.1}%; VAD accuracy {vad_acc:.1}%; {secs:.1} s",
            100.0 * worst_pitch,
            100.0 * jitter_err,
            100.0 * shimmer_err
        ),
    )
}

// ---- 4. prosody model ----

fn component_data(
    corpus: &SynthCorpus,
    feats: &[ddsd_core::FeatureMatrix],
    labels: &[Label],
    splits: &[Split],
) -> ComponentData {
    let idx: Vec<usize> = splits.iter().flat_map(|s| corpus.indices(*s)).collect();
    ComponentData {
        ids: idx
            .iter()
            .map(|i| corpus.utterances[*i].record.utterance_id.clone())
            .collect(),
        features: idx.iter().map(|i| feats[*i].clone()).collect(),
        labels: idx.iter().map(|i| labels[*i]).collect(),
    }
}

fn prosody_model() -> Outcome {
    let t0 = Instant::now();
    let params = ComponentModel::build(Modality::Prosody, 0).unwrap().param_count();
    let mut synth = SynthConfig {
        scale: 0.05,
        imbalance: 1.0,
        ..SynthConfig::default()
    };
    synth.separability[Modality::Prosody.index()] = 6.0;
    synth.seed = 40;
    let corpus = generate_synthetic_corpus(&synth).unwrap();
    let feats = corpus_features(&corpus, Modality::Prosody).unwrap();
    let config = TrainConfig {
        epochs: 50,
        seed: 41,
        ..TrainConfig::default()
    };
    let options = ComponentTrainOptions {
        patience: Some(10),
        ..ComponentTrainOptions::default()
    };
    let fresh = ComponentModel::build(Modality::Prosody, 42).unwrap();

    let labels: Vec<Label> = corpus.utterances.iter().map(|u| u.record.label).collect();
    let train = component_data(&corpus, &feats, &labels, &[Split::TrainComp]);
    let val = component_data(&corpus, &feats, &labels, &[Split::ValComp]);
    let (_, history) = train_component(&fresh, &train, &val, &config, &options).unwrap();
    let separable = history.best_metric().unwrap();

    let mut shuffled = labels;
    shuffled.shuffle(&mut rng(43));
    let train = component_data(&corpus, &feats, &shuffled, &[Split::TrainComp]);
    let val = component_data(&corpus, &feats, &shuffled, &[Split::ValComp]);
    let held_out = component_data(
        &corpus,
        &feats,
        &shuffled,
        &[Split::TrainFus, Split::ValFus, Split::Test],
    );
    let (model, _) = train_component(&fresh, &train, &val, &config, &options).unwrap();
    let null = compute_eer(&component_scored_set(&model, &held_out).unwrap()).unwrap();

    let secs = t0.elapsed().as_secs_f64();
    outcome(
        (45_000..=56_000).contains(&params) && separable < 5.0 && (null - 50.0).abs() <= 5.0 && secs < 600.0,
        format!(
            "{params} parameters; separable val EER {separable:.2} (epoch {}); label-shuffled held-out EER {null:.2} (n = {}); {secs:.0} s",
            history.best_epoch,
            held_out.len()
        ),
    )
}

// ---- 5-7. fusion orderings ----

struct Medians {
    clean: BTreeMap<String, f64>,
    corrupted: BTreeMap<String, f64>,
    best_single: f64,
    per_seed: Vec<String>,
}

fn experiments() -> Medians {
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(SEEDS.len());
    let mut reports: Vec<ExperimentReport> = Vec::new();
    for chunk in SEEDS.chunks(threads) {
        let batch: Vec<ExperimentReport> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| s.spawn(move || run_experiment(&ExperimentConfig::default().with_seed(seed)).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        reports.extend(batch);
    }
    let collect = |pick: &dyn Fn(&ExperimentReport) -> &[EvalReport]| {
        let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &reports {
            for e in pick(r) {
                by_name.entry(e.name.clone()).or_default().push(e.fa_at_fr10);
            }
        }
        by_name
            .into_iter()
            .map(|(k, v)| (k, median(v)))
            .collect::<BTreeMap<_, _>>()
    };
    let singles = collect(&|r| &r.single);
    Medians {
        clean: collect(&|r| &r.fusion_clean),
        corrupted: collect(&|r| &r.fusion_corrupted),
        best_single: singles.values().copied().fold(f64::INFINITY, f64::min),
        per_seed: reports
            .iter()
            .map(|r| {
                let row: Vec<String> = r
                    .fusion_clean
                    .iter()
                    .map(|e| format!("{} {:.2}", e.name, e.fa_at_fr10))
                    .collect();
                format!("seed {}: {}", r.seed, row.join(", "))
            })
            .collect(),
    }
}

fn fusion_ordering(m: &Medians) -> Outcome {
    let v = Modality::VERBAL;
    let (avg, sl, el) = (
        m.clean[&fusion_name(FusionKind::Avg, &v, false)],
        m.clean[&fusion_name(FusionKind::Sl, &v, false)],
        m.clean[&fusion_name(FusionKind::El, &v, false)],
    );
    outcome(
        el < sl && sl <= avg && el < m.best_single,
        format!(
            "median FA@10%FR EL {el:.2} < SL {sl:.2} <= AVG {avg:.2}; best single modality {:.2}",
            m.best_single
        ),
    )
}

fn prosody_benefit(m: &Medians) -> Outcome {
    let el4 = m.clean[&fusion_name(FusionKind::El, &Modality::ALL, false)];
    let el3 = m.clean[&fusion_name(FusionKind::El, &Modality::VERBAL, false)];
    outcome(
        el4 < el3,
        format!("median FA@10%FR EL(a,t,asr,p) {el4:.2} < EL(a,t,asr) {el3:.2}"),
    )
}

fn dropout_robustness(m: &Medians) -> Outcome {
    let md = fusion_name(FusionKind::El, &Modality::ALL, true);
    let el4 = fusion_name(FusionKind::El, &Modality::ALL, false);
    let el3 = fusion_name(FusionKind::El, &Modality::VERBAL, false);
    let (c_md, c_el4, c_el3) = (m.corrupted[&md], m.corrupted[&el4], m.corrupted[&el3]);
    let (md_clean, el_clean) = (m.clean[&md], m.clean[&el4]);
    outcome(
        c_md < c_el4 && c_el4 < c_el3 && md_clean <= el_clean + 1.0,
        format!(
            "30% missing: EL+MD {c_md:.2} < EL4 {c_el4:.2} < EL3 {c_el3:.2}; clean EL+MD {md_clean:.2} <= EL4 {el_clean:.2} + 1"
        ),
    )
}

// ---- 8. determinism ----

fn ddsd(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_ddsd"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "ddsd {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn pipeline(dir: &Path) -> String {
    let mut printed = String::new();
    ddsd(dir, &["synth", "--out", "corpus", "--scale", "0.004", "--seed", "8"]);
    ddsd(dir, &["extract", "--manifest", "corpus/manifest.jsonl", "--out", "run"]);
    for m in Modality::ALL {
        let model = format!("models/{}.ddm", m.name());
        printed += &ddsd(
            dir,
            &[
                "train-component",
                "--manifest",
                "run/manifest.jsonl",
                "--modality",
                m.name(),
                "--epochs",
                "2",
                "--seed",
                "8",
                "--out",
                &model,
            ],
        );
        ddsd(
            dir,
            &[
                "export",
                "--model",
                &model,
                "--manifest",
                "run/manifest.jsonl",
                "--out",
                "run",
            ],
        );
        printed += &ddsd(dir, &["eval", "--model", &model, "--manifest", "run/manifest.jsonl"]);
    }
    for (kind, md) in [("avg", false), ("sl", false), ("el", false), ("el", true)] {
        let model = format!("models/{kind}{}.ddm", if md { "-md" } else { "" });
        let mut args = vec![
            "train-fusion",
            "--manifest",
            "run/manifest.jsonl",
            "--kind",
            kind,
            "--epochs",
            "3",
            "--seed",
            "8",
            "--out",
            &model,
        ];
        if md {
            args.push("--md");
        }
        printed += &ddsd(dir, &args);
    }
    printed += &ddsd(
        dir,
        &[
            "corrupt",
            "--manifest",
            "run/manifest.jsonl",
            "--out",
            "corrupt",
            "--seed",
            "8",
        ],
    );
    for model in ["avg", "sl", "el", "el-md"] {
        let path = format!("models/{model}.ddm");
        printed += &ddsd(
            dir,
            &[
                "eval",
                "--model",
                &path,
                "--manifest",
                "run/manifest.jsonl",
                "--out",
                &format!("eval/{model}"),
            ],
        );
        printed += &ddsd(dir, &["eval", "--model", &path, "--manifest", "corrupt/manifest.jsonl"]);
    }
    printed
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (out_a, out_b) = (pipeline(a.path()), pipeline(b.path()));
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    let mut round_trip_failures = Vec::new();
    for f in &fa {
        let bytes = std::fs::read(a.path().join(f)).unwrap();
        let again = match f.extension().and_then(|e| e.to_str()) {
            Some("ddm") => encode_model(&decode_model(&bytes).unwrap()),
            Some("ddrc") => encode_records(&decode_records(&bytes).unwrap()).unwrap(),
            _ => continue,
        };
        if again != bytes {
            round_trip_failures.push(f.display().to_string());
        }
    }
    let checked = fa
        .iter()
        .filter(|f| matches!(f.extension().and_then(|e| e.to_str()), Some("ddm" | "ddrc")))
        .count();
    outcome(
        out_a == out_b && fa == fb && differing.is_empty() && round_trip_failures.is_empty(),
        format!(
            "{} files compared, differing: [{}]; {checked} model/record files round-tripped, mismatched: [{}]; printed metrics identical: {}",
            fa.len(),
            differing.join(", "),
            round_trip_failures.join(", "),
            out_a == out_b
        ),
    )
}

fn report(n: usize, title: &str, started: Instant, o: &Outcome) -> bool {
    println!(
        "{} [{n}] {title}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.pass
}

/// Criteria to run: numbers given on the command line, or all of them.
fn selected() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=8).collect()
    } else {
        picked
    }
}

type Criterion = (&'static str, fn() -> Outcome);
type FusionCriterion = (&'static str, fn(&Medians) -> Outcome);

fn main() {
    let want = selected();
    let mut all = true;
    let simple: [Criterion; 4] = [
        ("gradient correctness", gradients),
        ("metric oracle", metrics),
        ("DSP oracles", dsp),
        ("prosody model budget and learnability", prosody_model),
    ];
    for (i, (title, f)) in simple.iter().enumerate() {
        if want.contains(&(i + 1)) {
            let t = Instant::now();
            all &= report(i + 1, title, t, &f());
        }
    }
    if want.iter().any(|n| (5..=7).contains(n)) {
        let t = Instant::now();
        let m = experiments();
        for line in &m.per_seed {
            println!("       {line}");
        }
        let fusion: [FusionCriterion; 3] = [
            ("fusion ordering", fusion_ordering),
            ("prosody benefit", prosody_benefit),
            ("modality dropout robustness", dropout_robustness),
        ];
        for (i, (title, f)) in fusion.iter().enumerate() {
            if want.contains(&(i + 5)) {
                all &= report(i + 5, title, t, &f(&m));
            }
        }
    }
    if want.contains(&8) {
        let t = Instant::now();
        all &= report(8, "determinism", t, &determinism());
    }
    if !all {
        std::process::exit(1);
    }
}
