use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ddsd_core::{
    component_scored_set, corrupt_manifest, export_directedness, extract_manifest, fusion_scored_set,
    generate_synthetic_corpus, ingest_precomputed, train_component, train_fusion, write_corpus, write_records,
    ComponentData, ComponentModel, ComponentTrainOptions, DropoutMode, EvalReport, FeatureLoader, FusionKind,
    FusionModel, FusionSample, FusionTrainOptions, Manifest, ManifestRecord, Modality, ModalityDropoutConfig,
    Selection, Split, SynthConfig, TrainHistory,
};
use ddsd_nn::{load_model, save_model, ModelGraph, TrainConfig};
use serde::Serialize;

use crate::args::{
    parse_modalities, Command, Common, CorruptArgs, EvalArgs, ExportArgs, ExtractArgs, SynthArgs, TrainArgs,
    TrainComponentArgs, TrainFusionArgs,
};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Config echo plus result lines; the echo part is itself a valid config file.
struct RunLog {
    text: String,
}

impl RunLog {
    fn new(command: &str, args: &impl Serialize) -> Self {
        let mut text = format!("# ddsd {command} {}\n", env!("CARGO_PKG_VERSION"));
        if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
            for (k, v) in map {
                match v {
                    serde_json::Value::Null => {}
                    serde_json::Value::String(s) => {
                        let _ = writeln!(text, "{k} = {s}");
                    }
                    other => {
                        let _ = writeln!(text, "{k} = {other}");
                    }
                }
            }
        }
        RunLog { text }
    }

    fn note(&mut self, line: impl AsRef<str>) {
        for l in line.as_ref().lines() {
            let _ = writeln!(self.text, "# {l}");
        }
    }

    fn write(&self, common: &Common, default: PathBuf) -> Result<()> {
        let path = common.log.clone().unwrap_or(default);
        create_parent(&path)?;
        std::fs::write(&path, &self.text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) => create_dir(dir),
        None => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("manifest {} does not exist", path.display())));
    }
    Ok(Manifest::read(path)?)
}

fn read_model(path: &Path) -> Result<ModelGraph> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("model {} does not exist", path.display())));
    }
    Ok(load_model(path)?)
}

fn write_model(graph: &ModelGraph, path: &Path) -> Result<()> {
    create_parent(path)?;
    Ok(save_model(graph, path)?)
}

fn selection(name: &str) -> Selection {
    if name == "fa" {
        Selection::FaAtFr10
    } else {
        Selection::Eer
    }
}

fn train_config(t: &TrainArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: t.epochs,
        learning_rate: t.learning_rate,
        batch_size: t.batch_size,
        grad_clip_norm: t.grad_clip,
        seed,
        ..TrainConfig::default()
    }
}

fn split_records(manifest: &Manifest, split: Split) -> Result<Vec<&ManifestRecord>> {
    let recs = manifest.split(split);
    if recs.is_empty() {
        return Err(CliError::Data(format!("manifest has no {split} records")));
    }
    Ok(recs)
}

fn history_note(log: &mut RunLog, history: &TrainHistory) {
    log.note(format!("best epoch {}", history.best_epoch));
    log.note(history.to_text());
}

/// AVG needs at least one present score among its modalities.
fn evaluable(model: &FusionModel, samples: Vec<FusionSample>) -> (Vec<FusionSample>, usize) {
    if model.kind != FusionKind::Avg {
        return (samples, 0);
    }
    let n = samples.len();
    let kept: Vec<FusionSample> = samples
        .into_iter()
        .filter(|s| model.modalities.iter().any(|m| s.scores.get(*m).is_some()))
        .collect();
    let skipped = n - kept.len();
    (kept, skipped)
}

pub fn run(command: &Command) -> Result<String> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::TrainComponent(a) => train_component_cmd(a),
        Command::Export(a) => export(a),
        Command::TrainFusion(a) => train_fusion_cmd(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Eval(a) => eval(a),
    }
}

fn synth(a: &SynthArgs) -> Result<String> {
    let config = SynthConfig {
        scale: a.scale,
        separability: [a.d_acoustic, a.d_text, a.d_asr, a.d_prosody],
        rho: a.rho,
        recognition: a.recognition,
        imbalance: a.imbalance,
        utterances_per_speaker: a.utterances_per_speaker,
        audio: a.audio,
        seed: a.common.seed,
    };
    config.validate()?;
    let mut log = RunLog::new("synth", a);
    create_dir(&a.out)?;
    let corpus = generate_synthetic_corpus(&config)?;
    let manifest = write_corpus(&corpus, &a.out)?;
    let mut out = format!("wrote {} utterances to {}\n", manifest.len(), a.out.display());
    for split in Split::ALL {
        let recs = manifest.split(split);
        let directed = recs.iter().filter(|r| r.label.is_directed()).count();
        let _ = writeln!(out, "{split}\t{directed}\t{}", recs.len() - directed);
    }
    log.note(&out);
    log.write(&a.common, a.out.join("synth.log"))?;
    Ok(out)
}

fn extract(a: &ExtractArgs) -> Result<String> {
    let modalities = parse_modalities(&a.modalities);
    let mut log = RunLog::new("extract", a);
    let manifest = read_manifest(&a.manifest)?;
    create_dir(&a.out)?;
    let updated = extract_manifest(&manifest, &modalities, &a.out)?.rebase(&a.out);
    updated.write(a.out.join("manifest.jsonl"))?;
    let with_audio = manifest.records.iter().filter(|r| r.audio_path.is_some()).count();
    let out = format!(
        "extracted {} for {with_audio} utterances into {}\n",
        a.modalities,
        a.out.display()
    );
    log.note(&out);
    log.write(&a.common, a.out.join("extract.log"))?;
    Ok(out)
}

fn train_component_cmd(a: &TrainComponentArgs) -> Result<String> {
    let modality: Modality = a.modality.parse()?;
    let config = train_config(&a.train, a.common.seed);
    config.validate()?;
    let mut log = RunLog::new("train-component", a);
    let manifest = read_manifest(&a.manifest)?;
    let loader = FeatureLoader::new();
    let train = ComponentData::from_manifest(
        &manifest,
        &split_records(&manifest, Split::TrainComp)?,
        modality,
        &loader,
    )?;
    let val = ComponentData::from_manifest(&manifest, &split_records(&manifest, Split::ValComp)?, modality, &loader)?;
    let model = ComponentModel::build(modality, a.common.seed)?;
    let options = ComponentTrainOptions {
        selection: selection(&a.train.selection),
        patience: a.train.patience,
        fit_standardizer: true,
    };
    let (model, history) = train_component(&model, &train, &val, &config, &options)?;
    write_model(&model.graph, &a.out)?;
    let report = EvalReport::evaluate(Split::ValComp.name(), &component_scored_set(&model, &val)?)?;
    let out = format!(
        "{modality} model: {} parameters, best epoch {}, val-comp {}\n",
        model.param_count(),
        history.best_epoch,
        report.summary_line()
    );
    log.note(&out);
    history_note(&mut log, &history);
    log.write(&a.common, with_suffix(&a.out, ".log"))?;
    Ok(out)
}

fn export(a: &ExportArgs) -> Result<String> {
    let mut log = RunLog::new("export", a);
    let model = ComponentModel::from_graph(read_model(&a.model)?)?;
    let manifest = read_manifest(&a.manifest)?;
    let recs: Vec<&ManifestRecord> = manifest.records.iter().collect();
    let data = ComponentData::from_manifest(&manifest, &recs, model.modality, &FeatureLoader::new())?;
    let records = export_directedness(&model, &data)?;
    create_dir(&a.out)?;
    let file = format!("{}.directedness.ddrc", model.modality.name());
    write_records(a.out.join(&file), &records)?;
    let mut updated = manifest.rebase(&a.out);
    for r in &mut updated.records {
        r.directedness_paths
            .insert(model.modality.name().to_string(), file.clone());
    }
    updated.write(a.out.join("manifest.jsonl"))?;
    let out = format!(
        "exported {} scores and embeddings for {} utterances\n",
        model.modality,
        data.len()
    );
    log.note(&out);
    log.write(&a.common, a.out.join(format!("export-{}.log", model.modality.name())))?;
    Ok(out)
}

fn train_fusion_cmd(a: &TrainFusionArgs) -> Result<String> {
    let kind = FusionKind::parse(&a.kind)?;
    let modalities = parse_modalities(&a.modalities);
    let config = train_config(&a.train, a.common.seed);
    config.validate()?;
    let md = a.md.then(|| ModalityDropoutConfig {
        mode: if a.md_mode == "zero" {
            DropoutMode::Zero
        } else {
            DropoutMode::Sentinel
        },
        ..ModalityDropoutConfig::uniform(a.md_p, a.common.seed)
    });
    if let Some(md) = &md {
        md.validate()?;
    }
    let mut log = RunLog::new("train-fusion", a);
    let manifest = read_manifest(&a.manifest)?;
    let loader = FeatureLoader::new();
    let train = ingest_precomputed(&manifest, &split_records(&manifest, Split::TrainFus)?, &loader)?;
    let val = ingest_precomputed(&manifest, &split_records(&manifest, Split::ValFus)?, &loader)?;
    let model = FusionModel::build(kind, &modalities, a.common.seed)?;
    let options = FusionTrainOptions {
        selection: selection(&a.train.selection),
        patience: a.train.patience,
    };
    let (model, history) = train_fusion(&model, &train, &val, &config, md.as_ref(), &options)?;
    write_model(&model.graph, &a.out)?;
    let (val, skipped) = evaluable(&model, val);
    let report = EvalReport::evaluate(Split::ValFus.name(), &fusion_scored_set(&model, &val)?)?;
    let mut out = format!(
        "{}{} fusion over {}: best epoch {}, val-fus {}\n",
        kind.name(),
        if md.is_some() { "+md" } else { "" },
        a.modalities,
        history.best_epoch,
        report.summary_line()
    );
    if skipped > 0 {
        let _ = writeln!(out, "skipped {skipped} val-fus utterances with no present score");
    }
    log.note(&out);
    history_note(&mut log, &history);
    log.write(&a.common, with_suffix(&a.out, ".log"))?;
    Ok(out)
}

fn corrupt(a: &CorruptArgs) -> Result<String> {
    let mut log = RunLog::new("corrupt", a);
    let manifest = read_manifest(&a.manifest)?;
    create_dir(&a.out)?;
    let (updated, report) = corrupt_manifest(&manifest, a.rate, a.common.seed, &a.out)?;
    updated.rebase(&a.out).write(a.out.join("manifest.jsonl"))?;
    let text = report.to_text();
    std::fs::write(a.out.join("corruption.txt"), &text).map_err(|e| CliError::Data(e.to_string()))?;
    log.note(&text);
    log.write(&a.common, a.out.join("corrupt.log"))?;
    Ok(text)
}

fn eval(a: &EvalArgs) -> Result<String> {
    let split: Split = a.split.parse()?;
    let mut log = RunLog::new("eval", a);
    let graph = read_model(&a.model)?;
    let manifest = read_manifest(&a.manifest)?;
    let records = split_records(&manifest, split)?;
    let loader = FeatureLoader::new();
    let name = a.name.clone().unwrap_or_else(|| {
        a.model
            .file_stem()
            .map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let mut skipped = 0;
    let set = match graph.attrs.get("role").map(String::as_str) {
        Some("fusion") => {
            let model = FusionModel::from_graph(graph)?;
            let (samples, s) = evaluable(&model, ingest_precomputed(&manifest, &records, &loader)?);
            skipped = s;
            fusion_scored_set(&model, &samples)?
        }
        _ => {
            let model = ComponentModel::from_graph(graph)?;
            let data = ComponentData::from_manifest(&manifest, &records, model.modality, &loader)?;
            component_scored_set(&model, &data)?
        }
    };
    let report = EvalReport::evaluate(&name, &set)?;
    let out = format!("{}\n", report.summary_line());
    log.note(report.to_text());
    if skipped > 0 {
        log.note(format!("skipped {skipped} utterances with no present score"));
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let write = |file: &str, body: String| {
            std::fs::write(dir.join(file), body).map_err(|e| CliError::Data(format!("cannot write {file}: {e}")))
        };
        write("report.txt", report.to_text())?;
        write("report.json", report.to_json())?;
        write("det.csv", report.det_csv())?;
    }
    let default_log = match &a.out {
        Some(dir) => dir.join("eval.log"),
        None => with_suffix(&a.model, ".eval.log"),
    };
    log.write(&a.common, default_log)?;
    Ok(out)
}
