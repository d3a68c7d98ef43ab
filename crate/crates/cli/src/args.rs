use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use ddsd_core::{FusionKind, Modality, Split, SynthConfig};
use ddsd_nn::TrainConfig;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ddsd", version, about = "Device-directed speech detection pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus (audio, transcripts, ASR features, manifest)
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Extract prosody and filterbank features from audio
    #[command(args_override_self = true)]
    Extract(ExtractArgs),
    /// Train a component model on train-comp, selecting on val-comp
    #[command(args_override_self = true)]
    TrainComponent(TrainComponentArgs),
    /// Export directedness scores and embeddings of a component model
    #[command(args_override_self = true)]
    Export(ExportArgs),
    /// Train a fusion model on train-fus, selecting on val-fus
    #[command(args_override_self = true)]
    TrainFusion(TrainFusionArgs),
    /// Drop scores and embeddings at random to simulate missing modalities
    #[command(args_override_self = true)]
    Corrupt(CorruptArgs),
    /// Evaluate a component or fusion model on one split
    #[command(args_override_self = true)]
    Eval(EvalArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Extract(_) => "extract",
            Command::TrainComponent(_) => "train-component",
            Command::Export(_) => "export",
            Command::TrainFusion(_) => "train-fusion",
            Command::Corrupt(_) => "corrupt",
            Command::Eval(_) => "eval",
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// Flat key=value file supplying defaults for any flag of this command
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic step of the command
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run log destination
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub log: Option<PathBuf>,
}

fn modality_arg(s: &str) -> Result<String, String> {
    s.parse::<Modality>()
        .map(|m| m.name().to_string())
        .map_err(|e| e.to_string())
}

fn modality_list_arg(s: &str) -> Result<String, String> {
    let names = s.split(',').map(modality_arg).collect::<Result<Vec<_>, _>>()?;
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(format!("modality '{n}' listed twice"));
        }
    }
    Ok(names.join(","))
}

fn split_arg(s: &str) -> Result<String, String> {
    s.parse::<Split>()
        .map(|x| x.name().to_string())
        .map_err(|e| e.to_string())
}

fn kind_arg(s: &str) -> Result<String, String> {
    FusionKind::parse(s)
        .map(|k| k.name().to_string())
        .map_err(|e| e.to_string())
}

fn probability_arg(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} outside [0, 1)"))
    }
}

pub fn parse_modalities(list: &str) -> Vec<Modality> {
    list.split(',').filter_map(|s| s.parse().ok()).collect()
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of the reference split sizes
    #[arg(long, default_value_t = SynthConfig::default().scale)]
    pub scale: f64,
    /// Cross-modal latent correlation
    #[arg(long, default_value_t = SynthConfig::default().rho)]
    pub rho: f64,
    /// Shared recognition-error share of text and ASR noise
    #[arg(long, default_value_t = SynthConfig::default().recognition)]
    pub recognition: f64,
    #[arg(long, default_value_t = SynthConfig::default().separability[0])]
    pub d_acoustic: f64,
    #[arg(long, default_value_t = SynthConfig::default().separability[1])]
    pub d_text: f64,
    #[arg(long, default_value_t = SynthConfig::default().separability[2])]
    pub d_asr: f64,
    #[arg(long, default_value_t = SynthConfig::default().separability[3])]
    pub d_prosody: f64,
    /// Not-directed : directed ratio
    #[arg(long, default_value_t = SynthConfig::default().imbalance)]
    pub imbalance: f64,
    #[arg(long, default_value_t = SynthConfig::default().utterances_per_speaker)]
    pub utterances_per_speaker: usize,
    /// Synthesize waveforms
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub audio: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for feature records and the updated manifest
    #[arg(long)]
    pub out: PathBuf,
    /// Audio modalities to extract
    #[arg(long, default_value = "acoustic,prosody", value_parser = modality_list_arg)]
    pub modalities: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    pub batch_size: usize,
    /// Global gradient-norm clip
    #[arg(long, default_value_t = TrainConfig::default().grad_clip_norm)]
    pub grad_clip: f64,
    /// Stop after this many epochs without validation improvement
    #[arg(long)]
    pub patience: Option<usize>,
    /// Checkpoint selection metric
    #[arg(long, default_value = "eer", value_parser = ["eer", "fa"])]
    pub selection: String,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainComponentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = modality_arg)]
    pub modality: String,
    /// Model file to write
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExportArgs {
    /// Component model file
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for records and the updated manifest
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainFusionArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = kind_arg)]
    pub kind: String,
    #[arg(long, default_value = "acoustic,text,asr,prosody", value_parser = modality_list_arg)]
    pub modalities: String,
    /// Train with modality dropout
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub md: bool,
    /// Per-modality dropout probability
    #[arg(long, default_value_t = 0.3, value_parser = probability_arg)]
    pub md_p: f64,
    /// What a dropped modality becomes during training
    #[arg(long, default_value = "sentinel", value_parser = ["sentinel", "zero"])]
    pub md_mode: String,
    /// Model file to write
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CorruptArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Per-modality probability of marking a modality missing
    #[arg(long, default_value_t = 0.3, value_parser = probability_arg)]
    pub rate: f64,
    /// Output directory for corrupted records and the updated manifest
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Component or fusion model file
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test", value_parser = split_arg)]
    pub split: String,
    /// Directory for report.txt, report.json and det.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model label in the report (defaults to the model file stem)
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
