//! Runs the synthetic pipeline for one seed and prints the table analogs.
//!
//! `cargo run --release -p ddsd-core --example pipeline -- [seed] [scale] [rho] [d_a d_t d_asr d_p] [kappa]`

use ddsd_core::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let mut config = ExperimentConfig::default().with_seed(seed);
    if let Some(scale) = args.get(1) {
        config.synth.scale = scale.parse()?;
    }
    if let Some(rho) = args.get(2) {
        config.synth.rho = rho.parse()?;
    }
    for (k, d) in args.iter().skip(3).take(4).enumerate() {
        config.synth.separability[k] = d.parse()?;
    }
    if let Some(k) = args.get(7) {
        config.synth.recognition = k.parse()?;
    }
    let report = run_experiment(&config)?;
    print!("{}", report.to_text());
    println!("\n[timings, s]");
    for (k, v) in &report.timings {
        println!("{k}\t{v:.1}");
    }
    for (k, h) in report.component_histories.iter().chain(&report.fusion_histories) {
        let metrics: Vec<String> = h.epochs.iter().map(|e| format!("{:.1}", e.val_metric)).collect();
        println!("{k}\tbest {}\t{}", h.best_epoch, metrics.join(" "));
    }
    Ok(())
}
