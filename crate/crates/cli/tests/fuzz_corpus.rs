//! Replays the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files
        .iter()
        .map(|f| {
            (
                f.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(f).unwrap(),
            )
        })
        .collect()
}

#[test]
fn wav_seeds_decode() {
    for (name, bytes) in seeds("wav") {
        let decoded = ddsd_dsp::decode_wav(std::io::Cursor::new(&bytes));
        if name.starts_with("reject") {
            assert!(decoded.is_err(), "{name}");
        } else {
            assert!(!decoded.unwrap().is_empty(), "{name}");
        }
    }
}

#[test]
fn record_seeds_round_trip() {
    for (_, bytes) in seeds("record") {
        let records = ddsd_core::decode_records(&bytes).unwrap();
        assert_eq!(ddsd_core::encode_records(&records).unwrap(), bytes);
    }
}

#[test]
fn model_seeds_round_trip() {
    for (_, bytes) in seeds("model") {
        let graph = ddsd_nn::decode_model(&bytes).unwrap();
        assert_eq!(ddsd_nn::encode_model(&graph), bytes);
        assert!(
            ddsd_core::ComponentModel::from_graph(graph.clone()).is_ok()
                || ddsd_core::FusionModel::from_graph(graph).is_ok()
        );
    }
}

#[test]
fn manifest_line_seeds_parse() {
    for (_, bytes) in seeds("manifest_line") {
        let record = ddsd_core::parse_manifest_line(std::str::from_utf8(&bytes).unwrap()).unwrap();
        ddsd_core::Manifest::new(vec![record]).unwrap();
    }
}

#[test]
fn config_seeds_parse() {
    for (_, bytes) in seeds("config") {
        assert!(!ddsd_cli::parse_config(std::str::from_utf8(&bytes).unwrap())
            .unwrap()
            .is_empty());
    }
}
