#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(graph) = ddsd_nn::decode_model(data) {
        let again = ddsd_nn::decode_model(&ddsd_nn::encode_model(&graph)).expect("re-encoded model decodes");
        assert_eq!(ddsd_nn::encode_model(&again), ddsd_nn::encode_model(&graph));
        let _ = ddsd_core::ComponentModel::from_graph(graph.clone());
        let _ = ddsd_core::FusionModel::from_graph(graph);
    }
});
