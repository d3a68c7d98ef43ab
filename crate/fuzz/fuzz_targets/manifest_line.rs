#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = ddsd_core::parse_manifest_line(line) {
        if let Ok(manifest) = ddsd_core::Manifest::new(vec![record.clone()]) {
            let text = manifest.to_jsonl();
            assert_eq!(
                ddsd_core::parse_manifest_line(text.trim_end()).expect("round trip"),
                record
            );
        }
    }
});
