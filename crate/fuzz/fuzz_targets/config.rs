#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = ddsd_cli::parse_config(text) {
        let again: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(ddsd_cli::parse_config(&again).expect("formatted config parses"), pairs);
    }
});
