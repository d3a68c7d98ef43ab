#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = ddsd_core::decode_records(data) {
        let bytes = ddsd_core::encode_records(&records).expect("decoded records re-encode");
        assert_eq!(bytes, data);
    }
});
