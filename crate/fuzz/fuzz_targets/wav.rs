#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(audio) = ddsd_dsp::decode_wav(std::io::Cursor::new(data)) {
        assert!(audio.samples().iter().all(|s| s.is_finite() && s.abs() <= 1.0));
    }
});
