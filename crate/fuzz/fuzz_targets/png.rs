#![no_main]

use gridflow_core::render::{decode_png, encode_png};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_png(data) {
        let bytes = encode_png(&img).expect("decoded images re-encode");
        assert_eq!(decode_png(&bytes).expect("round trip"), img);
    }
});
