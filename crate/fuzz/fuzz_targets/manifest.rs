#![no_main]

use gridflow_core::manifest::{from_jsonl, to_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = from_jsonl(text) {
        // Whatever parses must serialize and parse back to the same records.
        let again = to_jsonl(&records).expect("parsed records serialize");
        assert_eq!(from_jsonl(&again).expect("round trip"), records);
    }
});
