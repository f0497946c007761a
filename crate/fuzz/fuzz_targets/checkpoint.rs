#![no_main]

use gridflow_core::flow::DenoiserCheckpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = DenoiserCheckpoint::from_bytes(data) {
        let _ = ck.ema_model();
        let _ = ck.id();
    }
});
