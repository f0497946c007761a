#![no_main]

use gridflow_cli::config::RunConfig;
use gridflow_core::types::TaskInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let _ = cfg.train.validate();
        let _ = cfg.sample.validate();
        if let (Some(task), Some(level)) = (&cfg.gen.task, &cfg.gen.level) {
            if let Ok(kind) = task.parse::<gridflow_core::types::TaskKind>() {
                let _ = kind.parse_level(level);
            }
        }
        let again = serde_json::to_string(&cfg).expect("configs serialize");
        assert_eq!(RunConfig::from_json(&again).expect("round trip"), cfg);
    }
    let _ = TaskInstance::parse_id(text);
});
