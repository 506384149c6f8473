#![no_main]

use libfuzzer_sys::fuzz_target;
use ppclab::experiment::{parse_levels, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if text.len() > 4096 {
        return;
    }
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let canonical = ExperimentConfig::parse(&cfg.canonical_text()).unwrap();
        assert_eq!(canonical.canonical_text(), cfg.canonical_text());
        let _ = cfg.experiment();
    }
    let _ = parse_levels(text);
});
