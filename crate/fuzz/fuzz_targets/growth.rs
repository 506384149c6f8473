#![no_main]

use libfuzzer_sys::fuzz_target;
use ppclab::growth::{parse_growth, parse_theta};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if text.len() > 256 {
        return;
    }
    if let Ok(f) = parse_growth(text) {
        for j in [0, 1, 10, 64, 1000] {
            assert!(f.at_dyadic(j) > 2.0);
        }
    }
    if let Ok(theta) = parse_theta(text) {
        assert!(theta.eval(0.0) >= 1.0);
    }
});
