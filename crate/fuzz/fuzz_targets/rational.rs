#![no_main]

use libfuzzer_sys::fuzz_target;
use ppclab::numeric::{fmt_decimal, fmt_fraction, parse_rational};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if text.len() > 512 {
        return;
    }
    if let Ok(r) = parse_rational(text) {
        assert_eq!(parse_rational(&fmt_fraction(&r)).unwrap(), r);
        assert_eq!(parse_rational(&fmt_decimal(&r)).unwrap(), r);
    }
});
