#![no_main]

use libfuzzer_sys::fuzz_target;
use ppclab::pair::Alpha;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if text.len() > 512 {
        return;
    }
    if let Ok(alpha) = Alpha::parse(text) {
        assert_eq!(Alpha::parse(&alpha.to_string()).unwrap(), alpha);
    }
});
