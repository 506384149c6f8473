#![no_main]

use libfuzzer_sys::fuzz_target;
use ppclab::interval::IntervalSet;
use ppclab::numeric::rat_int;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if text.len() > 4096 {
        return;
    }
    if let Ok(set) = IntervalSet::parse(text) {
        let m = set.measure();
        assert!(m >= rat_int(0) && m <= rat_int(1));
        assert_eq!(IntervalSet::parse(&set.to_text()).unwrap(), set);
        assert_eq!(set.complement().complement(), set);
    }
});
