#![no_main]

use libfuzzer_sys::fuzz_target;
use ppclab::sequence::{elements_to_text, is_strictly_increasing, SequenceFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if text.len() > 16384 {
        return;
    }
    if let Ok(file) = SequenceFile::parse(text) {
        assert!(is_strictly_increasing(&file.elements));
        let again = SequenceFile::parse(&elements_to_text(&file.elements)).unwrap();
        assert_eq!(again.elements, file.elements);
    }
});
