//! Replays the checked-in fuzz corpora through the same checks as the fuzz
//! targets, so seeds stay valid without a nightly toolchain.

use std::path::PathBuf;

use ppclab::experiment::{parse_levels, ExperimentConfig};
use ppclab::growth::{parse_growth, parse_theta};
use ppclab::interval::IntervalSet;
use ppclab::numeric::{fmt_decimal, fmt_fraction, parse_rational, rat_int};
use ppclab::pair::Alpha;
use ppclab::sequence::{elements_to_text, is_strictly_increasing, SequenceFile};

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let text = String::from_utf8_lossy(&std::fs::read(&path).unwrap()).into_owned();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

#[test]
fn rational_corpus() {
    for (path, text) in corpus("rational") {
        let r = parse_rational(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_rational(&fmt_fraction(&r)).unwrap(), r);
        assert_eq!(parse_rational(&fmt_decimal(&r)).unwrap(), r);
    }
}

#[test]
fn interval_set_corpus() {
    for (path, text) in corpus("interval_set") {
        let set = IntervalSet::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let m = set.measure();
        assert!(m >= rat_int(0) && m <= rat_int(1));
        assert_eq!(IntervalSet::parse(&set.to_text()).unwrap(), set);
    }
}

#[test]
fn sequence_file_corpus() {
    for (path, text) in corpus("sequence_file") {
        let file = SequenceFile::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(is_strictly_increasing(&file.elements));
        assert_eq!(SequenceFile::parse(&elements_to_text(&file.elements)).unwrap().elements, file.elements);
    }
}

#[test]
fn growth_corpus() {
    for (path, text) in corpus("growth") {
        let ok = parse_growth(&text).is_ok() || parse_theta(&text).is_ok();
        assert!(ok, "{} parses as neither f nor theta", path.display());
    }
}

#[test]
fn config_corpus() {
    for (path, text) in corpus("config") {
        match ExperimentConfig::parse(&text) {
            Ok(cfg) => {
                cfg.experiment().unwrap();
                let again = ExperimentConfig::parse(&cfg.canonical_text()).unwrap();
                assert_eq!(again.canonical_text(), cfg.canonical_text());
            }
            Err(_) => {
                parse_levels(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            }
        }
    }
}

#[test]
fn alpha_corpus() {
    for (path, text) in corpus("alpha") {
        let a = Alpha::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(Alpha::parse(&a.to_string()).unwrap(), a);
    }
}
