//! Triplet TSV parsing must never panic, whatever the bytes: errors are
//! values, resolved against a small fixed label set.

#![no_main]

use libfuzzer_sys::fuzz_target;
use sicnmf::io::labels::LabelIndex;
use sicnmf::io::triplet;
use sicnmf::Divergence;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let rows = LabelIndex::new(vec!["p1".into(), "p2".into(), "p3".into()]).unwrap();
    let cols = LabelIndex::new(vec!["a".into(), "b".into()]).unwrap();
    for divergence in [
        Divergence::GeneralizedKl,
        Divergence::Squared,
        Divergence::Logistic,
    ] {
        if let Ok(entries) = triplet::parse_str("fuzz", text, &rows, &cols, divergence) {
            let _ = triplet::sum_duplicates(entries);
        }
    }
});
