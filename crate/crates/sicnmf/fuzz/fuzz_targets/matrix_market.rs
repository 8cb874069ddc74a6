#![no_main]

use libfuzzer_sys::fuzz_target;
use sicnmf::io::matrix_market;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // parsing may fail, but must never panic or overflow
    let _ = matrix_market::parse_str("fuzz", text);
});
