#![no_main]

use libfuzzer_sys::fuzz_target;
use sicnmf::io::labels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = labels::parse_str("fuzz", text);
});
