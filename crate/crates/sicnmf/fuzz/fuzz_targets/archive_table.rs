#![no_main]

use libfuzzer_sys::fuzz_target;
use sicnmf::io::table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = table::parse_str("fuzz", text);
});
