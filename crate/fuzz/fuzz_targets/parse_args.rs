#![no_main]

use libfuzzer_sys::fuzz_target;

// One argument per NUL-separated chunk; the program name is prepended.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let args = std::iter::once("bcs-edge").chain(text.split('\0'));
    let _ = bcs_edge_cli::parse_args(args);
});
