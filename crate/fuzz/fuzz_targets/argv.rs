#![no_main]

use libfuzzer_sys::fuzz_target;

// Arguments are NUL-separated; parsing must never panic, and anything it
// accepts must be a valid configuration.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("homopolymer").chain(text.split('\0'));
    if let Ok(config) = homopolymer_cli::parse_args(args, Some("/tmp/fuzz-out")) {
        config.validate().expect("accepted configurations validate");
    }
});
