#![no_main]

use homopolymer_cli::output::parse_sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(config) = parse_sidecar(data) {
        // An accepted config must load back unchanged once re-serialised.
        let wrapped = serde_json::json!({ "config": config }).to_string();
        assert_eq!(parse_sidecar(&wrapped).unwrap(), config);
    }
});
