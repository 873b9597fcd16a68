#![no_main]

use libfuzzer_sys::fuzz_target;
use mcpolicy_cli::run::SolutionFile;

fuzz_target!(|data: &str| {
    if let Ok(sol) = SolutionFile::from_json(data) {
        assert_eq!(SolutionFile::from_json(&sol.to_json()).expect("round trip"), sol);
    }
});
