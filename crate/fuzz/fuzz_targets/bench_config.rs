#![no_main]

use libfuzzer_sys::fuzz_target;
use mcpolicy_cli::bench::BenchConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = BenchConfig::from_toml(data) {
        let _ = cfg.options();
        assert!(cfg.methods().is_ok() && cfg.transforms().is_ok());
    }
});
