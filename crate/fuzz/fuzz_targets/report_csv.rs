#![no_main]

use libfuzzer_sys::fuzz_target;
use mcpolicy_cli::report::{parse_report, summarize};

fuzz_target!(|data: &str| {
    if let Ok(rows) = parse_report(data) {
        let _ = summarize(&rows);
    }
});
