#![no_main]

use libfuzzer_sys::fuzz_target;
use mcpolicy::lp::{parse_lp, write_lp};

fuzz_target!(|data: &str| {
    if let Ok(p) = parse_lp(data) {
        // whatever parses must survive a write/parse cycle unchanged
        let text = write_lp(&p);
        let q = parse_lp(&text).expect("written model reparses");
        assert_eq!(write_lp(&q), text);
    }
});
