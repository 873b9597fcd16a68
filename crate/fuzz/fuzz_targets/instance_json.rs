#![no_main]

use libfuzzer_sys::fuzz_target;
use mcpolicy::hdr::HdrInstance;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = HdrInstance::from_json(s) {
        let back = HdrInstance::from_json(&inst.to_json()).expect("serialized instance reloads");
        assert_eq!(back.to_json(), inst.to_json());
        let _ = inst.chain();
    }
});
