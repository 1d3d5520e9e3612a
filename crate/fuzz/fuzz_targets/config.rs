#![no_main]

use libfuzzer_sys::fuzz_target;
use mixtraffic::config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = config::parse(text) {
        let back = config::parse(&config::to_manifest(&cfg)).expect("manifest parses");
        assert_eq!(back, cfg);
        let _ = cfg.validate();
    }
});
