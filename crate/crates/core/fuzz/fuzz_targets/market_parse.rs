#![no_main]

use libfuzzer_sys::fuzz_target;
use nonsmooth_control::sparse::market;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = market::parse(text) {
        let back = market::parse(&market::to_string(&m)).expect("written matrix parses");
        assert_eq!(back, m);
    }
});
