#![no_main]

use libfuzzer_sys::fuzz_target;
use nonsmooth_control::fe::vtk;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = vtk::parse(text);
    }
});
