#![no_main]

use ghz_qdc::transcript::Transcript;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = Transcript::parse_log(text) {
        let _ = t.validate();
        let log = t.to_log();
        assert_eq!(Transcript::parse_log(&log).unwrap(), t);
    }
});
