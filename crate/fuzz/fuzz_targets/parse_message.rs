#![no_main]

use ghz_qdc::bits;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = bits::parse_message(text) {
        // A parsed message re-parses to itself from its bit-string form.
        let rendered = bits::to_string(&parsed);
        if !rendered.is_empty() {
            assert_eq!(bits::parse_message(&rendered).unwrap(), parsed);
        }
        assert_eq!(bits::unpack(&bits::pack(&parsed))[..parsed.len()], parsed[..]);
    }
});
