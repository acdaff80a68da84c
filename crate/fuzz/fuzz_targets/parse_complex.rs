#![no_main]

use ghz_qdc::bits;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(z) = bits::parse_complex(text) {
        assert!(z.re.is_finite() && z.im.is_finite());
        let again = bits::parse_complex(&format!("{:?},{:?}", z.re, z.im)).unwrap();
        assert_eq!(again, z);
    }
});
