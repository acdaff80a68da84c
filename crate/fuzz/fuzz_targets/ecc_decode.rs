#![no_main]

use ghz_qdc::ecc::{self, Codec};
use libfuzzer_sys::fuzz_target;

const CODECS: [Codec; 4] = [Codec::None, Codec::Repetition { r: 3 }, Codec::Repetition { r: 5 }, Codec::Hamming74];

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let codec = CODECS[selector as usize % CODECS.len()];
    let frame: Vec<bool> = rest.iter().map(|b| b & 1 == 1).collect();
    if let Ok(decoded) = ecc::decode(codec, &frame) {
        assert!(decoded.corrected_errors <= frame.len());
        // Re-encoding the decoded data gives a frame of the same length.
        assert_eq!(ecc::encode(codec, &decoded.data).len(), frame.len());
    }
});
