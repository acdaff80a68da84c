//! Replays the checked-in fuzz seeds through the same entry points the fuzz
//! targets exercise, so the seeds stay meaningful on a stable toolchain.

use std::fs;
use std::path::PathBuf;

use ghz_qdc::bits;
use ghz_qdc::ecc::{self, Codec};
use ghz_qdc::harness::{RunReport, SweepReport};
use ghz_qdc::transcript::Transcript;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn message_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("parse_message") {
        if let Ok(parsed) = bits::parse_message(std::str::from_utf8(&data).unwrap()) {
            accepted += 1;
            assert_eq!(bits::parse_message(&bits::to_string(&parsed)).unwrap(), parsed, "{name}");
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn complex_seeds() {
    let results: Vec<bool> = seeds("parse_complex")
        .iter()
        .map(|(_, d)| bits::parse_complex(std::str::from_utf8(d).unwrap()).is_ok())
        .collect();
    assert!(results.contains(&true) && results.contains(&false));
}

#[test]
fn transcript_seeds() {
    for (name, data) in seeds("transcript_parse") {
        let t = Transcript::parse_log(std::str::from_utf8(&data).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(Transcript::parse_log(&t.to_log()).unwrap(), t);
    }
}

#[test]
fn ecc_seeds() {
    let codecs = [Codec::None, Codec::Repetition { r: 3 }, Codec::Repetition { r: 5 }, Codec::Hamming74];
    for (name, data) in seeds("ecc_decode") {
        let codec = codecs[data[0] as usize % codecs.len()];
        let frame: Vec<bool> = data[1..].iter().map(|b| b & 1 == 1).collect();
        let result = ecc::decode(codec, &frame);
        match name.as_str() {
            "hamming_ragged" | "hamming_badpad" => assert!(result.is_err(), "{name}"),
            _ => {
                let d = result.unwrap_or_else(|e| panic!("{name}: {e}"));
                assert_eq!(ecc::encode(codec, &d.data).len(), frame.len());
            }
        }
    }
}

#[test]
fn report_seeds() {
    for (name, data) in seeds("report_json") {
        match name.as_str() {
            "run" => {
                serde_json::from_slice::<RunReport>(&data).unwrap();
            }
            "sweep" => {
                serde_json::from_slice::<SweepReport>(&data).unwrap();
            }
            _ => assert!(serde_json::from_slice::<RunReport>(&data).is_err()),
        }
    }
}
