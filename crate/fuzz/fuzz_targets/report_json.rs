#![no_main]

use ghz_qdc::harness::{RunReport, SweepReport};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = serde_json::from_slice::<RunReport>(data) {
        let mut buf = Vec::new();
        report.write_json(&mut buf).unwrap();
        let _ = serde_json::from_slice::<RunReport>(&buf).unwrap();
    }
    let _ = serde_json::from_slice::<SweepReport>(data);
});
