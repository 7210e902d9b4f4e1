#![no_main]

use certds::learner::{verify_certificates, LearnResult};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = serde_json::from_slice::<LearnResult>(data) {
        // Untrusted certificates must be rejected, never panic.
        let _ = verify_certificates(&r, None, &[]);
    }
});
