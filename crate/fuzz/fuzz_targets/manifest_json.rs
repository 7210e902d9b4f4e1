#![no_main]

use certds_cli::manifest::RunManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = serde_json::from_slice::<RunManifest>(data) {
        let text = serde_json::to_string(&m).expect("serialize");
        let again: RunManifest = serde_json::from_str(&text).expect("reparse");
        assert_eq!(again.dataset, m.dataset);
    }
});
