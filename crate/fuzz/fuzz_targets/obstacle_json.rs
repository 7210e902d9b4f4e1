#![no_main]

use certds_cli::schema::ObstacleSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<ObstacleSpec>(data) {
        let _ = spec.to_set();
    }
});
