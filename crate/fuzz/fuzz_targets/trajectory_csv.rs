#![no_main]

use certds_cli::csvio::{parse_trajectories, write_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = parse_trajectories(text, None) {
        // Written datasets carry velocities, so nothing is re-estimated.
        let again = parse_trajectories(&write_dataset(&ds), Some(ds.attractor())).expect("written dataset must parse");
        assert_eq!(again.demonstrations(), ds.demonstrations());
    }
});
