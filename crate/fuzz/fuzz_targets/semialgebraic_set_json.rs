#![no_main]

use certds::semialg::BasicSemialgebraicSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(set) = serde_json::from_slice::<BasicSemialgebraicSet>(data) {
        let text = serde_json::to_string(&set).expect("serialize");
        let again: BasicSemialgebraicSet = serde_json::from_str(&text).expect("reparse");
        assert_eq!(again, set);
        let _ = set.contains(&vec![0.0; set.dim()]);
    }
});
