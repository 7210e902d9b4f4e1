#![no_main]

use certds::poly::Polynomial;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = serde_json::from_slice::<Polynomial>(data) {
        let text = serde_json::to_string(&p).expect("serialize");
        let again: Polynomial = serde_json::from_str(&text).expect("reparse");
        assert_eq!(again, p);
        let _ = p.gradient();
    }
});
