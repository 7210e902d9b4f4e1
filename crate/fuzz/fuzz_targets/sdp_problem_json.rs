#![no_main]

use certds::sdp::SdpProblem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = SdpProblem::from_json(text) {
        let again = SdpProblem::from_json(&p.to_json()).expect("dump must reload");
        assert_eq!(again.to_json(), p.to_json());
    }
});
