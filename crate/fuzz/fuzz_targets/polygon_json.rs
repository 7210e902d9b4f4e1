#![no_main]

use certds_cli::schema::PolygonFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = serde_json::from_slice::<PolygonFile>(data) {
        if let Ok(polygons) = file.polygons() {
            for p in polygons {
                let _ = p.contains([0.0, 0.0]);
                let _ = p.bounding_box();
            }
        }
    }
});
