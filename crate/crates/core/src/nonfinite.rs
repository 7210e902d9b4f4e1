//! Serde helper for `f64` fields that may be non-finite. JSON has no
//! infinities, so they serialize as `null`; `null` reads back as NaN.

use serde::{Deserialize, Deserializer};

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}
