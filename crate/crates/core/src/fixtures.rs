//! Knowledge bases shipped with the crate: classroom examples (flooding,
//! travel, fast-food preference, tipping), the speaking-score systems, and a
//! reference/shifted pair for tuning experiments.

use crate::fml::{parse_fml, FmlDocument};

pub const MINIMAL: &str = include_str!("../fixtures/minimal.fml");
pub const SYMMETRIC: &str = include_str!("../fixtures/symmetric.fml");
pub const SPEAKING_QUALITY: &str = include_str!("../fixtures/speaking_quality.fml");
pub const FLOODING: &str = include_str!("../fixtures/flooding.fml");
pub const TRAVEL: &str = include_str!("../fixtures/travel.fml");
pub const PREFERENCE: &str = include_str!("../fixtures/preference.fml");
pub const CONFIDENCE_SCORE: &str = include_str!("../fixtures/confidence_score.fml");
pub const TIPPING: &str = include_str!("../fixtures/tipping.fml");
pub const TUNING_REFERENCE: &str = include_str!("../fixtures/tuning_reference.fml");
pub const TUNING_SHIFTED: &str = include_str!("../fixtures/tuning_shifted.fml");

/// Every shipped fixture as `(file stem, text)`.
pub const ALL: &[(&str, &str)] = &[
    ("minimal", MINIMAL),
    ("symmetric", SYMMETRIC),
    ("speaking_quality", SPEAKING_QUALITY),
    ("flooding", FLOODING),
    ("travel", TRAVEL),
    ("preference", PREFERENCE),
    ("confidence_score", CONFIDENCE_SCORE),
    ("tipping", TIPPING),
    ("tuning_reference", TUNING_REFERENCE),
    ("tuning_shifted", TUNING_SHIFTED),
];

fn load(text: &str) -> FmlDocument {
    parse_fml(text).expect("shipped fixture parses")
}

pub fn minimal() -> FmlDocument {
    load(MINIMAL)
}

pub fn symmetric() -> FmlDocument {
    load(SYMMETRIC)
}

pub fn speaking_quality() -> FmlDocument {
    load(SPEAKING_QUALITY)
}

pub fn flooding() -> FmlDocument {
    load(FLOODING)
}

pub fn travel() -> FmlDocument {
    load(TRAVEL)
}

pub fn preference() -> FmlDocument {
    load(PREFERENCE)
}

/// Maps raw recognizer confidence to a fuzzy speaking score.
pub fn confidence_score() -> FmlDocument {
    load(CONFIDENCE_SCORE)
}

pub fn tipping() -> FmlDocument {
    load(TIPPING)
}

pub fn tuning_reference() -> FmlDocument {
    load(TUNING_REFERENCE)
}

pub fn tuning_shifted() -> FmlDocument {
    load(TUNING_SHIFTED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fml::serialize_fml;

    #[test]
    fn fixtures_are_in_canonical_form() {
        for (name, text) in ALL {
            let doc = parse_fml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&serialize_fml(&doc), text, "{name} is not canonical");
        }
    }
}
