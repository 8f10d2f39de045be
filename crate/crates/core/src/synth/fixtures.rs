use super::truth::GaussianMixtureTruth;
use crate::error::{Error, Result};

/// Shipped truth specifications: a plains site with one dominant wind
/// direction, a plains site with two opposed regimes, and a mountain site
/// with several channelled directions.
pub const FIXTURE_NAMES: [&str; 3] = ["plains-unimodal", "plains-bimodal", "mountain-multimodal"];

fn fixture_text(name: &str) -> Option<&'static str> {
    match name {
        "plains-unimodal" => Some(include_str!("../../fixtures/plains-unimodal.json")),
        "plains-bimodal" => Some(include_str!("../../fixtures/plains-bimodal.json")),
        "mountain-multimodal" => Some(include_str!("../../fixtures/mountain-multimodal.json")),
        _ => None,
    }
}

pub fn fixture(name: &str) -> Result<GaussianMixtureTruth> {
    let text = fixture_text(name).ok_or_else(|| {
        Error::invalid(
            "fixture",
            format!(
                "unknown fixture `{name}` (expected one of {})",
                FIXTURE_NAMES.join(", ")
            ),
        )
    })?;
    GaussianMixtureTruth::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_load() {
        for name in FIXTURE_NAMES {
            let t = fixture(name).unwrap();
            assert!(!t.components().is_empty());
        }
        assert!(fixture("nowhere").is_err());
    }
}
