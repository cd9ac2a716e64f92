use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{columns, CohortError, Result};
use crate::hash::sha256_hex;

const CANONICAL: &str = include_str!("../../../../data/schema/cohort_schema.v1.json");

/// Versioned encoding schema: feature order, standardised columns, category
/// dictionaries, the post-operative blocklist and the placeholder vocabulary.
///
/// The checksum is the SHA-256 of the exact file bytes it was loaded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSchema {
    pub version: String,
    pub features: Vec<String>,
    pub continuous: Vec<String>,
    pub dictionaries: BTreeMap<String, Vec<String>>,
    pub blocklist: Vec<String>,
    pub placeholders: Vec<String>,
    #[serde(skip)]
    checksum: String,
}

impl CohortSchema {
    /// The schema shipped in `data/schema/cohort_schema.v1.json`.
    pub fn canonical() -> Self {
        Self::from_bytes(CANONICAL.as_bytes()).expect("shipped schema is valid")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut schema: CohortSchema =
            serde_json::from_slice(bytes).map_err(|e| CohortError::Schema(e.to_string()))?;
        schema.checksum = sha256_hex(bytes);
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| CohortError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Ordered category labels for an enumeration column.
    pub fn dictionary(&self, column: &str) -> Result<&[String]> {
        self.dictionaries
            .get(column)
            .map(Vec::as_slice)
            .ok_or_else(|| CohortError::Schema(format!("no dictionary for `{column}`")))
    }

    /// Integer code of `value` in `column`'s dictionary.
    pub fn code(&self, column: &str, value: &str) -> Result<usize> {
        self.dictionary(column)?
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| CohortError::UnknownCategory {
                column: column.to_string(),
                value: value.to_string(),
            })
    }

    /// Placeholder test, case-insensitive and ignoring surrounding whitespace.
    pub fn is_placeholder(&self, raw: &str) -> bool {
        let raw = raw.trim();
        self.placeholders.iter().any(|p| p.eq_ignore_ascii_case(raw))
    }

    // Feature names are deliberately not resolved here: the leakage guard has
    // to see a blocklisted feature before anything else rejects it.
    fn validate(&self) -> Result<()> {
        for column in [columns::SEX, columns::INSURANCE, columns::INCOME, columns::RACE] {
            let dict = self.dictionary(column)?;
            if dict.is_empty() {
                return Err(CohortError::Schema(format!("dictionary `{column}` is empty")));
            }
            for (i, v) in dict.iter().enumerate() {
                if dict[..i].contains(v) {
                    return Err(CohortError::Schema(format!(
                        "dictionary `{column}` repeats `{v}`"
                    )));
                }
            }
        }
        if self.dictionary(columns::SEX)? != ["Female", "Male"] {
            return Err(CohortError::Schema(
                "SEX dictionary must be [Female, Male]".into(),
            ));
        }
        for name in &self.continuous {
            if !self.features.contains(name) {
                return Err(CohortError::Schema(format!(
                    "continuous column `{name}` is not a feature"
                )));
            }
        }
        for (i, name) in self.features.iter().enumerate() {
            if self.features[..i].contains(name) {
                return Err(CohortError::Schema(format!("feature `{name}` listed twice")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_schema_loads() {
        let schema = CohortSchema::canonical();
        assert_eq!(schema.features.len(), 21);
        assert_eq!(schema.features[0], "SNOT22_BLN_TOTAL");
        assert_eq!(schema.code("SEX", "Female").unwrap(), 0);
        assert_eq!(schema.code("SEX", "Male").unwrap(), 1);
        assert_eq!(schema.checksum().len(), 64);
    }

    #[test]
    fn placeholders_are_case_insensitive() {
        let schema = CohortSchema::canonical();
        for raw in ["", "  ", "none", "NONE", "na", "n/a", "NULL"] {
            assert!(schema.is_placeholder(raw), "{raw:?}");
        }
        assert!(!schema.is_placeholder("0"));
    }

    #[test]
    fn unknown_category_is_an_error() {
        let schema = CohortSchema::canonical();
        assert!(matches!(
            schema.code("INSURANCE", "Gold plan"),
            Err(CohortError::UnknownCategory { .. })
        ));
    }

    #[test]
    fn checksum_tracks_bytes() {
        let a = CohortSchema::canonical();
        let mut text = CANONICAL.to_string();
        text.push('\n');
        let b = CohortSchema::from_bytes(text.as_bytes()).unwrap();
        assert_eq!(a.features, b.features);
        assert_ne!(a.checksum(), b.checksum());
    }
}
