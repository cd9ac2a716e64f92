//! The five-level verbal confidence scale shared by the heuristic rule and the
//! constrained LLM output schema.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confidence {
    VeryConfident,
    SomewhatConfident,
    Neutral,
    SomewhatUnsure,
    NotAtAllConfident,
}

impl Confidence {
    pub const ALL: [Confidence; 5] = [
        Confidence::VeryConfident,
        Confidence::SomewhatConfident,
        Confidence::Neutral,
        Confidence::SomewhatUnsure,
        Confidence::NotAtAllConfident,
    ];

    /// Label as it appears in the prompt vocabulary.
    pub fn label(self) -> &'static str {
        match self {
            Confidence::VeryConfident => "very confident",
            Confidence::SomewhatConfident => "Somewhat confident",
            Confidence::Neutral => "Neutral",
            Confidence::SomewhatUnsure => "Somewhat unsure",
            Confidence::NotAtAllConfident => "Not at all confident",
        }
    }

    /// Magnitude on the unsigned proxy scale, 1.0 for the most confident level
    /// down to 0.0 for the least.
    pub fn weight(self) -> f64 {
        match self {
            Confidence::VeryConfident => 1.0,
            Confidence::SomewhatConfident => 0.75,
            Confidence::Neutral => 0.5,
            Confidence::SomewhatUnsure => 0.25,
            Confidence::NotAtAllConfident => 0.0,
        }
    }

    /// Case-insensitive match against the vocabulary after collapsing runs of
    /// whitespace. Returns `None` for anything outside the five levels.
    pub fn from_label(text: &str) -> Option<Self> {
        let normalized = text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        Confidence::ALL
            .into_iter()
            .find(|c| c.label().to_lowercase() == normalized)
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
