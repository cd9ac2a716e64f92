use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::confidence::Confidence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParserStatus {
    Ok,
    MissingPrediction,
    MissingConfidence,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub prediction: Option<u8>,
    pub confidence: Option<Confidence>,
    pub parser_status: ParserStatus,
}

impl ParsedOutput {
    pub fn malformed() -> Self {
        ParsedOutput {
            prediction: None,
            confidence: None,
            parser_status: ParserStatus::Malformed,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.parser_status == ParserStatus::Ok
    }

    /// Signed proxy score, when both fields are present.
    pub fn proxy(&self) -> Option<f64> {
        Some(proxy_score(self.prediction?, self.confidence?))
    }
}

fn prediction_field() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Tolerates markdown emphasis around the key and value.
    RE.get_or_init(|| Regex::new(r"(?i)PREDICTION[*_\s]*:[*_ \t]*([0-9A-Za-z]*)").expect("valid regex"))
}

fn confidence_field() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)CONFIDENCE[*_\s]*:[*_ \t]*([^\r\n]*)").expect("valid regex"))
}

fn clean_value(raw: &str) -> &str {
    raw.trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_' | '.' | '"' | '\'' | '`'))
}

/// Reads the first valid `PREDICTION:` and `CONFIDENCE:` fields. Total: any
/// input yields one of the four statuses.
pub fn parse_response(raw: &str) -> ParsedOutput {
    let mut saw_prediction_key = false;
    let mut prediction = None;
    for cap in prediction_field().captures_iter(raw) {
        saw_prediction_key = true;
        match clean_value(&cap[1]) {
            "0" => prediction = Some(0),
            "1" => prediction = Some(1),
            _ => continue,
        }
        break;
    }
    let confidence = confidence_field()
        .captures_iter(raw)
        .find_map(|cap| Confidence::from_label(clean_value(&cap[1])));
    let parser_status = match (prediction, confidence) {
        (Some(_), Some(_)) => ParserStatus::Ok,
        (Some(_), None) => ParserStatus::MissingConfidence,
        (None, _) if saw_prediction_key => ParserStatus::Malformed,
        (None, _) => ParserStatus::MissingPrediction,
    };
    ParsedOutput {
        prediction,
        confidence,
        parser_status,
    }
}

/// Byte input is decoded lossily, so invalid UTF-8 is still just text.
pub fn parse_response_bytes(raw: &[u8]) -> ParsedOutput {
    parse_response(&String::from_utf8_lossy(raw))
}

/// `+weight` for a recommendation, `−weight` against, where the weight runs
/// from 1 (very confident) down to 0 (not at all confident).
pub fn proxy_score(prediction: u8, confidence: Confidence) -> f64 {
    if prediction == 1 {
        confidence.weight()
    } else {
        -confidence.weight()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_example() {
        let p = parse_response("PREDICTION: 1\nCONFIDENCE: very confident");
        assert_eq!(p.prediction, Some(1));
        assert_eq!(p.confidence, Some(Confidence::VeryConfident));
        assert_eq!(p.parser_status, ParserStatus::Ok);
    }

    #[test]
    fn free_text_has_no_prediction() {
        let p = parse_response("The patient will improve.");
        assert_eq!(p, ParsedOutput { prediction: None, confidence: None, parser_status: ParserStatus::MissingPrediction });
    }

    #[test]
    fn confidence_outside_vocabulary() {
        let p = parse_response("PREDICTION: 1\nCONFIDENCE: extremely sure");
        assert_eq!((p.prediction, p.confidence, p.parser_status), (Some(1), None, ParserStatus::MissingConfidence));
    }

    #[test]
    fn markdown_and_spacing() {
        let p = parse_response("Reasoning...\n**PREDICTION:** 0\n**CONFIDENCE:**   somewhat   UNSURE.\n");
        assert_eq!(p.prediction, Some(0));
        assert_eq!(p.confidence, Some(Confidence::SomewhatUnsure));
    }

    #[test]
    fn first_valid_field_wins() {
        let p = parse_response("PREDICTION: maybe\nPREDICTION: 0\nPREDICTION: 1\nCONFIDENCE: Neutral");
        assert_eq!(p.prediction, Some(0));
        let bad = parse_response("PREDICTION: 2\nCONFIDENCE: Neutral");
        assert_eq!(bad.parser_status, ParserStatus::Malformed);
        assert_eq!(parse_response("PREDICTION: 10").parser_status, ParserStatus::Malformed);
    }

    #[test]
    fn proxy_examples() {
        assert_eq!(proxy_score(1, Confidence::VeryConfident), 1.0);
        assert_eq!(proxy_score(0, Confidence::VeryConfident), -1.0);
        assert_eq!(proxy_score(1, Confidence::Neutral), 0.5);
    }

    #[test]
    fn invalid_utf8_is_tolerated() {
        let p = parse_response_bytes(b"PREDICTION: 1\xff\xfe\nCONFIDENCE: Neutral");
        assert_eq!(p.parser_status, ParserStatus::Ok);
    }
}
