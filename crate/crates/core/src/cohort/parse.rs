use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::record::{columns, PatientRecord, Sex};
use super::{CohortError, CohortSchema, Result};

/// Why a data row was dropped. `row` is the 1-based data row number (the
/// header is not counted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub row: usize,
    pub kind: RejectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RejectionKind {
    Placeholder { column: String },
    Malformed { column: String, value: String },
    OutOfRange { column: String, value: String },
    UnknownCategory { column: String, value: String },
    DuplicateId { patient_id: String },
    FieldCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCohort {
    pub records: Vec<PatientRecord>,
    pub rejections: Vec<Rejection>,
}

const REQUIRED: [&str; 22] = [
    columns::PATIENT_ID,
    columns::SNOT22_BASELINE,
    columns::AGE,
    columns::SEX,
    columns::CT_TOTAL,
    columns::ENDOSCOPY_TOTAL,
    columns::CRS_POLYPS,
    columns::PREVIOUS_SURGERY,
    columns::ALLERGY_TESTING,
    columns::SEPTAL_DEVIATION,
    columns::DEPRESSION,
    columns::FIBROMYALGIA,
    columns::SMOKER,
    columns::COPD,
    columns::ASTHMA,
    columns::OSA,
    columns::DIABETES,
    columns::GERD,
    columns::ASA_INTOLERANCE,
    columns::INSURANCE,
    columns::INCOME,
    columns::RACE,
];

/// Parses a canonical cohort CSV.
///
/// A missing required column is a hard error. Row-level problems
/// (placeholders in required fields, malformed numbers, out-of-range values,
/// unknown categories, duplicate ids) drop the row and are reported. A
/// placeholder in `SNOT22_6MO_TOTAL` leaves the record unlabelled instead.
/// Columns outside the canonical set are ignored.
pub fn parse_cohort(csv_bytes: &[u8], schema: &CohortSchema) -> Result<ParsedCohort> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(csv_bytes);
    let headers = reader.headers()?.clone();
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    for column in REQUIRED {
        if !index.contains_key(column) {
            return Err(CohortError::MissingColumn(column.to_string()));
        }
    }

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = row?;
        if row.len() != headers.len() {
            rejections.push(Rejection {
                row: row_number,
                kind: RejectionKind::FieldCount {
                    expected: headers.len(),
                    found: row.len(),
                },
            });
            continue;
        }
        let cells = Cells {
            row: &row,
            index: &index,
            schema,
        };
        match cells.record() {
            Ok(record) => {
                if !seen.insert(record.patient_id.clone()) {
                    rejections.push(Rejection {
                        row: row_number,
                        kind: RejectionKind::DuplicateId {
                            patient_id: record.patient_id,
                        },
                    });
                } else {
                    records.push(record);
                }
            }
            Err(kind) => rejections.push(Rejection {
                row: row_number,
                kind,
            }),
        }
    }
    Ok(ParsedCohort {
        records,
        rejections,
    })
}

struct Cells<'a> {
    row: &'a csv::StringRecord,
    index: &'a HashMap<&'a str, usize>,
    schema: &'a CohortSchema,
}

type Cell<T> = std::result::Result<T, RejectionKind>;

impl Cells<'_> {
    fn raw(&self, column: &str) -> Option<&str> {
        self.index.get(column).map(|&i| self.row[i].trim())
    }

    fn required(&self, column: &str) -> Cell<&str> {
        let raw = self.raw(column).unwrap_or("");
        if self.schema.is_placeholder(raw) {
            Err(RejectionKind::Placeholder {
                column: column.to_string(),
            })
        } else {
            Ok(raw)
        }
    }

    fn integer(&self, column: &str, min: u32, max: u32) -> Cell<u32> {
        let raw = self.required(column)?;
        parse_integer(column, raw, min, max)
    }

    fn flag(&self, column: &str) -> Cell<bool> {
        let raw = self.required(column)?;
        match raw.to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "y" => Ok(true),
            "0" | "false" | "no" | "n" => Ok(false),
            _ => Err(RejectionKind::Malformed {
                column: column.to_string(),
                value: raw.to_string(),
            }),
        }
    }

    fn category(&self, column: &str) -> Cell<String> {
        let raw = self.required(column)?;
        match self.schema.code(column, raw) {
            Ok(_) => Ok(raw.to_string()),
            Err(_) => Err(RejectionKind::UnknownCategory {
                column: column.to_string(),
                value: raw.to_string(),
            }),
        }
    }

    fn record(&self) -> Cell<PatientRecord> {
        let patient_id = self.required(columns::PATIENT_ID)?.to_string();
        let snot22_baseline = self.integer(columns::SNOT22_BASELINE, 0, 110)?;
        let snot22_6mo = match self.raw(columns::SNOT22_6MO) {
            Some(raw) if !self.schema.is_placeholder(raw) => {
                Some(parse_integer(columns::SNOT22_6MO, raw, 0, 110)?)
            }
            _ => None,
        };
        let age = self.integer(columns::AGE, 18, u32::MAX)?;
        let sex = match self.category(columns::SEX)?.as_str() {
            "Female" => Sex::Female,
            _ => Sex::Male,
        };
        let ct_total = self.integer(columns::CT_TOTAL, 0, 24)?;
        let endoscopy_total = self.integer(columns::ENDOSCOPY_TOTAL, 0, 20)?;
        let mut record = PatientRecord {
            patient_id,
            snot22_baseline,
            snot22_6mo,
            age,
            sex,
            ct_total,
            endoscopy_total,
            crs_polyps: false,
            previous_surgery: false,
            allergy_testing: false,
            septal_deviation: false,
            depression: false,
            fibromyalgia: false,
            smoker: false,
            copd: false,
            asthma: false,
            osa: false,
            diabetes: false,
            gerd: false,
            asa_intolerance: false,
            insurance: self.category(columns::INSURANCE)?,
            income_bracket: self.category(columns::INCOME)?,
            race: self.category(columns::RACE)?,
        };
        for column in columns::FLAGS {
            let value = self.flag(column)?;
            *record.flag_mut(column).expect("flag column") = value;
        }
        Ok(record)
    }
}

fn parse_integer(column: &str, raw: &str, min: u32, max: u32) -> Cell<u32> {
    // Spreadsheet exports often write integers as "60.0".
    let value = match raw.parse::<i64>() {
        Ok(v) => v,
        Err(_) => match raw.parse::<f64>() {
            Ok(f) if f.is_finite() && f.fract() == 0.0 => f as i64,
            _ => {
                return Err(RejectionKind::Malformed {
                    column: column.to_string(),
                    value: raw.to_string(),
                })
            }
        },
    };
    if value < min as i64 || value > max as i64 {
        return Err(RejectionKind::OutOfRange {
            column: column.to_string(),
            value: raw.to_string(),
        });
    }
    Ok(value as u32)
}

/// Writes records as a canonical cohort CSV (flags as 0/1, blank follow-up
/// when unlabelled). `parse_cohort` reads the output back unchanged.
pub fn serialize_cohort(records: &[PatientRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(columns::ALL)?;
    for r in records {
        let mut row: Vec<String> = vec![
            r.patient_id.clone(),
            r.snot22_baseline.to_string(),
            r.snot22_6mo.map(|v| v.to_string()).unwrap_or_default(),
            r.age.to_string(),
            r.sex.label().to_string(),
            r.ct_total.to_string(),
            r.endoscopy_total.to_string(),
        ];
        for column in columns::FLAGS {
            row.push(if r.flag(column).expect("flag column") { "1" } else { "0" }.to_string());
        }
        row.push(r.insurance.clone());
        row.push(r.income_bracket.clone());
        row.push(r.race.clone());
        writer.write_record(&row)?;
    }
    writer
        .into_inner()
        .map_err(|e| CohortError::Schema(format!("csv flush: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        columns::ALL.join(",")
    }

    fn row(id: &str, ct: &str) -> String {
        format!("{id},60,45,52,Male,{ct},8,1,0,1,0,0,0,1,0,0,0,0,0,0,Private,50-75k,White")
    }

    #[test]
    fn empty_file_with_header() {
        let parsed = parse_cohort(header().as_bytes(), &CohortSchema::canonical()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed.rejections.is_empty());
    }

    #[test]
    fn blank_ct_rows_are_rejected() {
        let mut text = header();
        for i in 0..10 {
            let ct = if i == 3 || i == 7 { "" } else { "12" };
            text.push('\n');
            text.push_str(&row(&format!("P{i}"), ct));
        }
        let parsed = parse_cohort(text.as_bytes(), &CohortSchema::canonical()).unwrap();
        assert_eq!(parsed.records.len(), 8);
        assert_eq!(parsed.rejections.len(), 2);
        assert_eq!(parsed.rejections[0].row, 4);
        assert_eq!(
            parsed.rejections[1].kind,
            RejectionKind::Placeholder {
                column: "BLN_CT_TOTAL".into()
            }
        );
    }

    #[test]
    fn missing_column_is_fatal() {
        let text = header().replace(",BLN_CT_TOTAL", "");
        match parse_cohort(text.as_bytes(), &CohortSchema::canonical()) {
            Err(CohortError::MissingColumn(c)) => assert_eq!(c, "BLN_CT_TOTAL"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn row_level_errors() {
        let text = format!(
            "{}\n{}\n{}\n{}\n{}\n{}",
            header(),
            row("A", "twelve"),
            row("B", "25"),
            row("C", "12").replace("Private", "Platinum"),
            row("D", "12"),
            row("D", "12"),
        );
        let parsed = parse_cohort(text.as_bytes(), &CohortSchema::canonical()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let kinds: Vec<_> = parsed.rejections.iter().map(|r| &r.kind).collect();
        assert!(matches!(kinds[0], RejectionKind::Malformed { .. }));
        assert!(matches!(kinds[1], RejectionKind::OutOfRange { .. }));
        assert!(matches!(kinds[2], RejectionKind::UnknownCategory { .. }));
        assert!(matches!(kinds[3], RejectionKind::DuplicateId { .. }));
        assert_eq!(parsed.rejections[0].row, 1);
    }

    #[test]
    fn missing_follow_up_leaves_record_unlabelled() {
        let text = format!("{}\n{}", header(), row("A", "12").replacen(",45,", ",NA,", 1));
        let parsed = parse_cohort(text.as_bytes(), &CohortSchema::canonical()).unwrap();
        assert_eq!(parsed.records[0].snot22_6mo, None);
    }

    #[test]
    fn follow_up_column_is_optional() {
        let text = format!(
            "{}\n{}",
            header().replace(",SNOT22_6MO_TOTAL", ""),
            row("A", "12").replacen(",45,", ",", 1)
        );
        let parsed = parse_cohort(text.as_bytes(), &CohortSchema::canonical()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].snot22_baseline, 60);
    }
}
