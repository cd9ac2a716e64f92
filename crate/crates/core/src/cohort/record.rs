use serde::{Deserialize, Serialize};

/// Canonical CSV column names.
pub mod columns {
    pub const PATIENT_ID: &str = "PATIENT_ID";
    pub const SNOT22_BASELINE: &str = "SNOT22_BLN_TOTAL";
    pub const SNOT22_6MO: &str = "SNOT22_6MO_TOTAL";
    pub const AGE: &str = "Age";
    pub const SEX: &str = "SEX";
    pub const CT_TOTAL: &str = "BLN_CT_TOTAL";
    pub const ENDOSCOPY_TOTAL: &str = "BLN_ENDO_TOTAL";
    pub const CRS_POLYPS: &str = "CRS_POLYPS";
    pub const PREVIOUS_SURGERY: &str = "PREVIOUS_SURGERY";
    pub const ALLERGY_TESTING: &str = "ALLERGY_TESTING";
    pub const SEPTAL_DEVIATION: &str = "SEPTAL_DEVIATION";
    pub const DEPRESSION: &str = "DEPRESSION";
    pub const FIBROMYALGIA: &str = "FIBROMYALGIA";
    pub const SMOKER: &str = "SMOKER";
    pub const COPD: &str = "COPD";
    pub const ASTHMA: &str = "ASTHMA";
    pub const OSA: &str = "OSA";
    pub const DIABETES: &str = "DIABETES";
    pub const GERD: &str = "GERD";
    pub const ASA_INTOLERANCE: &str = "ASA_INTOLERANCE";
    pub const INSURANCE: &str = "INSURANCE";
    pub const INCOME: &str = "INCOME";
    pub const RACE: &str = "RACE";

    /// Boolean columns in schema order.
    pub const FLAGS: [&str; 13] = [
        CRS_POLYPS,
        PREVIOUS_SURGERY,
        ALLERGY_TESTING,
        SEPTAL_DEVIATION,
        DEPRESSION,
        FIBROMYALGIA,
        SMOKER,
        COPD,
        ASTHMA,
        OSA,
        DIABETES,
        GERD,
        ASA_INTOLERANCE,
    ];

    /// Header order used when writing a cohort.
    pub const ALL: [&str; 23] = [
        PATIENT_ID,
        SNOT22_BASELINE,
        SNOT22_6MO,
        AGE,
        SEX,
        CT_TOTAL,
        ENDOSCOPY_TOTAL,
        CRS_POLYPS,
        PREVIOUS_SURGERY,
        ALLERGY_TESTING,
        SEPTAL_DEVIATION,
        DEPRESSION,
        FIBROMYALGIA,
        SMOKER,
        COPD,
        ASTHMA,
        OSA,
        DIABETES,
        GERD,
        ASA_INTOLERANCE,
        INSURANCE,
        INCOME,
        RACE,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn label(self) -> &'static str {
        match self {
            Sex::Female => "Female",
            Sex::Male => "Male",
        }
    }
}

/// One pre-operative surgical case.
///
/// `snot22_6mo` exists only so a label can be derived; it is never a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub snot22_baseline: u32,
    pub snot22_6mo: Option<u32>,
    pub age: u32,
    pub sex: Sex,
    pub ct_total: u32,
    pub endoscopy_total: u32,
    pub crs_polyps: bool,
    pub previous_surgery: bool,
    pub allergy_testing: bool,
    pub septal_deviation: bool,
    pub depression: bool,
    pub fibromyalgia: bool,
    pub smoker: bool,
    pub copd: bool,
    pub asthma: bool,
    pub osa: bool,
    pub diabetes: bool,
    pub gerd: bool,
    pub asa_intolerance: bool,
    pub insurance: String,
    pub income_bracket: String,
    pub race: String,
}

impl PatientRecord {
    /// Value of a boolean column by canonical name.
    pub fn flag(&self, column: &str) -> Option<bool> {
        Some(match column {
            columns::CRS_POLYPS => self.crs_polyps,
            columns::PREVIOUS_SURGERY => self.previous_surgery,
            columns::ALLERGY_TESTING => self.allergy_testing,
            columns::SEPTAL_DEVIATION => self.septal_deviation,
            columns::DEPRESSION => self.depression,
            columns::FIBROMYALGIA => self.fibromyalgia,
            columns::SMOKER => self.smoker,
            columns::COPD => self.copd,
            columns::ASTHMA => self.asthma,
            columns::OSA => self.osa,
            columns::DIABETES => self.diabetes,
            columns::GERD => self.gerd,
            columns::ASA_INTOLERANCE => self.asa_intolerance,
            _ => return None,
        })
    }

    pub(crate) fn flag_mut(&mut self, column: &str) -> Option<&mut bool> {
        Some(match column {
            columns::CRS_POLYPS => &mut self.crs_polyps,
            columns::PREVIOUS_SURGERY => &mut self.previous_surgery,
            columns::ALLERGY_TESTING => &mut self.allergy_testing,
            columns::SEPTAL_DEVIATION => &mut self.septal_deviation,
            columns::DEPRESSION => &mut self.depression,
            columns::FIBROMYALGIA => &mut self.fibromyalgia,
            columns::SMOKER => &mut self.smoker,
            columns::COPD => &mut self.copd,
            columns::ASTHMA => &mut self.asthma,
            columns::OSA => &mut self.osa,
            columns::DIABETES => &mut self.diabetes,
            columns::GERD => &mut self.gerd,
            columns::ASA_INTOLERANCE => &mut self.asa_intolerance,
            _ => return None,
        })
    }

    /// Checks the numeric range invariants. Returns the offending column.
    pub fn range_violation(&self) -> Option<&'static str> {
        if self.snot22_baseline > 110 {
            return Some(columns::SNOT22_BASELINE);
        }
        if self.snot22_6mo.is_some_and(|v| v > 110) {
            return Some(columns::SNOT22_6MO);
        }
        if self.age < 18 {
            return Some(columns::AGE);
        }
        if self.ct_total > 24 {
            return Some(columns::CT_TOTAL);
        }
        if self.endoscopy_total > 20 {
            return Some(columns::ENDOSCOPY_TOTAL);
        }
        None
    }

    /// A valid, label-free record with every flag off. Handy for tests and
    /// documentation examples.
    pub fn example(patient_id: &str) -> Self {
        PatientRecord {
            patient_id: patient_id.to_string(),
            snot22_baseline: 60,
            snot22_6mo: None,
            age: 40,
            sex: Sex::Female,
            ct_total: 10,
            endoscopy_total: 8,
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
            insurance: "Private".to_string(),
            income_bracket: "50-75k".to_string(),
            race: "White".to_string(),
        }
    }
}
