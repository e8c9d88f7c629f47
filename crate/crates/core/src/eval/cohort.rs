//! Percentage breakdown of windowed 3-class predictions per treatment cohort.

use super::taxonomy::ThreeClass;
use crate::error::{Error, Result};

/// Column order of the report.
pub const COHORT_COLUMNS: [ThreeClass; 3] = [
    ThreeClass::Inflammatory,
    ThreeClass::NoPain,
    ThreeClass::Neuropathic,
];

/// Header names matching [`COHORT_COLUMNS`].
pub const COHORT_HEADERS: [&str; 3] = ["Formalin", "Control", "SNI"];

#[derive(Debug, Clone, PartialEq)]
pub struct CohortRow {
    pub cohort: String,
    pub windows: usize,
    /// Percentages in [`COHORT_COLUMNS`] order.
    pub percent: [f64; 3],
}

impl CohortRow {
    pub fn percent_of(&self, class: ThreeClass) -> f64 {
        self.percent[COHORT_COLUMNS.iter().position(|&c| c == class).unwrap()]
    }
}

/// One row per cohort, in input order.
pub fn cohort_report(cohorts: &[(String, Vec<ThreeClass>)]) -> Result<Vec<CohortRow>> {
    cohorts
        .iter()
        .map(|(name, preds)| {
            if preds.is_empty() {
                return Err(Error::Dataset(format!(
                    "cohort {name:?} has no window predictions"
                )));
            }
            let n = preds.len() as f64;
            let percent = COHORT_COLUMNS
                .map(|c| 100.0 * preds.iter().filter(|&&p| p == c).count() as f64 / n);
            Ok(CohortRow {
                cohort: name.clone(),
                windows: preds.len(),
                percent,
            })
        })
        .collect()
}

/// CSV text with a `cohort,windows,Formalin,Control,SNI` header.
pub fn cohort_csv(rows: &[CohortRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cohort", "windows"];
    header.extend(COHORT_HEADERS);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.cohort.clone(), r.windows.to_string()];
        rec.extend(r.percent.iter().map(|p| format!("{p:.2}")));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
