//! Per-mouse ordinal agreement, bucketed by pain phase.

use std::fmt;

use super::metrics::qwk;
use super::taxonomy::{Condition, Timepoint};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// D0 to D3
    Acute,
    /// D3 to D7
    Middle,
    /// D7 to D21
    Chronic,
    Overall,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Acute, Phase::Middle, Phase::Chronic, Phase::Overall];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Acute => "acute_D0_D3",
            Phase::Middle => "D3_D7",
            Phase::Chronic => "chronic_D7_D21",
            Phase::Overall => "overall",
        }
    }

    /// Bucket boundaries are inclusive, so D3 and D7 fall in two buckets.
    pub fn contains(self, tp: Timepoint) -> bool {
        match self {
            Phase::Acute => tp <= Timepoint::D3,
            Phase::Middle => (Timepoint::D3..=Timepoint::D7).contains(&tp),
            Phase::Chronic => tp >= Timepoint::D7,
            Phase::Overall => true,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One recording session of a mouse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesPoint {
    pub timepoint: Timepoint,
    pub true_ordinal: usize,
    pub pred_ordinal: usize,
}

/// All sessions of one mouse, ordinals ranked on its condition's timeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MouseSeries {
    pub mouse_id: String,
    pub condition: Condition,
    pub points: Vec<SeriesPoint>,
}

/// Rows Formalin, SNI, Control, Total; columns [`Phase::ALL`].
/// `None` marks a bucket with no data.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    pub rows: Vec<(String, [Option<f64>; 4])>,
}

fn mouse_qwk(series: &MouseSeries, phase: Phase) -> Result<Option<f64>> {
    let pts: Vec<&SeriesPoint> = series
        .points
        .iter()
        .filter(|p| phase.contains(p.timepoint))
        .collect();
    if pts.is_empty() {
        return Ok(None);
    }
    let k = series.condition.timeline().len();
    let preds: Vec<usize> = pts.iter().map(|p| p.pred_ordinal).collect();
    let truths: Vec<usize> = pts.iter().map(|p| p.true_ordinal).collect();
    qwk(&preds, &truths, k).map(Some)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean per-mouse QWK for every (condition, phase) cell.
pub fn qwk_by_phase(series: &[MouseSeries]) -> Result<PhaseTable> {
    let mut per_condition: Vec<[Vec<f64>; 4]> = vec![Default::default(); 3];
    let mut total: [Vec<f64>; 4] = Default::default();
    for s in series {
        let row = Condition::ALL
            .iter()
            .position(|&c| c == s.condition)
            .unwrap();
        for (col, phase) in Phase::ALL.iter().enumerate() {
            if let Some(v) = mouse_qwk(s, *phase)? {
                per_condition[row][col].push(v);
                total[col].push(v);
            }
        }
    }
    let label = |c: Condition| match c {
        Condition::Formalin => "Formalin",
        Condition::Sni => "SNI",
        Condition::Control => "Control",
    };
    let mut rows: Vec<(String, [Option<f64>; 4])> = Condition::ALL
        .iter()
        .zip(&per_condition)
        .map(|(&c, cells)| {
            (
                label(c).to_string(),
                std::array::from_fn(|i| mean(&cells[i])),
            )
        })
        .collect();
    rows.push(("Total".into(), std::array::from_fn(|i| mean(&total[i]))));
    Ok(PhaseTable { rows })
}
