//! The 15-class (condition, timepoint) taxonomy and its 3-class collapse.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    Formalin,
    Sni,
    Control,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Formalin, Condition::Sni, Condition::Control];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Formalin => "formalin",
            Condition::Sni => "sni",
            Condition::Control => "control",
        }
    }

    /// Ordered timepoints of this condition's recordings, starting at the
    /// shared `D0` baseline.
    pub fn timeline(self) -> &'static [Timepoint] {
        use Timepoint::*;
        match self {
            Condition::Formalin => &[D0, Min1, H2, D3, D5, D7, D14],
            Condition::Sni | Condition::Control => &[D0, D3, D7, D14, D21],
        }
    }

    /// Rank of `tp` in [`Self::timeline`], if recorded for this condition.
    pub fn ordinal(self, tp: Timepoint) -> Option<usize> {
        self.timeline().iter().position(|&t| t == tp)
    }

    /// Rank of the latest timeline point not after `tp`. Maps predicted
    /// timepoints from other conditions onto this condition's scale.
    pub fn ordinal_floor(self, tp: Timepoint) -> usize {
        self.timeline().iter().rposition(|&t| t <= tp).unwrap_or(0)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "formalin" => Ok(Condition::Formalin),
            "sni" => Ok(Condition::Sni),
            "control" => Ok(Condition::Control),
            other => Err(Error::Label(format!("unknown condition {other:?}"))),
        }
    }
}

/// Recording timepoints in chronological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Timepoint {
    D0,
    Min1,
    H2,
    D3,
    D5,
    D7,
    D14,
    D21,
}

impl Timepoint {
    pub const ALL: [Timepoint; 8] = [
        Timepoint::D0,
        Timepoint::Min1,
        Timepoint::H2,
        Timepoint::D3,
        Timepoint::D5,
        Timepoint::D7,
        Timepoint::D14,
        Timepoint::D21,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Timepoint::D0 => "D0",
            Timepoint::Min1 => "1min",
            Timepoint::H2 => "2h",
            Timepoint::D3 => "D3",
            Timepoint::D5 => "D5",
            Timepoint::D7 => "D7",
            Timepoint::D14 => "D14",
            Timepoint::D21 => "D21",
        }
    }
}

impl fmt::Display for Timepoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Timepoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Timepoint::ALL
            .into_iter()
            .find(|tp| tp.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Label(format!("unknown timepoint {t:?}")))
    }
}

/// Class id 0..14 of a valid (condition, timepoint) pair.
///
/// Order: `D0` baseline; formalin × {1min, 2h, D3, D5, D7, D14};
/// sni × {D3, D7, D14, D21}; control × {D3, D7, D14, D21}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PainLabel(u8);

pub const N_CLASSES: usize = 15;

const TABLE: [(Option<Condition>, Timepoint); N_CLASSES] = {
    use Condition::*;
    use Timepoint::*;
    [
        (None, D0),
        (Some(Formalin), Min1),
        (Some(Formalin), H2),
        (Some(Formalin), D3),
        (Some(Formalin), D5),
        (Some(Formalin), D7),
        (Some(Formalin), D14),
        (Some(Sni), D3),
        (Some(Sni), D7),
        (Some(Sni), D14),
        (Some(Sni), D21),
        (Some(Control), D3),
        (Some(Control), D7),
        (Some(Control), D14),
        (Some(Control), D21),
    ]
};

impl PainLabel {
    pub fn all() -> impl Iterator<Item = PainLabel> {
        (0..N_CLASSES as u8).map(PainLabel)
    }

    pub fn from_id(id: usize) -> Result<Self> {
        if id < N_CLASSES {
            Ok(PainLabel(id as u8))
        } else {
            Err(Error::Label(format!("class id {id} outside 0..15")))
        }
    }

    /// `D0` is the shared baseline and accepts any (or no) condition.
    pub fn new(condition: Option<Condition>, timepoint: Timepoint) -> Result<Self> {
        if timepoint == Timepoint::D0 {
            return Ok(PainLabel(0));
        }
        TABLE
            .iter()
            .position(|&(c, t)| c == condition && t == timepoint)
            .map(|i| PainLabel(i as u8))
            .ok_or_else(|| {
                Error::Label(format!(
                    "{} at {timepoint} is not a recorded combination",
                    condition.map_or("no condition", Condition::name)
                ))
            })
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn condition(self) -> Option<Condition> {
        TABLE[self.id()].0
    }

    pub fn timepoint(self) -> Timepoint {
        TABLE[self.id()].1
    }

    pub fn collapse(self) -> ThreeClass {
        collapse_to_3(self)
    }

    pub fn short_name(self) -> String {
        match self.condition() {
            None => "D0".into(),
            Some(c) => format!("{}-{}", c.name(), self.timepoint()),
        }
    }
}

impl fmt::Display for PainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreeClass {
    NoPain = 0,
    Inflammatory = 1,
    Neuropathic = 2,
}

impl ThreeClass {
    pub const ALL: [ThreeClass; 3] = [
        ThreeClass::NoPain,
        ThreeClass::Inflammatory,
        ThreeClass::Neuropathic,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Result<Self> {
        ThreeClass::ALL
            .get(id)
            .copied()
            .ok_or_else(|| Error::Label(format!("3-class id {id} outside 0..3")))
    }

    pub fn name(self) -> &'static str {
        match self {
            ThreeClass::NoPain => "no_pain",
            ThreeClass::Inflammatory => "inflammatory",
            ThreeClass::Neuropathic => "neuropathic",
        }
    }

    /// Representative fine label, used when a 3-class prediction has to
    /// be placed back on the 15-class scale.
    pub fn representative(self) -> PainLabel {
        match self {
            ThreeClass::NoPain => PainLabel(12),
            ThreeClass::Inflammatory => PainLabel(1),
            ThreeClass::Neuropathic => PainLabel(8),
        }
    }
}

/// formalin → inflammatory, sni → neuropathic, control and `D0` → no pain.
pub fn collapse_to_3(label: PainLabel) -> ThreeClass {
    match label.condition() {
        Some(Condition::Formalin) => ThreeClass::Inflammatory,
        Some(Condition::Sni) => ThreeClass::Neuropathic,
        Some(Condition::Control) | None => ThreeClass::NoPain,
    }
}
