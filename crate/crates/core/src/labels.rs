//! Class codes shared by point labels and voxel cubes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-point / per-voxel class code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum ClassLabel {
    Empty = 0,
    Scenario = 1,
    Pedestrian = 2,
    Vehicle = 3,
    Bicycle = 4,
}

/// Number of codes including `Empty`.
pub const NUM_CODES: usize = 5;

/// Code used for the merged pedestrian + bicycle class. Merging folds
/// bicycles into the pedestrian code so cubes stay within `0..=4`.
pub const VRU: ClassLabel = ClassLabel::Pedestrian;

/// Vote tie-break order, strongest first: small road users win ties.
pub const VOTE_PRIORITY: [ClassLabel; 4] = [
    ClassLabel::Pedestrian,
    ClassLabel::Bicycle,
    ClassLabel::Vehicle,
    ClassLabel::Scenario,
];

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CODES] = [
        ClassLabel::Empty,
        ClassLabel::Scenario,
        ClassLabel::Pedestrian,
        ClassLabel::Vehicle,
        ClassLabel::Bicycle,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Empty),
            1 => Some(Self::Scenario),
            2 => Some(Self::Pedestrian),
            3 => Some(Self::Vehicle),
            4 => Some(Self::Bicycle),
            _ => None,
        }
    }

    /// Pedestrian, vehicle or bicycle.
    pub const fn is_target(self) -> bool {
        matches!(self, Self::Pedestrian | Self::Vehicle | Self::Bicycle)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Self::Empty => "empty",
            Self::Scenario => "scenario",
            Self::Pedestrian => "pedestrian",
            Self::Vehicle => "vehicle",
            Self::Bicycle => "bicycle",
        }
    }

    /// Pedestrian and bicycle collapse onto [`VRU`].
    pub const fn vru_merged(self) -> Self {
        match self {
            Self::Bicycle => VRU,
            other => other,
        }
    }
}

impl From<ClassLabel> for u8 {
    fn from(c: ClassLabel) -> u8 {
        c.code()
    }
}

impl TryFrom<u8> for ClassLabel {
    type Error = String;
    fn try_from(code: u8) -> Result<Self, String> {
        Self::from_code(code).ok_or_else(|| format!("class code {code} outside 0..=4"))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Modal non-empty class of a tally indexed by code; ties resolved by
/// [`VOTE_PRIORITY`]. Returns `Empty` when every non-empty count is zero.
pub fn majority_vote(counts: &[u32; NUM_CODES]) -> ClassLabel {
    let mut best = ClassLabel::Empty;
    let mut best_count = 0;
    for c in VOTE_PRIORITY {
        let n = counts[c as usize];
        if n > best_count {
            best = c;
            best_count = n;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for c in ClassLabel::ALL {
            assert_eq!(ClassLabel::from_code(c.code()), Some(c));
        }
        assert_eq!(ClassLabel::from_code(5), None);
    }

    #[test]
    fn vote_tie_breaks() {
        assert_eq!(majority_vote(&[0, 30, 0, 120, 0]), ClassLabel::Vehicle);
        assert_eq!(majority_vote(&[0, 0, 0, 50, 50]), ClassLabel::Bicycle);
        assert_eq!(majority_vote(&[0, 7, 7, 7, 7]), ClassLabel::Pedestrian);
        assert_eq!(majority_vote(&[0, 5, 0, 5, 0]), ClassLabel::Vehicle);
        assert_eq!(majority_vote(&[9, 0, 0, 0, 0]), ClassLabel::Empty);
    }
}
