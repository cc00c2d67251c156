//! Circle-of-Willis label table and segment adjacency.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Anatomical artery segment, keyed by its mask label code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Segment {
    Ba = 1,
    RPca = 2,
    LPca = 3,
    RIca = 4,
    RMca = 5,
    LIca = 6,
    LMca = 7,
    RPcom = 8,
    LPcom = 9,
    Acom = 10,
    RAca = 11,
    LAca = 12,
    ThirdA2 = 15,
}

/// Body side of a paired segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

impl Side {
    pub fn prefix(self) -> &'static str {
        match self {
            Side::Right => "R",
            Side::Left => "L",
        }
    }
}

/// Vessel type regardless of side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VesselKind {
    Ba,
    Pca,
    Ica,
    Mca,
    Pcom,
    Acom,
    Aca,
    ThirdA2,
}

impl VesselKind {
    pub fn name(self) -> &'static str {
        match self {
            VesselKind::Ba => "BA",
            VesselKind::Pca => "PCA",
            VesselKind::Ica => "ICA",
            VesselKind::Mca => "MCA",
            VesselKind::Pcom => "Pcom",
            VesselKind::Acom => "Acom",
            VesselKind::Aca => "ACA",
            VesselKind::ThirdA2 => "3rd-A2",
        }
    }
}

/// Every permitted foreground code, ascending.
pub const ALL_SEGMENTS: [Segment; 13] = [
    Segment::Ba,
    Segment::RPca,
    Segment::LPca,
    Segment::RIca,
    Segment::RMca,
    Segment::LIca,
    Segment::LMca,
    Segment::RPcom,
    Segment::LPcom,
    Segment::Acom,
    Segment::RAca,
    Segment::LAca,
    Segment::ThirdA2,
];

/// Label pairs that meet anatomically; drives cross-label reconnection and
/// the edge validity rules.
pub const ADJACENT_PAIRS: [(Segment, Segment); 13] = [
    (Segment::Ba, Segment::RPca),
    (Segment::Ba, Segment::LPca),
    (Segment::RIca, Segment::RMca),
    (Segment::RIca, Segment::RAca),
    (Segment::RIca, Segment::RPcom),
    (Segment::LIca, Segment::LMca),
    (Segment::LIca, Segment::LAca),
    (Segment::LIca, Segment::LPcom),
    (Segment::RPca, Segment::RPcom),
    (Segment::LPca, Segment::LPcom),
    (Segment::Acom, Segment::RAca),
    (Segment::Acom, Segment::LAca),
    (Segment::Acom, Segment::ThirdA2),
];

impl Segment {
    pub fn from_code(code: u8) -> Option<Segment> {
        ALL_SEGMENTS.iter().copied().find(|s| s.code() == code)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn kind(self) -> VesselKind {
        match self {
            Segment::Ba => VesselKind::Ba,
            Segment::RPca | Segment::LPca => VesselKind::Pca,
            Segment::RIca | Segment::LIca => VesselKind::Ica,
            Segment::RMca | Segment::LMca => VesselKind::Mca,
            Segment::RPcom | Segment::LPcom => VesselKind::Pcom,
            Segment::Acom => VesselKind::Acom,
            Segment::RAca | Segment::LAca => VesselKind::Aca,
            Segment::ThirdA2 => VesselKind::ThirdA2,
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            Segment::RPca | Segment::RIca | Segment::RMca | Segment::RPcom | Segment::RAca => {
                Some(Side::Right)
            }
            Segment::LPca | Segment::LIca | Segment::LMca | Segment::LPcom | Segment::LAca => {
                Some(Side::Left)
            }
            Segment::Ba | Segment::Acom | Segment::ThirdA2 => None,
        }
    }

    pub fn sided(kind: VesselKind, side: Side) -> Option<Segment> {
        ALL_SEGMENTS
            .iter()
            .copied()
            .find(|s| s.kind() == kind && s.side() == Some(side))
    }

    /// Display name, e.g. `"R-PCA"` or `"BA"`.
    pub fn name(self) -> &'static str {
        match self {
            Segment::Ba => "BA",
            Segment::RPca => "R-PCA",
            Segment::LPca => "L-PCA",
            Segment::RIca => "R-ICA",
            Segment::RMca => "R-MCA",
            Segment::LIca => "L-ICA",
            Segment::LMca => "L-MCA",
            Segment::RPcom => "R-Pcom",
            Segment::LPcom => "L-Pcom",
            Segment::Acom => "Acom",
            Segment::RAca => "R-ACA",
            Segment::LAca => "L-ACA",
            Segment::ThirdA2 => "3rd-A2",
        }
    }

    pub fn from_name(name: &str) -> Option<Segment> {
        ALL_SEGMENTS.iter().copied().find(|s| s.name() == name)
    }

    /// How `other` is referred to in node names on this segment: the side
    /// prefix is dropped when both segments lie on the same side.
    pub fn relative_name(self, other: Segment) -> &'static str {
        match (self.side(), other.side()) {
            (Some(a), Some(b)) if a == b => other.kind().name(),
            _ => other.name(),
        }
    }

    /// Node names that may occur on this segment.
    pub fn node_vocabulary(self) -> &'static [&'static str] {
        match self.kind() {
            VesselKind::Ba => &[
                "BA start",
                "BA bifurcation",
                "R-PCA boundary",
                "L-PCA boundary",
            ],
            VesselKind::Pca => &[
                "BA boundary",
                "Pcom bifurcation",
                "Pcom boundary",
                "PCA end",
            ],
            VesselKind::Ica => &[
                "ICA start",
                "Pcom bifurcation",
                "Pcom boundary",
                "ICA bifurcation",
                "ACA boundary",
                "MCA boundary",
            ],
            VesselKind::Mca => &["ICA boundary", "MCA end"],
            VesselKind::Pcom => &["ICA boundary", "PCA boundary"],
            VesselKind::Acom => &[
                "R-ACA boundary",
                "L-ACA boundary",
                "3rd-A2 bifurcation",
                "3rd-A2 boundary",
            ],
            VesselKind::Aca => &[
                "ICA boundary",
                "Acom bifurcation",
                "Acom boundary",
                "ACA end",
            ],
            VesselKind::ThirdA2 => &["Acom boundary", "3rd-A2 end"],
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// True when the two label codes are anatomically adjacent segments.
pub fn labels_adjacent(a: u8, b: u8) -> bool {
    match (Segment::from_code(a), Segment::from_code(b)) {
        (Some(a), Some(b)) => segments_adjacent(a, b),
        _ => false,
    }
}

pub fn segments_adjacent(a: Segment, b: Segment) -> bool {
    ADJACENT_PAIRS
        .iter()
        .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
}

/// Whether `code` is a permitted mask code (background included).
pub fn is_permitted_code(code: i64) -> bool {
    code == 0 || (0..=255).contains(&code) && Segment::from_code(code as u8).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for s in ALL_SEGMENTS {
            assert_eq!(Segment::from_code(s.code()), Some(s));
            assert_eq!(Segment::from_name(s.name()), Some(s));
        }
        assert_eq!(Segment::from_code(13), None);
        assert!(is_permitted_code(0));
        assert!(is_permitted_code(15));
        assert!(!is_permitted_code(14));
        assert!(!is_permitted_code(-1));
    }

    #[test]
    fn adjacency_is_symmetric() {
        assert!(labels_adjacent(1, 2));
        assert!(labels_adjacent(2, 1));
        assert!(!labels_adjacent(2, 3));
        assert!(!labels_adjacent(5, 11));
        assert!(labels_adjacent(10, 15));
    }

    #[test]
    fn relative_names() {
        assert_eq!(Segment::RIca.relative_name(Segment::RPcom), "Pcom");
        assert_eq!(Segment::Ba.relative_name(Segment::RPca), "R-PCA");
        assert_eq!(Segment::RPca.relative_name(Segment::Ba), "BA");
        assert_eq!(Segment::Acom.relative_name(Segment::LAca), "L-ACA");
        assert_eq!(Segment::LAca.relative_name(Segment::Acom), "Acom");
    }
}
