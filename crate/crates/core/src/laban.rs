//! Labanotation-style arm symbols: a coarse direction/level code per arm,
//! plus a metric between coded poses used for No-Gesture retrieval.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::Pose;
use crate::skeleton::Skeleton;

/// Horizontal share (of the unit arm vector) below which the arm counts as
/// pointing straight up or down, i.e. direction `Place`.
pub const PLACE_THRESHOLD: f64 = 0.15;
/// Elevation band edges in degrees: above +30 is High, below -30 is Low.
pub const LEVEL_BAND_DEGREES: f64 = 30.0;

/// Horizontal direction of the arm, quantized to 45-degree sectors, with
/// `Place` for arms pointing (almost) straight up or down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Place,
    Forward,
    ForwardRight,
    Right,
    BackwardRight,
    Backward,
    BackwardLeft,
    Left,
    ForwardLeft,
}

/// The eight compass directions in ring order (index = sector).
pub const DIRECTION_RING: [Direction; 8] = [
    Direction::Forward,
    Direction::ForwardRight,
    Direction::Right,
    Direction::BackwardRight,
    Direction::Backward,
    Direction::BackwardLeft,
    Direction::Left,
    Direction::ForwardLeft,
];

/// All nine directions, `Place` first.
pub const ALL_DIRECTIONS: [Direction; 9] = [
    Direction::Place,
    Direction::Forward,
    Direction::ForwardRight,
    Direction::Right,
    Direction::BackwardRight,
    Direction::Backward,
    Direction::BackwardLeft,
    Direction::Left,
    Direction::ForwardLeft,
];

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Place => "Place",
            Direction::Forward => "Forward",
            Direction::ForwardRight => "ForwardRight",
            Direction::Right => "Right",
            Direction::BackwardRight => "BackwardRight",
            Direction::Backward => "Backward",
            Direction::BackwardLeft => "BackwardLeft",
            Direction::Left => "Left",
            Direction::ForwardLeft => "ForwardLeft",
        }
    }

    fn ring_index(self) -> Option<usize> {
        DIRECTION_RING.iter().position(|&d| d == self)
    }
}

/// Vertical band of the arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Low,
    Middle,
    High,
}

pub const ALL_LEVELS: [Level; 3] = [Level::Low, Level::Middle, Level::High];

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "Low",
            Level::Middle => "Middle",
            Level::High => "High",
        }
    }

    fn ordinal(self) -> i32 {
        match self {
            Level::Low => 0,
            Level::Middle => 1,
            Level::High => 2,
        }
    }
}

/// One arm's symbol: where it points and how high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmSymbol {
    pub direction: Direction,
    pub level: Level,
}

impl ArmSymbol {
    pub fn new(direction: Direction, level: Level) -> ArmSymbol {
        ArmSymbol { direction, level }
    }
}

/// Both arms' symbols for one pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LabanPose {
    pub left: ArmSymbol,
    pub right: ArmSymbol,
}

impl LabanPose {
    pub fn new(left: ArmSymbol, right: ArmSymbol) -> LabanPose {
        LabanPose { left, right }
    }

    /// Rest coding: both arms hang straight down.
    pub fn rest() -> LabanPose {
        let hang = ArmSymbol::new(Direction::Place, Level::Low);
        LabanPose::new(hang, hang)
    }
}

/// Codes a pose into per-arm symbols from the wrist-relative-to-shoulder
/// vector of each arm.
///
/// The arm vector is normalized before thresholding, so the coding depends
/// only on the arm's direction: it is invariant under translating the whole
/// pose and under uniform scaling. A degenerate (zero-length) arm codes as
/// Place/Low.
pub fn encode(pose: &Pose, skeleton: &Skeleton) -> Result<LabanPose> {
    if pose.joint_count() != skeleton.joint_count() {
        return Err(Error::SkeletonMismatch(format!(
            "pose has {} joints, skeleton has {}",
            pose.joint_count(),
            skeleton.joint_count()
        )));
    }
    let arm = |wrist: usize, shoulder: usize| -> ArmSymbol {
        let w = pose.joints()[wrist];
        let s = pose.joints()[shoulder];
        encode_arm([w[0] - s[0], w[1] - s[1], w[2] - s[2]])
    };
    Ok(LabanPose {
        right: arm(skeleton.r_wrist(), skeleton.r_shoulder()),
        left: arm(skeleton.l_wrist(), skeleton.l_shoulder()),
    })
}

fn encode_arm(v: [f64; 3]) -> ArmSymbol {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm < 1e-9 {
        return ArmSymbol::new(Direction::Place, Level::Low);
    }
    let unit = [v[0] / norm, v[1] / norm, v[2] / norm];
    let horizontal = (unit[0] * unit[0] + unit[2] * unit[2]).sqrt();

    let elevation = unit[1].asin().to_degrees();
    let level = if elevation > LEVEL_BAND_DEGREES {
        Level::High
    } else if elevation < -LEVEL_BAND_DEGREES {
        Level::Low
    } else {
        Level::Middle
    };

    if horizontal < PLACE_THRESHOLD {
        return ArmSymbol::new(Direction::Place, level);
    }
    // Azimuth: 0 = Forward (+Z), 90 = Right (+X), sectors of 45 degrees.
    let azimuth = unit[0].atan2(unit[2]).to_degrees();
    let sector = ((azimuth / 45.0).round() as i64).rem_euclid(8) as usize;
    ArmSymbol::new(DIRECTION_RING[sector], level)
}

/// Distance between two direction symbols.
///
/// Directions form a graph: the eight compass sectors in a ring (step cost 1)
/// plus Place adjacent to every sector (cost 1). The distance is the shortest
/// path in that graph, so opposite sectors cost 2 (via Place), never more.
/// Capping at the Place route is what keeps the triangle inequality intact.
fn direction_distance(a: Direction, b: Direction) -> u32 {
    if a == b {
        return 0;
    }
    match (a.ring_index(), b.ring_index()) {
        (Some(i), Some(j)) => {
            let diff = i.abs_diff(j);
            let ring = diff.min(8 - diff) as u32;
            ring.min(2)
        }
        // Exactly one of the two is Place.
        _ => 1,
    }
}

fn arm_distance(a: ArmSymbol, b: ArmSymbol) -> u32 {
    direction_distance(a.direction, b.direction)
        + a.level.ordinal().abs_diff(b.level.ordinal())
}

/// Metric between coded poses: per-arm direction distance plus level
/// difference, summed over both arms.
pub fn distance(a: &LabanPose, b: &LabanPose) -> u32 {
    arm_distance(a.left, b.left) + arm_distance(a.right, b.right)
}

// ── text form ──────────────────────────────────────────────────────────────
// "L:Forward/Middle R:Place/Low", the form used in library files.

impl fmt::Display for LabanPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "L:{}/{} R:{}/{}",
            self.left.direction.as_str(),
            self.left.level.as_str(),
            self.right.direction.as_str(),
            self.right.level.as_str()
        )
    }
}

impl FromStr for LabanPose {
    type Err = Error;

    fn from_str(s: &str) -> Result<LabanPose> {
        let bad = || Error::invalid(format!("cannot parse laban pose from {s:?}"));
        let mut parts = s.split_whitespace();
        let left = parts.next().ok_or_else(bad)?;
        let right = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let parse_arm = |text: &str, prefix: &str| -> Result<ArmSymbol> {
            let rest = text.strip_prefix(prefix).ok_or_else(bad)?;
            let (dir, level) = rest.split_once('/').ok_or_else(bad)?;
            let direction = ALL_DIRECTIONS
                .iter()
                .copied()
                .find(|d| d.as_str() == dir)
                .ok_or_else(bad)?;
            let level = ALL_LEVELS
                .iter()
                .copied()
                .find(|l| l.as_str() == level)
                .ok_or_else(bad)?;
            Ok(ArmSymbol::new(direction, level))
        };
        Ok(LabanPose {
            left: parse_arm(left, "L:")?,
            right: parse_arm(right, "R:")?,
        })
    }
}

impl TryFrom<String> for LabanPose {
    type Error = Error;

    fn try_from(s: String) -> Result<LabanPose> {
        s.parse()
    }
}

impl From<LabanPose> for String {
    fn from(p: LabanPose) -> String {
        p.to_string()
    }
}

/// Every arm symbol (9 directions x 3 levels = 27).
pub fn all_arm_symbols() -> Vec<ArmSymbol> {
    let mut out = Vec::with_capacity(27);
    for &d in &ALL_DIRECTIONS {
        for &l in &ALL_LEVELS {
            out.push(ArmSymbol::new(d, l));
        }
    }
    out
}
