//! Skeleton descriptor for the upper-body joint set.
//!
//! All motion data in this crate lives in a canonical, speaker-centric frame:
//!
//! * `+X` points to the speaker's right,
//! * `+Y` points up,
//! * `+Z` points forward (the direction the speaker faces).
//!
//! Clips are stored root-relative: the neck sits at the origin and coordinates
//! are scaled so the shoulder span is 1.0. [`crate::dataset::ingest`] applies
//! that normalization; the rest of the crate assumes it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical joint names, in storage order.
pub const CANONICAL_JOINTS: [&str; 8] = [
    "neck",
    "head",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
];

/// Joint layout plus the numeric rest pose.
///
/// The struct resolves the five functionally required joints (neck, both
/// shoulders, both wrists) to indices once at construction so hot loops can
/// index frames directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SkeletonData", into = "SkeletonData")]
pub struct Skeleton {
    joint_names: Vec<String>,
    rest_pose: Vec<[f64; 3]>,
    neck: usize,
    r_shoulder: usize,
    r_wrist: usize,
    l_shoulder: usize,
    l_wrist: usize,
}

/// Serialized form: names and rest pose only, indices are re-derived on load.
#[derive(Serialize, Deserialize)]
struct SkeletonData {
    joint_names: Vec<String>,
    rest_pose: Vec<[f64; 3]>,
}

impl Skeleton {
    /// The default 8-joint upper-body skeleton with arms hanging at rest.
    ///
    /// Rest wrists sit straight below the shoulders, which encodes as
    /// Place/Low on both arms.
    pub fn canonical() -> Skeleton {
        let rest = vec![
            [0.0, 0.0, 0.0],    // neck
            [0.0, 0.25, 0.0],   // head
            [0.5, 0.0, 0.0],    // r_shoulder
            [0.5, -0.45, 0.0],  // r_elbow
            [0.5, -0.9, 0.0],   // r_wrist
            [-0.5, 0.0, 0.0],   // l_shoulder
            [-0.5, -0.45, 0.0], // l_elbow
            [-0.5, -0.9, 0.0],  // l_wrist
        ];
        let names = CANONICAL_JOINTS.iter().map(|s| s.to_string()).collect();
        Skeleton::new(names, rest).expect("canonical skeleton is well formed")
    }

    /// Builds a skeleton from names and a rest pose of the same length.
    ///
    /// `neck`, `r_shoulder`, `r_wrist`, `l_shoulder` and `l_wrist` must all be
    /// present; every named op (motion energy, labanotation, normalization)
    /// depends on them.
    pub fn new(joint_names: Vec<String>, rest_pose: Vec<[f64; 3]>) -> Result<Skeleton> {
        if joint_names.is_empty() {
            return Err(Error::invalid("skeleton needs at least one joint"));
        }
        if joint_names.len() != rest_pose.len() {
            return Err(Error::invalid(format!(
                "skeleton has {} joint names but {} rest positions",
                joint_names.len(),
                rest_pose.len()
            )));
        }
        let find = |name: &str| -> Result<usize> {
            joint_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::invalid(format!("skeleton is missing joint {name:?}")))
        };
        let neck = find("neck")?;
        let r_shoulder = find("r_shoulder")?;
        let r_wrist = find("r_wrist")?;
        let l_shoulder = find("l_shoulder")?;
        let l_wrist = find("l_wrist")?;
        Ok(Skeleton {
            joint_names,
            rest_pose,
            neck,
            r_shoulder,
            r_wrist,
            l_shoulder,
            l_wrist,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Rest pose as raw joint positions (same order as `joint_names`).
    pub fn rest_pose(&self) -> &[[f64; 3]] {
        &self.rest_pose
    }

    pub fn neck(&self) -> usize {
        self.neck
    }

    pub fn r_shoulder(&self) -> usize {
        self.r_shoulder
    }

    pub fn r_wrist(&self) -> usize {
        self.r_wrist
    }

    pub fn l_shoulder(&self) -> usize {
        self.l_shoulder
    }

    pub fn l_wrist(&self) -> usize {
        self.l_wrist
    }
}

impl TryFrom<SkeletonData> for Skeleton {
    type Error = Error;

    fn try_from(data: SkeletonData) -> Result<Skeleton> {
        Skeleton::new(data.joint_names, data.rest_pose)
    }
}

impl From<Skeleton> for SkeletonData {
    fn from(s: Skeleton) -> SkeletonData {
        SkeletonData { joint_names: s.joint_names, rest_pose: s.rest_pose }
    }
}
