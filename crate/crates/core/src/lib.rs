//! Co-speech gesture synthesis from text.
//!
//! The crate turns a transcript (and optionally its audio) into a skeletal
//! motion clip. Each word is classified as beat, imagistic or no-gesture;
//! consecutive words of one type form spans; every span retrieves a motion
//! from a pre-built gesture library, is retimed to the span's duration, and
//! the pieces are merged with short blended transitions.
//!
//! Module map:
//!
//! - [`skeleton`], [`motion`]: the canonical upper-body skeleton and clip
//!   math (energy keyframes, retiming, blending, resampling).
//! - [`signal`]: audio intensity, Gaussian smoothing, audio keyframes and the
//!   word-duration model used when no audio is given.
//! - [`laban`]: a coarse directional coding of arm poses with a metric, used
//!   to match no-gesture clips to their surroundings.
//! - [`text`]: tokenizer, word embeddings, linear classification heads and
//!   label smoothing.
//! - [`library`]: the gesture library build (indexes, clustering) and its
//!   retrieval queries.
//! - [`pipeline`]: the end-to-end generator.
//! - [`dataset`], [`export`]: dataset ingestion and motion/BVH serialization.

pub mod dataset;
pub mod error;
pub mod export;
pub mod laban;
pub mod library;
pub mod motion;
pub mod pipeline;
pub mod signal;
pub mod skeleton;
pub mod text;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// The three gesture classes a word can be assigned.
///
/// The declaration order doubles as the tie-break order wherever a single
/// class must be picked from equal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureType {
    /// Rhythmic, meaning-free strokes aligned with speech emphasis.
    Beat,
    /// Motions depicting a concrete word ("big", "round", "throw").
    Imagistic,
    /// Rest or idle motion between gesturing stretches.
    NoGesture,
}

impl GestureType {
    /// All classes in classifier output order.
    pub const ALL: [GestureType; 3] = [GestureType::Beat, GestureType::Imagistic, GestureType::NoGesture];

    /// Index of this class in classifier logits and [`Self::ALL`].
    pub fn class_index(self) -> usize {
        match self {
            GestureType::Beat => 0,
            GestureType::Imagistic => 1,
            GestureType::NoGesture => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GestureType::Beat => "beat",
            GestureType::Imagistic => "imagistic",
            GestureType::NoGesture => "nogesture",
        }
    }
}

impl std::fmt::Display for GestureType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GestureType {
    type Err = Error;

    fn from_str(s: &str) -> Result<GestureType> {
        match s {
            "beat" => Ok(GestureType::Beat),
            "imagistic" => Ok(GestureType::Imagistic),
            "nogesture" => Ok(GestureType::NoGesture),
            other => Err(Error::invalid(format!(
                "unknown gesture type {other:?} (expected beat, imagistic or nogesture)"
            ))),
        }
    }
}
