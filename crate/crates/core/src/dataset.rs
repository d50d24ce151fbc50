//! Dataset ingestion: a line-delimited JSON file of typed motion records.
//!
//! Each line carries one record:
//!
//! ```json
//! {"id": "...", "type": "beat", "fps": 25.0,
//!  "joints": [[[x, y, z], ...], ...],
//!  "words": ["..."], "imagistic_words": ["..."], "audio": "path.wav"}
//! ```
//!
//! `joints` is frame-major (`joints[t][j]`). `imagistic_words` and `audio`
//! are optional. Ingestion validates every record, normalizes clips into the
//! canonical frame and resamples them to the target rate, so downstream code
//! never sees raw capture coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{GestureRecord, TypeCounts};
use crate::motion::{self, MotionClip, Pose};
use crate::skeleton::Skeleton;
use crate::GestureType;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordJson {
    id: String,
    #[serde(rename = "type")]
    gesture_type: GestureType,
    fps: f64,
    joints: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    words: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    imagistic_words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio: Option<String>,
}

/// Ingestion settings. Defaults: canonical skeleton, normalize, resample to
/// 25 fps.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub skeleton: Skeleton,
    /// Resample every clip to this rate; `None` keeps source rates.
    pub target_fps: Option<f64>,
    /// Recenter on the neck and scale to unit shoulder span.
    pub normalize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            skeleton: Skeleton::canonical(),
            target_fps: Some(25.0),
            normalize: true,
        }
    }
}

/// What was read: totals, per-type counts and the source frame rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub path: String,
    pub total: usize,
    pub counts: TypeCounts,
    pub joint_names: Vec<String>,
    /// Source frame rate (before resampling) to record count.
    pub fps_histogram: BTreeMap<String, usize>,
    pub target_fps: Option<f64>,
    pub normalized: bool,
}

/// Reads, validates and canonicalizes a dataset file.
///
/// Blank lines are skipped. Every failure names its 1-based line number.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<(Vec<GestureRecord>, DatasetManifest)> {
    let file = std::fs::File::open(path)?;
    let skeleton = &options.skeleton;
    let mut records = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    let mut counts = TypeCounts { beat: 0, imagistic: 0, nogesture: 0 };
    let mut fps_histogram: BTreeMap<String, usize> = BTreeMap::new();

    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let at = |msg: String| Error::Dataset { line: line_no, msg };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordJson =
            serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;

        if raw.id.is_empty() {
            return Err(at("record id must be non-empty".into()));
        }
        if !seen_ids.insert(raw.id.clone()) {
            return Err(at(format!("duplicate record id {:?}", raw.id)));
        }
        if raw.joints.len() < 2 {
            return Err(at(format!(
                "record {:?} has {} frames, need at least 2",
                raw.id,
                raw.joints.len()
            )));
        }
        for (t, frame) in raw.joints.iter().enumerate() {
            if frame.len() != skeleton.joint_count() {
                return Err(at(format!(
                    "record {:?} frame {t} has {} joints, skeleton has {}",
                    raw.id,
                    frame.len(),
                    skeleton.joint_count()
                )));
            }
        }

        *fps_histogram.entry(format!("{}", raw.fps)).or_insert(0) += 1;

        let frames = raw
            .joints
            .into_iter()
            .map(Pose::new)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| at(e.to_string()))?;
        let mut clip = MotionClip::new(frames, raw.fps).map_err(|e| at(e.to_string()))?;
        if options.normalize {
            clip = motion::normalize_clip(&clip, skeleton).map_err(|e| at(e.to_string()))?;
        }
        if let Some(target) = options.target_fps {
            if clip.fps() != target {
                clip = motion::resample(&clip, target).map_err(|e| at(e.to_string()))?;
            }
        }

        match raw.gesture_type {
            GestureType::Beat => counts.beat += 1,
            GestureType::Imagistic => counts.imagistic += 1,
            GestureType::NoGesture => counts.nogesture += 1,
        }
        let record = GestureRecord {
            id: raw.id,
            gesture_type: raw.gesture_type,
            clip,
            words: raw.words,
            imagistic_words: raw.imagistic_words,
            audio_path: raw.audio,
        };
        record.validate().map_err(|e| at(e.to_string()))?;
        records.push(record);
    }

    let manifest = DatasetManifest {
        path: path.display().to_string(),
        total: records.len(),
        counts,
        joint_names: skeleton.joint_names().to_vec(),
        fps_histogram,
        target_fps: options.target_fps,
        normalized: options.normalize,
    };
    Ok((records, manifest))
}

/// Writes records back out in the dataset format, one JSON object per line.
pub fn write_records(path: &Path, records: &[GestureRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        let raw = RecordJson {
            id: r.id.clone(),
            gesture_type: r.gesture_type,
            fps: r.clip.fps(),
            joints: r.clip.frames().iter().map(|p| p.joints().to_vec()).collect(),
            words: r.words.clone(),
            imagistic_words: r.imagistic_words.clone(),
            audio: r.audio_path.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&raw)?).expect("string write cannot fail");
    }
    std::fs::write(path, out)?;
    Ok(())
}
