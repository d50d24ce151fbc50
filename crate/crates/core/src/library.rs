//! The gesture library: typed motion records, the indexes built over them
//! (beat keyframe counts, imagistic clusters, no-gesture boundary codes) and
//! the retrieval queries the generator runs against those indexes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::MotionDocument;
use crate::laban::{self, LabanPose};
use crate::motion::{self, MotionClip};
use crate::skeleton::Skeleton;
use crate::text::EmbeddingTable;
use crate::GestureType;

/// Clips are resampled to this many frames before clustering so descriptors
/// share a dimension regardless of clip length.
pub const DESCRIPTOR_FRAMES: usize = 32;
/// On-disk library layout version.
pub const FORMAT_VERSION: u32 = 1;

/// One dataset motion with its transcript and type annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureRecord {
    pub id: String,
    pub gesture_type: GestureType,
    pub clip: MotionClip,
    pub words: Vec<String>,
    /// Words the motion depicts; only Imagistic records may have any.
    pub imagistic_words: Vec<String>,
    pub audio_path: Option<String>,
}

impl GestureRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("record id must be non-empty"));
        }
        for w in &self.imagistic_words {
            if !self.words.contains(w) {
                return Err(Error::invalid(format!(
                    "record {:?}: imagistic word {w:?} is not in the transcript",
                    self.id
                )));
            }
        }
        if self.gesture_type != GestureType::Imagistic && !self.imagistic_words.is_empty() {
            return Err(Error::invalid(format!(
                "record {:?}: only imagistic records may list imagistic words",
                self.id
            )));
        }
        Ok(())
    }
}

/// Beat index entry: how many motion-energy keyframes a clip has, and how
/// long it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatEntry {
    pub id: String,
    pub n_keyframes: usize,
    pub n_frames: usize,
}

/// A word attached to an imagistic cluster, with its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEntry {
    pub word: String,
    pub embedding: Vec<f64>,
}

/// One imagistic cluster: its member record ids plus the vocabulary gathered
/// from the members' imagistic words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagisticCluster {
    pub cluster: usize,
    pub members: Vec<String>,
    pub words: Vec<WordEntry>,
}

/// No-gesture index entry: boundary labanotation at the clip's first and last
/// keyframes (or first/last frames when the clip has fewer than two).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGestureEntry {
    pub id: String,
    pub n_frames: usize,
    pub laban_first: LabanPose,
    pub laban_last: LabanPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub beat: usize,
    pub imagistic: usize,
    pub nogesture: usize,
}

impl TypeCounts {
    pub fn total(&self) -> usize {
        self.beat + self.imagistic + self.nogesture
    }
}

/// Library-wide metadata, stored as `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryMeta {
    pub format_version: u32,
    pub fps: f64,
    pub seed: u64,
    pub motion_sigma: f64,
    /// Effective imagistic cluster count (0 when there are no such records).
    pub k: usize,
    pub counts: TypeCounts,
    /// 99th percentile of per-frame max joint displacement across all library
    /// clips. The generator promises its output stays under twice this.
    pub p99_frame_displacement: f64,
    pub skeleton: Skeleton,
}

/// Settings for [`GestureLibrary::build`].
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub fps: f64,
    /// Gaussian sigma (seconds) for motion-energy keyframe extraction.
    pub motion_sigma: f64,
    /// Imagistic cluster count; `None` means `max(1, round(sqrt(n / 2)))`.
    pub k: Option<usize>,
    pub seed: u64,
    pub skeleton: Skeleton,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            fps: 25.0,
            motion_sigma: 0.12,
            k: None,
            seed: 0,
            skeleton: Skeleton::canonical(),
        }
    }
}

/// The built library: three per-type indexes over a shared clip store.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureLibrary {
    pub meta: LibraryMeta,
    pub beat: Vec<BeatEntry>,
    pub imagistic: Vec<ImagisticCluster>,
    pub nogesture: Vec<NoGestureEntry>,
    pub clips: BTreeMap<String, MotionClip>,
}

impl GestureLibrary {
    /// Builds all three indexes from validated records.
    ///
    /// Beat and no-gesture clips get their motion-energy keyframes stamped
    /// into the stored clip. Imagistic records are clustered by k-means over
    /// fixed-length pose descriptors; each cluster collects its members'
    /// imagistic words with embeddings from `table` (words missing from the
    /// table are skipped with a warning). The build is deterministic for a
    /// given record list, config and seed.
    pub fn build(
        records: &[GestureRecord],
        table: &EmbeddingTable,
        config: &BuildConfig,
    ) -> Result<GestureLibrary> {
        if records.is_empty() {
            return Err(Error::invalid("cannot build a library from zero records"));
        }
        let skeleton = &config.skeleton;
        let mut seen = BTreeSet::new();
        for r in records {
            r.validate()?;
            if !seen.insert(&r.id) {
                return Err(Error::invalid(format!("duplicate record id {:?}", r.id)));
            }
            if r.clip.joint_count() != skeleton.joint_count() {
                return Err(Error::SkeletonMismatch(format!(
                    "record {:?} has {} joints, skeleton has {}",
                    r.id,
                    r.clip.joint_count(),
                    skeleton.joint_count()
                )));
            }
        }

        // Normalize frame rates up front so lengths and keyframes are
        // comparable across the library.
        let mut prepared: Vec<(usize, GestureRecord)> = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let mut r = r.clone();
            if r.clip.fps() != config.fps {
                r.clip = motion::resample(&r.clip, config.fps)?;
            }
            prepared.push((i, r));
        }

        let mut beat = Vec::new();
        let mut nogesture = Vec::new();
        let mut imagistic_records: Vec<&GestureRecord> = Vec::new();
        let mut clips: BTreeMap<String, MotionClip> = BTreeMap::new();
        let mut counts = TypeCounts { beat: 0, imagistic: 0, nogesture: 0 };

        for (_, r) in &prepared {
            let mut clip = r.clip.clone();
            match r.gesture_type {
                GestureType::Beat => {
                    counts.beat += 1;
                    let kfs = energy_keyframes(&clip, skeleton, config.motion_sigma)?;
                    beat.push(BeatEntry {
                        id: r.id.clone(),
                        n_keyframes: kfs.len(),
                        n_frames: clip.frame_count(),
                    });
                    clip.set_keyframes(Some(kfs));
                }
                GestureType::NoGesture => {
                    counts.nogesture += 1;
                    let kfs = energy_keyframes(&clip, skeleton, config.motion_sigma)?;
                    let (first, last) = if kfs.len() >= 2 {
                        (kfs[0], *kfs.last().expect("non-empty"))
                    } else {
                        (0, clip.frame_count() - 1)
                    };
                    nogesture.push(NoGestureEntry {
                        id: r.id.clone(),
                        n_frames: clip.frame_count(),
                        laban_first: laban::encode(&clip.frames()[first], skeleton)?,
                        laban_last: laban::encode(&clip.frames()[last], skeleton)?,
                    });
                    clip.set_keyframes(Some(kfs));
                }
                GestureType::Imagistic => {
                    counts.imagistic += 1;
                }
            }
            clips.insert(r.id.clone(), clip);
        }
        for (_, r) in &prepared {
            if r.gesture_type == GestureType::Imagistic {
                imagistic_records.push(r);
            }
        }

        let mut imagistic = Vec::new();
        let mut effective_k = 0;
        if !imagistic_records.is_empty() {
            let n = imagistic_records.len();
            let default_k = ((n as f64 / 2.0).sqrt().round() as usize).max(1);
            let k = config.k.unwrap_or(default_k);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            let record_refs: Vec<&GestureRecord> = imagistic_records.clone();
            let partitions = cluster_imagistic(&record_refs, k, &mut rng)?;
            effective_k = partitions.len();
            for (cluster, member_idx) in partitions.into_iter().enumerate() {
                let members: Vec<String> =
                    member_idx.iter().map(|&i| record_refs[i].id.clone()).collect();
                let mut vocab: BTreeSet<&str> = BTreeSet::new();
                for &i in &member_idx {
                    for w in &record_refs[i].imagistic_words {
                        vocab.insert(w);
                    }
                }
                let mut words = Vec::new();
                for w in vocab {
                    match table.get(w) {
                        Some(v) => {
                            words.push(WordEntry { word: w.to_string(), embedding: v.to_vec() })
                        }
                        None => {
                            log::warn!("cluster {cluster}: word {w:?} has no embedding, skipped")
                        }
                    }
                }
                imagistic.push(ImagisticCluster { cluster, members, words });
            }
        }

        let p99 = p99_displacement(clips.values());
        Ok(GestureLibrary {
            meta: LibraryMeta {
                format_version: FORMAT_VERSION,
                fps: config.fps,
                seed: config.seed,
                motion_sigma: config.motion_sigma,
                k: effective_k,
                counts,
                p99_frame_displacement: p99,
                skeleton: skeleton.clone(),
            },
            beat,
            imagistic,
            nogesture,
            clips,
        })
    }

    /// Beat retrieval: prefer clips with exactly the requested keyframe
    /// count, then the closest length.
    ///
    /// With no exact count match, the nearest available count is used (ties
    /// toward the smaller count). Length ties prefer the shorter clip, then
    /// the lexicographically smallest id.
    pub fn query_beat(&self, n_keyframes: usize, n_frames: usize) -> Result<&BeatEntry> {
        if self.beat.is_empty() {
            return Err(Error::EmptyPartition("beat"));
        }
        if n_keyframes < 1 || n_frames < 2 {
            return Err(Error::invalid(format!(
                "beat query needs n_keyframes >= 1 and n_frames >= 2, got ({n_keyframes}, {n_frames})"
            )));
        }
        let target_k = if self.beat.iter().any(|e| e.n_keyframes == n_keyframes) {
            n_keyframes
        } else {
            self.beat
                .iter()
                .map(|e| e.n_keyframes)
                .min_by_key(|&k| (k.abs_diff(n_keyframes), k))
                .expect("index is non-empty")
        };
        Ok(self
            .beat
            .iter()
            .filter(|e| e.n_keyframes == target_k)
            .min_by(|a, b| {
                (a.n_frames.abs_diff(n_frames), a.n_frames, &a.id)
                    .cmp(&(b.n_frames.abs_diff(n_frames), b.n_frames, &b.id))
            })
            .expect("filter is non-empty"))
    }

    /// Imagistic retrieval: nearest word entry by cosine distance across all
    /// clusters, then a uniformly sampled member of that cluster.
    ///
    /// Distance ties prefer the lexicographically smaller word, then the
    /// smaller cluster id. Returns the winning cluster id and the sampled
    /// record id.
    pub fn query_imagistic(
        &self,
        query: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<(usize, &str)> {
        if self.imagistic.is_empty() {
            return Err(Error::EmptyPartition("imagistic"));
        }
        let norm = query.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::invalid("imagistic query embedding has zero norm"));
        }
        let mut best: Option<(f64, &str, usize)> = None;
        for c in &self.imagistic {
            for w in &c.words {
                let d = cosine_distance(query, &w.embedding)?;
                let candidate = (d, w.word.as_str(), c.cluster);
                let better = match &best {
                    None => true,
                    Some((bd, bw, bc)) => {
                        d < *bd || (d == *bd && (w.word.as_str(), c.cluster) < (*bw, *bc))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        let (_, _, cluster_id) = best.ok_or(Error::EmptyPartition("imagistic word"))?;
        let cluster = &self.imagistic[cluster_id];
        let member = &cluster.members[rng.gen_range(0..cluster.members.len())];
        Ok((cluster_id, member))
    }

    /// No-gesture retrieval: the entry whose boundary codes sit closest (in
    /// labanotation distance) to the given neighbors.
    ///
    /// Ties prefer the entry whose length is closest to `target_frames`, then
    /// the lexicographically smallest id.
    pub fn query_nogesture(
        &self,
        prev: &LabanPose,
        next: &LabanPose,
        target_frames: usize,
    ) -> Result<&NoGestureEntry> {
        if self.nogesture.is_empty() {
            return Err(Error::EmptyPartition("nogesture"));
        }
        if target_frames < 2 {
            return Err(Error::invalid(format!(
                "nogesture query needs target_frames >= 2, got {target_frames}"
            )));
        }
        Ok(self
            .nogesture
            .iter()
            .min_by(|a, b| {
                let da = laban::distance(prev, &a.laban_first) + laban::distance(next, &a.laban_last);
                let db = laban::distance(prev, &b.laban_first) + laban::distance(next, &b.laban_last);
                (da, a.n_frames.abs_diff(target_frames), &a.id)
                    .cmp(&(db, b.n_frames.abs_diff(target_frames), &b.id))
            })
            .expect("index is non-empty"))
    }

    pub fn clip(&self, id: &str) -> Result<&MotionClip> {
        self.clips
            .get(id)
            .ok_or_else(|| Error::invalid(format!("library has no clip with id {id:?}")))
    }

    // ── persistence ────────────────────────────────────────────────────────
    // Directory layout: meta.json, beat.jsonl, imagistic.jsonl,
    // nogesture.jsonl and clips/<id>.json.

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("clips"))?;
        let mut meta = serde_json::to_string_pretty(&self.meta)?;
        meta.push('\n');
        std::fs::write(dir.join("meta.json"), meta)?;
        write_jsonl(&dir.join("beat.jsonl"), &self.beat)?;
        write_jsonl(&dir.join("imagistic.jsonl"), &self.imagistic)?;
        write_jsonl(&dir.join("nogesture.jsonl"), &self.nogesture)?;
        for (id, clip) in &self.clips {
            let doc = MotionDocument::from_clip(clip, self.meta.skeleton.joint_names());
            let mut body = serde_json::to_string(&doc)?;
            body.push('\n');
            std::fs::write(dir.join("clips").join(format!("{id}.json")), body)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<GestureLibrary> {
        let meta_path = dir.join("meta.json");
        let meta: LibraryMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)
            .map_err(|e| Error::format(meta_path.display().to_string(), e.to_string()))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::format(
                meta_path.display().to_string(),
                format!("unsupported format_version {}, expected {FORMAT_VERSION}", meta.format_version),
            ));
        }
        let beat: Vec<BeatEntry> = read_jsonl(&dir.join("beat.jsonl"))?;
        let imagistic: Vec<ImagisticCluster> = read_jsonl(&dir.join("imagistic.jsonl"))?;
        let nogesture: Vec<NoGestureEntry> = read_jsonl(&dir.join("nogesture.jsonl"))?;

        let mut clips = BTreeMap::new();
        let clip_dir = dir.join("clips");
        let mut paths: Vec<_> = std::fs::read_dir(&clip_dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let doc: MotionDocument = serde_json::from_str(&std::fs::read_to_string(&path)?)
                .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::format(path.display().to_string(), "bad clip filename"))?
                .to_string();
            clips.insert(id, doc.into_clip()?);
        }

        let lib = GestureLibrary { meta, beat, imagistic, nogesture, clips };
        lib.validate_references(dir)?;
        Ok(lib)
    }

    fn validate_references(&self, dir: &Path) -> Result<()> {
        let origin = dir.display().to_string();
        let missing = |id: &str, index: &str| {
            Error::format(&origin, format!("{index} entry references missing clip {id:?}"))
        };
        for e in &self.beat {
            if !self.clips.contains_key(&e.id) {
                return Err(missing(&e.id, "beat"));
            }
        }
        for e in &self.nogesture {
            if !self.clips.contains_key(&e.id) {
                return Err(missing(&e.id, "nogesture"));
            }
        }
        for c in &self.imagistic {
            if c.members.is_empty() {
                return Err(Error::format(&origin, format!("cluster {} has no members", c.cluster)));
            }
            for m in &c.members {
                if !self.clips.contains_key(m) {
                    return Err(missing(m, "imagistic"));
                }
            }
        }
        let counts = &self.meta.counts;
        if self.beat.len() != counts.beat || self.nogesture.len() != counts.nogesture {
            return Err(Error::format(&origin, "meta counts disagree with index sizes"));
        }
        Ok(())
    }
}

/// Motion-energy keyframes with a last-resort fallback: a clip whose energy
/// has no interior maxima (monotone or flat) gets one keyframe at its energy
/// argmax, clamped inside the clip so it can serve as a retiming anchor.
fn energy_keyframes(clip: &MotionClip, skeleton: &Skeleton, sigma: f64) -> Result<Vec<usize>> {
    let energy = motion::motion_energy(clip, skeleton)?;
    let kfs = motion::extract_keyframes(&energy, sigma)?;
    if !kfs.is_empty() {
        return Ok(kfs);
    }
    let smoothed = crate::signal::gaussian_filter(&energy, sigma)?;
    let argmax = smoothed
        .values()
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("energy is finite"))
        .map(|(i, _)| i)
        .expect("series is non-empty");
    let hi = (clip.frame_count() - 2).max(1);
    Ok(vec![argmax.clamp(1, hi)])
}

/// 99th-percentile (nearest-rank) of per-step max joint displacement over all
/// given clips.
fn p99_displacement<'a>(clips: impl Iterator<Item = &'a MotionClip>) -> f64 {
    let mut steps: Vec<f64> = Vec::new();
    for clip in clips {
        for w in clip.frames().windows(2) {
            steps.push(crate::motion::Pose::max_joint_distance(&w[0], &w[1]));
        }
    }
    if steps.is_empty() {
        return 0.0;
    }
    steps.sort_by(|a, b| a.partial_cmp(b).expect("displacements are finite"));
    let rank = ((0.99 * steps.len() as f64).ceil() as usize).clamp(1, steps.len());
    steps[rank - 1]
}

fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        // A zero-norm stored entry can never be "near" anything.
        return Ok(2.0);
    }
    Ok(1.0 - dot / (na * nb))
}

/// K-means++ clustering of imagistic records by pose-trajectory descriptors.
///
/// Returns `k` (or fewer, if duplicates collapse) non-empty clusters as
/// ascending index lists into `records`. Runs at most 100 Lloyd iterations,
/// stopping once the inertia improves by less than a 1e-4 relative tolerance;
/// clusters that empty out are re-seeded at the point farthest from its
/// assigned centroid. Deterministic for a given rng state.
pub fn cluster_imagistic(
    records: &[&GestureRecord],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if records.is_empty() {
        return Err(Error::invalid("cannot cluster zero records"));
    }
    if k == 0 || k > records.len() {
        return Err(Error::invalid(format!(
            "cluster count {k} must be in 1..={}",
            records.len()
        )));
    }
    let descriptors: Vec<Vec<f64>> = records
        .iter()
        .map(|r| descriptor(&r.clip))
        .collect::<Result<_>>()?;
    let assignments = kmeans(&descriptors, k, rng);
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in assignments.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    Ok(clusters)
}

/// Fixed-length descriptor: the clip resampled to [`DESCRIPTOR_FRAMES`]
/// poses, flattened to one vector.
fn descriptor(clip: &MotionClip) -> Result<Vec<f64>> {
    let frames = motion::sample_uniform_frames(clip, DESCRIPTOR_FRAMES)?;
    let mut out = Vec::with_capacity(DESCRIPTOR_FRAMES * clip.joint_count() * 3);
    for pose in &frames {
        for j in pose.joints() {
            out.extend_from_slice(j);
        }
    }
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();

    // k-means++ seeding: empirical D^2 weighting, falling back to a uniform
    // pick over unchosen points when every remaining distance is zero.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    centers.push(points[first].clone());
    chosen[first] = true;
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            let unchosen: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            unchosen[rng.gen_range(0..unchosen.len())]
        };
        chosen[next] = true;
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().expect("just pushed")));
        }
    }

    let dim = points[0].len();
    let mut assignments = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..100 {
        // Assign (ties to the lower center index).
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            assignments[i] = best;
        }

        // Re-seed empty clusters at the farthest point from its centroid.
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        let mut grabbed = vec![false; n];
        let mut reseeded = false;
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| !grabbed[i])
                .max_by(|&i, &j| {
                    let di = sq_dist(&points[i], &centers[assignments[i]]);
                    let dj = sq_dist(&points[j], &centers[assignments[j]]);
                    di.partial_cmp(&dj).expect("distances are finite").then(j.cmp(&i))
                })
                .expect("n >= k > 0");
            centers[c] = points[far].clone();
            grabbed[far] = true;
            reseeded = true;
        }
        if reseeded {
            continue; // re-assign against the repaired centers
        }

        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &a) in points.iter().zip(&assignments) {
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            centers[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
        }

        let inertia: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| sq_dist(p, &centers[a]))
            .sum();
        if inertia == 0.0 || (prev_inertia - inertia).abs() <= 1e-4 * prev_inertia {
            break;
        }
        prev_inertia = inertia;
    }
    assignments
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        writeln!(out, "{}", serde_json::to_string(row)?).expect("string write cannot fail");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: i + 1,
            msg: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(rows)
}
