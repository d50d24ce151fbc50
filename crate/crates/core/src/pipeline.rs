//! End-to-end generation: text (and optional audio) in, one merged motion
//! clip plus per-span provenance out.
//!
//! The pipeline stages are fixed: tokenize, classify each word, smooth the
//! labels, cut the sentence into same-type spans, give every span a frame
//! budget from the duration model, synthesize each span from the gesture
//! library, then splice the spans together with short blended transitions
//! that keep the total frame count exact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::GestureLibrary;
use crate::motion::{self, MotionClip, Pose};
use crate::signal::{self, AudioKeyframeOptions, Waveform};
use crate::text::{self, EmbeddingTable, LinearHead, TypedSpan, WordToken};
use crate::GestureType;

/// Everything [`generate`] needs besides the library: embeddings plus the two
/// trained heads.
#[derive(Debug, Clone)]
pub struct TextModels {
    pub table: EmbeddingTable,
    /// Three-class gesture-type head.
    pub classifier: LinearHead,
    /// One-class word-importance head for imagistic spans.
    pub selector: LinearHead,
}

impl TextModels {
    pub fn validate(&self) -> Result<()> {
        if self.classifier.classes() != GestureType::ALL.len() {
            return Err(Error::invalid(format!(
                "type classifier must have {} classes, got {}",
                GestureType::ALL.len(),
                self.classifier.classes()
            )));
        }
        if self.selector.classes() != 1 {
            return Err(Error::invalid(format!(
                "word selector must have 1 class, got {}",
                self.selector.classes()
            )));
        }
        for (name, dim) in [("classifier", self.classifier.dim()), ("selector", self.selector.dim())] {
            if dim != self.table.dim() {
                log::debug!("{name} dimension {dim} vs table {}", self.table.dim());
                return Err(Error::DimensionMismatch {
                    expected: self.table.dim(),
                    actual: dim,
                });
            }
        }
        Ok(())
    }

    /// Built-in stand-in models for running without trained artifacts: a
    /// one-dimensional table holding only the unknown-word row and zeroed
    /// heads. Every word then scores identically and classifies as beat, so
    /// generation still works (deterministically), just without learned
    /// behavior.
    pub fn fallback() -> TextModels {
        let mut table = EmbeddingTable::new(1);
        table.insert(text::UNK, vec![1.0]).expect("dimension matches");
        TextModels {
            table,
            classifier: LinearHead::zeros(3, 1).expect("valid shape"),
            selector: LinearHead::zeros(1, 1).expect("valid shape"),
        }
    }
}

/// Generation settings. The defaults are the values the rest of the crate is
/// calibrated around; change them deliberately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub fps: f64,
    /// Length of the blended transition spliced between spans, in seconds.
    pub transition_seconds: f64,
    /// Gaussian sigma (seconds) applied to the audio intensity envelope.
    pub intensity_sigma: f64,
    pub words_per_minute: f64,
    /// Majority-vote window for label smoothing; must be odd.
    pub smoothing_window: usize,
    /// Sigmoid threshold for picking imagistic anchor words.
    pub selector_threshold: f64,
    /// Audio peaks quieter than median + this (dB) are ignored.
    pub prominence_db: f64,
    pub seed: u64,
    /// Steer the last transition's worth of frames back to the rest pose.
    pub end_at_rest: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            fps: 25.0,
            transition_seconds: 0.3,
            intensity_sigma: 0.10,
            words_per_minute: signal::DEFAULT_WPM,
            smoothing_window: text::DEFAULT_SMOOTHING_WINDOW,
            selector_threshold: text::DEFAULT_SELECTOR_THRESHOLD,
            prominence_db: 3.0,
            seed: 0,
            end_at_rest: false,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.transition_seconds.is_finite() && self.transition_seconds >= 0.0) {
            return Err(Error::invalid(format!(
                "transition_seconds must be non-negative, got {}",
                self.transition_seconds
            )));
        }
        if !(self.intensity_sigma.is_finite() && self.intensity_sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "intensity_sigma must be non-negative, got {}",
                self.intensity_sigma
            )));
        }
        if !(self.words_per_minute.is_finite() && self.words_per_minute > 0.0) {
            return Err(Error::invalid(format!(
                "words_per_minute must be positive, got {}",
                self.words_per_minute
            )));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "smoothing_window must be odd, got {}",
                self.smoothing_window
            )));
        }
        if !self.selector_threshold.is_finite() || !self.prominence_db.is_finite() {
            return Err(Error::invalid("selector_threshold and prominence_db must be finite"));
        }
        Ok(())
    }
}

/// Where one requested keyframe ended up in the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeAlignment {
    /// Output frame the keyframe was asked to land on (before clamping into
    /// the span interior).
    pub target_frame: usize,
    /// Output frame it actually landed on.
    pub actual_frame: usize,
}

/// Provenance for one span of the output clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanProvenance {
    pub span: TypedSpan,
    /// Output frame range `[start_frame, end_frame)`.
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_seconds: f64,
    pub end_seconds: f64,
    /// Library record ids the span's motion was built from.
    pub sources: Vec<String>,
    /// Beat spans only: requested vs. achieved keyframe positions.
    pub alignment: Vec<KeyframeAlignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub clip: MotionClip,
    pub spans: Vec<SpanProvenance>,
    /// Total speech duration in seconds (the duration model's estimate, or
    /// the audio length when audio was supplied). The clip realizes this to
    /// the nearest frame.
    pub total_seconds: f64,
}

/// One span's synthesized motion before merging. Alignment pairs are
/// span-local `(target, actual)` frames.
struct SpanPiece {
    clip: MotionClip,
    sources: Vec<String>,
    alignment: Vec<(usize, usize)>,
}

/// Generates gesture motion for `text_input`.
///
/// With audio, word timings are scaled onto the audio's duration and beat
/// keyframes come from intensity peaks; without it, the duration model alone
/// drives timing and each beat word contributes one pseudo-keyframe at its
/// midpoint. The result length is `round(total_seconds * fps)` frames and
/// every span occupies exactly its `[start_frame, end_frame)` slice.
pub fn generate(
    text_input: &str,
    audio: Option<&Waveform>,
    library: &GestureLibrary,
    models: &TextModels,
    config: &GenerationConfig,
) -> Result<GenerationResult> {
    config.validate()?;
    models.validate()?;

    let words = text::tokenize(text_input);
    if words.is_empty() {
        return Err(Error::invalid("text contains no words after tokenization"));
    }
    let tokens = text::embed(&words, &models.table)?;
    let raw = text::predict_types(&tokens, &models.classifier)?;
    let labels = text::smooth_types(&raw, config.smoothing_window)?;
    let spans = text::segment_spans(&labels);

    // Word timings, rescaled onto the audio when we have it.
    let timings = signal::estimate_duration(&words, config.words_per_minute)?;
    let (total_seconds, intervals) = match audio {
        Some(w) => {
            let scale = w.duration_seconds() / timings.total_seconds;
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::invalid("audio waveform has zero duration"));
            }
            let intervals =
                timings.intervals.iter().map(|(a, b)| (a * scale, b * scale)).collect();
            (timings.total_seconds * scale, intervals)
        }
        None => (timings.total_seconds, timings.intervals),
    };

    let total_frames = ((total_seconds * config.fps).round() as usize).max(2);
    let bounds = span_boundaries(&spans, &intervals, config.fps, total_frames)?;

    let rest = Pose::new(library.meta.skeleton.rest_pose().to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Pass 1: beat and imagistic spans, in order, sharing one seeded rng.
    let mut pieces: Vec<Option<SpanPiece>> = Vec::with_capacity(spans.len());
    for (i, span) in spans.iter().enumerate() {
        let n = bounds[i + 1] - bounds[i];
        let piece = match span.label {
            GestureType::Beat => {
                let span_t0 = intervals[span.start].0;
                let span_t1 = intervals[span.end - 1].1;
                Some(gen_beat(
                    &intervals[span.start..span.end],
                    span_t0,
                    span_t1,
                    n,
                    audio,
                    library,
                    config,
                )?)
            }
            GestureType::Imagistic => {
                Some(gen_imagistic(&tokens[span.start..span.end], n, library, models, config, &mut rng)?)
            }
            GestureType::NoGesture => None,
        };
        pieces.push(piece);
    }

    // Pass 2: no-gesture spans match their neighbors' boundary poses. Spans
    // alternate types, so both neighbors were synthesized in pass 1; sentence
    // edges borrow the rest pose.
    for i in 0..spans.len() {
        if pieces[i].is_some() {
            continue;
        }
        let n = bounds[i + 1] - bounds[i];
        let prev = match i.checked_sub(1).and_then(|p| pieces[p].as_ref()) {
            Some(p) => p.clip.frames().last().expect("clips are non-empty").clone(),
            None => rest.clone(),
        };
        let next = match pieces.get(i + 1).and_then(|p| p.as_ref()) {
            Some(p) => p.clip.frames()[0].clone(),
            None => rest.clone(),
        };
        pieces[i] = Some(gen_nogesture(&prev, &next, n, library, config)?);
    }
    let pieces: Vec<SpanPiece> = pieces.into_iter().map(|p| p.expect("all spans filled")).collect();

    // Transition trims. Each junction wants `transition` frames split between
    // its two spans; every span must keep at least 2 frames of its own.
    let m = pieces.len();
    let transition = (config.transition_seconds * config.fps).round() as usize;
    let mut heads = vec![0usize; m];
    let mut tails = vec![0usize; m];
    for j in 0..m.saturating_sub(1) {
        let left_len = pieces[j].clip.frame_count();
        let right_len = pieces[j + 1].clip.frame_count();
        tails[j] = (transition / 2).min(left_len - 2);
        heads[j + 1] = (transition - transition / 2).min(right_len - 2);
    }
    for k in 0..m {
        let len = pieces[k].clip.frame_count();
        let mut over = (heads[k] + tails[k]).saturating_sub(len - 2);
        let cut = over.min(tails[k]);
        tails[k] -= cut;
        over -= cut;
        heads[k] -= over;
    }

    let mut merged = trim(
        &pieces[0].clip,
        heads[0],
        pieces[0].clip.frame_count() - tails[0],
    )?;
    for k in 1..m {
        let piece = trim(&pieces[k].clip, heads[k], pieces[k].clip.frame_count() - tails[k])?;
        merged = motion::blend(&merged, &piece, tails[k - 1] + heads[k])?;
    }
    debug_assert_eq!(merged.frame_count(), total_frames);

    if config.end_at_rest {
        merged = steer_to_rest(&merged, &rest, transition.max(1))?;
    }

    let spans_out = spans
        .iter()
        .zip(&pieces)
        .enumerate()
        .map(|(i, (span, piece))| {
            let lo = heads[i];
            let hi = piece.clip.frame_count() - tails[i];
            let alignment = piece
                .alignment
                .iter()
                .filter(|(_, actual)| (lo..hi).contains(actual))
                .map(|&(target, actual)| KeyframeAlignment {
                    target_frame: bounds[i] + target,
                    actual_frame: bounds[i] + actual,
                })
                .collect();
            SpanProvenance {
                span: *span,
                start_frame: bounds[i],
                end_frame: bounds[i + 1],
                start_seconds: bounds[i] as f64 / config.fps,
                end_seconds: bounds[i + 1] as f64 / config.fps,
                sources: piece.sources.clone(),
                alignment,
            }
        })
        .collect();

    Ok(GenerationResult { clip: merged, spans: spans_out, total_seconds })
}

/// Frame boundaries for the spans: `bounds[i]..bounds[i + 1]` is span `i`.
///
/// Boundaries start as rounded span end times, then get nudged so every span
/// keeps at least 2 frames and the last boundary lands exactly on
/// `total_frames`. Errors when the budget cannot fit all spans.
fn span_boundaries(
    spans: &[TypedSpan],
    intervals: &[(f64, f64)],
    fps: f64,
    total_frames: usize,
) -> Result<Vec<usize>> {
    let m = spans.len();
    if total_frames < 2 * m {
        return Err(Error::invalid(format!(
            "{m} spans need at least {} frames, utterance only spans {total_frames}",
            2 * m
        )));
    }
    let mut bounds = Vec::with_capacity(m + 1);
    bounds.push(0usize);
    for span in spans {
        let end_t = intervals[span.end - 1].1;
        bounds.push((end_t * fps).round() as usize);
    }
    bounds[m] = total_frames;
    for i in 1..=m {
        if bounds[i] < bounds[i - 1] + 2 {
            bounds[i] = bounds[i - 1] + 2;
        }
    }
    if bounds[m] != total_frames {
        bounds[m] = total_frames;
        for i in (1..m).rev() {
            if bounds[i] > bounds[i + 1] - 2 {
                bounds[i] = bounds[i + 1] - 2;
            }
        }
    }
    Ok(bounds)
}

fn gen_beat(
    word_intervals: &[(f64, f64)],
    span_t0: f64,
    span_t1: f64,
    n: usize,
    audio: Option<&Waveform>,
    library: &GestureLibrary,
    config: &GenerationConfig,
) -> Result<SpanPiece> {
    // Keyframe times, in seconds from span start: audio intensity peaks when
    // available, one pseudo-keyframe per word midpoint otherwise.
    let mut times: Vec<f64> = Vec::new();
    if let Some(w) = audio {
        let slice = w.slice_seconds(span_t0, span_t1)?;
        let opts = AudioKeyframeOptions { prominence_db: config.prominence_db, ..Default::default() };
        times = signal::audio_keyframes(&slice, config.intensity_sigma, &opts)?;
    }
    if times.is_empty() {
        times = word_intervals.iter().map(|(a, b)| 0.5 * (a + b) - span_t0).collect();
    }

    // Destination anchors: clamped into the span interior, deduplicated,
    // paired with their pre-clamp targets for the provenance report.
    let mut anchors: Vec<(usize, usize)> = Vec::new();
    if n >= 3 {
        let hi = n - 2;
        for &t in &times {
            let target = (t * config.fps).round() as usize;
            let actual = target.clamp(1, hi);
            if anchors.last().map(|&(_, a)| a) != Some(actual) {
                anchors.push((target, actual));
            }
        }
    }

    let entry = library.query_beat(times.len().max(1), n)?;
    let clip = fetch(library, &entry.id, config.fps)?;
    let interior: Vec<usize> = clip
        .keyframes()
        .unwrap_or(&[])
        .iter()
        .copied()
        .filter(|&k| k >= 1 && k + 1 < clip.frame_count())
        .collect();

    let index_pairs = pair_indices(interior.len(), anchors.len());
    if index_pairs.is_empty() {
        return Ok(SpanPiece {
            clip: stretch_to(&clip, n)?,
            sources: vec![entry.id.clone()],
            alignment: Vec::new(),
        });
    }
    let src: Vec<usize> = index_pairs.iter().map(|&(s, _)| interior[s]).collect();
    let selected: Vec<(usize, usize)> = index_pairs.iter().map(|&(_, d)| anchors[d]).collect();
    let dst: Vec<f64> = selected.iter().map(|&(_, a)| a as f64).collect();
    let retimed = motion::retime(&clip, &src, &dst, n)?;
    Ok(SpanPiece { clip: retimed, sources: vec![entry.id.clone()], alignment: selected })
}

fn gen_imagistic(
    span_tokens: &[WordToken],
    n: usize,
    library: &GestureLibrary,
    models: &TextModels,
    config: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SpanPiece> {
    let picked = text::select_imagistic_words(span_tokens, &models.selector, config.selector_threshold)?;
    let base = span_tokens[0].index;
    let transition = (config.transition_seconds * config.fps).round() as usize;

    let mut sources = Vec::with_capacity(picked.len());
    let mut combined: Option<MotionClip> = None;
    for idx in picked {
        let token = &span_tokens[idx - base];
        let (_, member) = library.query_imagistic(&token.embedding, rng)?;
        sources.push(member.to_string());
        let clip = fetch(library, member, config.fps)?;
        combined = Some(match combined {
            None => clip,
            Some(acc) => motion::blend(&acc, &clip, transition)?,
        });
    }
    let combined = combined.expect("selection returns at least one word");
    Ok(SpanPiece { clip: stretch_to(&combined, n)?, sources, alignment: Vec::new() })
}

fn gen_nogesture(
    prev: &Pose,
    next: &Pose,
    n: usize,
    library: &GestureLibrary,
    config: &GenerationConfig,
) -> Result<SpanPiece> {
    let skeleton = &library.meta.skeleton;
    let entry = library.query_nogesture(
        &crate::laban::encode(prev, skeleton)?,
        &crate::laban::encode(next, skeleton)?,
        n,
    )?;
    let clip = fetch(library, &entry.id, config.fps)?;
    Ok(SpanPiece {
        clip: stretch_to(&clip, n)?,
        sources: vec![entry.id.clone()],
        alignment: Vec::new(),
    })
}

/// Pulls a clip out of the library at the pipeline frame rate.
fn fetch(library: &GestureLibrary, id: &str, fps: f64) -> Result<MotionClip> {
    let clip = library.clip(id)?;
    if clip.fps() == fps {
        Ok(clip.clone())
    } else {
        motion::resample(clip, fps)
    }
}

/// Pairs up two keyframe lists of possibly different lengths by index:
/// the longer list is thinned to an evenly spaced subset (middle element when
/// only one survives). Returned index pairs are strictly increasing on both
/// sides.
pub fn pair_indices(n_src: usize, n_dst: usize) -> Vec<(usize, usize)> {
    let n = n_src.min(n_dst);
    if n == 0 {
        return Vec::new();
    }
    let pick = |len: usize| -> Vec<usize> {
        if n == len {
            (0..len).collect()
        } else if n == 1 {
            vec![(len - 1) / 2]
        } else {
            (0..n)
                .map(|i| ((i * (len - 1)) as f64 / (n - 1) as f64).round() as usize)
                .collect()
        }
    };
    pick(n_src).into_iter().zip(pick(n_dst)).collect()
}

/// Subclip `[from, to)`, keyframes shifted and clipped to the window.
fn trim(clip: &MotionClip, from: usize, to: usize) -> Result<MotionClip> {
    if from == 0 && to == clip.frame_count() {
        return Ok(clip.clone());
    }
    let frames = clip.frames()[from..to].to_vec();
    let keyframes: Option<Vec<usize>> = clip
        .keyframes()
        .map(|ks| ks.iter().filter(|&&k| k >= from && k < to).map(|k| k - from).collect::<Vec<_>>())
        .filter(|v: &Vec<usize>| !v.is_empty());
    MotionClip::with_keyframes(frames, clip.fps(), keyframes)
}

/// Uniformly retimes a clip to exactly `frames` frames (same fps), scaling
/// keyframe positions along.
fn stretch_to(clip: &MotionClip, frames: usize) -> Result<MotionClip> {
    if frames == clip.frame_count() {
        return Ok(clip.clone());
    }
    let sampled = motion::sample_uniform_frames(clip, frames)?;
    let span_in = (clip.frame_count() - 1) as f64;
    let keyframes = clip
        .keyframes()
        .map(|ks| {
            let mut mapped: Vec<usize> = ks
                .iter()
                .map(|&k| ((k as f64 * (frames - 1) as f64 / span_in).round() as usize).min(frames - 1))
                .collect();
            mapped.dedup();
            mapped
        })
        .filter(|v| !v.is_empty());
    MotionClip::with_keyframes(sampled, clip.fps(), keyframes)
}

/// Replaces the last `tail` steps with an interpolation from the preceding
/// frame down to `rest`, so the clip ends exactly at the rest pose.
fn steer_to_rest(clip: &MotionClip, rest: &Pose, tail: usize) -> Result<MotionClip> {
    let total = clip.frame_count();
    let tail = tail.min(total - 1);
    let anchor = total - 1 - tail;
    let mut frames = clip.frames().to_vec();
    for k in 1..=tail {
        frames[anchor + k] = Pose::lerp(&frames[anchor], rest, k as f64 / tail as f64)?;
    }
    MotionClip::with_keyframes(frames, clip.fps(), clip.keyframes().map(|k| k.to_vec()))
}
