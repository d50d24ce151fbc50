//! Text frontend: tokenization, word embeddings, the linear gesture-type and
//! word-importance heads, label smoothing and span segmentation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::GestureType;

/// Classification threshold for the word-importance head.
pub const DEFAULT_SELECTOR_THRESHOLD: f64 = 0.5;
/// Default smoothing window (must stay odd).
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Lowercases, splits on whitespace and strips leading/trailing
/// non-alphanumeric characters. Interior punctuation (apostrophes, hyphens)
/// survives; tokens that strip to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Fixed word-to-vector table with an optional `<unk>` fallback row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

pub const UNK: &str = "<unk>";

impl EmbeddingTable {
    pub fn new(dim: usize) -> EmbeddingTable {
        EmbeddingTable { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: vector.len() });
        }
        self.entries.insert(word.to_string(), vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(|v| v.as_slice())
    }

    /// Parses the text table format: a `D N` header line, then `N` lines of
    /// `word v1 .. vD`. File tables must include an `<unk>` row.
    pub fn parse(text: &str, origin: &str) -> Result<EmbeddingTable> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format(origin, "empty embedding file"))?;
        let mut parts = header.split_whitespace();
        let parse_usize = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format(origin, format!("bad header line {header:?}")))
        };
        let dim = parse_usize(parts.next())?;
        let count = parse_usize(parts.next())?;
        if dim == 0 {
            return Err(Error::format(origin, "embedding dimension must be positive"));
        }
        let mut table = EmbeddingTable::new(dim);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| Error::format(origin, format!("line {}: missing word", lineno + 1)))?;
            let vector: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| {
                    Error::format(origin, format!("line {}: bad float: {e}", lineno + 1))
                })?;
            if vector.len() != dim {
                return Err(Error::format(
                    origin,
                    format!("line {}: expected {dim} values, got {}", lineno + 1, vector.len()),
                ));
            }
            table.insert(word, vector)?;
        }
        if table.len() != count {
            return Err(Error::format(
                origin,
                format!("header promises {count} words, file has {}", table.len()),
            ));
        }
        if table.get(UNK).is_none() {
            return Err(Error::format(origin, "embedding file must contain an <unk> row"));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        let text = std::fs::read_to_string(path)?;
        EmbeddingTable::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {}", self.dim, self.entries.len()).unwrap();
        for (word, vec) in &self.entries {
            out.push_str(word);
            for v in vec {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// A tokenized word with its sentence position and embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct WordToken {
    pub text: String,
    /// Position in the tokenized sentence.
    pub index: usize,
    pub embedding: Vec<f64>,
}

/// Looks up each word, falling back to `<unk>` for out-of-vocabulary words.
/// Errors (naming the word) only when the table has no `<unk>` row either.
pub fn embed(words: &[String], table: &EmbeddingTable) -> Result<Vec<WordToken>> {
    words
        .iter()
        .enumerate()
        .map(|(index, word)| {
            let vector = table
                .get(word)
                .or_else(|| table.get(UNK))
                .ok_or_else(|| Error::MissingEmbedding { word: word.clone() })?;
            Ok(WordToken { text: word.clone(), index, embedding: vector.to_vec() })
        })
        .collect()
}

/// A linear classification head: `classes` rows of weights plus a bias.
///
/// With one class the head is a sigmoid scorer; with several it is a softmax
/// classifier. Training is plain full-batch gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    weights: Vec<Vec<f64>>, // classes x dim
    bias: Vec<f64>,         // classes
}

/// Training example: an input vector and its class index (0/1 for binary).
pub type TrainExample = (Vec<f64>, usize);

/// Gradient-descent settings. Defaults: learning rate 0.1 for 500 epochs.
#[derive(Debug, Clone)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { learning_rate: 0.1, epochs: 500 }
    }
}

impl LinearHead {
    pub fn zeros(classes: usize, dim: usize) -> Result<LinearHead> {
        if classes == 0 || dim == 0 {
            return Err(Error::invalid("head needs at least one class and one input dim"));
        }
        Ok(LinearHead { weights: vec![vec![0.0; dim]; classes], bias: vec![0.0; classes] })
    }

    pub fn from_parts(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<LinearHead> {
        if weights.is_empty() || weights[0].is_empty() {
            return Err(Error::invalid("head needs at least one class and one input dim"));
        }
        let dim = weights[0].len();
        if weights.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("weight rows have inconsistent lengths"));
        }
        if bias.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: weights.len(), actual: bias.len() });
        }
        Ok(LinearHead { weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    /// Mean loss over a batch: softmax cross-entropy for multi-class heads,
    /// sigmoid binary cross-entropy for single-class heads.
    pub fn loss(&self, data: &[TrainExample]) -> Result<f64> {
        self.check_batch(data)?;
        let n = data.len() as f64;
        let mut total = 0.0;
        for (x, y) in data {
            let z = self.logits(x)?;
            if self.classes() == 1 {
                // Stable BCE: max(z,0) - z*y + ln(1 + exp(-|z|)).
                let z = z[0];
                let y = *y as f64;
                total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            } else {
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let logsum = z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln() + zmax;
                total += logsum - z[*y];
            }
        }
        Ok(total / n)
    }

    /// Analytic gradient of [`LinearHead::loss`] with respect to weights and
    /// bias, in the same shapes.
    pub fn grad(&self, data: &[TrainExample]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        self.check_batch(data)?;
        let n = data.len() as f64;
        let mut gw = vec![vec![0.0; self.dim()]; self.classes()];
        let mut gb = vec![0.0; self.classes()];
        for (x, y) in data {
            let z = self.logits(x)?;
            let residual: Vec<f64> = if self.classes() == 1 {
                vec![sigmoid(z[0]) - *y as f64]
            } else {
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
                let sum: f64 = exps.iter().sum();
                exps.iter()
                    .enumerate()
                    .map(|(c, e)| e / sum - if c == *y { 1.0 } else { 0.0 })
                    .collect()
            };
            for (c, r) in residual.iter().enumerate() {
                gb[c] += r / n;
                for (g, v) in gw[c].iter_mut().zip(x) {
                    *g += r * v / n;
                }
            }
        }
        Ok((gw, gb))
    }

    fn check_batch(&self, data: &[TrainExample]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::invalid("training batch is empty"));
        }
        let limit = if self.classes() == 1 { 2 } else { self.classes() };
        for (x, y) in data {
            if x.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
            }
            if *y >= limit {
                return Err(Error::invalid(format!(
                    "label {y} out of range for {} classes",
                    self.classes()
                )));
            }
        }
        Ok(())
    }

    /// Head file format: `classes D` header, one whitespace-separated weight
    /// row per class, then the bias row.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {}", self.classes(), self.dim()).unwrap();
        for row in &self.weights {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                write!(out, "{v}").unwrap();
                first = false;
            }
            out.push('\n');
        }
        let mut first = true;
        for v in &self.bias {
            if !first {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
            first = false;
        }
        out.push('\n');
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LinearHead> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::format(&origin, "empty head file"))?;
        let mut parts = header.split_whitespace();
        let bad_header = || Error::format(&origin, format!("bad header line {header:?}"));
        let classes: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad_header)?;
        let dim: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad_header)?;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(classes + 1);
        for line in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(&origin, format!("bad float: {e}")))?;
            rows.push(row);
        }
        if rows.len() != classes + 1 {
            return Err(Error::format(
                &origin,
                format!("expected {} rows ({classes} weights + bias), got {}", classes + 1, rows.len()),
            ));
        }
        let bias = rows.pop().expect("just checked length");
        if rows.iter().any(|r| r.len() != dim) || bias.len() != classes {
            return Err(Error::format(&origin, "row lengths disagree with header"));
        }
        LinearHead::from_parts(rows, bias)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trains a head from zero-initialized parameters with full-batch gradient
/// descent. Fails if the loss ever turns non-finite or fails to improve over
/// its starting value (both symptoms of a too-large learning rate).
pub fn train_head(
    data: &[TrainExample],
    classes: usize,
    params: &TrainParams,
) -> Result<LinearHead> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let dim = data[0].0.len();
    let mut head = LinearHead::zeros(classes, dim)?;
    let initial = head.loss(data)?;
    for _ in 0..params.epochs {
        let (gw, gb) = head.grad(data)?;
        for (row, grow) in head.weights.iter_mut().zip(&gw) {
            for (w, g) in row.iter_mut().zip(grow) {
                *w -= params.learning_rate * g;
            }
        }
        for (b, g) in head.bias.iter_mut().zip(&gb) {
            *b -= params.learning_rate * g;
        }
        let loss = head.loss(data)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged);
        }
    }
    let final_loss = head.loss(data)?;
    if final_loss > initial {
        return Err(Error::TrainingDiverged);
    }
    Ok(head)
}

/// Per-token gesture types from a 3-class head. Ties resolve to the earliest
/// class in the fixed order Beat, Imagistic, NoGesture.
pub fn predict_types(tokens: &[WordToken], head: &LinearHead) -> Result<Vec<GestureType>> {
    if head.classes() != GestureType::ALL.len() {
        return Err(Error::invalid(format!(
            "type head must have {} classes, got {}",
            GestureType::ALL.len(),
            head.classes()
        )));
    }
    tokens
        .iter()
        .map(|t| {
            let z = head.logits(&t.embedding)?;
            let mut best = 0;
            for (c, v) in z.iter().enumerate() {
                if *v > z[best] {
                    best = c;
                }
            }
            Ok(GestureType::ALL[best])
        })
        .collect()
}

/// Centered majority vote over an odd window, truncated at sentence edges.
/// A tied vote keeps the original label at that position.
pub fn smooth_types(labels: &[GestureType], window: usize) -> Result<Vec<GestureType>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    let half = window / 2;
    let n = labels.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let mut counts = [0usize; 3];
            for l in &labels[lo..hi] {
                counts[l.class_index()] += 1;
            }
            let max = *counts.iter().max().expect("three classes");
            let winners = counts.iter().filter(|&&c| c == max).count();
            if winners == 1 {
                let c = counts.iter().position(|&c| c == max).expect("max exists");
                GestureType::ALL[c]
            } else {
                labels[i]
            }
        })
        .collect())
}

/// Token indices whose sigmoid importance score clears `threshold`, in
/// sentence order. When nothing clears it, the single best-scoring token is
/// returned so an Imagistic span always has at least one anchor word.
pub fn select_imagistic_words(
    tokens: &[WordToken],
    selector: &LinearHead,
    threshold: f64,
) -> Result<Vec<usize>> {
    if selector.classes() != 1 {
        return Err(Error::invalid(format!(
            "word selector must have exactly 1 class, got {}",
            selector.classes()
        )));
    }
    if tokens.is_empty() {
        return Err(Error::invalid("cannot select words from an empty token list"));
    }
    let mut scored = Vec::with_capacity(tokens.len());
    for t in tokens {
        let z = selector.logits(&t.embedding)?[0];
        scored.push((t.index, sigmoid(z)));
    }
    let passing: Vec<usize> =
        scored.iter().filter(|(_, s)| *s >= threshold).map(|(i, _)| *i).collect();
    if !passing.is_empty() {
        return Ok(passing);
    }
    // Arg-max fallback; earlier token wins ties.
    let best = scored
        .iter()
        .enumerate()
        .max_by(|(ia, (_, sa)), (ib, (_, sb))| {
            sa.partial_cmp(sb)
                .expect("scores are finite")
                .then(ib.cmp(ia)) // prefer the earlier index on ties
        })
        .map(|(_, (i, _))| *i)
        .expect("token list is non-empty");
    Ok(vec![best])
}

/// A maximal run of same-typed words: token positions `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedSpan {
    pub start: usize,
    pub end: usize,
    pub label: GestureType,
}

impl TypedSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Run-length encodes a label sequence into maximal spans.
pub fn segment_spans(labels: &[GestureType]) -> Vec<TypedSpan> {
    let mut spans: Vec<TypedSpan> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match spans.last_mut() {
            Some(span) if span.label == label => span.end = i + 1,
            _ => spans.push(TypedSpan { start: i, end: i + 1, label }),
        }
    }
    spans
}
