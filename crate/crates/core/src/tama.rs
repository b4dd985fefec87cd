//! Temporal appearance matching association.
//!
//! Two ways of turning a track's appearance history into one likelihood for
//! a new observation:
//!
//! * C-TAMA weighs pairwise scores against the recent appearance and every
//!   cue entry by their stored match confidences.
//! * Deep-TAMA runs an LSTM over per-entry matching features extended with
//!   the relative shape difference, then projects the last hidden state onto
//!   two logits and takes the positive softmax component.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::appearance::{AppearanceError, PairFeatureProvider, PairScorer};
use crate::cue::HistoricalAppearanceCue;
use crate::types::{AppearanceDescriptor, BoundingBox};

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_INPUT: usize = 152;
pub const DEFAULT_CELLS: usize = 15;

const WEIGHT_MAGIC: &str = "DTAMA-LSTM v1";

#[derive(Debug, Error)]
pub enum TamaError {
    #[error("track has no recent appearance")]
    EmptyTrackAppearance,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cue holds {len} entries but the LSTM unrolls only {cells} cells")]
    CueTooLong { len: usize, cells: usize },
    #[error("deep_tama mode needs LSTM weights and a matching-feature provider")]
    MissingWeights,
    #[error("weight file line {line}: {reason}")]
    MalformedWeightFile { line: usize, reason: String },
    #[error(transparent)]
    Appearance(#[from] AppearanceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The appearance side of a track as seen by the association schemes.
#[derive(Debug, Clone, Copy)]
pub struct TrackAppearance<'a> {
    pub recent: Option<&'a AppearanceDescriptor>,
    pub recent_box: BoundingBox,
    pub recent_confidence: f64,
    pub cue: &'a HistoricalAppearanceCue,
}

/// Coefficients of the C-TAMA combination: the weight on the recent
/// appearance and one weight per cue entry. Non-negative, summing to one.
pub fn ctama_coefficients(recent_confidence: f64, cue_confidences: &[f64], lambda_c: f64) -> (f64, Vec<f64>) {
    if cue_confidences.is_empty() {
        return (1.0, Vec::new());
    }
    let alpha = (recent_confidence / lambda_c).clamp(0.0, 1.0);
    let total: f64 = cue_confidences.iter().sum();
    let rest = 1.0 - alpha;
    let weights = if total > 0.0 {
        cue_confidences.iter().map(|c| rest * (c / total)).collect()
    } else {
        vec![rest / cue_confidences.len() as f64; cue_confidences.len()]
    };
    (alpha, weights)
}

/// Combines already computed pairwise scores. `history` holds
/// `(confidence, score)` per cue entry, oldest first.
pub fn ctama_combine(recent_confidence: f64, recent_score: f64, history: &[(f64, f64)], lambda_c: f64) -> f64 {
    if history.is_empty() {
        return recent_score;
    }
    let total: f64 = history.iter().map(|(c, _)| c).sum();
    let weighted: f64 = if total > 0.0 {
        history.iter().map(|(c, s)| (c / total) * s).sum()
    } else {
        history.iter().map(|(_, s)| s).sum::<f64>() / history.len() as f64
    };
    let alpha = (recent_confidence / lambda_c).clamp(0.0, 1.0);
    (alpha * recent_score + (1.0 - alpha) * weighted).clamp(0.0, 1.0)
}

pub fn ctama_likelihood(
    track: TrackAppearance<'_>,
    obs: &AppearanceDescriptor,
    scorer: &dyn PairScorer,
    lambda_c: f64,
) -> Result<f64, TamaError> {
    let recent = track.recent.ok_or(TamaError::EmptyTrackAppearance)?;
    let recent_score = scorer.score(obs, recent)?;
    let history = track
        .cue
        .iter()
        .map(|e| Ok((e.confidence, scorer.score(obs, &e.descriptor)?)))
        .collect::<Result<Vec<_>, TamaError>>()?;
    Ok(ctama_combine(track.recent_confidence, recent_score, &history, lambda_c))
}

/// Optional bias terms for externally trained weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmBias {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub candidate: Vec<f64>,
    /// `(positive, negative)` logit offsets.
    pub logits: [f64; 2],
}

/// Gate matrices are row-major `hidden x (hidden + input)`, acting on the
/// concatenation `[h_prev, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub hidden: usize,
    pub input: usize,
    pub cells: usize,
    pub w_forget: Vec<f64>,
    pub w_input: Vec<f64>,
    pub w_output: Vec<f64>,
    pub w_candidate: Vec<f64>,
    pub w_pos: Vec<f64>,
    pub w_neg: Vec<f64>,
    pub bias: Option<LstmBias>,
}

impl LstmWeights {
    pub fn zeros(hidden: usize, input: usize, cells: usize) -> Self {
        let n = hidden * (hidden + input);
        Self {
            hidden,
            input,
            cells,
            w_forget: vec![0.0; n],
            w_input: vec![0.0; n],
            w_output: vec![0.0; n],
            w_candidate: vec![0.0; n],
            w_pos: vec![0.0; hidden],
            w_neg: vec![0.0; hidden],
            bias: None,
        }
    }

    /// Width of the matching feature expected from the provider.
    pub fn matching_dim(&self) -> usize {
        self.input.saturating_sub(2)
    }

    pub fn validate(&self) -> Result<(), TamaError> {
        let n = self.hidden * (self.hidden + self.input);
        let mut sizes = vec![
            (n, self.w_forget.len()),
            (n, self.w_input.len()),
            (n, self.w_output.len()),
            (n, self.w_candidate.len()),
            (self.hidden, self.w_pos.len()),
            (self.hidden, self.w_neg.len()),
        ];
        if let Some(b) = &self.bias {
            sizes.extend([
                (self.hidden, b.forget.len()),
                (self.hidden, b.input.len()),
                (self.hidden, b.output.len()),
                (self.hidden, b.candidate.len()),
            ]);
        }
        for (expected, found) in sizes {
            if expected != found {
                return Err(TamaError::DimensionMismatch { expected, found });
            }
        }
        if self.input < 2 || self.hidden == 0 || self.cells == 0 {
            return Err(TamaError::DimensionMismatch {
                expected: 2,
                found: self.input,
            });
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, TamaError> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
        let malformed = |line: usize, reason: String| TamaError::MalformedWeightFile { line, reason };

        let (ln, magic) = lines.next().ok_or_else(|| malformed(1, "empty file".into()))?;
        if magic != WEIGHT_MAGIC {
            return Err(malformed(ln, format!("expected `{WEIGHT_MAGIC}`")));
        }
        let (ln, header) = lines.next().ok_or_else(|| malformed(2, "missing header".into()))?;
        let mut dims = [None; 4];
        for token in header.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| malformed(ln, format!("bad header token `{token}`")))?;
            let v: usize = v
                .parse()
                .map_err(|_| malformed(ln, format!("bad value in `{token}`")))?;
            let slot = match k {
                "hidden" => 0,
                "input" => 1,
                "cells" => 2,
                "bias" => 3,
                _ => return Err(malformed(ln, format!("unknown header key `{k}`"))),
            };
            dims[slot] = Some(v);
        }
        let [Some(hidden), Some(input), Some(cells), Some(bias)] = dims else {
            return Err(malformed(ln, "header needs hidden, input, cells and bias".into()));
        };
        if bias > 1 {
            return Err(malformed(ln, "bias must be 0 or 1".into()));
        }
        if hidden == 0 || input < 2 || cells == 0 {
            return Err(malformed(ln, "dimensions must be positive and input >= 2".into()));
        }

        let mut last_line = ln;
        let mut row = |width: usize| -> Result<Vec<f64>, TamaError> {
            let (ln, text) = lines
                .next()
                .ok_or_else(|| malformed(last_line + 1, "unexpected end of file".into()))?;
            last_line = ln;
            let values = text
                .split(' ')
                .map(|t| t.parse::<f64>().map_err(|_| malformed(ln, format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != width {
                return Err(malformed(ln, format!("expected {width} values, found {}", values.len())));
            }
            Ok(values)
        };
        let matrix = |row: &mut dyn FnMut(usize) -> Result<Vec<f64>, TamaError>| -> Result<Vec<f64>, TamaError> {
            let mut m = Vec::with_capacity(hidden * (hidden + input));
            for _ in 0..hidden {
                m.extend(row(hidden + input)?);
            }
            Ok(m)
        };
        let w_forget = matrix(&mut row)?;
        let w_input = matrix(&mut row)?;
        let w_output = matrix(&mut row)?;
        let w_candidate = matrix(&mut row)?;
        let w_pos = row(hidden)?;
        let w_neg = row(hidden)?;
        let bias = if bias == 1 {
            let forget = row(hidden)?;
            let input_b = row(hidden)?;
            let output = row(hidden)?;
            let candidate = row(hidden)?;
            let l = row(2)?;
            Some(LstmBias {
                forget,
                input: input_b,
                output,
                candidate,
                logits: [l[0], l[1]],
            })
        } else {
            None
        };
        for (ln, rest) in lines {
            if !rest.is_empty() {
                return Err(malformed(ln, "trailing content".into()));
            }
        }
        let w = Self {
            hidden,
            input,
            cells,
            w_forget,
            w_input,
            w_output,
            w_candidate,
            w_pos,
            w_neg,
            bias,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(WEIGHT_MAGIC);
        out.push('\n');
        let _ = writeln!(
            out,
            "hidden={} input={} cells={} bias={}",
            self.hidden,
            self.input,
            self.cells,
            u8::from(self.bias.is_some())
        );
        let mut line = |vals: &[f64]| {
            let joined: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            out.push_str(&joined.join(" "));
            out.push('\n');
        };
        let width = self.hidden + self.input;
        for m in [&self.w_forget, &self.w_input, &self.w_output, &self.w_candidate] {
            for r in m.chunks(width) {
                line(r);
            }
        }
        line(&self.w_pos);
        line(&self.w_neg);
        if let Some(b) = &self.bias {
            line(&b.forget);
            line(&b.input);
            line(&b.output);
            line(&b.candidate);
            line(&b.logits);
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TamaError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TamaError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn load_lstm_weights(path: impl AsRef<Path>) -> Result<LstmWeights, TamaError> {
    LstmWeights::load(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            cell: vec![0.0; hidden],
            hidden: vec![0.0; hidden],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `W [h; x]` for one row-major gate matrix.
fn gate_preactivation(w: &[f64], h: &[f64], x: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let width = h.len() + x.len();
    w.chunks_exact(width)
        .enumerate()
        .map(|(r, row)| {
            let (wh, wx) = row.split_at(h.len());
            let acc = wh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
                + wx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            acc + bias.map_or(0.0, |b| b[r])
        })
        .collect()
}

/// One bias-free LSTM step (unless the weights carry an explicit bias block).
pub fn lstm_cell(input: &[f64], prev: &LstmState, w: &LstmWeights) -> Result<LstmState, TamaError> {
    if input.len() != w.input {
        return Err(TamaError::DimensionMismatch {
            expected: w.input,
            found: input.len(),
        });
    }
    if prev.hidden.len() != w.hidden || prev.cell.len() != w.hidden {
        return Err(TamaError::DimensionMismatch {
            expected: w.hidden,
            found: prev.hidden.len(),
        });
    }
    let b = w.bias.as_ref();
    let h = &prev.hidden;
    let f = gate_preactivation(&w.w_forget, h, input, b.map(|b| b.forget.as_slice()));
    let i = gate_preactivation(&w.w_input, h, input, b.map(|b| b.input.as_slice()));
    let o = gate_preactivation(&w.w_output, h, input, b.map(|b| b.output.as_slice()));
    let g = gate_preactivation(&w.w_candidate, h, input, b.map(|b| b.candidate.as_slice()));

    let mut cell = Vec::with_capacity(w.hidden);
    let mut hidden = Vec::with_capacity(w.hidden);
    for k in 0..w.hidden {
        let c = sigmoid(f[k]) * prev.cell[k] + sigmoid(i[k]) * g[k].tanh();
        cell.push(c);
        hidden.push(sigmoid(o[k]) * c.tanh());
    }
    Ok(LstmState { cell, hidden })
}

/// Runs the LSTM from a zero state over `sequence` and returns every state.
pub fn lstm_unroll(sequence: &[Vec<f64>], w: &LstmWeights) -> Result<Vec<LstmState>, TamaError> {
    let mut state = LstmState::zeros(w.hidden);
    let mut states = Vec::with_capacity(sequence.len());
    for x in sequence {
        state = lstm_cell(x, &state, w)?;
        states.push(state.clone());
    }
    Ok(states)
}

/// Softmax over `(<w_pos, h>, <w_neg, h>)`, positive component.
pub fn positive_probability(hidden: &[f64], w: &LstmWeights) -> f64 {
    let (bp, bn) = w.bias.as_ref().map_or((0.0, 0.0), |b| (b.logits[0], b.logits[1]));
    let s_pos: f64 = w.w_pos.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>() + bp;
    let s_neg: f64 = w.w_neg.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>() + bn;
    // exp(s_pos) / (exp(s_pos) + exp(s_neg)), written as a logistic of the gap
    sigmoid(s_pos - s_neg)
}

/// `[(w_a - w_z) / w_z, (h_a - h_z) / h_z]`, signed.
pub fn relative_shape_difference(anchor: &BoundingBox, obs: &BoundingBox) -> [f64; 2] {
    [
        (anchor.width - obs.width) / obs.width,
        (anchor.height - obs.height) / obs.height,
    ]
}

/// Assembles the LSTM input sequence: head zero padding, one cell per cue
/// entry (oldest first), and the recent appearance in the last cell.
/// `features` holds the matching features in that same order, recent last.
pub fn assemble_sequence(
    features: &[Vec<f64>],
    anchors: &[BoundingBox],
    obs: &BoundingBox,
    w: &LstmWeights,
) -> Result<Vec<Vec<f64>>, TamaError> {
    debug_assert_eq!(features.len(), anchors.len());
    if features.len() > w.cells {
        return Err(TamaError::CueTooLong {
            len: features.len().saturating_sub(1),
            cells: w.cells,
        });
    }
    let mut seq = vec![vec![0.0; w.input]; w.cells - features.len()];
    for (f, anchor) in features.iter().zip(anchors) {
        if f.len() != w.matching_dim() {
            return Err(TamaError::DimensionMismatch {
                expected: w.matching_dim(),
                found: f.len(),
            });
        }
        let mut x = Vec::with_capacity(w.input);
        x.extend_from_slice(f);
        x.extend(relative_shape_difference(anchor, obs));
        seq.push(x);
    }
    Ok(seq)
}

/// Deep-TAMA likelihood from precomputed matching features (recent last).
pub fn deep_tama_from_features(
    features: &[Vec<f64>],
    anchors: &[BoundingBox],
    obs: &BoundingBox,
    w: &LstmWeights,
) -> Result<f64, TamaError> {
    let seq = assemble_sequence(features, anchors, obs, w)?;
    let mut state = LstmState::zeros(w.hidden);
    for x in &seq {
        state = lstm_cell(x, &state, w)?;
    }
    Ok(positive_probability(&state.hidden, w))
}

pub fn deep_tama_likelihood(
    track: TrackAppearance<'_>,
    obs: &AppearanceDescriptor,
    obs_box: &BoundingBox,
    provider: &dyn PairFeatureProvider,
    w: &LstmWeights,
) -> Result<f64, TamaError> {
    let recent = track.recent.ok_or(TamaError::EmptyTrackAppearance)?;
    if provider.dim() != w.matching_dim() {
        return Err(TamaError::DimensionMismatch {
            expected: w.matching_dim(),
            found: provider.dim(),
        });
    }
    if track.cue.len() + 1 > w.cells {
        return Err(TamaError::CueTooLong {
            len: track.cue.len(),
            cells: w.cells,
        });
    }
    let mut features = Vec::with_capacity(track.cue.len() + 1);
    let mut anchors = Vec::with_capacity(track.cue.len() + 1);
    for e in track.cue.iter() {
        features.push(provider.feature(&e.descriptor, obs)?);
        anchors.push(e.bbox);
    }
    features.push(provider.feature(recent, obs)?);
    anchors.push(track.recent_box);
    deep_tama_from_features(&features, &anchors, obs_box, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::{ConstantScorer, SyntheticPairFeature};
    use crate::config::TrackerConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(0.0, 0.0, w, h).unwrap()
    }

    fn random_weights(rng: &mut ChaCha8Rng, hidden: usize, input: usize, cells: usize) -> LstmWeights {
        let mut w = LstmWeights::zeros(hidden, input, cells);
        for m in [&mut w.w_forget, &mut w.w_input, &mut w.w_output, &mut w.w_candidate] {
            m.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
        w.w_pos.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        w.w_neg.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        w
    }

    /// Scorer that returns a fixed score per tagged instance.
    struct Table(Vec<f64>);

    impl PairScorer for Table {
        fn score(&self, _a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<f64, AppearanceError> {
            match b {
                AppearanceDescriptor::Tag { instance, .. } => Ok(self.0[*instance as usize]),
                _ => Err(AppearanceError::UntaggedDescriptor),
            }
        }
    }

    fn tag(instance: u64) -> AppearanceDescriptor {
        AppearanceDescriptor::Tag { identity: 0, instance }
    }

    #[test]
    fn ctama_hand_example() {
        let cfg = TrackerConfig {
            tau_hist: 0.0,
            fps: 25,
            ..Default::default()
        };
        let mut cue = HistoricalAppearanceCue::new();
        assert!(cue.maybe_add(0.5, &tag(1), bx(1.0, 1.0), 10, &cfg));
        assert!(cue.maybe_add(1.0, &tag(2), bx(1.0, 1.0), 20, &cfg));
        let recent = tag(0);
        let track = TrackAppearance {
            recent: Some(&recent),
            recent_box: bx(1.0, 1.0),
            recent_confidence: 0.6,
            cue: &cue,
        };
        let scorer = Table(vec![0.9, 0.3, 0.6]);
        let v = ctama_likelihood(track, &tag(99), &scorer, 3.0).unwrap();
        assert!((v - 0.58).abs() <= 1e-12, "{v}");
    }

    #[test]
    fn ctama_degenerate_cases() {
        let cue = HistoricalAppearanceCue::new();
        let recent = tag(0);
        let track = TrackAppearance {
            recent: Some(&recent),
            recent_box: bx(1.0, 1.0),
            recent_confidence: 0.2,
            cue: &cue,
        };
        assert_eq!(ctama_likelihood(track, &tag(5), &ConstantScorer(0.7), 3.0).unwrap(), 0.7);
        let missing = TrackAppearance { recent: None, ..track };
        assert!(matches!(
            ctama_likelihood(missing, &tag(5), &ConstantScorer(0.7), 3.0),
            Err(TamaError::EmptyTrackAppearance)
        ));
        let (a, w) = ctama_coefficients(0.6, &[0.5, 1.0], 3.0);
        assert!((a + w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_state_and_even_odds() {
        let w = LstmWeights::zeros(8, 6, 5);
        let s = lstm_cell(&[1.0, -2.0, 3.0, 0.5, 0.1, 9.0], &LstmState::zeros(8), &w).unwrap();
        assert!(s.cell.iter().chain(&s.hidden).all(|v| *v == 0.0));
        assert_eq!(positive_probability(&s.hidden, &w), 0.5);
    }

    #[test]
    fn lstm_dimension_checks() {
        let w = LstmWeights::zeros(4, 6, 3);
        assert!(matches!(
            lstm_cell(&[0.0; 5], &LstmState::zeros(4), &w),
            Err(TamaError::DimensionMismatch { expected: 6, found: 5 })
        ));
    }

    #[test]
    fn hidden_state_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut w = random_weights(&mut rng, 16, 10, 4);
        w.w_candidate.iter_mut().for_each(|v| *v *= 50.0);
        let seq: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        for s in lstm_unroll(&seq, &w).unwrap() {
            assert!(s.hidden.iter().all(|h| h.abs() < 1.0));
        }
    }

    #[test]
    fn relative_shape_example() {
        assert_eq!(relative_shape_difference(&bx(60.0, 110.0), &bx(50.0, 100.0)), [0.2, 0.1]);
        assert_eq!(relative_shape_difference(&bx(40.0, 90.0), &bx(50.0, 100.0)), [-0.2, -0.1]);
    }

    #[test]
    fn equal_projection_vectors_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut w = random_weights(&mut rng, 12, 152, 15);
        w.w_neg = w.w_pos.clone();
        let recent = AppearanceDescriptor::vector((0..48).map(|i| i as f64 / 48.0).collect());
        let obs = AppearanceDescriptor::vector((0..48).map(|i| (48 - i) as f64 / 48.0).collect());
        let cue = HistoricalAppearanceCue::new();
        let track = TrackAppearance {
            recent: Some(&recent),
            recent_box: bx(40.0, 90.0),
            recent_confidence: 0.5,
            cue: &cue,
        };
        let p = deep_tama_likelihood(track, &obs, &bx(42.0, 95.0), &SyntheticPairFeature, &w).unwrap();
        assert_eq!(p, 0.5);
        let z = LstmWeights::zeros(12, 152, 15);
        let p = deep_tama_likelihood(track, &obs, &bx(42.0, 95.0), &SyntheticPairFeature, &z).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn padding_goes_to_the_head() {
        let w = LstmWeights::zeros(3, 4, 5);
        let feats = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let anchors = vec![bx(60.0, 110.0), bx(50.0, 100.0)];
        let seq = assemble_sequence(&feats, &anchors, &bx(50.0, 100.0), &w).unwrap();
        assert_eq!(seq.len(), 5);
        assert!(seq[..3].iter().all(|x| x.iter().all(|v| *v == 0.0)));
        assert_eq!(seq[3], vec![1.0, 2.0, 0.2, 0.1]);
        assert_eq!(seq[4], vec![3.0, 4.0, 0.0, 0.0]);
        let too_many = vec![vec![0.0, 0.0]; 6];
        let anchors = vec![bx(1.0, 1.0); 6];
        assert!(matches!(
            assemble_sequence(&too_many, &anchors, &bx(1.0, 1.0), &w),
            Err(TamaError::CueTooLong { .. })
        ));
    }

    #[test]
    fn weight_file_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = random_weights(&mut rng, 5, 7, 4);
        assert_eq!(LstmWeights::parse(&w.to_text()).unwrap(), w);
        w.bias = Some(LstmBias {
            forget: vec![0.1; 5],
            input: vec![-0.2; 5],
            output: vec![1e-7; 5],
            candidate: vec![3.5; 5],
            logits: [0.25, -0.25],
        });
        assert_eq!(LstmWeights::parse(&w.to_text()).unwrap(), w);

        let text = w.to_text();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            LstmWeights::parse(&truncated),
            Err(TamaError::MalformedWeightFile { line: 11, .. })
        ));
        let bad = text.replacen("hidden=5", "hidden=x", 1);
        assert!(matches!(
            LstmWeights::parse(&bad),
            Err(TamaError::MalformedWeightFile { line: 2, .. })
        ));
        assert!(matches!(
            LstmWeights::parse("nope\n"),
            Err(TamaError::MalformedWeightFile { line: 1, .. })
        ));
    }

    #[test]
    fn default_shape_weight_file() {
        let w = LstmWeights::zeros(DEFAULT_HIDDEN, DEFAULT_INPUT, DEFAULT_CELLS);
        let parsed = LstmWeights::parse(&w.to_text()).unwrap();
        assert_eq!(parsed.w_forget.len(), 128 * 280);
        assert_eq!(parsed.matching_dim(), 150);
    }
}
