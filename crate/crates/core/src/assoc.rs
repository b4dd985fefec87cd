//! Similarity-matrix construction, the assignment solver and match
//! validation.
//!
//! Appearance scoring runs as a two-stage batch: every surviving
//! (anchor appearance, detection) pair is scored or featurized first, then
//! every per-track combination (C-TAMA sum or Deep-TAMA sequence) is
//! evaluated. Both stages fan out over rayon and collect in input order, so
//! results do not depend on the thread count.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use crate::appearance::{PairFeatureProvider, PairScorer};
use crate::config::{LikelihoodMode, ScorerFamily, TrackerConfig};
use crate::geometry::{geometric_likelihood, iou};
use crate::tama::{
    ctama_combine, ctama_likelihood, deep_tama_from_features, deep_tama_likelihood, LstmWeights, TamaError,
    TrackAppearance,
};
use crate::types::{AppearanceDescriptor, BoundingBox, Detection, Track};

/// Matching-feature provider plus LSTM weights.
#[derive(Clone)]
pub struct DeepTamaModel {
    pub provider: Arc<dyn PairFeatureProvider>,
    pub weights: Arc<LstmWeights>,
}

/// Everything needed to score appearance for one sequence.
#[derive(Clone)]
pub struct AppearanceModel {
    pub scorer: Arc<dyn PairScorer>,
    pub deep: Option<DeepTamaModel>,
    /// Selects the default `lambda_f` of the linear baseline.
    pub family: ScorerFamily,
}

impl AppearanceModel {
    pub fn with_scorer(scorer: impl PairScorer + 'static) -> Self {
        Self {
            scorer: Arc::new(scorer),
            deep: None,
            family: ScorerFamily::Other,
        }
    }

    pub fn with_family(mut self, family: ScorerFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_deep(mut self, provider: impl PairFeatureProvider + 'static, weights: LstmWeights) -> Self {
        self.deep = Some(DeepTamaModel {
            provider: Arc::new(provider),
            weights: Arc::new(weights),
        });
        self
    }
}

/// Track-by-detection likelihoods. Gated-out entries are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    gate: Vec<bool>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            gate: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Whether the pair survived geometric gating.
    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.gate[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = i * self.cols + j;
        self.values[k] = value.clamp(0.0, 1.0);
        self.gate[k] = true;
    }

    /// Assignment costs: negated likelihoods.
    pub fn cost(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols.max(1)).take(self.rows).map(|r| r.iter().map(|v| -v).collect()).collect()
    }
}

/// One-to-one set of `(track_index, detection_index)` pairs, sorted by track.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn total_cost(&self, cost: &[Vec<f64>]) -> f64 {
        self.pairs.iter().map(|&(i, j)| cost[i][j]).sum()
    }
}

/// Minimum-cost one-to-one assignment of `min(rows, cols)` pairs.
///
/// Shortest augmenting path with dual potentials, O(n^3). Rectangular inputs
/// are padded to square with zero-cost dummies that are dropped afterwards.
/// Entries must be finite.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Assignment::default();
    }
    debug_assert!(cost.iter().all(|r| r.len() == cols && r.iter().all(|v| v.is_finite())));
    let n = rows.max(cols);
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            0.0
        }
    };

    // 1-based: index 0 is the virtual source column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter_map(|j| {
            let i = row_of[j];
            (i >= 1 && i <= rows && j <= cols).then(|| (i - 1, j - 1))
        })
        .collect();
    pairs.sort_unstable();
    Assignment { pairs }
}

/// Keeps pairs whose likelihood strictly exceeds `tau_match`. Tracks in
/// stripped pairs and tracks the solver left unassigned are reported as
/// missed.
pub fn validate_matches(
    assign: &Assignment,
    sim: &SimilarityMatrix,
    tau_match: f64,
) -> (Assignment, BTreeSet<usize>) {
    let mut valid = Vec::with_capacity(assign.pairs.len());
    let mut missed: BTreeSet<usize> = (0..sim.rows()).collect();
    for &(i, j) in &assign.pairs {
        if sim.get(i, j) > tau_match {
            valid.push((i, j));
            missed.remove(&i);
        }
    }
    (Assignment { pairs: valid }, missed)
}

fn appearance_of(track: &Track) -> TrackAppearance<'_> {
    TrackAppearance {
        recent: Some(&track.recent_appearance),
        recent_box: track.recent_box,
        recent_confidence: track.recent_confidence,
        cue: &track.cue,
    }
}

/// Per-pair geometric factors and whether the pair passes the gate.
struct Gate {
    motion: f64,
    shape: f64,
}

fn gate_pairs(tracks: &[Track], dets: &[Detection], cfg: &TrackerConfig) -> Vec<Option<Gate>> {
    (0..tracks.len() * dets.len())
        .into_par_iter()
        .map(|k| {
            let (t, d) = (&tracks[k / dets.len()], &dets[k % dets.len()]);
            let (motion, shape) = geometric_likelihood(t, d, &cfg.geometry);
            (motion * shape > cfg.tau_match).then_some(Gate { motion, shape })
        })
        .collect()
}

fn deep_model(model: &AppearanceModel) -> Result<&DeepTamaModel, TamaError> {
    model.deep.as_ref().ok_or(TamaError::MissingWeights)
}

/// Anchors compared against a detection, oldest first, recent/template last.
fn anchors_of(track: &Track, mode: LikelihoodMode) -> Vec<(&AppearanceDescriptor, BoundingBox, f64)> {
    match mode {
        LikelihoodMode::BaselineLinear | LikelihoodMode::BaselineSelect => {
            vec![(&track.template, track.recent_box, 1.0)]
        }
        _ => track
            .cue
            .iter()
            .map(|e| (&e.descriptor, e.bbox, e.confidence))
            .chain(std::iter::once((&track.recent_appearance, track.recent_box, track.recent_confidence)))
            .collect(),
    }
}

/// Batched construction of the similarity matrix.
pub fn build_similarity(
    tracks: &[Track],
    dets: &[Detection],
    cfg: &TrackerConfig,
    model: &AppearanceModel,
) -> Result<SimilarityMatrix, TamaError> {
    let mut sim = SimilarityMatrix::new(tracks.len(), dets.len());
    if tracks.is_empty() || dets.is_empty() {
        return Ok(sim);
    }
    let mode = cfg.likelihood_mode;
    if mode == LikelihoodMode::IouOnly {
        for (i, t) in tracks.iter().enumerate() {
            for (j, d) in dets.iter().enumerate() {
                sim.set(i, j, iou(&t.state_box(), &d.bbox));
            }
        }
        return Ok(sim);
    }
    if mode == LikelihoodMode::DeepTama {
        let deep = deep_model(model)?;
        if deep.provider.dim() != deep.weights.matching_dim() {
            return Err(TamaError::DimensionMismatch {
                expected: deep.weights.matching_dim(),
                found: deep.provider.dim(),
            });
        }
        let cells = deep.weights.cells;
        if let Some(t) = tracks.iter().find(|t| t.cue.len() + 1 > cells) {
            return Err(TamaError::CueTooLong {
                len: t.cue.len(),
                cells,
            });
        }
    }

    let gates = gate_pairs(tracks, dets, cfg);
    let gated: Vec<(usize, usize, Gate)> = gates
        .into_iter()
        .enumerate()
        .filter_map(|(k, g)| g.map(|g| (k / dets.len(), k % dets.len(), g)))
        .collect();

    // stage 1: every (anchor, detection) request of every gated pair
    let anchors: Vec<Vec<(&AppearanceDescriptor, BoundingBox, f64)>> =
        tracks.iter().map(|t| anchors_of(t, mode)).collect();
    let mut offsets = Vec::with_capacity(gated.len() + 1);
    let mut requests: Vec<(&AppearanceDescriptor, &AppearanceDescriptor)> = Vec::new();
    for &(i, j, _) in &gated {
        offsets.push(requests.len());
        for (a, _, _) in &anchors[i] {
            requests.push((a, &dets[j].descriptor));
        }
    }
    offsets.push(requests.len());

    // stage 2: per-pair combination
    let values: Vec<f64> = if mode == LikelihoodMode::DeepTama {
        let deep = deep_model(model)?;
        let features = requests
            .par_iter()
            .map(|(anchor, obs)| deep.provider.feature(anchor, obs))
            .collect::<Result<Vec<_>, _>>()?;
        gated
            .par_iter()
            .enumerate()
            .map(|(p, (i, j, g))| {
                let boxes: Vec<BoundingBox> = anchors[*i].iter().map(|a| a.1).collect();
                let appearance =
                    deep_tama_from_features(&features[offsets[p]..offsets[p + 1]], &boxes, &dets[*j].bbox, &deep.weights)?;
                Ok(g.motion * appearance)
            })
            .collect::<Result<Vec<_>, TamaError>>()?
    } else {
        let scores = requests
            .par_iter()
            .map(|(anchor, obs)| model.scorer.score(obs, anchor))
            .collect::<Result<Vec<_>, _>>()?;
        gated
            .par_iter()
            .enumerate()
            .map(|(p, (i, _, g))| {
                let s = &scores[offsets[p]..offsets[p + 1]];
                let appearance = match mode {
                    LikelihoodMode::Ctama => {
                        let (recent_score, hist_scores) = s.split_last().expect("recent anchor present");
                        let history: Vec<(f64, f64)> = anchors[*i]
                            .iter()
                            .zip(hist_scores)
                            .map(|(a, s)| (a.2, *s))
                            .collect();
                        ctama_combine(tracks[*i].recent_confidence, *recent_score, &history, cfg.lambda_c)
                    }
                    _ => s[0],
                };
                g.motion * g.shape * appearance
            })
            .collect()
    };

    for ((i, j, _), v) in gated.iter().zip(values) {
        sim.set(*i, *j, v);
    }
    Ok(sim)
}

/// Pair-by-pair reference construction; must agree bit for bit with
/// [`build_similarity`].
pub fn build_similarity_naive(
    tracks: &[Track],
    dets: &[Detection],
    cfg: &TrackerConfig,
    model: &AppearanceModel,
) -> Result<SimilarityMatrix, TamaError> {
    let mut sim = SimilarityMatrix::new(tracks.len(), dets.len());
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in dets.iter().enumerate() {
            if cfg.likelihood_mode == LikelihoodMode::IouOnly {
                sim.set(i, j, iou(&t.state_box(), &d.bbox));
                continue;
            }
            let (motion, shape) = geometric_likelihood(t, d, &cfg.geometry);
            if motion * shape <= cfg.tau_match {
                continue;
            }
            let value = match cfg.likelihood_mode {
                LikelihoodMode::Ctama => {
                    motion * shape * ctama_likelihood(appearance_of(t), &d.descriptor, model.scorer.as_ref(), cfg.lambda_c)?
                }
                LikelihoodMode::DeepTama => {
                    let deep = deep_model(model)?;
                    motion
                        * deep_tama_likelihood(
                            appearance_of(t),
                            &d.descriptor,
                            &d.bbox,
                            deep.provider.as_ref(),
                            &deep.weights,
                        )?
                }
                _ => motion * shape * model.scorer.score(&d.descriptor, &t.template)?,
            };
            sim.set(i, j, value);
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64, k: usize) {
            let rows = cost.len();
            let cols = cost[0].len();
            if k == rows.min(cols) {
                *best = best.min(acc);
                return;
            }
            if row == rows {
                return;
            }
            // rows may be skipped only when there are more rows than columns
            if rows - row > cols.min(rows) - k {
                rec(cost, row + 1, used, acc, best, k);
            }
            for j in 0..cols {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost[row][j], best, k + 1);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost[0].len()], 0.0, &mut best, 0);
        best
    }

    #[test]
    fn two_by_two_example() {
        let c = vec![vec![-0.9, -0.1], vec![-0.2, -0.8]];
        let a = hungarian(&c);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert!((a.total_cost(&c) + 1.7).abs() < 1e-12);
    }

    #[test]
    fn trivial_shapes() {
        assert_eq!(hungarian(&[vec![3.0]]).pairs, vec![(0, 0)]);
        assert!(hungarian(&[]).pairs.is_empty());
        let wide = vec![vec![5.0, 1.0, 3.0]];
        assert_eq!(hungarian(&wide).pairs, vec![(0, 1)]);
        let tall = vec![vec![5.0], vec![1.0], vec![3.0]];
        assert_eq!(hungarian(&tall).pairs, vec![(1, 0)]);
    }

    #[test]
    fn validation_is_strict() {
        let mut sim = SimilarityMatrix::new(3, 2);
        sim.set(0, 0, 0.41);
        sim.set(1, 1, 0.40);
        let assign = Assignment {
            pairs: vec![(0, 0), (1, 1)],
        };
        let (valid, missed) = validate_matches(&assign, &sim, 0.4);
        assert_eq!(valid.pairs, vec![(0, 0)]);
        assert_eq!(missed.into_iter().collect::<Vec<_>>(), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            rows in 1usize..=6,
            cols in 1usize..=6,
            seed in prop::collection::vec(-10.0f64..10.0, 36),
        ) {
            let cost: Vec<Vec<f64>> = (0..rows).map(|i| seed[i * 6..i * 6 + cols].to_vec()).collect();
            let a = hungarian(&cost);
            prop_assert_eq!(a.pairs.len(), rows.min(cols));
            let mut rs: Vec<_> = a.pairs.iter().map(|p| p.0).collect();
            let mut cs: Vec<_> = a.pairs.iter().map(|p| p.1).collect();
            rs.dedup();
            cs.sort_unstable();
            cs.dedup();
            prop_assert_eq!(rs.len(), a.pairs.len());
            prop_assert_eq!(cs.len(), a.pairs.len());
            prop_assert!((a.total_cost(&cost) - brute_force(&cost)).abs() < 1e-9);
        }
    }
}
