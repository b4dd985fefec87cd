//! Evaluation: CLEAR-MOT metrics, IDF1, NMS preprocessing, frame-rate
//! decimation and a seeded synthetic scenario generator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::assoc::hungarian;
use crate::formats::MotRow;
use crate::geometry::iou;
use crate::types::{AppearanceDescriptor, BoundingBox, Detection, ResultRow};

/// Length of synthetic identity signatures.
pub const SIGNATURE_DIM: usize = 48;

/// Identities at or above this value mark clutter detections.
pub const CLUTTER_IDENTITY_BASE: u64 = 1 << 32;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("frame rate {fps_orig} is not an integer multiple of {fps_new}")]
    NonIntegerStride { fps_orig: u32, fps_new: u32 },
    #[error("ground truth has two rows for identity {id} in frame {frame}")]
    DuplicateRow { frame: u32, id: u64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Ground-truth rows with at most one row per `(frame, identity)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    rows: Vec<ResultRow>,
}

impl GroundTruth {
    pub fn new(mut rows: Vec<ResultRow>) -> Result<Self, EvalError> {
        rows.sort_by_key(|r| (r.frame, r.id));
        if let Some(w) = rows.windows(2).find(|w| (w[0].frame, w[0].id) == (w[1].frame, w[1].id)) {
            return Err(EvalError::DuplicateRow {
                frame: w[0].frame,
                id: w[0].id,
            });
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Frames per identity, ascending.
    pub fn trajectories(&self) -> BTreeMap<u64, Vec<ResultRow>> {
        let mut out: BTreeMap<u64, Vec<ResultRow>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.id).or_default().push(*r);
        }
        out
    }
}

fn by_frame(rows: &[ResultRow]) -> BTreeMap<u32, Vec<ResultRow>> {
    let mut out: BTreeMap<u32, Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.frame).or_default().push(*r);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearMot {
    pub gt_count: usize,
    pub matches: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub mota: f64,
    /// Mean IoU of matched pairs, in `[0, 1]`.
    pub motp: f64,
    pub mostly_tracked: usize,
    pub mostly_lost: usize,
    pub gt_tracks: usize,
}

/// CLEAR-MOT metrics. A ground-truth identity keeps its previous hypothesis
/// while their IoU stays at or above the threshold; the remaining pairs are
/// matched by maximum total IoU.
pub fn clear_mot(gt: &GroundTruth, results: &[ResultRow], iou_threshold: f64) -> ClearMot {
    let gt_frames = by_frame(gt.rows());
    let hyp_frames = by_frame(results);
    let frames: BTreeSet<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();
    let empty = Vec::new();

    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let mut tracked: BTreeMap<u64, Vec<bool>> = BTreeMap::new();
    let (mut fp, mut fn_, mut idsw, mut matches) = (0usize, 0usize, 0usize, 0usize);
    let mut iou_sum = 0.0;

    for f in frames {
        let gts = gt_frames.get(&f).unwrap_or(&empty);
        let hyps = hyp_frames.get(&f).unwrap_or(&empty);
        let mut gt_hit = vec![None; gts.len()];
        let mut hyp_used = vec![false; hyps.len()];

        for (g, grow) in gts.iter().enumerate() {
            if let Some(&h_id) = last_match.get(&grow.id) {
                if let Some(h) = hyps.iter().position(|h| h.id == h_id) {
                    let v = iou(&grow.bbox, &hyps[h].bbox);
                    if !hyp_used[h] && v >= iou_threshold {
                        gt_hit[g] = Some((h, v));
                        hyp_used[h] = true;
                    }
                }
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&g| gt_hit[g].is_none()).collect();
        let free_h: Vec<usize> = (0..hyps.len()).filter(|&h| !hyp_used[h]).collect();
        if !free_g.is_empty() && !free_h.is_empty() {
            // invalid pairs cost more than any set of valid ones can save
            let invalid = 1.0 + free_g.len().max(free_h.len()) as f64;
            let cost: Vec<Vec<f64>> = free_g
                .iter()
                .map(|&g| {
                    free_h
                        .iter()
                        .map(|&h| {
                            let v = iou(&gts[g].bbox, &hyps[h].bbox);
                            if v >= iou_threshold {
                                -v
                            } else {
                                invalid
                            }
                        })
                        .collect()
                })
                .collect();
            for (a, b) in hungarian(&cost).pairs {
                let (g, h) = (free_g[a], free_h[b]);
                let v = iou(&gts[g].bbox, &hyps[h].bbox);
                if v >= iou_threshold {
                    gt_hit[g] = Some((h, v));
                    hyp_used[h] = true;
                    if last_match.get(&gts[g].id).is_some_and(|&prev| prev != hyps[h].id) {
                        idsw += 1;
                    }
                }
            }
        }

        for (g, hit) in gt_hit.iter().enumerate() {
            tracked.entry(gts[g].id).or_default().push(hit.is_some());
            match hit {
                Some((h, v)) => {
                    matches += 1;
                    iou_sum += v;
                    last_match.insert(gts[g].id, hyps[*h].id);
                }
                None => fn_ += 1,
            }
        }
        fp += hyp_used.iter().filter(|u| !**u).count();
    }

    let gt_count = gt.len();
    let errors = (fp + fn_ + idsw) as f64;
    let mota = if gt_count > 0 {
        1.0 - errors / gt_count as f64
    } else if errors == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    let mut mt = 0;
    let mut ml = 0;
    let mut frag = 0;
    for seq in tracked.values() {
        let ratio = seq.iter().filter(|t| **t).count() as f64 / seq.len() as f64;
        if ratio >= 0.8 {
            mt += 1;
        }
        if ratio <= 0.2 {
            ml += 1;
        }
        let segments = seq.iter().zip(std::iter::once(&false).chain(seq.iter())).filter(|(cur, prev)| **cur && !**prev).count();
        frag += segments.saturating_sub(1);
    }
    ClearMot {
        gt_count,
        matches,
        false_positives: fp,
        false_negatives: fn_,
        id_switches: idsw,
        fragmentations: frag,
        mota,
        motp: if matches > 0 { iou_sum / matches as f64 } else { 0.0 },
        mostly_tracked: mt,
        mostly_lost: ml,
        gt_tracks: tracked.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdScores {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub idf1: f64,
}

/// Identity scores from the best one-to-one matching between ground-truth
/// identities and hypothesis ids, weighted by frames where the pair
/// overlaps at IoU ≥ `iou_threshold`.
pub fn id_scores(gt: &GroundTruth, results: &[ResultRow], iou_threshold: f64) -> IdScores {
    let gt_ids: Vec<u64> = gt.trajectories().keys().copied().collect();
    let hyp_ids: Vec<u64> = results.iter().map(|r| r.id).collect::<BTreeSet<_>>().into_iter().collect();
    let gi: HashMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let hi: HashMap<u64, usize> = hyp_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut overlap = vec![vec![0.0f64; hyp_ids.len()]; gt_ids.len()];
    let hyp_frames = by_frame(results);
    for g in gt.rows() {
        for h in hyp_frames.get(&g.frame).into_iter().flatten() {
            if iou(&g.bbox, &h.bbox) >= iou_threshold {
                overlap[gi[&g.id]][hi[&h.id]] += 1.0;
            }
        }
    }
    let idtp = if gt_ids.is_empty() || hyp_ids.is_empty() {
        0
    } else {
        let cost: Vec<Vec<f64>> = overlap.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        hungarian(&cost).pairs.iter().map(|&(i, j)| overlap[i][j] as usize).sum()
    };
    let idfn = gt.len() - idtp;
    let idfp = results.len() - idtp;
    let denom = 2 * idtp + idfp + idfn;
    IdScores {
        idtp,
        idfp,
        idfn,
        idf1: if denom == 0 { 1.0 } else { 2.0 * idtp as f64 / denom as f64 },
    }
}

pub fn idf1(gt: &GroundTruth, results: &[ResultRow]) -> f64 {
    id_scores(gt, results, 0.5).idf1
}

/// Drops detections below `conf_min`, then greedily keeps the highest raw
/// confidence and suppresses others overlapping it above `iou_thresh`.
/// Survivors keep their input order.
pub fn nms(dets: &[Detection], iou_thresh: f64, conf_min: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].raw_confidence >= conf_min).collect();
    order.sort_by(|&a, &b| dets[b].raw_confidence.total_cmp(&dets[a].raw_confidence).then(a.cmp(&b)));
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep.iter().all(|&k| iou(&dets[k].bbox, &dets[i].bbox) <= iou_thresh) {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| dets[i].clone()).collect()
}

/// Frame stride for a rate change, when it is a positive integer.
pub fn decimation_stride(fps_orig: u32, fps_new: u32) -> Result<u32, EvalError> {
    if fps_new == 0 || fps_orig == 0 || !fps_orig.is_multiple_of(fps_new) {
        return Err(EvalError::NonIntegerStride { fps_orig, fps_new });
    }
    Ok(fps_orig / fps_new)
}

/// Keeps stamps `t` with `(t - 1) mod (fps_orig / fps_new) == 0`.
pub fn decimate(frames: &[u32], fps_orig: u32, fps_new: u32) -> Result<Vec<u32>, EvalError> {
    let stride = decimation_stride(fps_orig, fps_new)?;
    Ok(frames.iter().copied().filter(|&t| t >= 1 && (t - 1) % stride == 0).collect())
}

/// Keeps the rows whose frame survives decimation.
pub fn decimate_rows(rows: &[MotRow], fps_orig: u32, fps_new: u32) -> Result<Vec<MotRow>, EvalError> {
    let stride = decimation_stride(fps_orig, fps_new)?;
    Ok(rows.iter().copied().filter(|r| (r.frame - 1) % stride == 0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub frame: u32,
    /// Box center.
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub width: f64,
    pub height: f64,
    /// Visited in order; the target exists from the first to the last
    /// waypoint frame, moving linearly in between.
    pub waypoints: Vec<Waypoint>,
    /// Inclusive frame ranges in which the target yields no detection and
    /// no ground-truth row.
    #[serde(default)]
    pub occlusions: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub width: f64,
    pub height: f64,
    pub targets: Vec<TargetSpec>,
    /// Standard deviation of detection center noise, pixels.
    #[serde(default)]
    pub position_noise: f64,
    /// Standard deviation of detection size noise, pixels.
    #[serde(default)]
    pub size_noise: f64,
    /// Probability that a visible target yields no detection.
    #[serde(default)]
    pub dropout: f64,
    /// Probability, per visible target and frame, of one extra detection at
    /// a random location.
    #[serde(default)]
    pub clutter: f64,
    /// Standard deviation of per-detection descriptor noise.
    #[serde(default)]
    pub descriptor_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        let spec: Self = toml::from_str(text).map_err(|e| EvalError::InvalidScenario(e.to_string()))?;
        spec.validate()
    }

    pub fn validate(self) -> Result<Self, EvalError> {
        let bad = |m: String| Err(EvalError::InvalidScenario(m));
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("arena size must be positive".into());
        }
        for (name, p) in [("dropout", self.dropout), ("clutter", self.clutter)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, s) in [
            ("position_noise", self.position_noise),
            ("size_noise", self.size_noise),
            ("descriptor_noise", self.descriptor_noise),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        for (k, t) in self.targets.iter().enumerate() {
            if !(t.width > 0.0 && t.height > 0.0) {
                return bad(format!("target {k}: size must be positive"));
            }
            if t.waypoints.is_empty() || t.waypoints[0].frame < 1 {
                return bad(format!("target {k}: needs waypoints starting at frame 1 or later"));
            }
            if t.waypoints.windows(2).any(|w| w[1].frame <= w[0].frame) {
                return bad(format!("target {k}: waypoint frames must increase"));
            }
        }
        Ok(self)
    }

    /// Two targets walking towards each other along one line. They pass in
    /// the middle of the sequence; the target walking left stands behind
    /// the other for an eight-frame occlusion.
    pub fn crossing(seed: u64) -> Self {
        let target = |waypoints: Vec<Waypoint>, occlusions: Vec<[u32; 2]>| TargetSpec {
            width: 40.0,
            height: 100.0,
            waypoints,
            occlusions,
        };
        let wp = |frame, x| Waypoint { frame, x, y: 240.0 };
        Self {
            width: 640.0,
            height: 480.0,
            targets: vec![
                target(vec![wp(1, 140.0), wp(100, 536.0)], vec![]),
                target(
                    vec![wp(1, 516.0), wp(45, 340.0), wp(54, 340.0), wp(100, 156.0)],
                    vec![[46, 53]],
                ),
            ],
            position_noise: 0.0,
            size_noise: 0.0,
            dropout: 0.0,
            clutter: 0.0,
            descriptor_noise: 0.0,
            seed,
        }
    }
}

impl TargetSpec {
    pub fn first_frame(&self) -> u32 {
        self.waypoints[0].frame
    }

    pub fn last_frame(&self) -> u32 {
        self.waypoints[self.waypoints.len() - 1].frame
    }

    pub fn is_occluded(&self, frame: u32) -> bool {
        self.occlusions.iter().any(|[a, b]| (*a..=*b).contains(&frame))
    }

    /// Center at `frame` by linear interpolation between waypoints.
    pub fn center_at(&self, frame: u32) -> Option<(f64, f64)> {
        if frame < self.first_frame() || frame > self.last_frame() {
            return None;
        }
        let k = self.waypoints.iter().rposition(|w| w.frame <= frame)?;
        let a = self.waypoints[k];
        let Some(b) = self.waypoints.get(k + 1) else {
            return Some((a.x, a.y));
        };
        let s = (frame - a.frame) as f64 / (b.frame - a.frame) as f64;
        Some((a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)))
    }
}

/// One generated detection.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDetection {
    pub row: MotRow,
    /// Target identity, or a value from [`CLUTTER_IDENTITY_BASE`] upward.
    pub identity: u64,
    /// Unique per detection over the scenario.
    pub instance: u64,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Per frame, in file order.
    pub detections: BTreeMap<u32, Vec<SyntheticDetection>>,
    pub gt: GroundTruth,
    /// Unit signature per target identity (identity `k + 1` at index `k`).
    pub signatures: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn detection_rows(&self) -> Vec<MotRow> {
        self.detections.values().flatten().map(|d| d.row).collect()
    }

    /// Detections described by identity tags, for the oracle scorer.
    pub fn tagged_detections(&self) -> BTreeMap<u32, Vec<Detection>> {
        self.to_detections(|d| AppearanceDescriptor::Tag {
            identity: d.identity,
            instance: d.instance,
        })
    }

    /// Detections described by their noisy signatures.
    pub fn embedded_detections(&self) -> BTreeMap<u32, Vec<Detection>> {
        self.to_detections(|d| AppearanceDescriptor::vector(d.embedding.clone()))
    }

    fn to_detections(&self, desc: impl Fn(&SyntheticDetection) -> AppearanceDescriptor) -> BTreeMap<u32, Vec<Detection>> {
        self.detections
            .iter()
            .map(|(&f, ds)| {
                let dets = ds
                    .iter()
                    .map(|d| Detection::new(f, d.row.bbox, d.row.conf, desc(d)).expect("generated rows are valid"))
                    .collect();
                (f, dets)
            })
            .collect()
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        e
    }
}

/// Deterministic scene from a spec. Signatures are non-negative unit
/// vectors so they also serve as histogram-like descriptors.
pub fn generate_scenario(spec: &ScenarioSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0f64, 1.0).expect("unit normal");
    let signatures: Vec<Vec<f64>> = spec
        .targets
        .iter()
        .map(|_| unit((0..SIGNATURE_DIM).map(|_| f64::powi(std_normal.sample(&mut rng), 2)).collect()))
        .collect();
    let first = spec.targets.iter().map(TargetSpec::first_frame).min().unwrap_or(1);
    let last = spec.targets.iter().map(TargetSpec::last_frame).max().unwrap_or(0);

    let mut detections: BTreeMap<u32, Vec<SyntheticDetection>> = BTreeMap::new();
    let mut gt_rows = Vec::new();
    let mut instance = 0u64;
    let mut clutter_id = CLUTTER_IDENTITY_BASE;
    let noisy = |rng: &mut ChaCha8Rng, base: &[f64]| -> Vec<f64> {
        if spec.descriptor_noise == 0.0 {
            return base.to_vec();
        }
        unit(base.iter().map(|v| (v + spec.descriptor_noise * std_normal.sample(rng)).max(0.0)).collect())
    };

    for frame in first..=last {
        let mut frame_dets = Vec::new();
        let mut visible = 0usize;
        for (k, t) in spec.targets.iter().enumerate() {
            let Some((cx, cy)) = t.center_at(frame) else { continue };
            if t.is_occluded(frame) {
                continue;
            }
            visible += 1;
            let identity = k as u64 + 1;
            let gt_box = BoundingBox::from_center(cx, cy, t.width, t.height).expect("validated target size");
            gt_rows.push(ResultRow {
                frame,
                id: identity,
                bbox: gt_box,
            });
            if spec.dropout > 0.0 && rng.random::<f64>() < spec.dropout {
                continue;
            }
            let jitter = |rng: &mut ChaCha8Rng, s: f64| if s > 0.0 { s * std_normal.sample(rng) } else { 0.0 };
            let dx = jitter(&mut rng, spec.position_noise);
            let dy = jitter(&mut rng, spec.position_noise);
            let w = (t.width + jitter(&mut rng, spec.size_noise)).max(1.0);
            let h = (t.height + jitter(&mut rng, spec.size_noise)).max(1.0);
            let conf = rng.random_range(0.6..1.0);
            let bbox = BoundingBox::from_center(cx + dx, cy + dy, w, h).expect("positive size");
            instance += 1;
            frame_dets.push(SyntheticDetection {
                row: MotRow::detection(frame, bbox, conf),
                identity,
                instance,
                embedding: noisy(&mut rng, &signatures[k]),
            });
        }
        for _ in 0..visible {
            if spec.clutter > 0.0 && rng.random::<f64>() < spec.clutter {
                let t = &spec.targets[rng.random_range(0..spec.targets.len())];
                let scale = rng.random_range(0.8..1.2);
                let (w, h) = (t.width * scale, t.height * scale);
                let cx = rng.random_range(w / 2.0..(spec.width - w / 2.0).max(w / 2.0 + 1.0));
                let cy = rng.random_range(h / 2.0..(spec.height - h / 2.0).max(h / 2.0 + 1.0));
                let bbox = BoundingBox::from_center(cx, cy, w, h).expect("positive size");
                let conf = rng.random_range(0.3..0.8);
                let embedding = unit((0..SIGNATURE_DIM).map(|_| f64::powi(std_normal.sample(&mut rng), 2)).collect());
                instance += 1;
                clutter_id += 1;
                frame_dets.push(SyntheticDetection {
                    row: MotRow::detection(frame, bbox, conf),
                    identity: clutter_id,
                    instance,
                    embedding,
                });
            }
        }
        if !frame_dets.is_empty() {
            detections.insert(frame, frame_dets);
        }
    }

    Scenario {
        detections,
        gt: GroundTruth::new(gt_rows).expect("one row per target and frame"),
        signatures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(frame: u32, id: u64, x: f64) -> ResultRow {
        ResultRow {
            frame,
            id,
            bbox: BoundingBox::new(x, 0.0, 10.0, 20.0).unwrap(),
        }
    }

    fn det(x: f64, conf: f64) -> Detection {
        let b = BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap();
        Detection::new(1, b, conf, AppearanceDescriptor::vector(vec![1.0])).unwrap()
    }

    #[test]
    fn perfect_and_empty_results() {
        let gt = GroundTruth::new((1..=10).map(|f| row(f, 1, f as f64)).collect()).unwrap();
        let m = clear_mot(&gt, gt.rows(), 0.5);
        assert_eq!((m.false_positives, m.false_negatives, m.id_switches), (0, 0, 0));
        assert_eq!(m.mota, 1.0);
        assert_eq!(m.motp, 1.0);
        assert_eq!(m.mostly_tracked, 1);
        let e = clear_mot(&gt, &[], 0.5);
        assert_eq!(e.false_negatives, 10);
        assert_eq!(e.mota, 0.0);
        assert_eq!(e.mostly_lost, 1);
        assert_eq!(idf1(&gt, gt.rows()), 1.0);
        assert_eq!(idf1(&gt, &[]), 0.0);
    }

    #[test]
    fn single_switch_example() {
        let gt = GroundTruth::new((1..=10).map(|f| row(f, 1, 0.0)).collect()).unwrap();
        let res: Vec<_> = (1..=10).map(|f| row(f, if f < 6 { 7 } else { 8 }, 0.0)).collect();
        let m = clear_mot(&gt, &res, 0.5);
        assert_eq!(m.id_switches, 1);
        assert_eq!(m.mota, 0.9);
        assert_eq!(m.fragmentations, 0);
    }

    #[test]
    fn half_coverage_idf1() {
        let gt = GroundTruth::new((1..=10).map(|f| row(f, 1, 0.0)).collect()).unwrap();
        let res: Vec<_> = (1..=5).map(|f| row(f, 4, 0.0)).collect();
        let s = id_scores(&gt, &res, 0.5);
        assert_eq!((s.idtp, s.idfp, s.idfn), (5, 0, 5));
        assert!((s.idf1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fragmentation_counts_interruptions() {
        let gt = GroundTruth::new((1..=10).map(|f| row(f, 1, 0.0)).collect()).unwrap();
        let res: Vec<_> = (1..=10).filter(|f| *f != 4 && *f != 8).map(|f| row(f, 2, 0.0)).collect();
        assert_eq!(clear_mot(&gt, &res, 0.5).fragmentations, 2);
    }

    #[test]
    fn duplicate_gt_rows_rejected() {
        assert!(matches!(
            GroundTruth::new(vec![row(1, 1, 0.0), row(1, 1, 3.0)]),
            Err(EvalError::DuplicateRow { frame: 1, id: 1 })
        ));
    }

    #[test]
    fn nms_examples() {
        let kept = nms(&[det(0.0, 0.9), det(0.0, 0.8)], 0.5, f64::NEG_INFINITY);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].raw_confidence, 0.9);
        assert_eq!(nms(&[det(0.0, 0.9), det(50.0, 0.8)], 0.5, f64::NEG_INFINITY).len(), 2);
        // neighbours overlap at IoU 0.6 when shifted by a quarter width
        let chain = [det(0.0, 0.9), det(2.5, 0.8), det(5.0, 0.7)];
        assert!((iou(&chain[0].bbox, &chain[1].bbox) - 0.6).abs() < 1e-12);
        let kept: Vec<f64> = nms(&chain, 0.5, f64::NEG_INFINITY).iter().map(|d| d.raw_confidence).collect();
        assert_eq!(kept, vec![0.9, 0.7]);
        assert_eq!(nms(&chain, 0.5, 0.75).len(), 1);
    }

    #[test]
    fn decimation_examples() {
        let frames: Vec<u32> = (1..=12).collect();
        assert_eq!(decimate(&frames, 30, 5).unwrap(), vec![1, 7]);
        assert_eq!(decimate(&frames, 30, 30).unwrap(), frames);
        assert_eq!(
            decimate(&frames, 30, 4),
            Err(EvalError::NonIntegerStride { fps_orig: 30, fps_new: 4 })
        );
        for n in 1..200u32 {
            let frames: Vec<u32> = (1..=n).collect();
            assert_eq!(decimate(&frames, 30, 5).unwrap().len() as u32, n.div_ceil(6));
        }
    }

    #[test]
    fn clean_scenario_matches_ground_truth() {
        let spec = ScenarioSpec::crossing(3);
        let s = generate_scenario(&spec);
        assert_eq!(s, generate_scenario(&spec));
        let rows: Vec<ResultRow> = s
            .detections
            .values()
            .flatten()
            .map(|d| ResultRow {
                frame: d.row.frame,
                id: d.identity,
                bbox: d.row.bbox,
            })
            .collect();
        assert_eq!(GroundTruth::new(rows).unwrap(), s.gt);
        // occluded frames have no row for the second target
        assert!(s.gt.rows().iter().all(|r| !(r.id == 2 && (46..=53).contains(&r.frame))));
        let traj = s.gt.trajectories();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj[&2].len(), 92);
    }

    #[test]
    fn scenario_from_toml() {
        let text = r#"
            width = 320.0
            height = 240.0
            dropout = 0.1
            seed = 9

            [[targets]]
            width = 20.0
            height = 50.0
            waypoints = [{ frame = 1, x = 50.0, y = 100.0 }, { frame = 30, x = 200.0, y = 100.0 }]
            occlusions = [[10, 12]]
        "#;
        let spec = ScenarioSpec::from_toml(text).unwrap();
        assert_eq!(spec.targets[0].center_at(30), Some((200.0, 100.0)));
        assert!(ScenarioSpec::from_toml("width = 1.0\nheight = 1.0\ntargets = []\nbogus = 1").is_err());
        let s = generate_scenario(&spec);
        assert_eq!(s.gt.len(), 27);
        assert!(s.detection_rows().len() < 27);
    }
}
