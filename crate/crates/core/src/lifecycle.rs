//! Track birth through hypothesis trees, and termination after a run of
//! missed frames.

use nalgebra::Vector4;

use crate::config::{InitMode, TrackerConfig};
use crate::geometry::iou;
use crate::cue::HistoricalAppearanceCue;
use crate::types::{BoundingBox, Detection, Track, TrackStatus};

/// Confidence assigned to the recent appearance of a newborn track.
pub const NEWBORN_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub det: Detection,
    /// Index into the previous level; `None` only at the root level.
    pub parent: Option<usize>,
}

/// Candidate track rooted at one unmatched detection. Every level holds the
/// detections of one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisTree {
    levels: Vec<Vec<TreeNode>>,
}

impl HypothesisTree {
    pub fn new(root: Detection) -> Self {
        Self {
            levels: vec![vec![TreeNode { det: root, parent: None }]],
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Vec<TreeNode>] {
        &self.levels
    }

    pub fn deepest(&self) -> &[TreeNode] {
        self.levels.last().expect("tree has a root level")
    }

    /// Node indices from the root down to `leaf` on the deepest level.
    pub fn path_to(&self, leaf: usize) -> Vec<usize> {
        let mut idx = vec![leaf];
        let mut cur = leaf;
        for level in self.levels.iter().rev() {
            match level[cur].parent {
                Some(p) => {
                    idx.push(p);
                    cur = p;
                }
                None => break,
            }
        }
        idx.reverse();
        idx
    }

    pub fn path_detections(&self, leaf: usize) -> Vec<&Detection> {
        self.path_to(leaf)
            .into_iter()
            .zip(&self.levels)
            .map(|(i, level)| &level[i].det)
            .collect()
    }

    /// Every non-root node has a parent on the previous level and frames
    /// increase strictly with depth.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.levels.is_empty() || self.levels.iter().any(Vec::is_empty) {
            return Err("empty level".into());
        }
        for (k, level) in self.levels.iter().enumerate() {
            for node in level {
                match (k, node.parent) {
                    (0, None) => {}
                    (0, Some(_)) => return Err("root with a parent".into()),
                    (_, None) => return Err(format!("orphan at level {k}")),
                    (_, Some(p)) => {
                        let parent = self.levels[k - 1].get(p).ok_or("dangling parent")?;
                        if parent.det.frame >= node.det.frame {
                            return Err(format!("frames not increasing at level {k}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Weak test: center distance below `beta_dist * width(z)` and a height
/// ratio above `tau_shp`. Returns the distance when it passes.
fn weak_match(node: &BoundingBox, det: &BoundingBox, cfg: &TrackerConfig) -> Option<f64> {
    let dist = center_distance(node, det);
    let ratio = (det.height / node.height).min(node.height / det.height);
    (dist < cfg.beta_dist * det.width && ratio > cfg.tau_shp).then_some(dist)
}

/// Grows the trees by one frame. Returns the surviving and newly rooted
/// trees, and for each input detection whether it joined an existing tree.
pub fn extend_trees(
    trees: Vec<HypothesisTree>,
    dets: &[Detection],
    cfg: &TrackerConfig,
) -> (Vec<HypothesisTree>, Vec<bool>) {
    // attachment[j] = (tree, parent node)
    let mut attachment: Vec<Option<(usize, usize)>> = vec![None; dets.len()];

    if cfg.init_mode != InitMode::DistanceOnly {
        for (j, d) in dets.iter().enumerate() {
            let mut best: Option<(f64, usize, usize)> = None;
            for (t, tree) in trees.iter().enumerate() {
                for (n, node) in tree.deepest().iter().enumerate() {
                    let v = iou(&node.det.bbox, &d.bbox);
                    if v > cfg.tau_iou && best.is_none_or(|b| v > b.0) {
                        best = Some((v, t, n));
                    }
                }
            }
            attachment[j] = best.map(|(_, t, n)| (t, n));
        }
    }

    if cfg.init_mode != InitMode::IouOnly {
        let mut grown = vec![false; trees.len()];
        for &(t, _) in attachment.iter().flatten() {
            grown[t] = true;
        }
        for (j, d) in dets.iter().enumerate() {
            if attachment[j].is_some() {
                continue;
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for (t, tree) in trees.iter().enumerate().filter(|(t, _)| !grown[*t]) {
                for (n, node) in tree.deepest().iter().enumerate() {
                    if let Some(dist) = weak_match(&node.det.bbox, &d.bbox, cfg) {
                        if best.is_none_or(|b| dist < b.0) {
                            best = Some((dist, t, n));
                        }
                    }
                }
            }
            attachment[j] = best.map(|(_, t, n)| (t, n));
        }
    }

    let mut children: Vec<Vec<TreeNode>> = vec![Vec::new(); trees.len()];
    for (j, a) in attachment.iter().enumerate() {
        if let Some((t, n)) = *a {
            children[t].push(TreeNode {
                det: dets[j].clone(),
                parent: Some(n),
            });
        }
    }
    let mut out: Vec<HypothesisTree> = trees
        .into_iter()
        .zip(children)
        .filter(|(_, c)| !c.is_empty())
        .map(|(mut tree, c)| {
            tree.levels.push(c);
            tree
        })
        .collect();
    for (j, a) in attachment.iter().enumerate() {
        if a.is_none() {
            out.push(HypothesisTree::new(dets[j].clone()));
        }
    }
    (out, attachment.iter().map(Option::is_some).collect())
}

/// Leaf on the deepest level whose root path maximizes the summed IoU of
/// consecutive boxes; ties go to the higher mean confidence, then the lower
/// leaf index.
pub fn select_path(tree: &HypothesisTree) -> usize {
    let mut best: Option<(f64, f64, usize)> = None;
    for leaf in 0..tree.deepest().len() {
        let path = tree.path_detections(leaf);
        let score: f64 = path.windows(2).map(|w| iou(&w[0].bbox, &w[1].bbox)).sum();
        let conf = path.iter().map(|d| d.confidence).sum::<f64>() / path.len() as f64;
        let better = match best {
            None => true,
            Some((s, c, _)) => score > s || (score == s && conf > c),
        };
        if better {
            best = Some((score, conf, leaf));
        }
    }
    best.map_or(0, |b| b.2)
}

/// Builds a track from a root-to-leaf path. Velocity is the endpoint
/// displacement divided by the number of processed frames spanned.
pub fn track_from_path(path: &[Detection], id: u64, cfg: &TrackerConfig) -> Track {
    let first = path.first().expect("non-empty path");
    let last = path.last().expect("non-empty path");
    let steps = (path.len() - 1).max(1) as f64;
    let (fx, fy) = first.bbox.center();
    let (lx, ly) = last.bbox.center();
    Track {
        id,
        state: Vector4::new(lx, ly, (lx - fx) / steps, (ly - fy) / steps),
        covariance: cfg.geometry.initial_covariance(),
        width: last.bbox.width,
        height: last.bbox.height,
        recent_appearance: last.descriptor.clone(),
        recent_box: last.bbox,
        recent_confidence: NEWBORN_CONFIDENCE,
        template: last.descriptor.clone(),
        cue: HistoricalAppearanceCue::new(),
        miss_count: 0,
        birth_frame: first.frame,
        last_matched_frame: last.frame,
        status: TrackStatus::Active,
    }
}

/// Promotes every tree deeper than `tau_init`. Returns each new track with
/// its supporting detections, and the trees still growing.
pub fn promote_trees(
    trees: Vec<HypothesisTree>,
    cfg: &TrackerConfig,
    next_id: &mut u64,
) -> (Vec<(Track, Vec<Detection>)>, Vec<HypothesisTree>) {
    let mut born = Vec::new();
    let mut remaining = Vec::new();
    for tree in trees {
        if tree.depth() > cfg.tau_init {
            let leaf = select_path(&tree);
            let path: Vec<Detection> = tree.path_detections(leaf).into_iter().cloned().collect();
            let track = track_from_path(&path, *next_id, cfg);
            *next_id += 1;
            born.push((track, path));
        } else {
            remaining.push(tree);
        }
    }
    (born, remaining)
}

/// Marks tracks whose miss count reached the termination threshold.
pub fn apply_termination(tracks: &mut [Track], cfg: &TrackerConfig) {
    let limit = cfg.termination_threshold();
    for t in tracks.iter_mut() {
        if t.miss_count >= limit {
            t.status = TrackStatus::Terminated;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::AppearanceDescriptor;

    fn det(frame: u32, x: f64, y: f64, w: f64, h: f64) -> Detection {
        let b = BoundingBox::new(x, y, w, h).unwrap();
        Detection::new(frame, b, 0.9, AppearanceDescriptor::vector(vec![1.0])).unwrap()
    }

    fn cfg() -> TrackerConfig {
        TrackerConfig::default()
    }

    #[test]
    fn iou_attachment() {
        let trees = vec![HypothesisTree::new(det(1, 0.0, 0.0, 10.0, 10.0))];
        // IoU 0.6: shift by a quarter of the width
        let d = det(2, 2.5, 0.0, 10.0, 10.0);
        assert!((iou(&trees[0].deepest()[0].det.bbox, &d.bbox) - 0.6).abs() < 1e-12);
        let (trees, consumed) = extend_trees(trees, &[d], &cfg());
        assert_eq!(consumed, vec![true]);
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].depth(), 2);
    }

    #[test]
    fn weak_attachment() {
        let trees = vec![HypothesisTree::new(det(1, 0.0, 0.0, 10.0, 100.0))];
        // distance 7 = 0.7 * width, height ratio 0.9, IoU below 0.5
        let d = det(2, 7.0, 5.0, 10.0, 90.0);
        assert!(iou(&trees[0].deepest()[0].det.bbox, &d.bbox) < 0.5);
        let (trees, consumed) = extend_trees(trees, &[d], &cfg());
        assert_eq!(consumed, vec![true]);
        assert_eq!(trees[0].depth(), 2);
    }

    #[test]
    fn unmatched_tree_is_removed_and_detection_roots() {
        let trees = vec![HypothesisTree::new(det(1, 0.0, 0.0, 10.0, 10.0))];
        let (trees, consumed) = extend_trees(trees, &[det(2, 500.0, 0.0, 10.0, 10.0)], &cfg());
        assert_eq!(consumed, vec![false]);
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].depth(), 1);
        assert_eq!(trees[0].deepest()[0].det.bbox.left, 500.0);
    }

    #[test]
    fn detection_joins_one_tree_only() {
        let trees = vec![
            HypothesisTree::new(det(1, 0.0, 0.0, 10.0, 10.0)),
            HypothesisTree::new(det(1, 1.0, 0.0, 10.0, 10.0)),
        ];
        let (trees, consumed) = extend_trees(trees, &[det(2, 1.0, 0.0, 10.0, 10.0)], &cfg());
        assert_eq!(consumed, vec![true]);
        assert_eq!(trees.len(), 1, "tree 0 gained nothing and is dropped");
        assert_eq!(trees[0].levels()[0][0].det.bbox.left, 1.0);
    }

    #[test]
    fn promotion_at_depth_above_threshold() {
        let c = cfg();
        let mut trees = Vec::new();
        let mut next_id = 1;
        for f in 1..=5u32 {
            let (t, _) = extend_trees(trees, &[det(f, f as f64, 0.0, 10.0, 20.0)], &c);
            let (born, rest) = promote_trees(t, &c, &mut next_id);
            trees = rest;
            if f < 5 {
                assert!(born.is_empty(), "depth {f} not promoted");
            } else {
                assert_eq!(born.len(), 1);
                let (track, path) = &born[0];
                assert_eq!(path.len(), 5);
                assert_eq!(track.id, 1);
                assert!((track.state[2] - 1.0).abs() < 1e-12);
                assert_eq!(track.birth_frame, 1);
            }
        }
        assert!(trees.is_empty());
        assert_eq!(next_id, 2);
    }

    #[test]
    fn branching_tree_prefers_tight_path() {
        // root, then two children, then three leaves; enumerate paths by hand
        let root = det(1, 0.0, 0.0, 10.0, 10.0);
        let mut tree = HypothesisTree::new(root);
        tree.levels.push(vec![
            TreeNode { det: det(2, 1.0, 0.0, 10.0, 10.0), parent: Some(0) },
            TreeNode { det: det(2, 4.0, 0.0, 10.0, 10.0), parent: Some(0) },
        ]);
        tree.levels.push(vec![
            TreeNode { det: det(3, 5.0, 0.0, 10.0, 10.0), parent: Some(1) },
            TreeNode { det: det(3, 2.0, 0.0, 10.0, 10.0), parent: Some(0) },
            TreeNode { det: det(3, 4.0, 0.0, 10.0, 10.0), parent: Some(1) },
        ]);
        tree.check_invariants().unwrap();
        let mut best = (f64::MIN, usize::MAX);
        for leaf in 0..3 {
            let p = tree.path_detections(leaf);
            let s = iou(&p[0].bbox, &p[1].bbox) + iou(&p[1].bbox, &p[2].bbox);
            if s > best.0 {
                best = (s, leaf);
            }
        }
        assert_eq!(best.1, 1);
        assert_eq!(select_path(&tree), best.1);
    }

    #[test]
    fn termination_boundary() {
        let c = cfg();
        let mut t = track_from_path(&[det(1, 0.0, 0.0, 10.0, 10.0)], 1, &c);
        t.miss_count = 59;
        let mut tracks = vec![t.clone()];
        apply_termination(&mut tracks, &c);
        assert!(tracks[0].is_active());
        tracks[0].miss_count = 60;
        apply_termination(&mut tracks, &c);
        assert!(!tracks[0].is_active());
    }
}
