//! Per-frame tracking loop: predict, score, assign, validate, update,
//! initialize and terminate.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::appearance::{blend_descriptors, select_feature_update, AppearanceError};
use crate::assoc::{build_similarity, hungarian, validate_matches, AppearanceModel};
use crate::config::{LikelihoodMode, TrackerConfig};
use crate::geometry::{kalman_predict, kalman_update};
use crate::lifecycle::{apply_termination, extend_trees, promote_trees, HypothesisTree};
use crate::tama::TamaError;
use crate::types::{Detection, ResultRow, Track};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("frame {got} does not follow frame {previous}")]
    NonMonotoneFrame { previous: u32, got: u32 },
    #[error("detection stamped frame {found} passed to step for frame {expected}")]
    FrameMismatch { expected: u32, found: u32 },
    #[error("frame step must be positive")]
    ZeroFrameStep,
    #[error(transparent)]
    Scoring(#[from] TamaError),
    #[error(transparent)]
    Appearance(#[from] AppearanceError),
}

/// Everything that happened in one call to [`Tracker::step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameEvents {
    pub frame: u32,
    /// `(track id, detection index, likelihood)`.
    pub matches: Vec<(u64, usize, f64)>,
    /// Newborn track ids with their backdated rows.
    pub births: Vec<(u64, Vec<ResultRow>)>,
    pub terminated: Vec<u64>,
}

/// Owns all track state for one sequence.
pub struct Tracker {
    cfg: TrackerConfig,
    model: AppearanceModel,
    tracks: Vec<Track>,
    trees: Vec<HypothesisTree>,
    next_id: u64,
    current_frame: Option<u32>,
    /// Processed-frame counter; cue ages and intervals are measured in it.
    tick: u32,
    results: Vec<ResultRow>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, model: AppearanceModel) -> Self {
        Self {
            cfg,
            model,
            tracks: Vec::new(),
            trees: Vec::new(),
            next_id: 1,
            current_frame: None,
            tick: 0,
            results: Vec::new(),
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn trees(&self) -> &[HypothesisTree] {
        &self.trees
    }

    pub fn current_frame(&self) -> Option<u32> {
        self.current_frame
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    /// All rows emitted so far, ordered by `(frame, id)`.
    pub fn results(&self) -> Vec<ResultRow> {
        let mut rows = self.results.clone();
        rows.sort_by_key(|r| (r.frame, r.id));
        rows
    }

    pub fn into_results(self) -> Vec<ResultRow> {
        self.results()
    }

    pub fn step(&mut self, frame: u32, dets: Vec<Detection>) -> Result<FrameEvents, EngineError> {
        if let Some(prev) = self.current_frame {
            if frame <= prev {
                return Err(EngineError::NonMonotoneFrame { previous: prev, got: frame });
            }
        }
        if let Some(d) = dets.iter().find(|d| d.frame != frame) {
            return Err(EngineError::FrameMismatch {
                expected: frame,
                found: d.frame,
            });
        }
        let tick = self.tick + 1;
        let cfg = &self.cfg;

        let predicted: Vec<Track> = self
            .tracks
            .iter()
            .map(|t| {
                let mut p = kalman_predict(t, &cfg.geometry);
                p.cue.prune(tick, cfg);
                p
            })
            .collect();

        let sim = build_similarity(&predicted, &dets, cfg, &self.model)?;
        let assignment = hungarian(&sim.cost());
        let (valid, missed) = validate_matches(&assignment, &sim, cfg.tau_match);

        // scoring is done; mutate state from here on
        self.tick = tick;
        self.current_frame = Some(frame);
        let mut events = FrameEvents {
            frame,
            ..Default::default()
        };
        let mut tracks = predicted;
        let mut det_used = vec![false; dets.len()];
        let lambda_f = cfg.lambda_f.unwrap_or_else(|| cfg.lambda_f_for(self.model.family));
        for &(i, j) in &valid.pairs {
            let lambda = sim.get(i, j);
            let det = &dets[j];
            let mut t = kalman_update(&tracks[i], det, &cfg.geometry);
            t.cue.maybe_add(lambda, &det.descriptor, det.bbox, tick, cfg);
            t.template = match cfg.likelihood_mode {
                LikelihoodMode::BaselineLinear => blend_descriptors(&t.template, &det.descriptor, lambda, lambda_f)?,
                LikelihoodMode::BaselineSelect => {
                    select_feature_update(&t.template, &det.descriptor, lambda, cfg.tau_a).clone()
                }
                _ => det.descriptor.clone(),
            };
            t.recent_appearance = det.descriptor.clone();
            t.recent_box = det.bbox;
            t.recent_confidence = lambda;
            t.miss_count = 0;
            t.last_matched_frame = frame;
            self.results.push(ResultRow {
                frame,
                id: t.id,
                bbox: t.state_box(),
            });
            events.matches.push((t.id, j, lambda));
            det_used[j] = true;
            tracks[i] = t;
        }
        for &i in &missed {
            tracks[i].miss_count += 1;
        }

        apply_termination(&mut tracks, cfg);
        events.terminated = tracks.iter().filter(|t| !t.is_active()).map(|t| t.id).collect();
        tracks.retain(Track::is_active);

        let unmatched: Vec<Detection> = dets
            .into_iter()
            .zip(&det_used)
            .filter(|(_, used)| !**used)
            .map(|(d, _)| d)
            .collect();
        let (trees, _) = extend_trees(std::mem::take(&mut self.trees), &unmatched, cfg);
        let (born, trees) = promote_trees(trees, cfg, &mut self.next_id);
        self.trees = trees;
        for (track, path) in born {
            let rows: Vec<ResultRow> = path
                .iter()
                .map(|d| ResultRow {
                    frame: d.frame,
                    id: track.id,
                    bbox: d.bbox,
                })
                .collect();
            self.results.extend_from_slice(&rows);
            events.births.push((track.id, rows));
            tracks.push(track);
        }
        self.tracks = tracks;
        Ok(events)
    }
}

/// Runs a whole sequence. Every frame stamp from the first to the last
/// detection frame, spaced by `frame_step`, is processed; stamps without
/// detections are empty frames.
pub fn run_sequence(
    dets_by_frame: &BTreeMap<u32, Vec<Detection>>,
    cfg: &TrackerConfig,
    model: &AppearanceModel,
    frame_step: u32,
) -> Result<Vec<ResultRow>, EngineError> {
    if frame_step == 0 {
        return Err(EngineError::ZeroFrameStep);
    }
    let mut tracker = Tracker::new(cfg.clone(), model.clone());
    let (Some(&first), Some(&last)) = (dets_by_frame.keys().next(), dets_by_frame.keys().next_back()) else {
        return Ok(Vec::new());
    };
    let mut frame = first;
    let mut pending = dets_by_frame.iter().peekable();
    while frame <= last {
        let mut dets: Vec<Detection> = Vec::new();
        while let Some((&f, d)) = pending.peek() {
            if f > frame {
                break;
            }
            if f == frame {
                dets.clone_from(d);
            }
            pending.next();
        }
        tracker.step(frame, dets)?;
        match frame.checked_add(frame_step) {
            Some(next) => frame = next,
            None => break,
        }
    }
    Ok(tracker.into_results())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::ConstantScorer;
    use crate::types::{AppearanceDescriptor, BoundingBox};

    fn det(frame: u32, x: f64) -> Detection {
        let b = BoundingBox::new(x, 50.0, 40.0, 100.0).unwrap();
        Detection::new(frame, b, 0.9, AppearanceDescriptor::vector(vec![1.0])).unwrap()
    }

    fn tracker() -> Tracker {
        Tracker::new(TrackerConfig::default(), AppearanceModel::with_scorer(ConstantScorer(1.0)))
    }

    #[test]
    fn frames_must_increase() {
        let mut t = tracker();
        t.step(3, vec![]).unwrap();
        assert!(matches!(t.step(3, vec![]), Err(EngineError::NonMonotoneFrame { .. })));
        assert!(matches!(t.step(4, vec![det(5, 0.0)]), Err(EngineError::FrameMismatch { .. })));
    }

    #[test]
    fn single_target_is_born_then_followed() {
        let mut t = tracker();
        for f in 1..=20u32 {
            let ev = t.step(f, vec![det(f, 2.0 * f as f64)]).unwrap();
            if f == 5 {
                assert_eq!(ev.births.len(), 1);
                assert_eq!(ev.births[0].1.len(), 5);
            }
            if f > 5 {
                assert_eq!(ev.matches.len(), 1);
            }
        }
        let rows = t.results();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| r.id == 1));
        assert!(rows.windows(2).all(|w| w[0].frame < w[1].frame));
    }

    #[test]
    fn matched_likelihood_is_appearance_at_identity_geometry() {
        let mut t = Tracker::new(TrackerConfig::default(), AppearanceModel::with_scorer(ConstantScorer(0.7)));
        for f in 1..=5u32 {
            t.step(f, vec![det(f, 100.0)]).unwrap();
        }
        let ev = t.step(6, vec![det(6, 100.0)]).unwrap();
        assert_eq!(ev.matches.len(), 1);
        assert!((ev.matches[0].2 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn empty_frames_count_as_misses() {
        let mut t = tracker();
        for f in 1..=5u32 {
            t.step(f, vec![det(f, 100.0)]).unwrap();
        }
        for f in 6..=64u32 {
            t.step(f, vec![]).unwrap();
            assert!(t.tracks().iter().all(|tr| tr.miss_count < t.config().termination_threshold()));
        }
        assert_eq!(t.tracks().len(), 1);
        let ev = t.step(65, vec![]).unwrap();
        assert_eq!(ev.terminated, vec![1]);
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn run_sequence_handles_gaps_and_empty_input() {
        let cfg = TrackerConfig::default();
        let model = AppearanceModel::with_scorer(ConstantScorer(1.0));
        assert!(run_sequence(&BTreeMap::new(), &cfg, &model, 1).unwrap().is_empty());
        let mut dets = BTreeMap::new();
        for f in (1..=12u32).filter(|f| *f != 8) {
            dets.insert(f, vec![det(f, 100.0)]);
        }
        let rows = run_sequence(&dets, &cfg, &model, 1).unwrap();
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.frame != 8));
    }
}
