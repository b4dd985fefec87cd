//! Historical appearance cue: a short, ordered memory of a track's reliable
//! past appearances, bounded in length, age and sampling interval.

use std::collections::VecDeque;

use crate::config::TrackerConfig;
use crate::types::{AppearanceDescriptor, BoundingBox};

#[derive(Debug, Clone, PartialEq)]
pub struct CueEntry {
    /// Match likelihood at the time the entry was stored.
    pub confidence: f64,
    pub descriptor: AppearanceDescriptor,
    /// Box of the stored appearance; Deep-TAMA needs its width and height.
    pub bbox: BoundingBox,
    pub frame: u32,
}

/// Entries ordered oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoricalAppearanceCue {
    entries: VecDeque<CueEntry>,
}

impl HistoricalAppearanceCue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &CueEntry> {
        self.entries.iter()
    }

    pub fn oldest(&self) -> Option<&CueEntry> {
        self.entries.front()
    }

    pub fn newest(&self) -> Option<&CueEntry> {
        self.entries.back()
    }

    /// Drops oldest entries until both the length and the age limits hold.
    pub fn prune(&mut self, current_frame: u32, cfg: &TrackerConfig) {
        let max_age = cfg.max_cue_age();
        while let Some(first) = self.entries.front() {
            let age = current_frame.saturating_sub(first.frame) as f64;
            if self.entries.len() > cfg.tau_cue || age > max_age {
                self.entries.pop_front();
            } else {
                break;
            }
        }
    }

    /// Appends the candidate when its confidence strictly exceeds `tau_hist`
    /// and the minimum interval since the newest entry has elapsed, then
    /// prunes. Returns whether the candidate was stored.
    pub fn maybe_add(
        &mut self,
        confidence: f64,
        descriptor: &AppearanceDescriptor,
        bbox: BoundingBox,
        frame: u32,
        cfg: &TrackerConfig,
    ) -> bool {
        let spaced = match self.entries.back() {
            None => true,
            Some(last) => frame > last.frame && frame - last.frame >= cfg.min_cue_interval(),
        };
        let added = confidence > cfg.tau_hist && spaced;
        if added {
            self.entries.push_back(CueEntry {
                confidence,
                descriptor: descriptor.clone(),
                bbox,
                frame,
            });
        }
        self.prune(frame, cfg);
        added
    }

    /// Checks every structural invariant against `current_frame`.
    pub fn check_invariants(&self, current_frame: u32, cfg: &TrackerConfig) -> Result<(), String> {
        if self.entries.len() > cfg.tau_cue {
            return Err(format!("length {} exceeds {}", self.entries.len(), cfg.tau_cue));
        }
        if let Some(first) = self.entries.front() {
            let age = current_frame.saturating_sub(first.frame) as f64;
            if age > cfg.max_cue_age() {
                return Err(format!("oldest entry age {age} exceeds {}", cfg.max_cue_age()));
            }
        }
        for e in &self.entries {
            if e.confidence.is_nan() || e.confidence <= cfg.tau_hist {
                return Err(format!("confidence {} not above {}", e.confidence, cfg.tau_hist));
            }
        }
        for (a, b) in self.entries.iter().zip(self.entries.iter().skip(1)) {
            if b.frame <= a.frame || b.frame - a.frame < cfg.min_cue_interval() {
                return Err(format!("entries at frames {} and {} too close", a.frame, b.frame));
            }
        }
        Ok(())
    }
}
