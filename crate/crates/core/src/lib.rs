//! Online multi-target tracking by detection with temporal appearance
//! matching association.
//!
//! A [`engine::Tracker`] consumes detections frame by frame. Each track keeps
//! a Kalman state, its most recent appearance and a short historical cue;
//! detections are matched through a likelihood that combines motion, shape
//! and appearance, and unmatched detections grow hypothesis trees from which
//! new tracks are born.

pub mod appearance;
pub mod assoc;
pub mod cli;
pub mod config;
pub mod cue;
pub mod engine;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod lifecycle;
pub mod tama;
pub mod types;

pub use assoc::AppearanceModel;
pub use config::{InitMode, LikelihoodMode, TrackerConfig};
pub use engine::{run_sequence, EngineError, FrameEvents, Tracker};
pub use types::{AppearanceDescriptor, BoundingBox, Detection, ResultRow, Track};
