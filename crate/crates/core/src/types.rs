//! Plain value types shared by every stage of the tracker.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

use crate::cue::HistoricalAppearanceCue;

/// Patch height in pixels after resizing.
pub const PATCH_HEIGHT: usize = 128;
/// Patch width in pixels after resizing.
pub const PATCH_WIDTH: usize = 64;
/// Number of colour channels in a patch.
pub const PATCH_CHANNELS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("box width and height must be positive and finite (got {width} x {height})")]
    InvalidBox { width: f64, height: f64 },
    #[error("box coordinates must be finite")]
    NonFiniteBox,
    #[error("frame index must be >= 1 (got {0})")]
    InvalidFrame(u32),
    #[error("confidence must be a finite number (got {0})")]
    NonFiniteConfidence(f64),
    #[error("patch must hold {expected} values in [0,1] (got {found})")]
    InvalidPatch { expected: usize, found: usize },
}

/// Axis-aligned box in MOT convention: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self, TypeError> {
        if !(left.is_finite() && top.is_finite()) {
            return Err(TypeError::NonFiniteBox);
        }
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(TypeError::InvalidBox { width, height });
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self, TypeError> {
        Self::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    pub fn center_x(&self) -> f64 {
        self.left + self.width / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.top + self.height / 2.0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.center_x(), self.center_y())
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// RGB raster of fixed size `PATCH_HEIGHT x PATCH_WIDTH x 3`, row-major,
/// channel-interleaved, values in `[0, 1]`.
#[derive(Clone, PartialEq)]
pub struct Patch {
    data: Vec<f32>,
}

impl Patch {
    pub const LEN: usize = PATCH_HEIGHT * PATCH_WIDTH * PATCH_CHANNELS;

    pub fn new(data: Vec<f32>) -> Result<Self, TypeError> {
        if data.len() != Self::LEN || data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(TypeError::InvalidPatch {
                expected: Self::LEN,
                found: data.len(),
            });
        }
        Ok(Self { data })
    }

    pub fn filled(rgb: [f32; 3]) -> Result<Self, TypeError> {
        let data = (0..PATCH_HEIGHT * PATCH_WIDTH)
            .flat_map(|_| rgb.into_iter())
            .collect();
        Self::new(data)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Iterates pixels as `[r, g, b]` triples.
    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

impl fmt::Debug for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Patch({}x{}x{})", PATCH_HEIGHT, PATCH_WIDTH, PATCH_CHANNELS)
    }
}

/// What a scorer compares. Shared via `Arc` so cue entries stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub enum AppearanceDescriptor {
    Patch(Arc<Patch>),
    Vector(Arc<[f64]>),
    /// Ground-truth identity for synthetic runs. `instance` is unique per
    /// detection and seeds the oracle's optional noise.
    Tag { identity: u64, instance: u64 },
}

impl AppearanceDescriptor {
    pub fn vector(values: Vec<f64>) -> Self {
        Self::Vector(values.into())
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Self::Vector(v) => Some(v),
            _ => None,
        }
    }
}

/// One detector output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BoundingBox,
    /// Clamped into `[0, 1]`.
    pub confidence: f64,
    /// Score as emitted by the detector, kept for NMS ordering.
    pub raw_confidence: f64,
    pub descriptor: AppearanceDescriptor,
}

impl Detection {
    pub fn new(
        frame: u32,
        bbox: BoundingBox,
        raw_confidence: f64,
        descriptor: AppearanceDescriptor,
    ) -> Result<Self, TypeError> {
        if frame < 1 {
            return Err(TypeError::InvalidFrame(frame));
        }
        if !raw_confidence.is_finite() {
            return Err(TypeError::NonFiniteConfidence(raw_confidence));
        }
        Ok(Self {
            frame,
            bbox,
            confidence: raw_confidence.clamp(0.0, 1.0),
            raw_confidence,
            descriptor,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Terminated,
}

/// A confirmed target. Kalman state is `(cx, cy, vx, vy)`; shape is smoothed
/// separately.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub width: f64,
    pub height: f64,
    /// Descriptor of the most recent match (`A_rcnt`).
    pub recent_appearance: AppearanceDescriptor,
    /// Box of the most recent match, used for relative shape differences.
    pub recent_box: BoundingBox,
    /// Likelihood of the most recent match (`c_rcnt`).
    pub recent_confidence: f64,
    /// Single template for the linear/select baseline modes.
    pub template: AppearanceDescriptor,
    pub cue: HistoricalAppearanceCue,
    pub miss_count: u32,
    pub birth_frame: u32,
    pub last_matched_frame: u32,
    pub status: TrackStatus,
}

impl Track {
    /// Box implied by the current state estimate and smoothed shape.
    pub fn state_box(&self) -> BoundingBox {
        BoundingBox {
            left: self.state[0] - self.width / 2.0,
            top: self.state[1] - self.height / 2.0,
            width: self.width,
            height: self.height,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.state[0], self.state[1])
    }

    pub fn is_active(&self) -> bool {
        self.status == TrackStatus::Active
    }
}

/// One line of tracker output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub frame: u32,
    pub id: u64,
    pub bbox: BoundingBox,
}
