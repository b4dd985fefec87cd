//! Appearance descriptors, pairwise scorers and matching-feature providers.
//!
//! The pairwise network of the original tracker is abstracted as two traits:
//! [`PairScorer`] yields a similarity in `[0, 1]` for a pair of descriptors,
//! [`PairFeatureProvider`] yields a fixed-length matching feature for a pair.
//! Built-in implementations cover colour histograms, embeddings, identity
//! oracles for synthetic data, and a deterministic synthetic matching feature.

use thiserror::Error;

use crate::types::{AppearanceDescriptor, Patch};

/// Bins per colour channel.
pub const HISTOGRAM_BINS: usize = 8;
/// Six channels (H, S, V, R, G, B) of eight bins.
pub const HISTOGRAM_DIM: usize = 6 * HISTOGRAM_BINS;
/// Output length of [`SyntheticPairFeature`].
pub const SYNTHETIC_FEATURE_DIM: usize = 150;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppearanceError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("oracle scoring requires tagged descriptors")]
    UntaggedDescriptor,
    #[error("descriptor kind not supported by {0}")]
    IncompatibleDescriptor(&'static str),
}

/// Pairwise appearance similarity in `[0, 1]`.
pub trait PairScorer: Send + Sync {
    fn score(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<f64, AppearanceError>;

    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Fixed-length matching feature for a pair of descriptors.
pub trait PairFeatureProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn feature(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<Vec<f64>, AppearanceError>;
}

fn rgb_to_hsv([r, g, b]: [f32; 3]) -> [f64; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    // h in [0, 6) sextants; scale to [0, 1)
    [(h / 6.0).min(1.0 - f64::EPSILON), s, v]
}

fn bin(value: f64) -> usize {
    ((value * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// HSV+RGB histogram, 8 bins per channel, L2-normalized as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram(pub [f64; HISTOGRAM_DIM]);

impl ColorHistogram {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_descriptor(self) -> AppearanceDescriptor {
        AppearanceDescriptor::vector(self.0.to_vec())
    }
}

pub fn extract_histogram(patch: &Patch) -> ColorHistogram {
    let mut counts = [0.0f64; HISTOGRAM_DIM];
    for px in patch.pixels() {
        let hsv = rgb_to_hsv(px);
        let channels = [hsv[0], hsv[1], hsv[2], px[0] as f64, px[1] as f64, px[2] as f64];
        for (c, v) in channels.into_iter().enumerate() {
            counts[c * HISTOGRAM_BINS + bin(v)] += 1.0;
        }
    }
    let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        counts.iter_mut().for_each(|v| *v /= norm);
    }
    ColorHistogram(counts)
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<(), AppearanceError> {
    if a.len() != b.len() {
        return Err(AppearanceError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sqrt(<a, b>)` for L2-normalized non-negative histograms.
pub fn histogram_score(a: &[f64], b: &[f64]) -> Result<f64, AppearanceError> {
    check_dims(a, b)?;
    // self inner product of a unit vector may round just below 1
    if a == b && a.iter().any(|v| *v != 0.0) {
        return Ok(1.0);
    }
    Ok(dot(a, b).max(0.0).sqrt().min(1.0))
}

/// `exp(-||a - b||^2)`.
pub fn embedding_score(a: &[f64], b: &[f64]) -> Result<f64, AppearanceError> {
    check_dims(a, b)?;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-d2).exp())
}

fn histogram_of(d: &AppearanceDescriptor) -> Result<std::borrow::Cow<'_, [f64]>, AppearanceError> {
    match d {
        AppearanceDescriptor::Vector(v) => Ok(std::borrow::Cow::Borrowed(v)),
        AppearanceDescriptor::Patch(p) => Ok(std::borrow::Cow::Owned(extract_histogram(p).0.to_vec())),
        AppearanceDescriptor::Tag { .. } => Err(AppearanceError::IncompatibleDescriptor("histogram scorer")),
    }
}

fn vector_of<'a>(d: &'a AppearanceDescriptor, who: &'static str) -> Result<&'a [f64], AppearanceError> {
    d.as_vector().ok_or(AppearanceError::IncompatibleDescriptor(who))
}

/// Colour-histogram scorer. Vector descriptors are taken as precomputed
/// histograms; patches are binned on the fly.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistogramScorer;

impl PairScorer for HistogramScorer {
    fn score(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<f64, AppearanceError> {
        histogram_score(&histogram_of(a)?, &histogram_of(b)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddingScorer;

impl PairScorer for EmbeddingScorer {
    fn score(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<f64, AppearanceError> {
        embedding_score(vector_of(a, "embedding scorer")?, vector_of(b, "embedding scorer")?)
    }
}

/// Square root of the cosine similarity (clamped at zero) between two
/// precomputed feature vectors. Reduces to [`histogram_score`] on unit vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineRootScorer;

impl PairScorer for CosineRootScorer {
    fn score(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<f64, AppearanceError> {
        let (a, b) = (vector_of(a, "file scorer")?, vector_of(b, "file scorer")?);
        check_dims(a, b)?;
        let na = dot(a, a).sqrt();
        let nb = dot(b, b).sqrt();
        if na == 0.0 || nb == 0.0 {
            return Ok(0.0);
        }
        Ok((dot(a, b) / (na * nb)).clamp(0.0, 1.0).sqrt())
    }
}

/// Returns the same score for every pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl PairScorer for ConstantScorer {
    fn score(&self, _: &AppearanceDescriptor, _: &AppearanceDescriptor) -> Result<f64, AppearanceError> {
        Ok(self.0)
    }
}

/// Identity oracle for synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScorer {
    pub same: f64,
    pub diff: f64,
    /// Amplitude of the symmetric, per-pair deterministic perturbation.
    pub noise: f64,
    pub seed: u64,
}

impl Default for OracleScorer {
    fn default() -> Self {
        Self {
            same: 0.9,
            diff: 0.1,
            noise: 0.0,
            seed: 0,
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PairScorer for OracleScorer {
    fn score(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<f64, AppearanceError> {
        let (
            AppearanceDescriptor::Tag { identity: ia, instance: xa },
            AppearanceDescriptor::Tag { identity: ib, instance: xb },
        ) = (a, b)
        else {
            return Err(AppearanceError::UntaggedDescriptor);
        };
        let base = if ia == ib { self.same } else { self.diff };
        if self.noise == 0.0 {
            return Ok(base);
        }
        let (lo, hi) = if xa <= xb { (*xa, *xb) } else { (*xb, *xa) };
        let h = mix64(mix64(self.seed ^ lo) ^ hi.rotate_left(32));
        let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
        Ok((base + self.noise * (2.0 * unit - 1.0)).clamp(0.0, 1.0))
    }
}

/// Deterministic 150-dimensional matching feature built from two 48-dimensional
/// vectors: `|a-b|`, `a*b`, `(a-b)^2` blocks followed by six summary
/// statistics (L1, L2, dot, sum of sqrt(a*b), max |a-b|, cosine).
pub fn synthetic_pair_feature(a: &[f64], b: &[f64]) -> Result<Vec<f64>, AppearanceError> {
    if a.len() != HISTOGRAM_DIM {
        return Err(AppearanceError::DimensionMismatch {
            expected: HISTOGRAM_DIM,
            found: a.len(),
        });
    }
    check_dims(a, b)?;
    let mut out = Vec::with_capacity(SYNTHETIC_FEATURE_DIM);
    out.extend(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    out.extend(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)));
    let l1: f64 = out[..HISTOGRAM_DIM].iter().sum();
    let l2 = out[2 * HISTOGRAM_DIM..].iter().sum::<f64>().sqrt();
    let inner: f64 = out[HISTOGRAM_DIM..2 * HISTOGRAM_DIM].iter().sum();
    let root: f64 = a.iter().zip(b).map(|(x, y)| (x * y).max(0.0).sqrt()).sum();
    let max_abs = out[..HISTOGRAM_DIM].iter().fold(0.0f64, |m, v| m.max(*v));
    let norms = dot(a, a).sqrt() * dot(b, b).sqrt();
    let cosine = if norms > 0.0 { inner / norms } else { 0.0 };
    out.extend([l1, l2, inner, root, max_abs, cosine]);
    Ok(out)
}

/// [`PairFeatureProvider`] wrapper around [`synthetic_pair_feature`]. Patches
/// are reduced to colour histograms first.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticPairFeature;

impl PairFeatureProvider for SyntheticPairFeature {
    fn dim(&self) -> usize {
        SYNTHETIC_FEATURE_DIM
    }

    fn feature(&self, a: &AppearanceDescriptor, b: &AppearanceDescriptor) -> Result<Vec<f64>, AppearanceError> {
        synthetic_pair_feature(&histogram_of(a)?, &histogram_of(b)?)
    }
}

/// `(1 - p/lambda) * prev + (p/lambda) * obs`.
pub fn linear_feature_update(
    prev: &[f64],
    obs: &[f64],
    match_likelihood: f64,
    lambda_f: f64,
) -> Result<Vec<f64>, AppearanceError> {
    check_dims(prev, obs)?;
    let a = (match_likelihood / lambda_f).clamp(0.0, 1.0);
    Ok(prev.iter().zip(obs).map(|(p, o)| (1.0 - a) * p + a * o).collect())
}

/// `obs` when the match likelihood strictly exceeds `tau_a`, else `prev`.
pub fn select_feature_update<'a, T: ?Sized>(prev: &'a T, obs: &'a T, match_likelihood: f64, tau_a: f64) -> &'a T {
    if match_likelihood > tau_a {
        obs
    } else {
        prev
    }
}

/// Linear update lifted to descriptors. Tags cannot be blended.
pub fn blend_descriptors(
    prev: &AppearanceDescriptor,
    obs: &AppearanceDescriptor,
    match_likelihood: f64,
    lambda_f: f64,
) -> Result<AppearanceDescriptor, AppearanceError> {
    match (prev, obs) {
        (AppearanceDescriptor::Vector(p), AppearanceDescriptor::Vector(o)) => Ok(AppearanceDescriptor::vector(
            linear_feature_update(p, o, match_likelihood, lambda_f)?,
        )),
        (AppearanceDescriptor::Patch(p), AppearanceDescriptor::Patch(o)) => {
            let a = (match_likelihood / lambda_f).clamp(0.0, 1.0) as f32;
            let data = p
                .data()
                .iter()
                .zip(o.data())
                .map(|(x, y)| ((1.0 - a) * x + a * y).clamp(0.0, 1.0))
                .collect();
            let patch = Patch::new(data).map_err(|_| AppearanceError::IncompatibleDescriptor("patch blending"))?;
            Ok(AppearanceDescriptor::Patch(patch.into()))
        }
        _ => Err(AppearanceError::IncompatibleDescriptor("linear feature update")),
    }
}
