//! Tracker hyperparameters, their validation, and the `key = value` config
//! file format.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::GeometryParams;

/// How the association likelihood `Lambda(i, j)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodMode {
    /// Confidence-weighted combination of pairwise scores over the cue.
    Ctama,
    /// LSTM over pairwise matching features and relative shape differences.
    DeepTama,
    /// Single template, blended by match likelihood.
    BaselineLinear,
    /// Single template, replaced when the match likelihood is high.
    BaselineSelect,
    /// Plain IoU against the predicted box. Diagnostic baseline.
    IouOnly,
}

impl LikelihoodMode {
    pub const ALL: [LikelihoodMode; 5] = [
        Self::Ctama,
        Self::DeepTama,
        Self::BaselineLinear,
        Self::BaselineSelect,
        Self::IouOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ctama => "ctama",
            Self::DeepTama => "deep_tama",
            Self::BaselineLinear => "baseline_linear",
            Self::BaselineSelect => "baseline_select",
            Self::IouOnly => "iou_only",
        }
    }
}

impl fmt::Display for LikelihoodMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LikelihoodMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown likelihood mode `{s}`"))
    }
}

/// Which hypothesis-tree extension tests are used for track initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// IoU first, distance/shape fallback for trees that found nothing.
    Hierarchical,
    IouOnly,
    DistanceOnly,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hierarchical => "hierarchical",
            Self::IouOnly => "iou_only",
            Self::DistanceOnly => "distance_only",
        }
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Hierarchical, Self::IouOnly, Self::DistanceOnly]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown init mode `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("tau_cue must be at least 1")]
    NonPositiveCueLimit,
    #[error("lambda_c must be >= 1 (got {0})")]
    LambdaBelowOne(f64),
    #[error("lambda_f must be >= 1 (got {0})")]
    FeatureLambdaBelowOne(f64),
    #[error("fps must be at least 1")]
    NonPositiveFps,
    #[error("{field} = {value} is outside {range}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("geometry parameter {0} is invalid")]
    InvalidGeometry(&'static str),
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// All tunable parameters of the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub beta_age: f64,
    pub beta_intv: f64,
    pub tau_hist: f64,
    pub tau_iou: f64,
    pub beta_dist: f64,
    pub tau_shp: f64,
    pub tau_init: usize,
    pub beta_term: f64,
    pub tau_match: f64,
    pub tau_cue: usize,
    pub lambda_c: f64,
    /// `None` picks the scorer-specific default (see [`TrackerConfig::lambda_f_for`]).
    pub lambda_f: Option<f64>,
    pub tau_a: f64,
    pub fps: u32,
    pub likelihood_mode: LikelihoodMode,
    pub init_mode: InitMode,
    pub geometry: GeometryParams,
    pub oracle_same: f64,
    pub oracle_diff: f64,
    pub oracle_noise: f64,
    pub nms_iou: f64,
    pub conf_min: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            beta_age: 2.0,
            beta_intv: 0.2,
            tau_hist: 0.6,
            tau_iou: 0.5,
            beta_dist: 0.8,
            tau_shp: 0.8,
            tau_init: 4,
            beta_term: 2.0,
            tau_match: 0.4,
            tau_cue: 8,
            lambda_c: 3.0,
            lambda_f: None,
            tau_a: 0.6,
            fps: 30,
            likelihood_mode: LikelihoodMode::Ctama,
            init_mode: InitMode::Hierarchical,
            geometry: GeometryParams::default(),
            oracle_same: 0.9,
            oracle_diff: 0.1,
            oracle_noise: 0.0,
            nms_iou: 0.5,
            conf_min: f64::NEG_INFINITY,
        }
    }
}

/// Scorer families with distinct default feature-update rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerFamily {
    Histogram,
    Embedding,
    Other,
}

/// Rounds half up, as used for every frame-count threshold.
pub fn round_frames(x: f64) -> u32 {
    (x + 0.5).floor().max(0.0) as u32
}

fn in_range(field: &'static str, value: f64, lo: f64, hi: f64, range: &'static str, hi_open: bool) -> Result<(), ConfigError> {
    let ok = value.is_finite() && value >= lo && if hi_open { value < hi } else { value <= hi };
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, value, range })
    }
}

impl TrackerConfig {
    pub fn lambda_f_for(&self, family: ScorerFamily) -> f64 {
        self.lambda_f.unwrap_or(match family {
            ScorerFamily::Embedding => 4.0,
            ScorerFamily::Histogram | ScorerFamily::Other => 2.0,
        })
    }

    /// Maximum age of the oldest cue entry, in frames (`fps * beta_age`).
    pub fn max_cue_age(&self) -> f64 {
        self.fps as f64 * self.beta_age
    }

    /// Minimum gap between consecutive cue entries, in frames.
    pub fn min_cue_interval(&self) -> u32 {
        round_frames(self.fps as f64 * self.beta_intv)
    }

    /// Consecutive misses after which a track is terminated.
    pub fn termination_threshold(&self) -> u32 {
        round_frames(self.fps as f64 * self.beta_term)
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.tau_cue < 1 {
            return Err(ConfigError::NonPositiveCueLimit);
        }
        if !(self.lambda_c >= 1.0 && self.lambda_c.is_finite()) {
            return Err(ConfigError::LambdaBelowOne(self.lambda_c));
        }
        if let Some(l) = self.lambda_f {
            if !(l >= 1.0 && l.is_finite()) {
                return Err(ConfigError::FeatureLambdaBelowOne(l));
            }
        }
        if self.fps < 1 {
            return Err(ConfigError::NonPositiveFps);
        }
        in_range("beta_age", self.beta_age, f64::MIN_POSITIVE, f64::MAX, "(0, inf)", false)?;
        in_range("beta_intv", self.beta_intv, 0.0, f64::MAX, "[0, inf)", false)?;
        in_range("tau_hist", self.tau_hist, 0.0, 1.0, "[0, 1)", true)?;
        in_range("tau_iou", self.tau_iou, 0.0, 1.0, "[0, 1)", true)?;
        in_range("beta_dist", self.beta_dist, f64::MIN_POSITIVE, f64::MAX, "(0, inf)", false)?;
        in_range("tau_shp", self.tau_shp, 0.0, 1.0, "[0, 1)", true)?;
        in_range("tau_init", self.tau_init as f64, 1.0, f64::MAX, "[1, inf)", false)?;
        in_range("tau_match", self.tau_match, 0.0, 1.0, "[0, 1)", true)?;
        in_range("tau_a", self.tau_a, 0.0, 1.0, "[0, 1]", false)?;
        in_range("beta_term", self.beta_term, f64::MIN_POSITIVE, f64::MAX, "(0, inf)", false)?;
        if self.termination_threshold() < 1 {
            return Err(ConfigError::OutOfRange {
                field: "beta_term",
                value: self.beta_term,
                range: "fps * beta_term >= 0.5",
            });
        }
        in_range("oracle_same", self.oracle_same, 0.0, 1.0, "[0, 1]", false)?;
        in_range("oracle_diff", self.oracle_diff, 0.0, 1.0, "[0, 1]", false)?;
        in_range("oracle_noise", self.oracle_noise, 0.0, 1.0, "[0, 1]", false)?;
        in_range("nms_iou", self.nms_iou, f64::MIN_POSITIVE, 1.0, "(0, 1]", false)?;
        if self.conf_min.is_nan() {
            return Err(ConfigError::OutOfRange {
                field: "conf_min",
                value: self.conf_min,
                range: "not NaN",
            });
        }

        let g = &self.geometry;
        let positive = [
            ("eta", g.eta),
            ("xi", g.xi),
            ("q_pos", g.q_pos),
            ("q_vel", g.q_vel),
            ("r_meas", g.r_meas),
            ("p0_pos", g.p0_pos),
            ("p0_vel", g.p0_vel),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::InvalidGeometry(name));
            }
        }
        if !(g.gamma_shape > 0.0 && g.gamma_shape <= 1.0) {
            return Err(ConfigError::InvalidGeometry("gamma_shape"));
        }
        if !g.sigma_is_positive_definite() {
            return Err(ConfigError::InvalidGeometry("sigma"));
        }
        Ok(self)
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line,
                reason: format!("expected `key = value`, found `{content}`"),
            })?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        cfg.validate()
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let num = || -> Result<f64, ConfigError> {
            value.parse::<f64>().map_err(|_| ConfigError::Malformed {
                line,
                reason: format!("`{key}` expects a number, found `{value}`"),
            })
        };
        let int = || -> Result<u64, ConfigError> {
            value.parse::<u64>().map_err(|_| ConfigError::Malformed {
                line,
                reason: format!("`{key}` expects a non-negative integer, found `{value}`"),
            })
        };
        let g = &mut self.geometry;
        match key {
            "beta_age" => self.beta_age = num()?,
            "beta_intv" => self.beta_intv = num()?,
            "tau_hist" => self.tau_hist = num()?,
            "tau_iou" => self.tau_iou = num()?,
            "beta_dist" => self.beta_dist = num()?,
            "tau_shp" => self.tau_shp = num()?,
            "tau_init" => self.tau_init = int()? as usize,
            "beta_term" => self.beta_term = num()?,
            "tau_match" | "tau_mat" => self.tau_match = num()?,
            "tau_cue" => self.tau_cue = int()? as usize,
            "lambda_c" => self.lambda_c = num()?,
            "lambda_f" => self.lambda_f = Some(num()?),
            "tau_a" => self.tau_a = num()?,
            "fps" => {
                self.fps = u32::try_from(int()?).map_err(|_| ConfigError::Malformed {
                    line,
                    reason: "fps out of range".into(),
                })?
            }
            "likelihood_mode" => {
                self.likelihood_mode = value
                    .parse()
                    .map_err(|reason| ConfigError::Malformed { line, reason })?
            }
            "init_mode" => {
                self.init_mode = value
                    .parse()
                    .map_err(|reason| ConfigError::Malformed { line, reason })?
            }
            "eta" => g.eta = num()?,
            "xi" => g.xi = num()?,
            "sigma_xx" => g.sigma[(0, 0)] = num()?,
            "sigma_yy" => g.sigma[(1, 1)] = num()?,
            "sigma_xy" => {
                let v = num()?;
                g.sigma[(0, 1)] = v;
                g.sigma[(1, 0)] = v;
            }
            "q_pos" => g.q_pos = num()?,
            "q_vel" => g.q_vel = num()?,
            "r_meas" => g.r_meas = num()?,
            "p0_pos" => g.p0_pos = num()?,
            "p0_vel" => g.p0_vel = num()?,
            "gamma_shape" => g.gamma_shape = num()?,
            "oracle_same" => self.oracle_same = num()?,
            "oracle_diff" => self.oracle_diff = num()?,
            "oracle_noise" => self.oracle_noise = num()?,
            "nms_iou" => self.nms_iou = num()?,
            "conf_min" => self.conf_min = num()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}
