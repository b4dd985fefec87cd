//! Constant-velocity Kalman filtering of box centres and the geometric
//! (motion and shape) likelihoods used for gating and association.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::types::{BoundingBox, Detection, Track};

/// Geometry and filter parameters. The likelihood weight matrix `sigma` is a
/// fixed matrix rather than a learned covariance inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    /// Motion sharpness.
    pub eta: f64,
    /// Shape sharpness.
    pub xi: f64,
    pub sigma: Matrix2<f64>,
    pub q_pos: f64,
    pub q_vel: f64,
    pub r_meas: f64,
    pub p0_pos: f64,
    pub p0_vel: f64,
    /// Weight of the new detection when smoothing width and height.
    pub gamma_shape: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        let s = 1.0 / (70.0 * 70.0);
        Self {
            eta: 0.5,
            xi: 4.0,
            sigma: Matrix2::new(s, 0.0, 0.0, s),
            q_pos: 1.0,
            q_vel: 0.5,
            r_meas: 10.0,
            p0_pos: 10.0,
            p0_vel: 100.0,
            gamma_shape: 0.5,
        }
    }
}

impl GeometryParams {
    pub fn sigma_is_positive_definite(&self) -> bool {
        let s = &self.sigma;
        s.iter().all(|v| v.is_finite())
            && (s[(0, 1)] - s[(1, 0)]).abs() <= 1e-15 * s.abs().max().max(1.0)
            && s[(0, 0)] > 0.0
            && s.determinant() > 0.0
    }

    fn process_noise(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(self.q_pos, self.q_pos, self.q_vel, self.q_vel))
    }

    pub fn initial_covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(
            self.p0_pos,
            self.p0_pos,
            self.p0_vel,
            self.p0_vel,
        ))
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let h = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let inter = w * h;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

fn transition() -> Matrix4<f64> {
    #[rustfmt::skip]
    let f = Matrix4::new(
        1.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    f
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Advances the state one frame under constant velocity.
pub fn kalman_predict(track: &Track, params: &GeometryParams) -> Track {
    let f = transition();
    let mut next = track.clone();
    next.state = f * track.state;
    next.covariance = symmetrize(&(f * track.covariance * f.transpose() + params.process_noise()));
    next
}

/// Position-measurement update (Joseph form) plus exponential shape smoothing.
pub fn kalman_update(track: &Track, det: &Detection, params: &GeometryParams) -> Track {
    let h = observation();
    let r = Matrix2::identity() * params.r_meas;
    let p = track.covariance;
    let z = Vector2::new(det.bbox.center_x(), det.bbox.center_y());
    let innovation = z - h * track.state;
    let s = h * p * h.transpose() + r;
    // s is SPD because r is; inversion cannot fail for valid params.
    let s_inv = s.try_inverse().unwrap_or_else(Matrix2::identity);
    let gain = p * h.transpose() * s_inv;
    let i_kh = Matrix4::identity() - gain * h;

    let mut next = track.clone();
    next.state = track.state + gain * innovation;
    next.covariance = symmetrize(&(i_kh * p * i_kh.transpose() + gain * r * gain.transpose()));
    let g = params.gamma_shape;
    next.width = g * det.bbox.width + (1.0 - g) * track.width;
    next.height = g * det.bbox.height + (1.0 - g) * track.height;
    next
}

/// `exp(-eta * d' Sigma d)` with `d` the centre displacement.
pub fn motion_likelihood_at(center: (f64, f64), det: &BoundingBox, params: &GeometryParams) -> f64 {
    let d = Vector2::new(center.0 - det.center_x(), center.1 - det.center_y());
    let q = (d.transpose() * params.sigma * d)[(0, 0)];
    (-params.eta * q).exp()
}

pub fn motion_likelihood(track: &Track, det: &Detection, params: &GeometryParams) -> f64 {
    motion_likelihood_at(track.position(), &det.bbox, params)
}

pub fn shape_likelihood(a: &BoundingBox, b: &BoundingBox, params: &GeometryParams) -> f64 {
    let dh = (a.height - b.height).abs() / (a.height + b.height);
    let dw = (a.width - b.width).abs() / (a.width + b.width);
    (-params.xi * (dh + dw)).exp()
}

/// Motion times shape likelihood against the track's current (predicted) box.
pub fn geometric_likelihood(track: &Track, det: &Detection, params: &GeometryParams) -> (f64, f64) {
    (
        motion_likelihood(track, det, params),
        shape_likelihood(&track.state_box(), &det.bbox, params),
    )
}
