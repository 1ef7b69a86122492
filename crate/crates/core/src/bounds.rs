//! Closed-form eigenvalue bounds and oracles.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor_field::SpdTensor2;

/// Inputs and value of the upper bound for `λ₁^M(Ω; D)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub t: f64,
    pub kappa: usize,
    pub riem_len: f64,
    pub det_root: f64,
    pub area: f64,
    pub upper: f64,
}

impl BoundReport {
    /// `t = |Ω| / (H¹_M + √(H¹_M² + κπ|Ω| det M^{1/2}))`.
    pub fn t_from_fields(&self) -> f64 {
        t_value(self.area, self.riem_len, self.kappa, self.det_root)
    }
}

fn t_value(area: f64, riem_len: f64, kappa: usize, det_root: f64) -> f64 {
    let r = riem_len;
    area / (r + (r * r + kappa as f64 * PI * area * det_root).sqrt())
}

/// `(π²/4t²)(1 + κπt det M^{1/2} / H¹_M(D))` for a Dirichlet set of
/// Riemannian length `riem_len` with `kappa` components.
pub fn upper_bound_thm(m: &SpdTensor2, area: f64, riem_len: f64, kappa: usize) -> Result<BoundReport> {
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    if !(riem_len > 0.0 && riem_len.is_finite()) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {riem_len}")));
    }
    if kappa == 0 {
        return Err(Error::InvalidArgument("component count must be at least 1".into()));
    }
    let det_root = m.det().sqrt();
    let t = t_value(area, riem_len, kappa, det_root);
    let upper = PI * PI / (4.0 * t * t) * (1.0 + kappa as f64 * PI * t * det_root / riem_len);
    Ok(BoundReport {
        t,
        kappa,
        riem_len,
        det_root,
        area,
        upper,
    })
}

/// `π² ⟨M ξ, ξ⟩ / h²`: lower bound for any domain inside a strip of width `h`
/// orthogonal to `ξ`.
pub fn thin_strip_lower(m: &SpdTensor2, xi_angle: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("strip width must be positive, got {h}")));
    }
    let r = m.riemannian_norm(xi_angle);
    Ok(PI * PI * r * r / (h * h))
}

/// First Dirichlet-Laplacian eigenvalue of an `a × b` rectangle.
pub fn rectangle_lambda1(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!("rectangle sides must be positive, got {a} x {b}")));
    }
    Ok(PI * PI * (1.0 / (a * a) + 1.0 / (b * b)))
}
