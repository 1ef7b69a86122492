//! Symmetric positive-definite coefficient fields `A(x)` and their spectral data.
//!
//! Directions are carried as angles reduced to `[0, π)`, so a direction and its
//! antipode are the same value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Point, Rect};

/// Reduce an angle to the projective range `[0, π)`.
pub fn reduce_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Distance between two projective angles (at most π/2).
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (reduce_angle(a) - reduce_angle(b)).abs();
    d.min(PI - d)
}

/// Symmetric 2x2 positive-definite matrix stored by its three entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpdTensor2 {
    a11: f64,
    a12: f64,
    a22: f64,
}

impl TryFrom<[f64; 3]> for SpdTensor2 {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        SpdTensor2::new(v[0], v[1], v[2])
    }
}

impl From<SpdTensor2> for [f64; 3] {
    fn from(m: SpdTensor2) -> Self {
        [m.a11, m.a12, m.a22]
    }
}

/// Eigen-data of an [`SpdTensor2`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralData {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Principal direction of `sigma_max`, as an angle in `[0, π)`.
    pub xi_max_angle: f64,
}

impl SpectralData {
    /// Relative spectral gap below which a matrix is treated as isotropic.
    pub const ISOTROPY_TOL: f64 = 1e-12;

    pub fn is_isotropic(&self) -> bool {
        self.sigma_max - self.sigma_min <= Self::ISOTROPY_TOL * self.sigma_max
    }
}

impl SpdTensor2 {
    pub const IDENTITY: SpdTensor2 = SpdTensor2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Result<Self> {
        let finite = a11.is_finite() && a12.is_finite() && a22.is_finite();
        if !finite || a11 <= 0.0 || a11 * a22 - a12 * a12 <= 0.0 {
            return Err(Error::NotPositiveDefinite { a11, a12, a22 });
        }
        Ok(Self { a11, a12, a22 })
    }

    pub fn diag(a11: f64, a22: f64) -> Result<Self> {
        Self::new(a11, 0.0, a22)
    }

    /// `R(φ) diag(σ_max, σ_min) R(φ)ᵀ`, with the `σ_max` direction at angle `φ`.
    pub fn from_spectrum(sigma_max: f64, sigma_min: f64, phi: f64) -> Result<Self> {
        let (s, c) = phi.sin_cos();
        Self::new(
            sigma_max * c * c + sigma_min * s * s,
            (sigma_max - sigma_min) * c * s,
            sigma_max * s * s + sigma_min * c * c,
        )
    }

    pub fn a11(&self) -> f64 {
        self.a11
    }

    pub fn a12(&self) -> f64 {
        self.a12
    }

    pub fn a22(&self) -> f64 {
        self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn apply(&self, y: Point) -> Point {
        Point::new(
            self.a11 * y.x + self.a12 * y.y,
            self.a12 * y.x + self.a22 * y.y,
        )
    }

    /// `⟨M y, y⟩`.
    pub fn quadratic_form(&self, y: Point) -> f64 {
        self.a11 * y.x * y.x + 2.0 * self.a12 * y.x * y.y + self.a22 * y.y * y.y
    }

    pub fn as_mat2(&self) -> Mat2 {
        Mat2 {
            m11: self.a11,
            m12: self.a12,
            m21: self.a12,
            m22: self.a22,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(c * self.a11, c * self.a12, c * self.a22)
    }

    /// Closed-form eigendecomposition. Isotropic matrices report angle 0.
    pub fn eig2(&self) -> SpectralData {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.a11 - self.a22);
        let disc = half_diff.hypot(self.a12);
        let sigma_max = half_tr + disc;
        let sigma_min = self.det() / sigma_max;
        let xi_max_angle = if disc <= SpectralData::ISOTROPY_TOL * sigma_max {
            0.0
        } else {
            reduce_angle(0.5 * (2.0 * self.a12).atan2(self.a11 - self.a22))
        };
        SpectralData {
            sigma_min,
            sigma_max,
            xi_max_angle,
        }
    }

    /// `√⟨M ξ, ξ⟩` for `ξ = (cos angle, sin angle)`.
    pub fn riemannian_norm(&self, angle: f64) -> f64 {
        self.quadratic_form(Point::unit(angle)).sqrt()
    }

    /// Smallest `C` with `C⁻¹|y|² ≤ ⟨My,y⟩ ≤ C|y|²`.
    pub fn ellipticity(&self) -> f64 {
        let sp = self.eig2();
        sp.sigma_max.max(1.0 / sp.sigma_min)
    }

    /// `R(φ) M R(φ)ᵀ`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = Mat2::rotation(phi);
        let m = r.mul(&self.as_mat2()).mul(&r.transpose());
        // Symmetrize against rounding.
        let off = 0.5 * (m.m12 + m.m21);
        Self::new(m.m11, off, m.m22).unwrap_or(*self)
    }

    /// `M^{-1/2}` formed from the eigen-data.
    pub fn inverse_sqrt(&self) -> Mat2 {
        let sp = self.eig2();
        let (s, c) = sp.xi_max_angle.sin_cos();
        let a = 1.0 / sp.sigma_max.sqrt();
        let b = 1.0 / sp.sigma_min.sqrt();
        Mat2 {
            m11: a * c * c + b * s * s,
            m12: (a - b) * c * s,
            m21: (a - b) * c * s,
            m22: a * s * s + b * c * c,
        }
    }

    /// Convex combination of entries; stays positive definite.
    fn blend(weights: [f64; 4], ms: [SpdTensor2; 4]) -> Result<SpdTensor2> {
        let mut e = [0.0; 3];
        for (w, m) in weights.iter().zip(ms.iter()) {
            e[0] += w * m.a11;
            e[1] += w * m.a12;
            e[2] += w * m.a22;
        }
        SpdTensor2::new(e[0], e[1], e[2])
    }
}

/// Piecewise-constant table over axis-aligned cells (row-major, `j * nx + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct CellTable {
    pub origin: Point,
    pub cell_width: f64,
    pub cell_height: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<SpdTensor2>,
}

impl CellTable {
    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin,
            self.origin
                + Point::new(
                    self.cell_width * self.nx as f64,
                    self.cell_height * self.ny as f64,
                ),
        )
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell_width).floor();
        let fy = ((p.y - self.origin.y) / self.cell_height).floor();
        let i = (fx.max(0.0) as usize).min(self.nx - 1);
        let j = (fy.max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }
}

/// Entries tabulated on a rectilinear lattice, bilinearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `j * xs.len() + i`.
    pub values: Vec<SpdTensor2>,
}

impl Lattice {
    pub fn extent(&self) -> Rect {
        Rect::new(
            Point::new(self.xs[0], self.ys[0]),
            Point::new(*self.xs.last().unwrap(), *self.ys.last().unwrap()),
        )
    }

    fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
        if axis.len() == 1 {
            return (0, 0.0);
        }
        let v = v.clamp(axis[0], axis[axis.len() - 1]);
        let k = match axis.partition_point(|&a| a <= v) {
            0 => 0,
            k => (k - 1).min(axis.len() - 2),
        };
        let t = (v - axis[k]) / (axis[k + 1] - axis[k]);
        (k, t.clamp(0.0, 1.0))
    }

    fn eval(&self, p: Point) -> SpdTensor2 {
        let nx = self.xs.len();
        let (i, tx) = Self::bracket(&self.xs, p.x);
        let (j, ty) = Self::bracket(&self.ys, p.y);
        let i1 = (i + 1).min(nx - 1);
        let j1 = (j + 1).min(self.ys.len() - 1);
        let v = |a: usize, b: usize| self.values[b * nx + a];
        let w = [
            (1.0 - tx) * (1.0 - ty),
            tx * (1.0 - ty),
            (1.0 - tx) * ty,
            tx * ty,
        ];
        let corners = [v(i, j), v(i1, j), v(i, j1), v(i1, j1)];
        // Nearest sample if rounding ever breaks definiteness.
        SpdTensor2::blend(w, corners).unwrap_or_else(|_| {
            let k = w
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            corners[k]
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldRepr {
    Constant(SpdTensor2),
    PiecewiseConstant(CellTable),
    Sampled(Lattice),
}

/// Coefficient field `A(x)` together with its ellipticity constant.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    repr: FieldRepr,
    ellipticity: f64,
}

impl TensorField {
    pub fn constant(m: SpdTensor2) -> Self {
        Self {
            ellipticity: m.ellipticity(),
            repr: FieldRepr::Constant(m),
        }
    }

    pub fn identity() -> Self {
        Self::constant(SpdTensor2::IDENTITY)
    }

    pub fn piecewise(table: CellTable) -> Result<Self> {
        if table.nx == 0 || table.ny == 0 || table.values.len() != table.nx * table.ny {
            return Err(Error::InvalidField(format!(
                "cell table has {} values for a {}x{} grid",
                table.values.len(),
                table.nx,
                table.ny
            )));
        }
        if !(table.cell_width > 0.0 && table.cell_height > 0.0) {
            return Err(Error::InvalidField("cell sizes must be positive".into()));
        }
        let ellipticity = table
            .values
            .iter()
            .map(SpdTensor2::ellipticity)
            .fold(1.0, f64::max);
        Ok(Self {
            repr: FieldRepr::PiecewiseConstant(table),
            ellipticity,
        })
    }

    pub fn sampled(lattice: Lattice) -> Result<Self> {
        let (nx, ny) = (lattice.xs.len(), lattice.ys.len());
        if nx == 0 || ny == 0 || lattice.values.len() != nx * ny {
            return Err(Error::InvalidField(format!(
                "lattice has {} values for {}x{} nodes",
                lattice.values.len(),
                nx,
                ny
            )));
        }
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&lattice.xs) || !increasing(&lattice.ys) {
            return Err(Error::InvalidField(
                "lattice coordinates must be strictly increasing".into(),
            ));
        }
        // Bilinear blends are convex combinations, so nodal bounds hold everywhere.
        let ellipticity = lattice
            .values
            .iter()
            .map(SpdTensor2::ellipticity)
            .fold(1.0, f64::max);
        Ok(Self {
            repr: FieldRepr::Sampled(lattice),
            ellipticity,
        })
    }

    /// Constant `left` on `x < split`, `right` elsewhere, over `extent`.
    pub fn two_halves(extent: Rect, split: f64, left: SpdTensor2, right: SpdTensor2) -> Result<Self> {
        let wl = split - extent.min.x;
        let wr = extent.max.x - split;
        if wl <= 0.0 || wr <= 0.0 || (wl - wr).abs() > 1e-12 * extent.width() {
            // Unequal halves need a finer table.
            let n = 1000usize;
            let cw = extent.width() / n as f64;
            let values = (0..n)
                .map(|i| {
                    let xc = extent.min.x + (i as f64 + 0.5) * cw;
                    if xc < split {
                        left
                    } else {
                        right
                    }
                })
                .collect();
            return Self::piecewise(CellTable {
                origin: extent.min,
                cell_width: cw,
                cell_height: extent.height(),
                nx: n,
                ny: 1,
                values,
            });
        }
        Self::piecewise(CellTable {
            origin: extent.min,
            cell_width: wl,
            cell_height: extent.height(),
            nx: 2,
            ny: 1,
            values: vec![left, right],
        })
    }

    pub fn repr(&self) -> &FieldRepr {
        &self.repr
    }

    /// Stored ellipticity constant (exact for all representations).
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.repr, FieldRepr::Constant(_))
    }

    pub fn eval(&self, p: Point) -> SpdTensor2 {
        match &self.repr {
            FieldRepr::Constant(m) => *m,
            FieldRepr::PiecewiseConstant(t) => {
                let (i, j) = t.cell_of(p);
                t.values[j * t.nx + i]
            }
            FieldRepr::Sampled(l) => l.eval(p),
        }
    }

    pub fn spectral(&self, p: Point) -> SpectralData {
        self.eval(p).eig2()
    }

    /// Region on which the field is tabulated; `None` for constant fields.
    pub fn extent(&self) -> Option<Rect> {
        match &self.repr {
            FieldRepr::Constant(_) => None,
            FieldRepr::PiecewiseConstant(t) => Some(t.extent()),
            FieldRepr::Sampled(l) => Some(l.extent()),
        }
    }

    pub fn covers(&self, region: &Rect) -> bool {
        match self.extent() {
            None => true,
            Some(e) => e.inflate(1e-9 * e.diameter()).contains_rect(region),
        }
    }
}

/// Estimate of the smallest ellipticity constant on a `samples x samples`
/// lattice over the field's extent, combined with the tabulated data.
pub fn ellipticity_constant(f: &TensorField, samples: usize) -> f64 {
    let samples = samples.max(1);
    let lattice_max = match f.extent() {
        None => f.eval(Point::default()).ellipticity(),
        Some(e) => {
            let mut c: f64 = 1.0;
            for j in 0..samples {
                for i in 0..samples {
                    let p = Point::new(
                        e.min.x + (i as f64 + 0.5) / samples as f64 * e.width(),
                        e.min.y + (j as f64 + 0.5) / samples as f64 * e.height(),
                    );
                    c = c.max(f.eval(p).ellipticity());
                }
            }
            c
        }
    };
    lattice_max.max(f.ellipticity())
}
