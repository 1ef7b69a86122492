//! Direction-aware measures: empirical varifolds of segment sets, their
//! disintegration over a checkerboard, and the limit energy `F_∞`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Checkerboard, Continuum, Domain2D, Point, Rect};
use crate::tensor_field::{angle_distance, reduce_angle, TensorField};

/// Number of angle bins on `[0, π)` used by histogram comparisons.
pub const ANGLE_BINS: usize = 36;
/// Default per-square sample lattice for the sup in `F_∞`.
pub const DEFAULT_SUP_SAMPLES: usize = 8;
/// Default quadrature resolution for `f_∞`.
pub const DEFAULT_QUAD_CELLS: usize = 128;

const MERGE_TOL: f64 = 1e-12;

/// Atomic probability measure on projective directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngularMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AngularMeasure {
    /// Atoms `(angle, weight)`; weights must be positive and sum to one.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
        }
        Self::from_weights(atoms)
    }

    /// Like [`AngularMeasure::new`] but normalizes any positive total mass.
    pub fn from_weights(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if let Some(bad) = atoms.iter().find(|a| !(a.1 > 0.0 && a.1.is_finite() && a.0.is_finite())) {
            return Err(Error::InvalidMeasure(format!("bad atom {bad:?}")));
        }
        let mut reduced: Vec<(f64, f64)> = atoms.iter().map(|&(a, w)| (reduce_angle(a), w)).collect();
        reduced.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(reduced.len());
        for (a, w) in reduced {
            match merged.last_mut() {
                Some(last) if angle_distance(last.0, a) <= MERGE_TOL => last.1 += w,
                _ => merged.push((a, w)),
            }
        }
        // Wrap-around: an atom just below π coincides with one at 0.
        if merged.len() > 1 && angle_distance(merged[0].0, merged[merged.len() - 1].0) <= MERGE_TOL {
            let last = merged.pop().unwrap();
            merged[0].1 += last.1;
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn dirac(angle: f64) -> Self {
        Self {
            atoms: vec![(reduce_angle(angle), 1.0)],
        }
    }

    /// `n` equal-mass atoms approximating a density on `[0, π)`.
    ///
    /// The interval is cut at the `k/n` quantiles of the density and each
    /// piece is replaced by an atom of mass `1/n` at its median.
    pub fn quantize(density: impl Fn(f64) -> f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quantization needs at least one atom".into()));
        }
        const GRID: usize = 4096;
        let dx = PI / GRID as f64;
        let mut cdf = Vec::with_capacity(GRID + 1);
        cdf.push(0.0);
        for k in 0..GRID {
            let v = density((k as f64 + 0.5) * dx);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidMeasure(format!("density value {v} at grid point {k}")));
            }
            cdf.push(cdf[k] + v * dx);
        }
        let total = cdf[GRID];
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("density has zero mass".into()));
        }
        let quantile = |q: f64| {
            let target = q * total;
            let k = cdf.partition_point(|&c| c < target).clamp(1, GRID);
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
            (k as f64 - 1.0 + frac) * dx
        };
        let atoms = (0..n)
            .map(|j| (quantile((j as f64 + 0.5) / n as f64), 1.0 / n as f64))
            .collect();
        Self::from_weights(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(a, w)| w * g(a)).sum()
    }

    /// Weight per histogram bin, see [`angle_bin`].
    pub fn histogram(&self) -> [f64; ANGLE_BINS] {
        let mut h = [0.0; ANGLE_BINS];
        for &(a, w) in &self.atoms {
            h[angle_bin(a)] += w;
        }
        h
    }
}

/// Bin index for an angle; bins are centred on multiples of `π/36` and wrap mod `π`.
pub fn angle_bin(angle: f64) -> usize {
    let w = PI / ANGLE_BINS as f64;
    let k = (reduce_angle(angle) / w + 0.5).floor() as usize;
    k % ANGLE_BINS
}

/// Total-variation distance `½ Σ |p − q|` between two histograms.
pub fn total_variation(p: &[f64; ANGLE_BINS], q: &[f64; ANGLE_BINS]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VarifoldAtom {
    pub point: Point,
    pub angle: f64,
    pub weight: f64,
}

/// Normalized length measure of a segment set, tagged with normals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalVarifold {
    atoms: Vec<VarifoldAtom>,
    source_length: f64,
}

impl EmpiricalVarifold {
    /// One atom per segment, at its midpoint, weighted by its share of the length.
    pub fn new(c: &Continuum) -> Self {
        let total = c.total_length();
        let atoms = c
            .segments()
            .iter()
            .map(|s| VarifoldAtom {
                point: s.midpoint(),
                angle: s.normal_angle(),
                weight: s.length() / total,
            })
            .collect();
        Self {
            atoms,
            source_length: total,
        }
    }

    pub fn atoms(&self) -> &[VarifoldAtom] {
        &self.atoms
    }

    pub fn source_length(&self) -> f64 {
        self.source_length
    }

    /// `∫ φ dθ`; `φ` should be even in the direction argument.
    pub fn pair_test(&self, phi: impl Fn(Point, f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * phi(a.point, a.angle)).sum()
    }

    /// Average over each square: `α_i = θ(Q_i) / |Ω ∩ Q_i|` and `ν_i` the
    /// conditional direction law. Atoms off the board go to the nearest square.
    pub fn disintegrate(&self, board: &Checkerboard) -> FittedVarifold {
        let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); board.len()];
        for a in &self.atoms {
            let k = board.locate(a.point.x, a.point.y).unwrap_or_else(|| nearest_square(board, a.point));
            buckets[k].push((a.angle, a.weight));
        }
        let (alphas, nus) = buckets
            .into_iter()
            .zip(board.squares())
            .map(|(b, q)| {
                let mass: f64 = b.iter().map(|x| x.1).sum();
                if mass > 0.0 {
                    let nu = AngularMeasure::from_weights(b).expect("positive atom weights");
                    (mass / q.area_in_domain, nu)
                } else {
                    (0.0, AngularMeasure::dirac(0.0))
                }
            })
            .unzip();
        FittedVarifold {
            board: board.clone(),
            alphas,
            nus,
        }
    }
}

fn nearest_square(board: &Checkerboard, p: Point) -> usize {
    board
        .squares()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.rect.center().dist(p).total_cmp(&b.1.rect.center().dist(p)))
        .map(|(k, _)| k)
        .expect("board is non-empty")
}

/// Piecewise product measure `α_i ⊗ ν_i` on the squares of a board.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedVarifold {
    board: Checkerboard,
    alphas: Vec<f64>,
    nus: Vec<AngularMeasure>,
}

impl FittedVarifold {
    /// Validates `α_i ≥ 0` and `Σ α_i |Ω ∩ Q_i| = 1`.
    pub fn new(board: Checkerboard, alphas: Vec<f64>, nus: Vec<AngularMeasure>) -> Result<Self> {
        if alphas.len() != board.len() || nus.len() != board.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} squares but {} densities and {} direction laws",
                board.len(),
                alphas.len(),
                nus.len()
            )));
        }
        if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidMeasure("densities must be finite and nonnegative".into()));
        }
        let v = Self { board, alphas, nus };
        let mass = v.mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMeasure(format!("total mass {mass}, expected 1")));
        }
        Ok(v)
    }

    /// Rescales nonnegative weights so the mass constraint holds.
    pub fn normalized(board: Checkerboard, weights: Vec<f64>, nus: Vec<AngularMeasure>) -> Result<Self> {
        let mass: f64 = weights
            .iter()
            .zip(board.squares())
            .map(|(w, q)| w * q.area_in_domain)
            .sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidMeasure("weights have no mass".into()));
        }
        let alphas = weights.into_iter().map(|w| w / mass).collect();
        Self::new(board, alphas, nus)
    }

    pub fn board(&self) -> &Checkerboard {
        &self.board
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn nus(&self) -> &[AngularMeasure] {
        &self.nus
    }

    pub fn mass(&self) -> f64 {
        self.alphas
            .iter()
            .zip(self.board.squares())
            .map(|(a, q)| a * q.area_in_domain)
            .sum()
    }
}

/// Tabulated optimal density `f_∞ ∝ 1/√σ_max` with its normalizer `Z`.
#[derive(Clone, Debug)]
pub struct FInfinity {
    extent: Rect,
    cells: usize,
    density: Vec<f64>,
    area: Vec<f64>,
    z: f64,
}

impl FInfinity {
    /// Midpoint quadrature on a `cells × cells` grid over the bounding box of `Ω`.
    pub fn new(f: &TensorField, omega: &Domain2D, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one cell".into()));
        }
        let extent = omega.bbox();
        let (w, h) = (extent.width() / cells as f64, extent.height() / cells as f64);
        let (raw, area): (Vec<f64>, Vec<f64>) = (0..cells * cells)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % cells, k / cells);
                let cell = Rect::new(
                    Point::new(extent.min.x + i as f64 * w, extent.min.y + j as f64 * h),
                    Point::new(extent.min.x + (i + 1) as f64 * w, extent.min.y + (j + 1) as f64 * h),
                );
                let a = omega.area_in_rect(&cell);
                if a <= 0.0 {
                    return (0.0, 0.0);
                }
                let x = if omega.contains(cell.center()) {
                    cell.center()
                } else {
                    omega.sample_point_in(&cell).unwrap_or(cell.center())
                };
                (1.0 / f.spectral(x).sigma_max.sqrt(), a)
            })
            .unzip();
        let z: f64 = raw.iter().zip(&area).map(|(g, a)| g * a).sum();
        let density = raw.into_iter().map(|g| g / z).collect();
        Ok(Self {
            extent,
            cells,
            density,
            area,
            z,
        })
    }

    /// `Z = ∫_Ω 1/√σ_max`.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `min F_∞ = Z²/π²`.
    pub fn min_energy(&self) -> f64 {
        self.z * self.z / (PI * PI)
    }

    fn cell_rect(&self, i: usize, j: usize) -> Rect {
        let (w, h) = (
            self.extent.width() / self.cells as f64,
            self.extent.height() / self.cells as f64,
        );
        Rect::new(
            Point::new(self.extent.min.x + i as f64 * w, self.extent.min.y + j as f64 * h),
            Point::new(self.extent.min.x + (i + 1) as f64 * w, self.extent.min.y + (j + 1) as f64 * h),
        )
    }

    /// Tabulated density value at `p` (zero off the grid).
    pub fn density_at(&self, p: Point) -> f64 {
        let n = self.cells as f64;
        let u = (p.x - self.extent.min.x) / self.extent.width() * n;
        let v = (p.y - self.extent.min.y) / self.extent.height() * n;
        if !(0.0..=n).contains(&u) || !(0.0..=n).contains(&v) {
            return 0.0;
        }
        let i = (u as usize).min(self.cells - 1);
        let j = (v as usize).min(self.cells - 1);
        self.density[j * self.cells + i]
    }

    /// `∫_{Ω ∩ r} f_∞`.
    pub fn integrate_over(&self, omega: &Domain2D, r: &Rect) -> f64 {
        let n = self.cells as f64;
        let to_i = |x: f64| (x - self.extent.min.x) / self.extent.width() * n;
        let to_j = |y: f64| (y - self.extent.min.y) / self.extent.height() * n;
        let clamp = |v: f64| (v.max(0.0) as usize).min(self.cells - 1);
        let (i0, i1) = (clamp(to_i(r.min.x).floor()), clamp(to_i(r.max.x).ceil() - 1.0));
        let (j0, j1) = (clamp(to_j(r.min.y).floor()), clamp(to_j(r.max.y).ceil() - 1.0));
        let mut total = 0.0;
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * self.cells + i;
                if self.area[k] <= 0.0 {
                    continue;
                }
                let cell = self.cell_rect(i, j);
                let Some(part) = cell.intersect(r) else { continue };
                let a = if r.contains_rect(&cell) {
                    self.area[k]
                } else {
                    omega.area_in_rect(&part)
                };
                total += self.density[k] * a;
            }
        }
        total
    }

    /// Total mass of the tabulated density (1 up to rounding).
    pub fn total(&self) -> f64 {
        self.density.iter().zip(&self.area).map(|(d, a)| d * a).sum()
    }
}

/// `(∫_Ω 1/√σ_max)² / π²`.
pub fn f_infinity_min(f: &TensorField, omega: &Domain2D) -> f64 {
    FInfinity::new(f, omega, DEFAULT_QUAD_CELLS)
        .expect("positive cell count")
        .min_energy()
}

/// Sample points of `Ω ∩ Q` on a `k × k` lattice of cell centres.
pub(crate) fn square_samples(omega: &Domain2D, q: &Rect, k: usize) -> Vec<Point> {
    let k = k.max(1);
    let mut pts: Vec<Point> = (0..k * k)
        .map(|t| {
            let (a, b) = ((t % k) as f64 + 0.5, (t / k) as f64 + 0.5);
            Point::new(
                q.min.x + a * q.width() / k as f64,
                q.min.y + b * q.height() / k as f64,
            )
        })
        .filter(|&p| omega.contains(p))
        .collect();
    if pts.is_empty() {
        pts.extend(omega.sample_point_in(q));
    }
    pts
}

/// `F_∞` of a fitted varifold; the sup over each square is taken on a
/// `samples × samples` lattice. `+∞` when some square carries no mass.
pub fn f_infinity_fitted(v: &FittedVarifold, f: &TensorField, omega: &Domain2D, samples: usize) -> f64 {
    v.board
        .squares()
        .par_iter()
        .zip(&v.alphas)
        .zip(&v.nus)
        .map(|((q, &alpha), nu)| {
            if alpha <= 0.0 {
                return f64::INFINITY;
            }
            square_samples(omega, &q.rect, samples)
                .into_iter()
                .map(|x| {
                    let a = f.eval(x);
                    let denom = alpha * PI * nu.integrate(|t| a.riemannian_norm(t));
                    1.0 / (denom * denom)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Per-square comparison of a segment set against the optimal density and orientation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquareDeviation {
    pub square: usize,
    pub i: i64,
    pub j: i64,
    pub length_share: f64,
    pub target_share: f64,
    /// `None` where the field is isotropic, so no orientation is preferred.
    pub angle_tv: Option<f64>,
}

/// Length share vs. `∫_Q f_∞`, and the angle histogram vs. `δ_{ξ(x)}`, per square.
pub fn optimality_deviation(
    c: &Continuum,
    f: &TensorField,
    board: &Checkerboard,
    omega: &Domain2D,
    fin: &FInfinity,
) -> Vec<SquareDeviation> {
    let total = c.total_length();
    let pieces = board.cell_pieces(c);
    board
        .squares()
        .par_iter()
        .zip(pieces)
        .enumerate()
        .map(|(k, (q, pieces))| {
            let len: f64 = pieces.iter().map(|s| s.length()).sum();
            let mut emp = [0.0; ANGLE_BINS];
            for s in &pieces {
                emp[angle_bin(s.normal_angle())] += s.length();
            }
            let mut target = [0.0; ANGLE_BINS];
            let mut anisotropic = 0usize;
            let samples = square_samples(omega, &q.rect, DEFAULT_SUP_SAMPLES);
            for &x in &samples {
                let sp = f.spectral(x);
                if !sp.is_isotropic() {
                    anisotropic += 1;
                    target[angle_bin(sp.xi_max_angle)] += 1.0;
                }
            }
            let angle_tv = (anisotropic > 0 && len > 0.0).then(|| {
                emp.iter_mut().for_each(|v| *v /= len);
                target.iter_mut().for_each(|v| *v /= anisotropic as f64);
                total_variation(&emp, &target)
            });
            SquareDeviation {
                square: k,
                i: q.i,
                j: q.j,
                length_share: len / total,
                target_share: fin.integrate_over(omega, &q.rect),
                angle_tv,
            }
        })
        .collect()
}
