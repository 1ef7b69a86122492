//! Explicit comb microstructures: the fundamental tile, its homogenized copies
//! inside a square, and the patchwork over a whole domain.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{merge_collinear, Checkerboard, Continuum, Domain2D, Point, Rect, Segment};
use crate::tensor_field::{SpdTensor2, TensorField};
use crate::varifold::{AngularMeasure, FittedVarifold};

/// Sub-quadrature per board square when averaging the optimal density.
const PLAN_QUAD: usize = 16;

/// Unit normal for an angle, with axis directions snapped exactly.
fn direction(angle: f64) -> Point {
    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    let (s, c) = angle.sin_cos();
    Point::new(snap(c), snap(s))
}

/// Parameters of one tile: direction law `ν = Σ β_j δ_{ξ_j}`, frozen matrix and spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct TileRecipe {
    pub nu: AngularMeasure,
    pub m: SpdTensor2,
    pub epsilon: f64,
}

impl TileRecipe {
    pub fn new(nu: AngularMeasure, m: SpdTensor2, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("tile spacing must be positive, got {epsilon}")));
        }
        Ok(Self { nu, m, epsilon })
    }

    /// `I = Σ β_j √⟨M ξ_j, ξ_j⟩`.
    pub fn i_const(&self) -> f64 {
        tile_constant(&self.nu, &self.m)
    }

    /// Rectangle heights `h_j = β_j √⟨M ξ_j, ξ_j⟩ / I`, bottom to top.
    pub fn heights(&self) -> Vec<f64> {
        let i = self.i_const();
        self.nu
            .atoms()
            .iter()
            .map(|&(a, b)| b * self.m.riemannian_norm(a) / i)
            .collect()
    }

    /// Line spacings `ε_j = ε √⟨M ξ_j, ξ_j⟩`.
    pub fn spacings(&self) -> Vec<f64> {
        self.nu
            .atoms()
            .iter()
            .map(|&(a, _)| self.epsilon * self.m.riemannian_norm(a))
            .collect()
    }

    /// Cumulative heights `0 = H_0 < H_1 < … < H_n = 1`.
    pub fn levels(&self) -> Vec<f64> {
        let mut levels = Vec::with_capacity(self.nu.len() + 1);
        levels.push(0.0);
        let mut acc = 0.0;
        for h in self.heights() {
            acc += h;
            levels.push(acc);
        }
        *levels.last_mut().unwrap() = 1.0;
        levels
    }
}

pub fn tile_constant(nu: &AngularMeasure, m: &SpdTensor2) -> f64 {
    nu.integrate(|a| m.riemannian_norm(a))
}

/// A tile split into the frame `R = ∪ ∂Y_j` and the comb lines `S_ε`.
#[derive(Clone, Debug)]
pub struct Tile {
    pub frame: Vec<Segment>,
    pub comb: Vec<Segment>,
    /// Level `H_j` of the rectangle boundaries (`H_0 = 0`, `H_n = 1`).
    pub levels: Vec<f64>,
}

impl Tile {
    pub fn into_continuum(self) -> Continuum {
        let mut segs = self.frame;
        segs.extend(self.comb);
        Continuum::new(segs).expect("frame is non-empty")
    }
}

/// Comb lines orthogonal to `xi` inside `y`, spaced `eps` from the lowest corner.
fn comb_lines(y: &Rect, xi: Point, eps: f64, out: &mut Vec<Segment>) -> usize {
    let proj: Vec<f64> = y.corners().iter().map(|&p| p.dot(xi)).collect();
    let c_min = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (c_max - c_min).max(1.0);
    let along = xi.perp();
    let reach = 2.0 * y.diameter();
    let centre = y.center();
    let before = out.len();
    let mut k = 1usize;
    loop {
        let c = c_min + k as f64 * eps;
        if c >= c_max - tol {
            break;
        }
        // Foot of the line on the normal through the rectangle centre.
        let foot = centre + xi * (c - centre.dot(xi));
        let long = Segment::new(foot - along * reach, foot + along * reach).expect("non-degenerate");
        if let Some(piece) = long.clip_to_rect(y) {
            if piece.length() > tol {
                out.push(piece);
            }
        }
        k += 1;
    }
    out.len() - before
}

/// The tile `Γ_ε = R ∪ S_ε` in the unit square.
pub fn build_tile_parts(r: &TileRecipe) -> Result<Tile> {
    let levels = r.levels();
    let spacings = r.spacings();
    let mut comb = Vec::new();
    for (j, (&(angle, _), &eps)) in r.nu.atoms().iter().zip(&spacings).enumerate() {
        let y = Rect::new(Point::new(0.0, levels[j]), Point::new(1.0, levels[j + 1]));
        if comb_lines(&y, direction(angle), eps, &mut comb) == 0 {
            return Err(Error::TileTooCoarse {
                rectangle: j,
                spacing: eps,
            });
        }
    }
    let mut frame = vec![
        Segment::from_coords(0.0, 0.0, 0.0, 1.0)?,
        Segment::from_coords(1.0, 0.0, 1.0, 1.0)?,
    ];
    for &h in &levels {
        frame.push(Segment::from_coords(0.0, h, 1.0, h)?);
    }
    Ok(Tile { frame, comb, levels })
}

pub fn build_tile(r: &TileRecipe) -> Result<Continuum> {
    Ok(build_tile_parts(r)?.into_continuum())
}

/// Homogenization parameters for a unit-square budget `ell`: `(ε, m)`.
pub fn sigma_ell_params(ell: f64, i_const: f64) -> (f64, usize) {
    let root = ell.cbrt();
    let eps = 1.0 / (root * root);
    // Guard against `ceil` of a product that should be an exact integer.
    let m = (root * i_const * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (eps, m)
}

/// `Σ_ℓ` inside the square `q`, split into frame and comb.
pub fn build_sigma_ell_parts(q: &Rect, nu: &AngularMeasure, m: &SpdTensor2, ell: f64) -> Result<Tile> {
    let s = q.width();
    if (q.height() - s).abs() > 1e-12 * s || s <= 0.0 {
        return Err(Error::InvalidArgument(format!("target is not a square: {q:?}")));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {ell}")));
    }
    let ell_u = ell / s;
    let (eps, k) = sigma_ell_params(ell_u, tile_constant(nu, m));
    let tile = build_tile_parts(&TileRecipe::new(nu.clone(), *m, eps)?)?;
    let scale = s / k as f64;
    let place = |a: usize, b: usize, p: Point| {
        Point::new(q.min.x + (a as f64 + p.x) * scale, q.min.y + (b as f64 + p.y) * scale)
    };
    let mut comb = Vec::with_capacity(tile.comb.len() * k * k);
    for b in 0..k {
        for a in 0..k {
            for seg in &tile.comb {
                comb.push(seg.map(|p| place(a, b, p))?);
            }
        }
    }
    // Copies of the frame line up into full-width lines.
    let mut frame = Vec::with_capacity(k * tile.levels.len() + k + 2);
    let (x0, x1) = (q.min.x, q.max.x);
    let n = tile.levels.len() - 1;
    for b in 0..k {
        for &h in &tile.levels[..n] {
            let y = q.min.y + (b as f64 + h) * scale;
            frame.push(Segment::from_coords(x0, y, x1, y)?);
        }
    }
    frame.push(Segment::from_coords(x0, q.max.y, x1, q.max.y)?);
    for a in 0..=k {
        let x = if a == k { q.max.x } else { q.min.x + a as f64 * scale };
        frame.push(Segment::from_coords(x, q.min.y, x, q.max.y)?);
    }
    Ok(Tile {
        frame,
        comb,
        levels: tile.levels,
    })
}

pub fn build_sigma_ell(q: &Rect, nu: &AngularMeasure, m: &SpdTensor2, ell: f64) -> Result<Continuum> {
    Ok(build_sigma_ell_parts(q, nu, m, ell)?.into_continuum())
}

/// A fitted varifold with frozen matrices and a length budget.
#[derive(Clone, Debug)]
pub struct PatchworkPlan {
    pub fitted: FittedVarifold,
    pub frozen: Vec<SpdTensor2>,
    pub length: f64,
}

impl PatchworkPlan {
    pub fn new(fitted: FittedVarifold, frozen: Vec<SpdTensor2>, length: f64) -> Result<Self> {
        if frozen.len() != fitted.board().len() {
            return Err(Error::InvalidArgument(format!(
                "{} frozen matrices for {} squares",
                frozen.len(),
                fitted.board().len()
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
        }
        Ok(Self { fitted, frozen, length })
    }

    pub fn board(&self) -> &Checkerboard {
        self.fitted.board()
    }

    /// Per-square budgets `ℓ_i = s² α_i L`.
    pub fn square_lengths(&self) -> Vec<f64> {
        let s = self.board().side();
        self.fitted.alphas().iter().map(|a| s * s * a * self.length).collect()
    }

    pub fn with_length(&self, length: f64) -> Self {
        Self {
            length,
            ..self.clone()
        }
    }
}

/// Result of [`build_patchwork_detailed`].
#[derive(Clone, Debug)]
pub struct Patchwork {
    pub sigma: Continuum,
    /// Budget used for the final build (`L` or the renormalized `L²/H¹`).
    pub effective_length: f64,
    pub renormalized: bool,
}

/// Rejects boards where some boundary component lies strictly inside one square.
pub fn check_boundary_condition(board: &Checkerboard, omega: &Domain2D) -> Result<()> {
    let s = board.side();
    for ring in omega.rings() {
        let Some(b) = Rect::bounding(ring.iter().copied()) else { continue };
        let i = (b.min.x / s).floor();
        let j = (b.min.y / s).floor();
        let inside = b.min.x > i * s && b.max.x < (i + 1.0) * s && b.min.y > j * s && b.max.y < (j + 1.0) * s;
        if inside {
            return Err(Error::BoundaryInsideSquare {
                side: s,
                i: i as i64,
                j: j as i64,
            });
        }
    }
    Ok(())
}

fn patchwork_once(plan: &PatchworkPlan, omega: &Domain2D) -> Result<Continuum> {
    let board = plan.board();
    let lengths = plan.square_lengths();
    let pieces: Vec<Vec<Segment>> = board
        .squares()
        .par_iter()
        .enumerate()
        .map(|(k, q)| {
            let alpha = plan.fitted.alphas()[k];
            if alpha <= 0.0 {
                return Err(Error::InfiniteEnergyPlan { i: q.i, j: q.j });
            }
            let tile = build_sigma_ell_parts(&q.rect, &plan.fitted.nus()[k], &plan.frozen[k], lengths[k])
                .map_err(|e| Error::SquareTooShort {
                    i: q.i,
                    j: q.j,
                    length: lengths[k],
                    source: Box::new(e),
                })?;
            let full = (q.area_in_domain - q.rect.area()).abs() <= 1e-12 * q.rect.area()
                && omega.holes().is_empty();
            let segs = tile.frame.into_iter().chain(tile.comb);
            Ok(if full {
                segs.collect()
            } else {
                segs.flat_map(|s| omega.clip_segment(&s)).collect()
            })
        })
        .collect::<Result<_>>()?;
    let mut all = omega.boundary_segments();
    all.extend(pieces.into_iter().flatten());
    let bbox = omega.bbox();
    Continuum::new(merge_collinear(&all, 1e-9 * bbox.diameter()))
}

/// `Σ_L = ∂Ω ∪ ⋃ (Σ^i_{s² α_i L} ∩ Ω)`, rebuilt once with `L²/H¹` if it overshoots `L`.
pub fn build_patchwork_detailed(plan: &PatchworkPlan, omega: &Domain2D) -> Result<Patchwork> {
    check_boundary_condition(plan.board(), omega)?;
    let first = patchwork_once(plan, omega)?;
    let h = first.total_length();
    if h <= plan.length {
        return Ok(Patchwork {
            sigma: first,
            effective_length: plan.length,
            renormalized: false,
        });
    }
    let reduced = plan.length * plan.length / h;
    Ok(Patchwork {
        sigma: patchwork_once(&plan.with_length(reduced), omega)?,
        effective_length: reduced,
        renormalized: true,
    })
}

pub fn build_patchwork(plan: &PatchworkPlan, omega: &Domain2D) -> Result<Continuum> {
    Ok(build_patchwork_detailed(plan, omega)?.sigma)
}

/// Frozen sample point of a square: its centre, moved into `Ω` if needed.
pub fn square_sample_point(omega: &Domain2D, q: &Rect) -> Point {
    let c = q.center();
    if omega.contains(c) {
        c
    } else {
        omega.sample_point_in(q).unwrap_or(c)
    }
}

/// Discretized minimizer: `α_i` = mean of `f_∞` over `Ω ∩ Q_i`,
/// `ν_i = δ_{ξ(x_i)}` and `M_i = A(x_i)`.
pub fn optimal_plan(f: &TensorField, omega: &Domain2D, s: f64, length: f64) -> Result<PatchworkPlan> {
    plan_with_orientation(f, omega, s, length, None)
}

/// [`optimal_plan`] with every `ν_i` optionally forced to `δ_angle`.
pub fn plan_with_orientation(
    f: &TensorField,
    omega: &Domain2D,
    s: f64,
    length: f64,
    orientation: Option<f64>,
) -> Result<PatchworkPlan> {
    let board = Checkerboard::new(omega, s)?;
    let integrals: Vec<f64> = board
        .squares()
        .par_iter()
        .map(|q| inverse_root_integral(f, omega, &q.rect, PLAN_QUAD))
        .collect();
    let z: f64 = integrals.iter().sum();
    let mut alphas = Vec::with_capacity(board.len());
    let mut nus = Vec::with_capacity(board.len());
    let mut frozen = Vec::with_capacity(board.len());
    for (q, int) in board.squares().iter().zip(&integrals) {
        alphas.push(int / z / q.area_in_domain);
        let x = square_sample_point(omega, &q.rect);
        let a = f.eval(x);
        nus.push(AngularMeasure::dirac(orientation.unwrap_or(a.eig2().xi_max_angle)));
        frozen.push(a);
    }
    let fitted = FittedVarifold::normalized(board, alphas, nus)?;
    PatchworkPlan::new(fitted, frozen, length)
}

/// `∫_{Ω ∩ q} 1/√σ_max` by midpoint rule on a `k × k` split of `q`.
fn inverse_root_integral(f: &TensorField, omega: &Domain2D, q: &Rect, k: usize) -> f64 {
    let (w, h) = (q.width() / k as f64, q.height() / k as f64);
    let mut total = 0.0;
    for j in 0..k {
        for i in 0..k {
            let cell = Rect::new(
                Point::new(q.min.x + i as f64 * w, q.min.y + j as f64 * h),
                Point::new(q.min.x + (i + 1) as f64 * w, q.min.y + (j + 1) as f64 * h),
            );
            let a = omega.area_in_rect(&cell);
            if a > 0.0 {
                let x = square_sample_point(omega, &cell);
                total += a / f.spectral(x).sigma_max.sqrt();
            }
        }
    }
    total
}
