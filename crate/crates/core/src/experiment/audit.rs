use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::io::{write_rows, write_segments};
use super::{Check, ExperimentConfig, RunReport};
use crate::bounds::{thin_strip_lower, upper_bound_thm};
use crate::eigensolver::{lambda1_full, lambda1_partial};
use crate::error::{Error, Result};
use crate::geometry::{clip_ring_halfplane, Continuum, Domain2D, Point, Rect, Segment};
use crate::tensor_field::{SpdTensor2, TensorField};
use crate::tile_builder::{build_tile_parts, TileRecipe};
use crate::varifold::AngularMeasure;

/// Mesh cells across the strip width of an audited comb cell.
const CELLS_ACROSS_COMB: f64 = 24.0;

/// Random SPD matrix with condition number at most `max_condition`.
pub fn random_spd(rng: &mut impl Rng, max_condition: f64) -> SpdTensor2 {
    let sigma_min = rng.gen_range(0.5..2.0);
    let cond = rng.gen_range(1.0..=max_condition);
    let phi = rng.gen_range(0.0..PI);
    SpdTensor2::from_spectrum(sigma_min * cond, sigma_min, phi).expect("positive spectrum")
}

fn random_point(rng: &mut impl Rng, omega: &Domain2D) -> Point {
    let b = omega.bbox();
    loop {
        let p = Point::new(rng.gen_range(b.min.x..b.max.x), rng.gen_range(b.min.y..b.max.y));
        if omega.contains_open(p) {
            return p;
        }
    }
}

/// Random segment tree in `Ω`: each new segment starts on an earlier one.
/// Segments that would leave `Ω` are redrawn.
pub fn random_tree(rng: &mut impl Rng, omega: &Domain2D, segments: usize) -> Continuum {
    let min_len = 0.05 * omega.bbox().diameter();
    let inside = |s: &Segment| {
        let pieces = omega.clip_segment(s);
        pieces.len() == 1 && (pieces[0].length() - s.length()).abs() <= 1e-12 * s.length()
    };
    let mut segs: Vec<Segment> = Vec::with_capacity(segments);
    while segs.len() < segments.max(1) {
        let start = match segs.len() {
            0 => random_point(rng, omega),
            k => segs[rng.gen_range(0..k)].at(rng.gen_range(0.0..=1.0)),
        };
        let end = random_point(rng, omega);
        if let Ok(s) = Segment::new(start, end) {
            if s.length() >= min_len && inside(&s) {
                segs.push(s);
            }
        }
    }
    Continuum::new(segs).expect("non-empty")
}

/// A cell of `Y_j ∖ Γ_ε`: the polygon, the strip width it lies in, and its normal.
#[derive(Clone, Debug)]
pub struct CombCell {
    pub polygon: Domain2D,
    pub m: SpdTensor2,
    pub xi_angle: f64,
    pub width: f64,
    pub epsilon: f64,
}

/// Random cell cut out of a random tile by consecutive comb lines.
pub fn random_comb_cell(rng: &mut impl Rng, max_condition: f64) -> CombCell {
    loop {
        let m = random_spd(rng, max_condition);
        let atoms = rng.gen_range(1..=3);
        let nu = AngularMeasure::from_weights(
            (0..atoms).map(|_| (rng.gen_range(0.0..PI), rng.gen_range(0.2..1.0))).collect(),
        )
        .expect("positive weights");
        let eps = rng.gen_range(0.06..0.2);
        let recipe = TileRecipe::new(nu.clone(), m, eps).expect("positive spacing");
        if build_tile_parts(&recipe).is_err() {
            continue;
        }
        let levels = recipe.levels();
        let spacings = recipe.spacings();
        let j = rng.gen_range(0..nu.len());
        let y = Rect::new(Point::new(0.0, levels[j]), Point::new(1.0, levels[j + 1]));
        let angle = nu.atoms()[j].0;
        let xi = Point::unit(angle);
        let proj: Vec<f64> = y.corners().iter().map(|&p| p.dot(xi)).collect();
        let c_min = proj.iter().copied().fold(f64::INFINITY, f64::min);
        let c_max = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = spacings[j];
        let cells = ((c_max - c_min) / e).ceil() as usize;
        let k = rng.gen_range(0..cells.max(1));
        let lo = c_min + k as f64 * e;
        let hi = (lo + e).min(c_max);
        // Skip slivers at the far corner; they need a far finer mesh.
        if hi - lo < 0.3 * e {
            continue;
        }
        let ring = clip_ring_halfplane(&y.corners(), xi, lo);
        let ring = clip_ring_halfplane(&ring, -xi, -hi);
        let mut pts: Vec<Point> = Vec::with_capacity(ring.len());
        for p in ring {
            if pts.last().is_none_or(|q: &Point| q.dist(p) > 1e-12) {
                pts.push(p);
            }
        }
        if pts.len() > 2 && pts[0].dist(*pts.last().unwrap()) <= 1e-12 {
            pts.pop();
        }
        let Ok(polygon) = Domain2D::new(pts, vec![]) else { continue };
        if polygon.area() < 0.05 * e * e {
            continue;
        }
        return CombCell {
            polygon,
            m,
            xi_angle: angle,
            width: hi - lo,
            epsilon: eps,
        };
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub case: usize,
    pub kind: &'static str,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub segments: usize,
    pub components: usize,
    pub xi_angle: Option<f64>,
    pub width: Option<f64>,
    pub riem_len: Option<f64>,
    pub n: usize,
    pub lambda1: f64,
    pub bound: f64,
    /// `lambda1 / bound`.
    pub quotient: f64,
    pub violated: bool,
}

fn tree_case(cfg: &ExperimentConfig, case: usize, seed: u64) -> Result<(AuditRow, Continuum)> {
    let a = cfg.audit.as_ref().expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_spd(&mut rng, a.max_condition);
    let k = rng.gen_range(1..=a.max_segments);
    let d = random_tree(&mut rng, &cfg.domain, k);
    let n = cfg.mesh.n[0];
    let lam = lambda1_partial(&cfg.domain, &m, &d, n)?.lambda1;
    let kappa = d.component_count();
    let riem = d.riemannian_length(&m);
    let bound = upper_bound_thm(&m, cfg.domain.area(), riem, kappa)?.upper;
    let row = AuditRow {
        case,
        kind: "tree",
        a11: m.a11(),
        a12: m.a12(),
        a22: m.a22(),
        segments: d.len(),
        components: kappa,
        xi_angle: None,
        width: None,
        riem_len: Some(riem),
        n,
        lambda1: lam,
        bound,
        quotient: lam / bound,
        violated: lam > bound * (1.0 + a.upper_margin),
    };
    Ok((row, d))
}

fn comb_case(cfg: &ExperimentConfig, case: usize, seed: u64) -> Result<(AuditRow, Continuum)> {
    let a = cfg.audit.as_ref().expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = random_comb_cell(&mut rng, a.max_condition);
    let n = (CELLS_ACROSS_COMB.max(cfg.mesh.cells_per_gap) / cell.width).ceil() as usize;
    let lam = lambda1_full(&cell.polygon, &TensorField::constant(cell.m), None, n)?.lambda1;
    let bound = thin_strip_lower(&cell.m, cell.xi_angle, cell.width)?;
    let outline = cell.polygon.boundary();
    let row = AuditRow {
        case,
        kind: "comb",
        a11: cell.m.a11(),
        a12: cell.m.a12(),
        a22: cell.m.a22(),
        segments: outline.len(),
        components: 1,
        xi_angle: Some(cell.xi_angle),
        width: Some(cell.width),
        riem_len: None,
        n,
        lambda1: lam,
        bound,
        quotient: lam / bound,
        violated: lam < bound * (1.0 - a.lower_margin),
    };
    Ok((row, outline))
}

/// Random trees against the upper bound and random comb cells against the
/// thin-strip lower bound. Every case draws from its own seeded stream.
pub fn run_bounds_audit(cfg: &ExperimentConfig) -> Result<RunReport> {
    let a = cfg.audit.as_ref().ok_or_else(|| Error::Config("missing [audit] table".into()))?;
    let stream = |k: u64| cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
    let trees: Vec<(AuditRow, Continuum)> = (0..a.trees)
        .into_par_iter()
        .map(|k| tree_case(cfg, k, stream(k as u64)))
        .collect::<Result<_>>()?;
    let combs: Vec<(AuditRow, Continuum)> = (0..a.combs)
        .into_par_iter()
        .map(|k| comb_case(cfg, a.trees + k, stream((1 << 32) + k as u64)))
        .collect::<Result<_>>()?;
    let mut outputs = Vec::new();
    let all: Vec<&(AuditRow, Continuum)> = trees.iter().chain(&combs).collect();
    for (row, geom) in all.iter().map(|p| (&p.0, &p.1)) {
        if row.violated {
            let p = cfg.out.join(format!("violation_{}_{}.csv", row.kind, row.case));
            write_segments(geom, &p)?;
            outputs.push(p);
        }
    }
    let rows: Vec<AuditRow> = all.iter().map(|p| p.0.clone()).collect();
    let path = cfg.out.join("bounds_audit.csv");
    write_rows(&rows, &path)?;
    outputs.insert(0, path);
    let count = |kind: &str| rows.iter().filter(|r| r.kind == kind && r.violated).count();
    let extreme = |kind: &str, pick: fn(f64, f64) -> f64, init: f64| {
        rows.iter().filter(|r| r.kind == kind).map(|r| r.quotient).fold(init, pick)
    };
    let (vt, vc) = (count("tree"), count("comb"));
    let checks = vec![
        Check::new(
            "upper bound",
            vt == 0,
            format!(
                "{vt} of {} trees above bound (+{}%); max λ/bound {:.4}",
                a.trees,
                100.0 * a.upper_margin,
                extreme("tree", f64::max, 0.0)
            ),
        ),
        Check::new(
            "thin-strip bound",
            vc == 0,
            format!(
                "{vc} of {} comb cells below bound (-{}%); min λ/bound {:.4}",
                a.combs,
                100.0 * a.lower_margin,
                extreme("comb", f64::min, f64::INFINITY)
            ),
        ),
    ];
    Ok(RunReport {
        kind: cfg.kind,
        outputs,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trees_are_connected_and_inside() {
        let sq = Domain2D::unit_square();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..=6 {
            let t = random_tree(&mut rng, &sq, k);
            assert_eq!(t.len(), k);
            assert!(t.is_connected());
            assert!(t.segments().iter().all(|s| sq.contains(s.p()) && sq.contains(s.q())));
        }
    }

    #[test]
    fn comb_cells_fit_their_strip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = random_comb_cell(&mut rng, 10.0);
            let xi = Point::unit(c.xi_angle);
            let proj: Vec<f64> = c.polygon.outer().iter().map(|p| p.dot(xi)).collect();
            let spread = proj.iter().copied().fold(f64::MIN, f64::max) - proj.iter().copied().fold(f64::MAX, f64::min);
            assert!(spread <= c.width * (1.0 + 1e-9));
        }
    }

    #[test]
    fn spd_condition_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_spd(&mut rng, 10.0);
            let sp = m.eig2();
            assert!(sp.sigma_max / sp.sigma_min <= 10.0 + 1e-9);
        }
    }
}
