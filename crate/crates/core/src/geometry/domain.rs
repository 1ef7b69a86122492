use serde::{Deserialize, Serialize};

use super::{Continuum, Mat2, Point, Rect, Segment};
use crate::error::{Error, Result};

/// Polygonal domain: a simple counterclockwise outer ring with polygonal holes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct Domain2D {
    outer: Vec<Point>,
    holes: Vec<Vec<Point>>,
    area: f64,
    bbox: Rect,
    edges: Vec<Segment>,
}

/// Serialized form: vertex lists as `[x, y]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    pub outer: Vec<[f64; 2]>,
    #[serde(default)]
    pub holes: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<DomainSpec> for Domain2D {
    type Error = Error;
    fn try_from(s: DomainSpec) -> Result<Self> {
        let conv = |v: &[[f64; 2]]| v.iter().map(|p| Point::new(p[0], p[1])).collect();
        Domain2D::new(conv(&s.outer), s.holes.iter().map(|h| conv(h)).collect())
    }
}

impl From<Domain2D> for DomainSpec {
    fn from(d: Domain2D) -> Self {
        let conv = |v: &[Point]| v.iter().map(|p| [p.x, p.y]).collect();
        DomainSpec {
            outer: conv(&d.outer),
            holes: d.holes.iter().map(|h| conv(h)).collect(),
        }
    }
}

pub(crate) fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    0.5 * (0..n)
        .map(|k| ring[k].cross(ring[(k + 1) % n]))
        .sum::<f64>()
}

fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..ring.len()).map(move |k| (ring[k], ring[(k + 1) % ring.len()]))
}

fn ring_is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let segs: Vec<Option<Segment>> = ring_edges(ring).map(|(a, b)| Segment::new(a, b).ok()).collect();
    if segs.iter().any(Option::is_none) {
        return false;
    }
    let segs: Vec<Segment> = segs.into_iter().flatten().collect();
    for a in 0..n {
        for b in (a + 1)..n {
            let adjacent = b == a + 1 || (a == 0 && b == n - 1);
            if adjacent {
                // Neighbours may only share their common vertex.
                let (s, t) = (&segs[a], &segs[b]);
                let d = s.tangent().cross(t.tangent());
                if d.abs() < 1e-14 && s.tangent().dot(t.tangent()) < 0.0 {
                    return false;
                }
                continue;
            }
            if segs[a].intersects(&segs[b]) {
                return false;
            }
        }
    }
    true
}

/// Crossing-number test for the open interior of a ring.
fn ring_contains(ring: &[Point], p: Point) -> bool {
    let mut inside = false;
    for (a, b) in ring_edges(ring) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Sutherland–Hodgman clip of a ring against a convex rectangle.
pub(crate) fn clip_ring_to_rect(ring: &[Point], r: &Rect) -> Vec<Point> {
    let mut poly: Vec<Point> = ring.to_vec();
    let planes: [(Point, f64); 4] = [
        (Point::new(1.0, 0.0), r.min.x),
        (Point::new(-1.0, 0.0), -r.max.x),
        (Point::new(0.0, 1.0), r.min.y),
        (Point::new(0.0, -1.0), -r.max.y),
    ];
    for (n, c) in planes {
        poly = clip_ring_halfplane(&poly, n, c);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Keep the part of `ring` with `⟨n, x⟩ ≥ c`.
pub(crate) fn clip_ring_halfplane(ring: &[Point], n: Point, c: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(ring.len() + 2);
    let len = ring.len();
    for k in 0..len {
        let a = ring[k];
        let b = ring[(k + 1) % len];
        let (da, db) = (n.dot(a) - c, n.dot(b) - c);
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            out.push(a.lerp(b, da / (da - db)));
        }
    }
    out
}

impl Domain2D {
    pub fn new(outer: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let mut outer = outer;
        if !ring_is_simple(&outer) {
            return Err(Error::InvalidPolygon("outer ring is not simple".into()));
        }
        if signed_area(&outer) < 0.0 {
            outer.reverse();
        }
        let mut hs = Vec::with_capacity(holes.len());
        for (k, mut h) in holes.into_iter().enumerate() {
            if !ring_is_simple(&h) {
                return Err(Error::InvalidPolygon(format!("hole {k} is not simple")));
            }
            if signed_area(&h) > 0.0 {
                h.reverse();
            }
            if !h.iter().all(|&p| ring_contains(&outer, p)) || rings_cross(&outer, &h) {
                return Err(Error::InvalidPolygon(format!(
                    "hole {k} is not strictly inside the outer ring"
                )));
            }
            hs.push(h);
        }
        for a in 0..hs.len() {
            for b in (a + 1)..hs.len() {
                if rings_cross(&hs[a], &hs[b])
                    || ring_contains(&hs[a], hs[b][0])
                    || ring_contains(&hs[b], hs[a][0])
                {
                    return Err(Error::InvalidPolygon(format!("holes {a} and {b} overlap")));
                }
            }
        }
        let area = signed_area(&outer) + hs.iter().map(|h| signed_area(h)).sum::<f64>();
        let bbox = Rect::bounding(outer.iter().copied()).unwrap();
        let edges = std::iter::once(outer.as_slice())
            .chain(hs.iter().map(Vec::as_slice))
            .flat_map(ring_edges)
            .filter_map(|(a, b)| Segment::new(a, b).ok())
            .collect();
        Ok(Self {
            outer,
            holes: hs,
            area,
            bbox,
            edges,
        })
    }

    pub fn rectangle(x0: f64, y0: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(
            Rect::new(Point::new(x0, y0), Point::new(x0 + w, y0 + h))
                .corners()
                .to_vec(),
            vec![],
        )
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    pub fn outer(&self) -> &[Point] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.outer.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn boundary_segments(&self) -> Vec<Segment> {
        self.edges.clone()
    }

    /// `∂Ω` as a segment set (one component per ring).
    pub fn boundary(&self) -> Continuum {
        Continuum::new(self.boundary_segments()).expect("polygon has edges")
    }

    pub fn perimeter(&self) -> f64 {
        self.edges.iter().map(Segment::length).sum()
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.edges
            .iter()
            .map(|s| s.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Open interior test.
    pub fn contains_open(&self, p: Point) -> bool {
        ring_contains(&self.outer, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    /// Closed test: interior or within `1e-12 · diam` of the boundary.
    pub fn contains(&self, p: Point) -> bool {
        self.contains_open(p) || self.distance_to_boundary(p) <= 1e-12 * self.bbox.diameter()
    }

    /// `|Ω ∩ r|`.
    pub fn area_in_rect(&self, r: &Rect) -> f64 {
        if r.intersect(&self.bbox).is_none() {
            return 0.0;
        }
        let outer = signed_area(&clip_ring_to_rect(&self.outer, r));
        let holes: f64 = self
            .holes
            .iter()
            .map(|h| signed_area(&clip_ring_to_rect(h, r)))
            .sum();
        (outer + holes).max(0.0)
    }

    /// Image under a linear map (orientation restored if the map flips it).
    pub fn transformed(&self, m: &Mat2) -> Result<Domain2D> {
        let map = |ring: &[Point]| ring.iter().map(|&p| m.apply(p)).collect::<Vec<_>>();
        Domain2D::new(map(&self.outer), self.holes.iter().map(|h| map(h)).collect())
    }

    /// Pieces of `s` inside the closed domain.
    pub fn clip_segment(&self, s: &Segment) -> Vec<Segment> {
        if s.clip_params(&self.bbox).is_none() {
            return vec![];
        }
        let mut ts = vec![0.0, 1.0];
        let d = s.q() - s.p();
        for edge in &self.edges {
            let (a, e) = (edge.p(), edge.q() - edge.p());
            let den = d.cross(e);
            if den.abs() < 1e-300 {
                continue;
            }
            let w = a - s.p();
            let t = w.cross(e) / den;
            let u = w.cross(d) / den;
            if (0.0..=1.0).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
                ts.push(t);
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in ts.windows(2) {
            let mid = s.at(0.5 * (w[0] + w[1]));
            if self.contains(mid) {
                match out.last_mut() {
                    Some(last) if (last.1 - w[0]).abs() < 1e-14 => last.1 = w[1],
                    _ => out.push((w[0], w[1])),
                }
            }
        }
        out.into_iter().filter_map(|(t0, t1)| s.sub(t0, t1)).collect()
    }

    /// A point inside `Ω ∩ r` close to the rectangle's center, if any.
    pub fn sample_point_in(&self, r: &Rect) -> Option<Point> {
        let c = r.center();
        if self.contains(c) {
            return Some(c);
        }
        let poly = clip_ring_to_rect(&self.outer, r);
        if poly.len() >= 3 {
            let a = signed_area(&poly);
            if a.abs() > 0.0 {
                let n = poly.len();
                let (mut cx, mut cy) = (0.0, 0.0);
                for k in 0..n {
                    let (p, q) = (poly[k], poly[(k + 1) % n]);
                    let w = p.cross(q);
                    cx += (p.x + q.x) * w;
                    cy += (p.y + q.y) * w;
                }
                let g = Point::new(cx / (6.0 * a), cy / (6.0 * a));
                if self.contains_open(g) {
                    return Some(g);
                }
            }
        }
        let k = 16;
        let mut best: Option<(f64, Point)> = None;
        for j in 0..k {
            for i in 0..k {
                let p = Point::new(
                    r.min.x + (i as f64 + 0.5) / k as f64 * r.width(),
                    r.min.y + (j as f64 + 0.5) / k as f64 * r.height(),
                );
                if self.contains_open(p) {
                    let d = p.dist(c);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, p));
                    }
                }
            }
        }
        best.map(|(_, p)| p)
    }
}

fn rings_cross(a: &[Point], b: &[Point]) -> bool {
    ring_edges(a).any(|(p, q)| {
        let s = Segment::new(p, q).ok();
        ring_edges(b).any(|(u, v)| match (&s, Segment::new(u, v).ok()) {
            (Some(s), Some(t)) => s.intersects(&t),
            _ => false,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l_shape() -> Domain2D {
        Domain2D::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 0.5),
                Point::new(0.5, 0.5),
                Point::new(0.5, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn areas() {
        assert_eq!(Domain2D::unit_square().area(), 1.0);
        assert!((l_shape().area() - 0.75).abs() < 1e-15);
        let holed = Domain2D::new(
            Rect::square(0.0, 0.0, 1.0).corners().to_vec(),
            vec![Rect::square(0.25, 0.25, 0.5).corners().to_vec()],
        )
        .unwrap();
        assert!((holed.area() - 0.75).abs() < 1e-15);
        assert!((holed.area_in_rect(&Rect::square(0.0, 0.0, 0.5)) - 0.1875).abs() < 1e-15);
        assert!(!holed.contains(Point::new(0.5, 0.5)));
        assert!(holed.contains(Point::new(0.25, 0.5)));
    }

    #[test]
    fn rejects_bad_polygons() {
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(Domain2D::new(bowtie, vec![]).is_err());
        let outside_hole = vec![Rect::square(2.0, 2.0, 0.1).corners().to_vec()];
        assert!(Domain2D::new(Rect::square(0.0, 0.0, 1.0).corners().to_vec(), outside_hole).is_err());
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let mut cw = Rect::square(0.0, 0.0, 1.0).corners().to_vec();
        cw.reverse();
        let d = Domain2D::new(cw, vec![]).unwrap();
        assert!(signed_area(d.outer()) > 0.0);
    }

    #[test]
    fn clip_against_nonconvex() {
        let d = l_shape();
        let s = Segment::from_coords(-1.0, 0.75, 2.0, 0.75).unwrap();
        let pieces = d.clip_segment(&s);
        assert_eq!(pieces.len(), 1);
        assert!((pieces[0].length() - 0.5).abs() < 1e-14);
        let along = Segment::from_coords(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!((d.clip_segment(&along)[0].length() - 1.0).abs() < 1e-14);
    }
}
