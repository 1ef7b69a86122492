use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point, Rect, Segment};
use crate::error::{Error, Result};
use crate::tensor_field::SpdTensor2;

/// Relative snapping tolerance (times the bounding-box diameter).
pub const SNAP_REL: f64 = 1e-9;

/// Finite union of segments standing in for a compact set `Σ`.
///
/// Two segments are adjacent when they come within `tol_snap` of each other,
/// which covers shared endpoints as well as T-junctions.
#[derive(Clone, Debug, PartialEq)]
pub struct Continuum {
    segments: Vec<Segment>,
    tol_snap: f64,
}

impl Continuum {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyContinuum);
        }
        let bbox = bbox_of(&segments);
        Ok(Self {
            tol_snap: SNAP_REL * bbox.diameter(),
            segments,
        })
    }

    /// Like [`Continuum::new`] but rejects disconnected input.
    pub fn new_connected(segments: Vec<Segment>) -> Result<Self> {
        let c = Self::new(segments)?;
        match c.component_count() {
            1 => Ok(c),
            components => Err(Error::NotConnected { components }),
        }
    }

    /// Closed polyline through `points` (last joined to first).
    pub fn closed_polyline(points: &[Point]) -> Result<Self> {
        let segs = (0..points.len())
            .map(|k| Segment::new(points[k], points[(k + 1) % points.len()]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(segs)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn into_segments(self) -> Vec<Segment> {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn tol_snap(&self) -> f64 {
        self.tol_snap
    }

    pub fn bbox(&self) -> Rect {
        bbox_of(&self.segments)
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// `∫ √⟨Mξ,ξ⟩ dH¹` over the normals of the segments.
    pub fn riemannian_length(&self, m: &SpdTensor2) -> f64 {
        self.segments.iter().map(|s| s.riemannian_length(m)).sum()
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Number of connected components of the snapped adjacency graph.
    pub fn component_count(&self) -> usize {
        let labels = self.component_labels();
        let mut seen: Vec<usize> = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Component label per segment (labels are root indices).
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.segments.len();
        let mut uf = UnionFind::new(n);
        let tol = self.tol_snap;
        let bbox = self.bbox().inflate(tol.max(1e-300));
        let cells = ((n as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let cw = (bbox.width() / cells as f64).max(f64::MIN_POSITIVE);
        let ch = (bbox.height() / cells as f64).max(f64::MIN_POSITIVE);
        let mut grid: HashMap<(usize, usize), Vec<u32>> = HashMap::new();
        let clampi = |v: f64| (v.max(0.0) as usize).min(cells - 1);
        for (k, s) in self.segments.iter().enumerate() {
            let b = s.bbox().inflate(tol);
            let (i0, i1) = (
                clampi((b.min.x - bbox.min.x) / cw),
                clampi((b.max.x - bbox.min.x) / cw),
            );
            let (j0, j1) = (
                clampi((b.min.y - bbox.min.y) / ch),
                clampi((b.max.y - bbox.min.y) / ch),
            );
            // Walk only the cells the segment actually passes near.
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let cell = Rect::new(
                        Point::new(bbox.min.x + i as f64 * cw, bbox.min.y + j as f64 * ch),
                        Point::new(
                            bbox.min.x + (i + 1) as f64 * cw,
                            bbox.min.y + (j + 1) as f64 * ch,
                        ),
                    )
                    .inflate(tol + 1e-12 * bbox.diameter());
                    if s.clip_params(&cell).is_some() {
                        grid.entry((i, j)).or_default().push(k as u32);
                    }
                }
            }
        }
        for members in grid.values() {
            for a in 0..members.len() {
                for b in (a + 1)..members.len() {
                    let (u, v) = (members[a] as usize, members[b] as usize);
                    if uf.find(u) == uf.find(v) {
                        continue;
                    }
                    if self.segments[u].distance_to_segment(&self.segments[v]) <= tol {
                        uf.union(u, v);
                    }
                }
            }
        }
        (0..n).map(|k| uf.find(k)).collect()
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Continuum> {
        let segs = self
            .segments
            .iter()
            .map(|s| s.map(&f))
            .collect::<Result<Vec<_>>>()?;
        Continuum::new(segs)
    }

    pub fn union(&self, other: &Continuum) -> Continuum {
        let mut segs = self.segments.clone();
        segs.extend_from_slice(&other.segments);
        Continuum::new(segs).expect("union of non-empty sets")
    }

    /// Merge overlapping or touching collinear segments, so that
    /// [`Continuum::total_length`] measures the union.
    pub fn merged(&self) -> Continuum {
        Continuum::new(merge_collinear(&self.segments, self.tol_snap.max(1e-14)))
            .expect("merging keeps at least one segment")
    }
}

fn bbox_of(segments: &[Segment]) -> Rect {
    Rect::bounding(segments.iter().flat_map(|s| [s.p(), s.q()]))
        .unwrap_or(Rect::new(Point::default(), Point::default()))
}

/// Union of collinear overlapping pieces; non-collinear segments pass through.
pub fn merge_collinear(segments: &[Segment], tol: f64) -> Vec<Segment> {
    let ang_tol = 1e-9;
    let mut angles: Vec<(f64, usize)> = segments
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let a = s.normal_angle();
            (if PI - a <= ang_tol { 0.0 } else { a }, k)
        })
        .collect();
    angles.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::with_capacity(segments.len());
    let mut k = 0;
    while k < angles.len() {
        let mut end = k + 1;
        while end < angles.len() && angles[end].0 - angles[end - 1].0 <= ang_tol {
            end += 1;
        }
        let rep = angles[k].0;
        let n = Point::unit(rep);
        let u = n.perp();
        // (offset, t_lo, t_hi, p_lo, p_hi) along the representative direction.
        let mut lines: Vec<(f64, f64, f64, Point, Point)> = angles[k..end]
            .iter()
            .map(|&(_, idx)| {
                let s = &segments[idx];
                let (t0, t1) = (u.dot(s.p()), u.dot(s.q()));
                if t0 <= t1 {
                    (n.dot(s.midpoint()), t0, t1, s.p(), s.q())
                } else {
                    (n.dot(s.midpoint()), t1, t0, s.q(), s.p())
                }
            })
            .collect();
        lines.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut g = 0;
        while g < lines.len() {
            let mut g_end = g + 1;
            while g_end < lines.len() && lines[g_end].0 - lines[g_end - 1].0 <= tol {
                g_end += 1;
            }
            let group = &mut lines[g..g_end];
            group.sort_by(|x, y| x.1.total_cmp(&y.1));
            // Endpoints are taken from the inputs, so unmerged pieces are unchanged.
            let (mut hi, mut p_lo, mut p_hi) = (group[0].2, group[0].3, group[0].4);
            for l in group.iter().skip(1) {
                if l.1 <= hi + tol {
                    if l.2 > hi {
                        hi = l.2;
                        p_hi = l.4;
                    }
                } else {
                    out.extend(Segment::new(p_lo, p_hi).ok());
                    p_lo = l.3;
                    p_hi = l.4;
                    hi = l.2;
                }
            }
            out.extend(Segment::new(p_lo, p_hi).ok());
            g = g_end;
        }
        k = end;
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Segment {
        Segment::from_coords(x1, y1, x2, y2).unwrap()
    }

    pub(crate) fn unit_square_boundary() -> Continuum {
        Continuum::closed_polyline(&Rect::square(0.0, 0.0, 1.0).corners()).unwrap()
    }

    #[test]
    fn lengths() {
        let c = Continuum::new(vec![seg(0.0, 0.0, 1.0, 0.0)]).unwrap();
        assert_eq!(c.total_length(), 1.0);
        assert_eq!(unit_square_boundary().total_length(), 4.0);
        let m = SpdTensor2::diag(1.0, 4.0).unwrap();
        assert!((c.riemannian_length(&m) - 2.0).abs() < 1e-14);
        assert!((unit_square_boundary().riemannian_length(&m) - 6.0).abs() < 1e-14);
        let b = unit_square_boundary();
        assert_eq!(b.riemannian_length(&SpdTensor2::IDENTITY), b.total_length());
    }

    #[test]
    fn connectivity() {
        let touching = Continuum::new(vec![seg(0.0, 0.0, 1.0, 0.0), seg(0.0, 0.0, 0.0, 1.0)]).unwrap();
        assert!(touching.is_connected());
        let apart = Continuum::new(vec![seg(0.0, 0.0, 1.0, 0.0), seg(0.0, 1.0, 1.0, 1.0)]).unwrap();
        assert!(!apart.is_connected());
        assert_eq!(apart.component_count(), 2);
        let tee = Continuum::new(vec![seg(0.0, 0.0, 1.0, 0.0), seg(0.5, 0.0, 0.5, 1.0)]).unwrap();
        assert!(tee.is_connected());
        assert!(Continuum::new_connected(apart.into_segments()).is_err());
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(Continuum::new(vec![]), Err(Error::EmptyContinuum)));
    }

    #[test]
    fn merge_unions_overlaps() {
        let c = Continuum::new(vec![
            seg(0.0, 0.0, 0.6, 0.0),
            seg(0.4, 0.0, 1.0, 0.0),
            seg(1.0, 0.0, 1.5, 0.0),
            seg(0.0, 1.0, 1.0, 1.0),
            seg(1.0, 1.0, 0.0, 1.0),
            seg(0.0, 0.0, 0.0, 1.0),
        ])
        .unwrap();
        let m = c.merged();
        assert_eq!(m.len(), 3);
        assert!((m.total_length() - 3.5).abs() < 1e-12);
    }
}
