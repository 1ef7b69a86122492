use serde::{Deserialize, Serialize};

use super::{Point, Rect};
use crate::error::{Error, Result};
use crate::tensor_field::{reduce_angle, SpdTensor2};

/// Non-degenerate straight segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    p: Point,
    q: Point,
}

impl Segment {
    pub fn new(p: Point, q: Point) -> Result<Self> {
        let finite = p.x.is_finite() && p.y.is_finite() && q.x.is_finite() && q.y.is_finite();
        if !finite || p.dist(q) <= 0.0 {
            return Err(Error::DegenerateSegment { x: p.x, y: p.y });
        }
        Ok(Self { p, q })
    }

    pub fn from_coords(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::new(Point::new(x1, y1), Point::new(x2, y2))
    }

    pub fn p(&self) -> Point {
        self.p
    }

    pub fn q(&self) -> Point {
        self.q
    }

    pub fn length(&self) -> f64 {
        self.p.dist(self.q)
    }

    pub fn midpoint(&self) -> Point {
        self.p.lerp(self.q, 0.5)
    }

    pub fn tangent(&self) -> Point {
        let d = self.q - self.p;
        d * (1.0 / d.norm())
    }

    /// Angle of the unit normal, reduced to `[0, π)`.
    pub fn normal_angle(&self) -> f64 {
        let n = self.tangent().perp();
        reduce_angle(n.y.atan2(n.x))
    }

    /// `length · √⟨M ξ, ξ⟩` for the segment normal `ξ`.
    pub fn riemannian_length(&self, m: &SpdTensor2) -> f64 {
        let n = self.tangent().perp();
        self.length() * m.quadratic_form(n).sqrt()
    }

    pub fn bbox(&self) -> Rect {
        Rect::bounding([self.p, self.q]).unwrap()
    }

    pub fn at(&self, t: f64) -> Point {
        self.p.lerp(self.q, t)
    }

    /// Sub-segment between parameters, `None` if degenerate.
    pub fn sub(&self, t0: f64, t1: f64) -> Option<Segment> {
        Segment::new(self.at(t0), self.at(t1)).ok()
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Segment> {
        Segment::new(f(self.p), f(self.q))
    }

    pub fn distance_to_point(&self, x: Point) -> f64 {
        let d = self.q - self.p;
        let t = ((x - self.p).dot(d) / d.dot(d)).clamp(0.0, 1.0);
        self.at(t).dist(x)
    }

    pub fn distance_to_segment(&self, o: &Segment) -> f64 {
        if self.intersects(o) {
            return 0.0;
        }
        self.distance_to_point(o.p)
            .min(self.distance_to_point(o.q))
            .min(o.distance_to_point(self.p))
            .min(o.distance_to_point(self.q))
    }

    /// Proper or touching intersection test.
    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = (o.q - o.p).cross(self.p - o.p);
        let d2 = (o.q - o.p).cross(self.q - o.p);
        let d3 = (self.q - self.p).cross(o.p - self.p);
        let d4 = (self.q - self.p).cross(o.q - self.p);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        let on = |a: Point, b: Point, c: Point, d: f64| {
            d == 0.0
                && c.x >= a.x.min(b.x)
                && c.x <= a.x.max(b.x)
                && c.y >= a.y.min(b.y)
                && c.y <= a.y.max(b.y)
        };
        on(o.p, o.q, self.p, d1)
            || on(o.p, o.q, self.q, d2)
            || on(self.p, self.q, o.p, d3)
            || on(self.p, self.q, o.q, d4)
    }

    /// Parameter interval of the part inside the closed rectangle (Liang–Barsky).
    pub fn clip_params(&self, r: &Rect) -> Option<(f64, f64)> {
        let d = self.q - self.p;
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        let checks = [
            (-d.x, self.p.x - r.min.x),
            (d.x, r.max.x - self.p.x),
            (-d.y, self.p.y - r.min.y),
            (d.y, r.max.y - self.p.y),
        ];
        for (pk, qk) in checks {
            if pk == 0.0 {
                if qk < 0.0 {
                    return None;
                }
            } else {
                let t = qk / pk;
                if pk < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        (t0 < t1).then_some((t0, t1))
    }

    pub fn clip_to_rect(&self, r: &Rect) -> Option<Segment> {
        let (t0, t1) = self.clip_params(r)?;
        if t0 == 0.0 && t1 == 1.0 {
            return Some(*self);
        }
        self.sub(t0, t1)
    }
}
