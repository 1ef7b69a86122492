use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn unit(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }

    /// Counterclockwise quarter turn.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// General 2x2 matrix acting on points, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub fn rotation(phi: f64) -> Mat2 {
        let (s, c) = phi.sin_cos();
        Mat2 {
            m11: c,
            m12: -s,
            m21: s,
            m22: c,
        }
    }

    pub fn scaling(s: f64) -> Mat2 {
        Mat2 {
            m11: s,
            m12: 0.0,
            m21: 0.0,
            m22: s,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.m11 * p.x + self.m12 * p.y,
            self.m21 * p.x + self.m22 * p.y,
        )
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            m11: self.m11 * o.m11 + self.m12 * o.m21,
            m12: self.m11 * o.m12 + self.m12 * o.m22,
            m21: self.m21 * o.m11 + self.m22 * o.m21,
            m22: self.m21 * o.m12 + self.m22 * o.m22,
        }
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2 {
            m11: self.m11,
            m12: self.m21,
            m21: self.m12,
            m22: self.m22,
        }
    }
}

/// Axis-aligned closed rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn square(x0: f64, y0: f64, side: f64) -> Self {
        Self::new(Point::new(x0, y0), Point::new(x0 + side, y0 + side))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let min = Point::new(self.min.x.max(o.min.x), self.min.y.max(o.min.y));
        let max = Point::new(self.max.x.min(o.max.x), self.max.y.min(o.max.y));
        (min.x < max.x && min.y < max.y).then(|| Rect::new(min, max))
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect::new(
            Point::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            Point::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        )
    }

    pub fn inflate(&self, d: f64) -> Rect {
        Rect::new(
            self.min - Point::new(d, d),
            self.max + Point::new(d, d),
        )
    }

    pub fn bounding(points: impl IntoIterator<Item = Point>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Rect::new(first, first), |r, p| {
            r.union(&Rect::new(p, p))
        }))
    }

    /// Corners in counterclockwise order starting at `min`.
    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }
}
