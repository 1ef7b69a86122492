//! Planar geometry: segments, candidate continua, polygonal domains, clipping
//! and lattice checkerboards.

mod board;
mod continuum;
mod domain;
mod point;
mod segment;

pub use board::{BoardSquare, Checkerboard};
pub use continuum::{merge_collinear, Continuum, SNAP_REL};
pub use domain::{Domain2D, DomainSpec};
pub(crate) use domain::clip_ring_halfplane;
pub use point::{Mat2, Point, Rect};
pub use segment::Segment;

/// Clipping target for [`clip`].
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    /// Closed axis-aligned square or rectangle.
    Rect(Rect),
    /// Closed polygonal domain.
    Domain(&'a Domain2D),
}

/// Parts of `c` inside the closed region.
pub fn clip(c: &Continuum, region: Region<'_>) -> Vec<Segment> {
    match region {
        Region::Rect(r) => c
            .segments()
            .iter()
            .filter_map(|s| s.clip_to_rect(&r))
            .collect(),
        Region::Domain(d) => c.segments().iter().flat_map(|s| d.clip_segment(s)).collect(),
    }
}

pub fn checkerboard(omega: &Domain2D, s: f64) -> crate::Result<Checkerboard> {
    Checkerboard::new(omega, s)
}
