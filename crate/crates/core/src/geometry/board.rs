use std::collections::HashMap;

use super::{Continuum, Domain2D, Rect, Segment};
use crate::error::{Error, Result};

/// One lattice square `[i s, (i+1) s] × [j s, (j+1) s]` of a checkerboard.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoardSquare {
    pub i: i64,
    pub j: i64,
    pub rect: Rect,
    /// `|Ω ∩ Q|`.
    pub area_in_domain: f64,
}

/// Lattice squares of side `s` meeting `Ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkerboard {
    side: f64,
    squares: Vec<BoardSquare>,
    index: HashMap<(i64, i64), usize>,
}

impl Checkerboard {
    pub fn new(omega: &Domain2D, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("board side must be positive, got {s}")));
        }
        let b = omega.bbox();
        // Snap so that lattice-aligned boundaries do not spill into an extra row.
        let lo = |v: f64| ((v / s) + 1e-9).floor() as i64;
        let hi = |v: f64| ((v / s) - 1e-9).ceil() as i64;
        let area_tol = 1e-12 * s * s;
        let mut squares = Vec::new();
        for j in lo(b.min.y)..hi(b.max.y) {
            for i in lo(b.min.x)..hi(b.max.x) {
                let rect = Rect::square(i as f64 * s, j as f64 * s, s);
                let a = omega.area_in_rect(&rect);
                if a > area_tol {
                    squares.push(BoardSquare {
                        i,
                        j,
                        rect,
                        area_in_domain: a,
                    });
                }
            }
        }
        let index = squares
            .iter()
            .enumerate()
            .map(|(k, q)| ((q.i, q.j), k))
            .collect();
        Ok(Self {
            side: s,
            squares,
            index,
        })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn squares(&self) -> &[BoardSquare] {
        &self.squares
    }

    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    pub fn find(&self, i: i64, j: i64) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }

    /// Square owning point `(x, y)` under the half-open convention, with the
    /// outer edges of the board closed.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let s = self.side;
        let fi = (x / s).floor() as i64;
        let fj = (y / s).floor() as i64;
        let on_i = ((x / s) - (x / s).round()).abs() < 1e-9;
        let on_j = ((y / s) - (y / s).round()).abs() < 1e-9;
        let ci = if on_i { (x / s).round() as i64 } else { fi };
        let cj = if on_j { (y / s).round() as i64 } else { fj };
        let candidates_i: &[i64] = if on_i { &[ci, ci - 1] } else { &[ci, ci] };
        let candidates_j: &[i64] = if on_j { &[cj, cj - 1] } else { &[cj, cj] };
        for &j in candidates_j {
            for &i in candidates_i {
                if let Some(k) = self.find(i, j) {
                    return Some(k);
                }
            }
        }
        None
    }

    /// Pieces of `c` owned by square `k`.
    ///
    /// Squares are half-open (`[x, x+s) × [y, y+s)`): a piece lying on the right
    /// or top edge belongs to the neighbour there, unless that neighbour is not
    /// on the board. Summing over the board therefore counts every piece once.
    pub fn clip_cell(&self, k: usize, c: &Continuum) -> Vec<Segment> {
        let q = &self.squares[k];
        let tol = 1e-9 * self.side;
        let right_open = self.find(q.i + 1, q.j).is_some();
        let top_open = self.find(q.i, q.j + 1).is_some();
        c.segments()
            .iter()
            .filter_map(|s| s.clip_to_rect(&q.rect))
            .filter(|piece| {
                let on_right = (piece.p().x - q.rect.max.x).abs() <= tol
                    && (piece.q().x - q.rect.max.x).abs() <= tol;
                let on_top = (piece.p().y - q.rect.max.y).abs() <= tol
                    && (piece.q().y - q.rect.max.y).abs() <= tol;
                !(on_right && right_open) && !(on_top && top_open)
            })
            .collect()
    }

    /// Lengths owned by each square, computed in one pass over `c`.
    pub fn cell_lengths(&self, c: &Continuum) -> Vec<f64> {
        self.cell_pieces(c)
            .iter()
            .map(|v| v.iter().map(Segment::length).sum())
            .collect()
    }

    /// All [`Checkerboard::clip_cell`] results, bucketing segments by bounding box first.
    pub fn cell_pieces(&self, c: &Continuum) -> Vec<Vec<Segment>> {
        let s = self.side;
        let tol = 1e-9 * s;
        let mut out = vec![Vec::new(); self.squares.len()];
        for seg in c.segments() {
            let b = seg.bbox().inflate(tol);
            let (i0, i1) = ((b.min.x / s).floor() as i64, (b.max.x / s).floor() as i64);
            let (j0, j1) = ((b.min.y / s).floor() as i64, (b.max.y / s).floor() as i64);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let Some(k) = self.find(i, j) else { continue };
                    let q = &self.squares[k];
                    let Some(piece) = seg.clip_to_rect(&q.rect) else { continue };
                    let on_right = (piece.p().x - q.rect.max.x).abs() <= tol
                        && (piece.q().x - q.rect.max.x).abs() <= tol;
                    let on_top = (piece.p().y - q.rect.max.y).abs() <= tol
                        && (piece.q().y - q.rect.max.y).abs() <= tol;
                    if (on_right && self.find(q.i + 1, q.j).is_some())
                        || (on_top && self.find(q.i, q.j + 1).is_some())
                    {
                        continue;
                    }
                    out[k].push(piece);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn square_counts() {
        let omega = Domain2D::unit_square();
        assert_eq!(Checkerboard::new(&omega, 0.5).unwrap().len(), 4);
        assert_eq!(Checkerboard::new(&omega, 0.4).unwrap().len(), 9);
        assert_eq!(Checkerboard::new(&omega, 1.0).unwrap().len(), 1);
        assert!(Checkerboard::new(&omega, 0.0).is_err());
        assert!(Checkerboard::new(&omega, -1.0).is_err());
    }

    #[test]
    fn squares_cover_and_sum_to_area() {
        let omega = Domain2D::new(
            vec![
                Point::new(0.1, 0.0),
                Point::new(1.3, 0.2),
                Point::new(0.7, 1.1),
            ],
            vec![],
        )
        .unwrap();
        let board = Checkerboard::new(&omega, 0.25).unwrap();
        let total: f64 = board.squares().iter().map(|q| q.area_in_domain).sum();
        assert!((total - omega.area()).abs() < 1e-12);
    }

    #[test]
    fn half_open_ownership() {
        let omega = Domain2D::unit_square();
        let board = Checkerboard::new(&omega, 0.5).unwrap();
        let mid = Continuum::new(vec![Segment::from_coords(0.5, 0.0, 0.5, 1.0).unwrap()]).unwrap();
        let lengths = board.cell_lengths(&mid);
        let right: f64 = board
            .squares()
            .iter()
            .zip(&lengths)
            .filter(|(q, _)| q.i == 1)
            .map(|(_, l)| l)
            .sum();
        assert!((right - 1.0).abs() < 1e-12);
        assert!((lengths.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let boundary = omega.boundary();
        assert!((board.cell_lengths(&boundary).iter().sum::<f64>() - 4.0).abs() < 1e-12);
        for k in 0..board.len() {
            let a: f64 = board.clip_cell(k, &boundary).iter().map(Segment::length).sum();
            assert!((a - board.cell_lengths(&boundary)[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn locate_points() {
        let board = Checkerboard::new(&Domain2D::unit_square(), 0.5).unwrap();
        let k = board.locate(0.5, 0.5).unwrap();
        assert_eq!((board.squares()[k].i, board.squares()[k].j), (1, 1));
        let k = board.locate(1.0, 1.0).unwrap();
        assert_eq!((board.squares()[k].i, board.squares()[k].j), (1, 1));
        let k = board.locate(0.2, 0.7).unwrap();
        assert_eq!((board.squares()[k].i, board.squares()[k].j), (0, 1));
    }
}
