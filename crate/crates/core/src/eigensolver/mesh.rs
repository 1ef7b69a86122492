use crate::error::{Error, Result};
use crate::geometry::{Continuum, Domain2D, Point, Segment};

const NONE: u32 = u32::MAX;

/// Structured P1 triangulation: the cells of an `h = 1/n` lattice over the
/// bounding box whose centres lie in `Ω`, each split along its rising diagonal.
#[derive(Clone, Debug)]
pub struct Mesh {
    n: usize,
    h: f64,
    origin: Point,
    nx: usize,
    ny: usize,
    cell_active: Vec<bool>,
    /// Lattice index → mesh node index, `NONE` if the lattice point is unused.
    node_of: Vec<u32>,
    /// Mesh node index → lattice index.
    lattice_of: Vec<u32>,
    on_boundary: Vec<bool>,
}

/// Node status relative to the triangulated region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeFlag {
    Interior,
    OnBoundary,
}

impl Mesh {
    pub fn build(omega: &Domain2D, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::MeshTooCoarse {
                n,
                reason: "need at least two cells per unit length".into(),
            });
        }
        let h = 1.0 / n as f64;
        let b = omega.bbox();
        let origin = b.min;
        let cells = |len: f64| ((len / h) - 1e-9).ceil().max(1.0) as usize;
        let (nx, ny) = (cells(b.width()), cells(b.height()));
        let lattice_len = (nx + 1)
            .checked_mul(ny + 1)
            .filter(|&v| v < NONE as usize)
            .ok_or_else(|| Error::MeshTooCoarse {
                n,
                reason: "lattice too large".into(),
            })?;
        let mut cell_active = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = Point::new(origin.x + (i as f64 + 0.5) * h, origin.y + (j as f64 + 0.5) * h);
                cell_active[j * nx + i] = omega.contains_open(c);
            }
        }
        if !cell_active.iter().any(|&a| a) {
            return Err(Error::MeshTooCoarse {
                n,
                reason: "no lattice cell has its centre inside the domain".into(),
            });
        }
        let mut node_of = vec![NONE; lattice_len];
        let mut lattice_of = Vec::new();
        let mut on_boundary = Vec::new();
        let active = |i: isize, j: isize| {
            i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && cell_active[j as usize * nx + i as usize]
        };
        for j in 0..=ny {
            for i in 0..=nx {
                let around = [
                    active(i as isize - 1, j as isize - 1),
                    active(i as isize, j as isize - 1),
                    active(i as isize - 1, j as isize),
                    active(i as isize, j as isize),
                ];
                let used = around.iter().filter(|&&a| a).count();
                if used > 0 {
                    node_of[j * (nx + 1) + i] = lattice_of.len() as u32;
                    lattice_of.push((j * (nx + 1) + i) as u32);
                    on_boundary.push(used < 4);
                }
            }
        }
        Ok(Self {
            n,
            h,
            origin,
            nx,
            ny,
            cell_active,
            node_of,
            lattice_of,
            on_boundary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.lattice_of.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_active.iter().filter(|&&a| a).count()
    }

    pub fn triangle_count(&self) -> usize {
        2 * self.cell_count()
    }

    /// Area of the triangulated region.
    pub fn area(&self) -> f64 {
        self.cell_count() as f64 * self.h * self.h
    }

    pub fn flag(&self, node: usize) -> NodeFlag {
        if self.on_boundary[node] {
            NodeFlag::OnBoundary
        } else {
            NodeFlag::Interior
        }
    }

    fn lattice_ij(&self, node: usize) -> (usize, usize) {
        let l = self.lattice_of[node] as usize;
        (l % (self.nx + 1), l / (self.nx + 1))
    }

    pub fn position(&self, node: usize) -> Point {
        let (i, j) = self.lattice_ij(node);
        self.lattice_point(i, j)
    }

    fn lattice_point(&self, i: usize, j: usize) -> Point {
        Point::new(self.origin.x + i as f64 * self.h, self.origin.y + j as f64 * self.h)
    }

    /// Mesh node at lattice position `(i, j)`, if used.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize > self.nx || j as usize > self.ny {
            return None;
        }
        let v = self.node_of[j as usize * (self.nx + 1) + i as usize];
        (v != NONE).then_some(v as usize)
    }

    pub(crate) fn cell_is_active(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.cell_active[j as usize * self.nx + i as usize]
    }

    pub(crate) fn lattice_index(&self, node: usize) -> (isize, isize) {
        let (i, j) = self.lattice_ij(node);
        (i as isize, j as isize)
    }

    /// Lattice corners of the two triangles of cell `(i, j)`, counterclockwise.
    pub(crate) fn cell_triangles(i: isize, j: isize) -> [[(isize, isize); 3]; 2] {
        [
            [(i, j), (i + 1, j), (i + 1, j + 1)],
            [(i, j), (i + 1, j + 1), (i, j + 1)],
        ]
    }

    /// All triangles as node triples.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(self.triangle_count());
        for j in 0..self.ny as isize {
            for i in 0..self.nx as isize {
                if !self.cell_is_active(i, j) {
                    continue;
                }
                for t in Self::cell_triangles(i, j) {
                    out.push(t.map(|(a, b)| self.node_at(a, b).expect("corner of active cell")));
                }
            }
        }
        out
    }

    fn visit_near_segment(&self, s: &Segment, radius: f64, mut f: impl FnMut(usize)) {
        let h = self.h;
        let (p, q) = (s.p(), s.q());
        let d = q - p;
        let to_i = |x: f64| (x - self.origin.x) / h;
        let to_j = |y: f64| (y - self.origin.y) / h;
        let clamp_i = |v: f64, hi: usize| v.max(0.0).min(hi as f64);
        // Walk along the dominant axis so the work stays proportional to length / h.
        let x_major = d.x.abs() >= d.y.abs();
        let (lo, hi) = if x_major {
            (p.x.min(q.x) - radius, p.x.max(q.x) + radius)
        } else {
            (p.y.min(q.y) - radius, p.y.max(q.y) + radius)
        };
        let (a0, a1) = if x_major {
            (clamp_i(to_i(lo).ceil(), self.nx), clamp_i(to_i(hi).floor(), self.nx))
        } else {
            (clamp_i(to_j(lo).ceil(), self.ny), clamp_i(to_j(hi).floor(), self.ny))
        };
        if a0 > a1 {
            return;
        }
        for a in a0 as usize..=a1 as usize {
            let c = if x_major {
                self.origin.x + a as f64 * h
            } else {
                self.origin.y + a as f64 * h
            };
            // Range of the minor coordinate of the segment over [c - r, c + r].
            let (maj_p, maj_d, min_p, min_d) = if x_major {
                (p.x, d.x, p.y, d.y)
            } else {
                (p.y, d.y, p.x, d.x)
            };
            let (t0, t1) = if maj_d.abs() < 1e-300 {
                (0.0, 1.0)
            } else {
                let ta = (c - radius - maj_p) / maj_d;
                let tb = (c + radius - maj_p) / maj_d;
                (ta.min(tb).max(0.0), ta.max(tb).min(1.0))
            };
            if t0 > t1 {
                continue;
            }
            let (m0, m1) = (min_p + t0 * min_d, min_p + t1 * min_d);
            let (mlo, mhi) = (m0.min(m1) - radius, m0.max(m1) + radius);
            let (b0, b1) = if x_major {
                (clamp_i(to_j(mlo).ceil(), self.ny), clamp_i(to_j(mhi).floor(), self.ny))
            } else {
                (clamp_i(to_i(mlo).ceil(), self.nx), clamp_i(to_i(mhi).floor(), self.nx))
            };
            if b0 > b1 {
                continue;
            }
            for b in b0 as usize..=b1 as usize {
                let (i, j) = if x_major { (a, b) } else { (b, a) };
                if let Some(node) = self.node_at(i as isize, j as isize) {
                    if s.distance_to_point(self.lattice_point(i, j)) <= radius {
                        f(node);
                    }
                }
            }
        }
    }

    /// Marks nodes within `radius` of `s`; if none qualify, marks the node
    /// closest to the segment midpoint so that every segment leaves a trace.
    fn mark_segment(&self, s: &Segment, radius: f64, flags: &mut [bool]) {
        let mut hit = false;
        self.visit_near_segment(s, radius, |k| {
            flags[k] = true;
            hit = true;
        });
        if !hit {
            let c = s.midpoint();
            let i = ((c.x - self.origin.x) / self.h).round() as isize;
            let j = ((c.y - self.origin.y) / self.h).round() as isize;
            let mut best: Option<(f64, usize)> = None;
            for dj in -1..=1 {
                for di in -1..=1 {
                    if let Some(k) = self.node_at(i + di, j + dj) {
                        let dist = s.distance_to_point(self.position(k));
                        if best.is_none_or(|(bd, _)| dist < bd) {
                            best = Some((dist, k));
                        }
                    }
                }
            }
            if let Some((dist, k)) = best {
                if dist <= self.h / std::f64::consts::SQRT_2 + 1e-12 * self.h {
                    flags[k] = true;
                }
            }
        }
    }
}

pub fn build_mesh(omega: &Domain2D, n: usize) -> Result<Mesh> {
    Mesh::build(omega, n)
}

/// Dirichlet node set: nodes within `h/2` of `d`, plus, when the outer
/// boundary is included, nodes within `h/2` of `∂Ω`, outside `Ω`, or on the
/// edge of the triangulated region.
pub fn mark_dirichlet(mesh: &Mesh, omega: &Domain2D, d: Option<&Continuum>, include_outer: bool) -> Result<Vec<bool>> {
    let mut flags = vec![false; mesh.node_count()];
    let r = 0.5 * mesh.h * (1.0 + 1e-9);
    if let Some(d) = d {
        for s in d.segments() {
            mesh.mark_segment(s, r, &mut flags);
        }
    }
    if include_outer {
        for s in omega.boundary_segments() {
            mesh.visit_near_segment(&s, r, |k| flags[k] = true);
        }
        for (k, f) in flags.iter_mut().enumerate() {
            if mesh.on_boundary[k] || !omega.contains(mesh.position(k)) {
                *f = true;
            }
        }
    }
    if !flags.iter().any(|&f| f) {
        return Err(Error::EmptyDirichlet);
    }
    Ok(flags)
}
