use rayon::prelude::*;

use super::mesh::Mesh;
use super::sparse::Csr;
use crate::geometry::Point;
use crate::tensor_field::TensorField;

/// Stiffness and mass matrices restricted to the unconstrained nodes.
#[derive(Clone, Debug)]
pub struct System {
    pub k: Csr,
    pub m: Csr,
    /// Mesh node index of each row.
    pub free: Vec<usize>,
}

/// P1 element matrices of a counterclockwise triangle with constant `A`.
fn element(p: [Point; 3], a: &crate::tensor_field::SpdTensor2) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let grads: [Point; 3] = std::array::from_fn(|k| {
        let e = p[(k + 2) % 3] - p[(k + 1) % 3];
        Point::new(-e.y / area2, e.x / area2)
    });
    let area = 0.5 * area2;
    let mut ke = [[0.0; 3]; 3];
    let mut me = [[0.0; 3]; 3];
    for r in 0..3 {
        let ag = a.apply(grads[r]);
        for c in 0..3 {
            ke[r][c] = area * ag.dot(grads[c]);
            me[r][c] = area / 12.0 * if r == c { 2.0 } else { 1.0 };
        }
    }
    (ke, me)
}

/// Incident triangles of lattice node `(i, j)`: `(cell_i, cell_j, which)`.
fn incident(i: isize, j: isize) -> [(isize, isize, usize); 6] {
    [
        (i, j, 0),
        (i, j, 1),
        (i - 1, j, 0),
        (i, j - 1, 1),
        (i - 1, j - 1, 0),
        (i - 1, j - 1, 1),
    ]
}

/// Assembles `K` and `M` over the nodes with `constrained[k] == false`.
/// Rows are built independently, each from the triangles around its node.
pub fn assemble_free(mesh: &Mesh, f: &TensorField, constrained: &[bool]) -> System {
    let free: Vec<usize> = (0..mesh.node_count()).filter(|&k| !constrained[k]).collect();
    let mut local = vec![u32::MAX; mesh.node_count()];
    for (r, &k) in free.iter().enumerate() {
        local[k] = r as u32;
    }
    let rows: Vec<Vec<(u32, f64, f64)>> = free
        .par_iter()
        .map(|&node| {
            let (i, j) = mesh.lattice_index(node);
            let mut entries: Vec<(u32, f64, f64)> = Vec::with_capacity(7);
            for (ci, cj, which) in incident(i, j) {
                if !mesh.cell_is_active(ci, cj) {
                    continue;
                }
                let corners = Mesh::cell_triangles(ci, cj)[which];
                let nodes = corners.map(|(a, b)| mesh.node_at(a, b).expect("corner of active cell"));
                let pts = nodes.map(|k| mesh.position(k));
                let bary = Point::new(
                    (pts[0].x + pts[1].x + pts[2].x) / 3.0,
                    (pts[0].y + pts[1].y + pts[2].y) / 3.0,
                );
                let (ke, me) = element(pts, &f.eval(bary));
                let a = nodes.iter().position(|&k| k == node).expect("node is a corner");
                for b in 0..3 {
                    let col = local[nodes[b]];
                    if col == u32::MAX {
                        continue;
                    }
                    match entries.iter_mut().find(|e| e.0 == col) {
                        Some(e) => {
                            e.1 += ke[a][b];
                            e.2 += me[a][b];
                        }
                        None => entries.push((col, ke[a][b], me[a][b])),
                    }
                }
            }
            entries
        })
        .collect();
    let n = free.len();
    let (kr, mr): (Vec<Vec<(u32, f64)>>, Vec<Vec<(u32, f64)>>) = rows
        .into_iter()
        .map(|r| (r.iter().map(|e| (e.0, e.1)).collect(), r.iter().map(|e| (e.0, e.2)).collect()))
        .unzip();
    System {
        k: Csr::from_rows(n, kr),
        m: Csr::from_rows(n, mr),
        free,
    }
}

/// Full stiffness and mass matrices over all mesh nodes.
pub fn assemble(mesh: &Mesh, f: &TensorField) -> (Csr, Csr) {
    let s = assemble_free(mesh, f, &vec![false; mesh.node_count()]);
    (s.k, s.m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain2D;
    use crate::tensor_field::SpdTensor2;

    #[test]
    fn reference_element() {
        let p = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let (k, m) = element(p, &SpdTensor2::IDENTITY);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((k[r][c] - expect[r][c]).abs() < 1e-15);
            }
        }
        assert!((m[0][0] - 1.0 / 12.0).abs() < 1e-15);
        assert!((m[0][1] - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn five_point_stencil_and_symmetry() {
        let sq = Domain2D::unit_square();
        let mesh = Mesh::build(&sq, 8).unwrap();
        let (k, m) = assemble(&mesh, &TensorField::identity());
        assert!(k.is_symmetric(1e-14) && m.is_symmetric(1e-14));
        let centre = mesh.node_at(4, 4).unwrap();
        let row: Vec<(usize, f64)> = k.row(centre).filter(|e| e.1.abs() > 1e-14).collect();
        assert_eq!(row.len(), 5);
        for (c, v) in row {
            if c == centre {
                assert!((v - 4.0).abs() < 1e-12);
            } else {
                assert!((v + 1.0).abs() < 1e-12);
            }
        }
        let mass: f64 = (0..m.dim()).flat_map(|r| m.row(r).map(|e| e.1).collect::<Vec<_>>()).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        // Constants are in the kernel of K.
        let ones = vec![1.0; k.dim()];
        assert!(k.mul(&ones).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_in_field() {
        let sq = Domain2D::unit_square();
        let mesh = Mesh::build(&sq, 6).unwrap();
        let fa = TensorField::constant(SpdTensor2::new(2.0, 0.3, 1.0).unwrap());
        let fb = TensorField::constant(SpdTensor2::new(6.0, 0.9, 3.0).unwrap());
        let (ka, ma) = assemble(&mesh, &fa);
        let (kb, mb) = assemble(&mesh, &fb);
        assert_eq!(ma, mb);
        for r in 0..ka.dim() {
            for (c, v) in ka.row(r) {
                assert!((kb.get(r, c) - 3.0 * v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restricted_rows() {
        let sq = Domain2D::unit_square();
        let mesh = Mesh::build(&sq, 4).unwrap();
        let mut c = vec![false; mesh.node_count()];
        c[0] = true;
        let s = assemble_free(&mesh, &TensorField::identity(), &c);
        assert_eq!(s.k.dim(), mesh.node_count() - 1);
        assert!(!s.free.contains(&0));
    }
}
