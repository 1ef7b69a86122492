use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows below this size are processed sequentially.
const PAR_THRESHOLD: usize = 16_384;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    /// From per-row `(column, value)` lists; columns within a row must be distinct.
    pub fn from_rows(n: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows = a
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, &v)| (c as u32, v))
                    .collect()
            })
            .collect();
        Self::from_rows(a.len(), rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|k| vec![(k as u32, 1.0)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|e| e.0 == c).map_or(0.0, |e| e.1)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        let mut s = 0.0;
        for k in a..b {
            s += self.vals[k] * x[self.cols[k] as usize];
        }
        s
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        if self.n >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(r, v)| *v = self.row_dot(r, x));
        } else {
            for (r, v) in y.iter_mut().enumerate() {
                *v = self.row_dot(r, x);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol * v.abs().max(1.0)))
    }

    /// Principal submatrix on `keep` (global indices, ascending), with the
    /// global → local map returned alongside.
    pub fn submatrix(&self, keep: &[usize], local: &[u32]) -> Csr {
        let rows = keep
            .iter()
            .map(|&r| {
                self.row(r)
                    .filter(|&(c, _)| local[c] != u32::MAX)
                    .map(|(c, v)| (local[c], v))
                    .collect()
            })
            .collect();
        Csr::from_rows(keep.len(), rows)
    }

    /// Connected components of the sparsity graph, as sorted index lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            label[s] = id;
            stack.push(s);
            while let Some(r) = stack.pop() {
                for (c, v) in self.row(r) {
                    if v != 0.0 && label[c] == usize::MAX {
                        label[c] = id;
                        members.push(c);
                        stack.push(c);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() >= PAR_THRESHOLD {
        a.par_iter().zip(b).map(|(x, y)| x * y).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

/// Jacobi-preconditioned conjugate gradients for `K y = b`, starting at `y`.
/// Returns the iteration count.
pub fn pcg(k: &Csr, b: &[f64], y: &mut [f64], inv_diag: &[f64], rel_tol: f64, max_iter: usize) -> Result<usize> {
    let n = k.dim();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = k.mul(y);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            return Ok(it);
        }
        k.mul_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            return Err(Error::SingularSystem);
        }
        let alpha = rz / pkp;
        for i in 0..n {
            y[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if dot(&r, &r).sqrt() <= rel_tol * bnorm {
        Ok(max_iter)
    } else {
        Err(Error::SingularSystem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_spd() {
        let k = Csr::from_dense(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let b = vec![1.0, 2.0, 3.0];
        let mut y = vec![0.0; 3];
        let inv: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
        pcg(&k, &b, &mut y, &inv, 1e-14, 100).unwrap();
        let r = k.mul(&y);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_detected() {
        let k = Csr::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let mut y = vec![0.0; 2];
        let r = pcg(&k, &[1.0, 0.0], &mut y, &[1.0, 1.0], 1e-12, 50);
        assert!(r.is_err());
    }

    #[test]
    fn components_split() {
        let k = Csr::from_dense(&[
            vec![1.0, 0.5, 0.0, 0.0],
            vec![0.5, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 2.0],
        ]);
        assert_eq!(k.components(), vec![vec![0, 1], vec![2], vec![3]]);
        let local = vec![0u32, u32::MAX, 1, u32::MAX];
        let s = k.submatrix(&[0, 2], &local);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
    }
}
