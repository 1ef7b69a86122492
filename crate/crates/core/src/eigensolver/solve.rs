use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::sparse::{dot, pcg, Csr};
use crate::error::{Error, Result};

/// Relative eigen-residual target.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Relative residual of the inner conjugate-gradient solves.
pub const CG_TOL: f64 = 1e-10;
pub const MAX_OUTER: usize = 500;

/// Components up to this size are solved densely.
const DENSE_MAX: usize = 64;
const BLOCK: usize = 4;
/// Loose tolerance used to rank components before refining the best ones.
const SCREEN_TOL: f64 = 1e-4;
/// Components whose screened value is within this factor of the best are refined.
const REFINE_BAND: f64 = 1.05;

/// First eigenpair of a constrained pencil `(K, M)`.
#[derive(Clone, Debug, Serialize)]
pub struct EigResult {
    pub lambda1: f64,
    /// Values on all rows of the original system (zero on constrained rows),
    /// normalized so that `vᵀ M v = 1` and with nonnegative mean.
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
    /// `‖Kv − λMv‖ / (λ ‖Mv‖)`.
    pub residual: f64,
    pub mesh_size: f64,
    pub iterations: usize,
    pub components: usize,
}

struct Pair {
    lambda: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn relative_residual(k: &Csr, m: &Csr, v: &[f64], lambda: f64) -> f64 {
    let kv = k.mul(v);
    let mv = m.mul(v);
    let r: f64 = kv.iter().zip(&mv).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    r / (lambda.abs() * dot(&mv, &mv).sqrt())
}

fn dense(a: &Csr) -> DMatrix<f64> {
    let n = a.dim();
    let mut d = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            d[(r, c)] = v;
        }
    }
    d
}

/// Smallest eigenpairs of the dense pencil `(A, B)`, ascending.
fn dense_pencil(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let bs = 0.5 * (b + b.transpose());
    let chol = bs.cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let c = &linv * (0.5 * (a + a.transpose())) * linv.transpose();
    let eig = SymmetricEigen::new(0.5 * (&c + c.transpose()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let w = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Some((vals, linv.transpose() * w))
}

fn solve_dense(k: &Csr, m: &Csr) -> Result<Pair> {
    let (vals, vecs) = dense_pencil(&dense(k), &dense(m)).ok_or(Error::SingularSystem)?;
    let lambda = vals[0];
    if !(lambda > 0.0) {
        return Err(Error::SingularSystem);
    }
    let vector: Vec<f64> = vecs.column(0).iter().copied().collect();
    Ok(Pair {
        residual: relative_residual(k, m, &vector, lambda),
        lambda,
        vector,
        iterations: 1,
    })
}

/// Block inverse iteration with Rayleigh–Ritz, resumable across tolerances.
struct BlockIteration<'a> {
    k: &'a Csr,
    m: &'a Csr,
    inv_diag: Vec<f64>,
    x: Vec<Vec<f64>>,
    theta: Vec<f64>,
    residual: f64,
    iterations: usize,
}

impl<'a> BlockIteration<'a> {
    fn new(k: &'a Csr, m: &'a Csr, seed: u64) -> Result<Self> {
        let n = k.dim();
        let p = BLOCK.min(n);
        let inv_diag = k
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { f64::NAN })
            .collect::<Vec<_>>();
        if inv_diag.iter().any(|d| d.is_nan()) {
            return Err(Error::SingularSystem);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..p)
            .map(|c| {
                if c == 0 {
                    vec![1.0; n]
                } else {
                    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
                }
            })
            .collect();
        Ok(Self {
            k,
            m,
            inv_diag,
            x,
            theta: vec![0.0; p],
            residual: f64::INFINITY,
            iterations: 0,
        })
    }

    fn step(&mut self) -> Result<()> {
        let (k, m) = (self.k, self.m);
        let n = k.dim();
        let max_cg = (20 * n).max(200);
        let y: Vec<Vec<f64>> = self
            .x
            .par_iter()
            .zip(&self.theta)
            .map(|(x, &th)| {
                let b = m.mul(x);
                let mut y: Vec<f64> = if th > 0.0 { x.iter().map(|v| v / th).collect() } else { vec![0.0; n] };
                pcg(k, &b, &mut y, &self.inv_diag, CG_TOL, max_cg)?;
                let norm = dot(&y, &y).sqrt();
                Ok(y.into_iter().map(|v| v / norm).collect())
            })
            .collect::<Result<_>>()?;
        let ky: Vec<Vec<f64>> = y.par_iter().map(|v| k.mul(v)).collect();
        let my: Vec<Vec<f64>> = y.par_iter().map(|v| m.mul(v)).collect();
        let p = y.len();
        let kr = DMatrix::from_fn(p, p, |r, c| dot(&y[r], &ky[c]));
        let mr = DMatrix::from_fn(p, p, |r, c| dot(&y[r], &my[c]));
        let (theta, v) = match dense_pencil(&kr, &mr) {
            Some(e) => e,
            // Block collapsed numerically: continue with the leading vector only.
            None => {
                let t = kr[(0, 0)] / mr[(0, 0)];
                (vec![t], DMatrix::from_element(1, 1, 1.0 / mr[(0, 0)].sqrt()))
            }
        };
        let combine = |cols: &[Vec<f64>], j: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (r, col) in cols.iter().enumerate().take(v.nrows()) {
                let w = v[(r, j)];
                for (o, c) in out.iter_mut().zip(col) {
                    *o += w * c;
                }
            }
            out
        };
        let q = theta.len();
        self.x = (0..q).map(|j| combine(&y, j)).collect();
        let kx = combine(&ky, 0);
        let mx = combine(&my, 0);
        let lambda = theta[0];
        let r: f64 = kx.iter().zip(&mx).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        self.residual = r / (lambda.abs() * dot(&mx, &mx).sqrt());
        self.theta = theta;
        self.iterations += 1;
        if !(lambda > 0.0) {
            return Err(Error::SingularSystem);
        }
        Ok(())
    }

    fn run(&mut self, tol: f64, max_iter: usize) -> Result<()> {
        while self.residual > tol {
            if self.iterations >= max_iter {
                return Err(Error::NoConvergence {
                    iterations: self.iterations,
                    residual: self.residual,
                    lambda: self.theta[0],
                    last_iterate: self.x[0].clone(),
                });
            }
            self.step()?;
        }
        Ok(())
    }

    fn pair(&self) -> Pair {
        Pair {
            lambda: self.theta[0],
            vector: self.x[0].clone(),
            residual: self.residual,
            iterations: self.iterations,
        }
    }
}

enum Component<'a> {
    Done(Pair),
    Iterating(Box<BlockIteration<'a>>),
}

impl Component<'_> {
    fn lambda(&self) -> f64 {
        match self {
            Component::Done(p) => p.lambda,
            Component::Iterating(b) => b.theta[0],
        }
    }
}

/// Smallest eigenpair of a symmetric definite pencil on a matrix without constraints.
///
/// The sparsity graph is split into connected components, which decouple
/// exactly; all are screened at a loose tolerance and only those near the
/// minimum are driven to [`RESIDUAL_TOL`].
pub fn smallest_eig_free(k: &Csr, m: &Csr) -> Result<EigResult> {
    let n = k.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("no free degrees of freedom".into()));
    }
    let comps = k.components();
    let mut local = vec![u32::MAX; n];
    let subs: Vec<(Csr, Csr)> = comps
        .iter()
        .map(|c| {
            for (r, &g) in c.iter().enumerate() {
                local[g] = r as u32;
            }
            let pair = (k.submatrix(c, &local), m.submatrix(c, &local));
            for &g in c {
                local[g] = u32::MAX;
            }
            pair
        })
        .collect();
    let mut states: Vec<Component> = subs
        .par_iter()
        .enumerate()
        .map(|(idx, (kc, mc))| {
            if kc.dim() <= DENSE_MAX {
                return Ok(Component::Done(solve_dense(kc, mc)?));
            }
            let mut b = BlockIteration::new(kc, mc, 0x5eed ^ idx as u64)?;
            b.run(SCREEN_TOL, MAX_OUTER)?;
            Ok(Component::Iterating(Box::new(b)))
        })
        .collect::<Result<_>>()?;
    let best = states.iter().map(Component::lambda).fold(f64::INFINITY, f64::min);
    states.par_iter_mut().try_for_each(|s| -> Result<()> {
        if let Component::Iterating(b) = s {
            if b.theta[0] <= REFINE_BAND * best {
                b.run(RESIDUAL_TOL, MAX_OUTER)?;
            }
        }
        Ok(())
    })?;
    let (win, pair) = states
        .iter()
        .enumerate()
        .filter(|(_, s)| match s {
            Component::Done(_) => true,
            Component::Iterating(b) => b.residual <= RESIDUAL_TOL,
        })
        .map(|(i, s)| {
            (
                i,
                match s {
                    Component::Done(p) => Pair {
                        lambda: p.lambda,
                        vector: p.vector.clone(),
                        residual: p.residual,
                        iterations: p.iterations,
                    },
                    Component::Iterating(b) => b.pair(),
                },
            )
        })
        .min_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda))
        .expect("at least one component is refined");
    let mut v = vec![0.0; n];
    for (&g, &x) in comps[win].iter().zip(&pair.vector) {
        v[g] = x;
    }
    let mv = m.mul(&v);
    let norm = dot(&v, &mv).sqrt();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= sign / norm);
    let (kc, mc) = &subs[win];
    let residual = {
        let local_v: Vec<f64> = comps[win].iter().map(|&g| v[g]).collect();
        relative_residual(kc, mc, &local_v, pair.lambda)
    };
    Ok(EigResult {
        lambda1: pair.lambda,
        eigenvector: v,
        residual,
        mesh_size: f64::NAN,
        iterations: pair.iterations,
        components: comps.len(),
    })
}

/// Smallest eigenpair of `(K, M)` with the rows and columns of `constrained`
/// removed (homogeneous Dirichlet values there).
pub fn smallest_eig(k: &Csr, m: &Csr, constrained: &[bool]) -> Result<EigResult> {
    let keep: Vec<usize> = (0..k.dim()).filter(|&r| !constrained[r]).collect();
    let mut local = vec![u32::MAX; k.dim()];
    for (r, &g) in keep.iter().enumerate() {
        local[g] = r as u32;
    }
    let mut res = smallest_eig_free(&k.submatrix(&keep, &local), &m.submatrix(&keep, &local))?;
    let mut full = vec![0.0; k.dim()];
    for (r, &g) in keep.iter().enumerate() {
        full[g] = res.eigenvector[r];
    }
    res.eigenvector = full;
    Ok(res)
}

/// Rayleigh quotient `vᵀKv / vᵀMv`.
pub fn rayleigh_quotient(k: &Csr, m: &Csr, v: &[f64]) -> f64 {
    dot(v, &k.mul(v)) / dot(v, &m.mul(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let k = Csr::from_dense(&[vec![2.0, 0.0], vec![0.0, 5.0]]);
        let r = smallest_eig(&k, &Csr::identity(2), &[false, false]).unwrap();
        assert!((r.lambda1 - 2.0).abs() < 1e-12);
        assert_eq!(r.components, 2);
        assert!((r.eigenvector[0].abs() - 1.0).abs() < 1e-12);
    }

    fn laplace_1d(n: usize) -> (Csr, Csr) {
        let h = 1.0 / (n + 1) as f64;
        let rows_k = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 2.0 / h)];
                if i > 0 {
                    r.push((i as u32 - 1, -1.0 / h));
                }
                if i + 1 < n {
                    r.push((i as u32 + 1, -1.0 / h));
                }
                r
            })
            .collect();
        let rows_m = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 4.0 * h / 6.0)];
                if i > 0 {
                    r.push((i as u32 - 1, h / 6.0));
                }
                if i + 1 < n {
                    r.push((i as u32 + 1, h / 6.0));
                }
                r
            })
            .collect();
        (Csr::from_rows(n, rows_k), Csr::from_rows(n, rows_m))
    }

    #[test]
    fn iterative_matches_dense() {
        let (k, m) = laplace_1d(300);
        let r = smallest_eig_free(&k, &m).unwrap();
        assert!(r.residual <= RESIDUAL_TOL);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((r.lambda1 / pi2 - 1.0).abs() < 1e-4);
        let rq = rayleigh_quotient(&k, &m, &r.eigenvector);
        assert!((rq / r.lambda1 - 1.0).abs() < 1e-10);
        assert!(r.eigenvector.iter().all(|&v| v >= -1e-12));
        let (ks, ms) = laplace_1d(40);
        let d = solve_dense(&ks, &ms).unwrap();
        let mut b = BlockIteration::new(&ks, &ms, 1).unwrap();
        b.run(RESIDUAL_TOL, MAX_OUTER).unwrap();
        assert!((b.theta[0] / d.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn picks_smallest_component() {
        let (k1, m1) = laplace_1d(100);
        let (k2, m2) = laplace_1d(70);
        let join = |a: &Csr, b: &Csr| {
            let n = a.dim() + b.dim();
            let rows = (0..n)
                .map(|r| {
                    if r < a.dim() {
                        a.row(r).map(|(c, v)| (c as u32, v)).collect()
                    } else {
                        b.row(r - a.dim()).map(|(c, v)| ((c + a.dim()) as u32, 2.0 * v)).collect()
                    }
                })
                .collect();
            Csr::from_rows(n, rows)
        };
        let k = join(&k1, &k2);
        let m = join(&m1, &m2);
        let r = smallest_eig_free(&k, &m).unwrap();
        assert_eq!(r.components, 2);
        let single = smallest_eig_free(&k1, &m1).unwrap();
        assert!((r.lambda1 / single.lambda1 - 1.0).abs() < 1e-9);
        assert!(r.eigenvector[100..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_reported() {
        let k = Csr::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(smallest_eig(&k, &Csr::identity(2), &[false, false]).is_err());
    }

    #[test]
    fn no_convergence_carries_iterate() {
        let (k, m) = laplace_1d(200);
        let mut b = BlockIteration::new(&k, &m, 3).unwrap();
        match b.run(1e-30, 2) {
            Err(Error::NoConvergence { iterations, last_iterate, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(last_iterate.len(), 200);
            }
            other => panic!("unexpected {:?}", other.err()),
        }
    }
}
