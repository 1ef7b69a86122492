//! First eigenvalue of `−div(A∇u)` by P1 finite elements on a structured mesh,
//! with Dirichlet conditions imposed by flagging nodes near the constraint set.

mod assemble;
mod mesh;
mod solve;
mod sparse;

pub use assemble::{assemble, assemble_free, System};
pub use mesh::{build_mesh, mark_dirichlet, Mesh, NodeFlag};
pub use solve::{rayleigh_quotient, smallest_eig, smallest_eig_free, EigResult, CG_TOL, MAX_OUTER, RESIDUAL_TOL};
pub use sparse::{pcg, Csr};

use crate::error::Result;
use crate::geometry::{Continuum, Domain2D};
use crate::tensor_field::{SpdTensor2, TensorField};

fn solve_marked(mesh: &Mesh, f: &TensorField, constrained: &[bool]) -> Result<EigResult> {
    let sys = assemble_free(mesh, f, constrained);
    let mut res = smallest_eig_free(&sys.k, &sys.m)?;
    let mut full = vec![0.0; mesh.node_count()];
    for (r, &node) in sys.free.iter().enumerate() {
        full[node] = res.eigenvector[r];
    }
    res.eigenvector = full;
    res.mesh_size = mesh.h();
    Ok(res)
}

/// `λ₁` of `−div(A∇u)` on `Ω ∖ Σ` with Dirichlet conditions on `∂Ω ∪ Σ`.
pub fn lambda1_full(omega: &Domain2D, f: &TensorField, sigma: Option<&Continuum>, n: usize) -> Result<EigResult> {
    let mesh = build_mesh(omega, n)?;
    let c = mark_dirichlet(&mesh, omega, sigma, true)?;
    solve_marked(&mesh, f, &c)
}

/// `λ₁` for the constant tensor `m` on `Ω` with Dirichlet conditions on `d`
/// only and natural conditions on the rest of `∂Ω`.
pub fn lambda1_partial(omega: &Domain2D, m: &SpdTensor2, d: &Continuum, n: usize) -> Result<EigResult> {
    let mesh = build_mesh(omega, n)?;
    let c = mark_dirichlet(&mesh, omega, Some(d), false)?;
    solve_marked(&mesh, &TensorField::constant(*m), &c)
}
