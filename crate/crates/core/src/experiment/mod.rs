//! Config-driven sweeps: eigenvalue asymptotics, length density and
//! orientation statistics, bound audits and solver convergence.

mod audit;
mod config;
mod io;
mod sweeps;

pub use audit::{random_comb_cell, random_spd, random_tree, run_bounds_audit, AuditRow, CombCell};
pub use config::{
    AuditSpec, ConfigFile, Entries, ExperimentConfig, ExperimentKind, FieldSpec, MeshSpec, Tolerances,
};
pub use io::{read_domain, read_segments, render_svg, render_svg_string, write_nodal, write_rows, write_segments};
pub use sweeps::{
    run_asymptotics, run_density_orientation, run_solver_convergence, AsymptoticsRow, ConvergenceRow, DensityRow,
    FeasibilityRow,
};

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::Result;
use crate::tile_builder::{sigma_ell_params, tile_constant, PatchworkPlan, TileRecipe};

/// One named invariant check of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Files written and checks evaluated by a run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Mesh size derived from the comb geometry of a plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeshChoice {
    /// Thinnest comb gap `s ε_j / m` over all squares.
    pub min_gap: f64,
    pub n_required: usize,
    pub n: usize,
    /// Mesh cells across the thinnest gap at the chosen `n`.
    pub cells_per_gap: f64,
    pub under_resolved: bool,
}

/// `n = ⌈cells_per_gap / min gap⌉`, capped at `max_n`.
pub fn mesh_for_plan(plan: &PatchworkPlan, cells_per_gap: f64, max_n: usize) -> Result<MeshChoice> {
    let s = plan.board().side();
    let mut min_gap = f64::INFINITY;
    for (k, ell) in plan.square_lengths().iter().enumerate() {
        if *ell <= 0.0 {
            continue;
        }
        let nu = &plan.fitted.nus()[k];
        let m = &plan.frozen[k];
        let (eps, tiles) = sigma_ell_params(ell / s, tile_constant(nu, m));
        let recipe = TileRecipe::new(nu.clone(), *m, eps)?;
        let eps_min = recipe.spacings().into_iter().fold(f64::INFINITY, f64::min);
        min_gap = min_gap.min(s * eps_min.min(1.0) / tiles as f64);
    }
    let n_required = (cells_per_gap / min_gap * (1.0 - 1e-12)).ceil().max(2.0) as usize;
    let n = n_required.min(max_n);
    Ok(MeshChoice {
        min_gap,
        n_required,
        n,
        cells_per_gap: min_gap * n as f64,
        under_resolved: n < n_required,
    })
}

/// Runs the experiment named by the config and writes its outputs under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    std::fs::create_dir_all(&cfg.out)?;
    match cfg.kind {
        ExperimentKind::Asymptotics => run_asymptotics(cfg),
        ExperimentKind::Density | ExperimentKind::Orientation => run_density_orientation(cfg),
        ExperimentKind::BoundsAudit => run_bounds_audit(cfg),
        ExperimentKind::SolverConvergence => run_solver_convergence(cfg),
    }
}

/// Validates the config and the mesh feasibility of every row without solving.
pub fn check(cfg: &ExperimentConfig) -> Result<(Vec<FeasibilityRow>, Vec<Check>)> {
    sweeps::feasibility(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain2D;
    use crate::tensor_field::{SpdTensor2, TensorField};
    use crate::tile_builder::optimal_plan;

    #[test]
    fn mesh_rule_follows_gap() {
        let sq = Domain2D::unit_square();
        let f = TensorField::constant(SpdTensor2::diag(1.0, 4.0).unwrap());
        let plan = optimal_plan(&f, &sq, 1.0, 40.0).unwrap();
        let choice = mesh_for_plan(&plan, 8.0, 10_000).unwrap();
        // ℓ = 40: ε = 40^{-2/3}, m = ⌈2·40^{1/3}⌉ = 7, ε_j = 2ε.
        let eps = 40f64.powf(-2.0 / 3.0);
        assert!((choice.min_gap - 2.0 * eps / 7.0).abs() < 1e-12);
        assert!(choice.cells_per_gap >= 8.0 && !choice.under_resolved);
        let capped = mesh_for_plan(&plan, 8.0, 50).unwrap();
        assert!(capped.under_resolved && capped.n == 50 && capped.cells_per_gap < 8.0);
    }
}
