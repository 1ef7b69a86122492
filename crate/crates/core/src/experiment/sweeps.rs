use rayon::prelude::*;
use serde::Serialize;

use super::io::{render_svg, write_nodal, write_rows, write_segments};
use super::{mesh_for_plan, Check, ExperimentConfig, ExperimentKind, MeshChoice, RunReport};
use crate::eigensolver::{build_mesh, lambda1_full, mark_dirichlet, assemble_free, smallest_eig_free, RESIDUAL_TOL};
use crate::error::Result;
use crate::tile_builder::{build_patchwork_detailed, plan_with_orientation, Patchwork, PatchworkPlan};
use crate::varifold::{optimality_deviation, FInfinity, DEFAULT_QUAD_CELLS};

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsRow {
    pub l: f64,
    pub h1: Option<f64>,
    pub lambda1: Option<f64>,
    pub l2_over_lambda: Option<f64>,
    pub f_inf_min: f64,
    pub ratio: Option<f64>,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub cells_per_gap: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub effective_length: Option<f64>,
    pub renormalized: Option<bool>,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityRow {
    pub l: f64,
    pub square: usize,
    pub i: i64,
    pub j: i64,
    pub length_share: f64,
    pub target_share: f64,
    pub share_deviation: f64,
    /// Empty where the field is isotropic.
    pub angle_tv: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub lambda1: f64,
    pub residual: f64,
    pub iterations: usize,
    pub relative_change: Option<f64>,
}

/// Output of `check`: what a run would build, per length.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityRow {
    pub l: f64,
    pub h1: Option<f64>,
    pub min_gap: Option<f64>,
    pub n_required: Option<usize>,
    pub n: Option<usize>,
    pub under_resolved: Option<bool>,
    pub status: String,
}

fn plan_for(cfg: &ExperimentConfig, l: f64) -> Result<PatchworkPlan> {
    plan_with_orientation(&cfg.field, &cfg.domain, cfg.s, l, cfg.orientation)
}

/// Patchwork at budget `l` together with the mesh rule for its comb.
fn build_row_geometry(cfg: &ExperimentConfig, l: f64) -> Result<(Patchwork, MeshChoice)> {
    let plan = plan_for(cfg, l)?;
    let pw = build_patchwork_detailed(&plan, &cfg.domain)?;
    let mesh = mesh_for_plan(&plan.with_length(pw.effective_length), cfg.mesh.cells_per_gap, cfg.mesh.max_n)?;
    Ok((pw, mesh))
}

fn tag(l: f64) -> String {
    let t = format!("{l}");
    t.replace('.', "p")
}

pub fn run_asymptotics(cfg: &ExperimentConfig) -> Result<RunReport> {
    let f_min = FInfinity::new(&cfg.field, &cfg.domain, DEFAULT_QUAD_CELLS)?.min_energy();
    let rows: Vec<(AsymptoticsRow, Option<Patchwork>)> = cfg
        .lengths
        .par_iter()
        .map(|&l| {
            let blank = AsymptoticsRow {
                l,
                h1: None,
                lambda1: None,
                l2_over_lambda: None,
                f_inf_min: f_min,
                ratio: None,
                n: None,
                h: None,
                cells_per_gap: None,
                residual: None,
                iterations: None,
                effective_length: None,
                renormalized: None,
                status: String::new(),
            };
            let (pw, mesh) = match build_row_geometry(cfg, l) {
                Ok(g) => g,
                Err(e) => {
                    return (
                        AsymptoticsRow {
                            status: format!("error: {e}"),
                            ..blank
                        },
                        None,
                    )
                }
            };
            let geometry = AsymptoticsRow {
                h1: Some(pw.sigma.total_length()),
                n: Some(mesh.n),
                h: Some(1.0 / mesh.n as f64),
                cells_per_gap: Some(mesh.cells_per_gap),
                effective_length: Some(pw.effective_length),
                renormalized: Some(pw.renormalized),
                ..blank
            };
            let row = match lambda1_full(&cfg.domain, &cfg.field, Some(&pw.sigma), mesh.n) {
                Ok(r) => AsymptoticsRow {
                    lambda1: Some(r.lambda1),
                    l2_over_lambda: Some(l * l / r.lambda1),
                    ratio: Some(l * l / r.lambda1 / f_min),
                    residual: Some(r.residual),
                    iterations: Some(r.iterations),
                    status: if mesh.under_resolved { "under-resolved" } else { "ok" }.into(),
                    ..geometry
                },
                Err(e) => AsymptoticsRow {
                    status: format!("error: {e}"),
                    ..geometry
                },
            };
            (row, Some(pw))
        })
        .collect();
    let mut outputs = Vec::new();
    for (row, pw) in &rows {
        if let Some(pw) = pw {
            let base = cfg.out.join(format!("sigma_L{}", tag(row.l)));
            let (csv, svg) = (base.with_extension("csv"), base.with_extension("svg"));
            write_segments(&pw.sigma, &csv)?;
            render_svg(&pw.sigma, &cfg.domain, &svg)?;
            outputs.extend([csv, svg]);
        }
    }
    let table: Vec<AsymptoticsRow> = rows.into_iter().map(|r| r.0).collect();
    let path = cfg.out.join("asymptotics.csv");
    write_rows(&table, &path)?;
    outputs.insert(0, path);

    let errors: Vec<String> = table
        .iter()
        .filter(|r| r.status.starts_with("error"))
        .map(|r| format!("L={}: {}", r.l, r.status))
        .collect();
    let worst = table.iter().filter_map(|r| r.residual).fold(0.0, f64::max);
    let under: Vec<f64> = table.iter().filter(|r| r.status == "under-resolved").map(|r| r.l).collect();
    let checks = vec![
        Check::new("rows solved", errors.is_empty(), if errors.is_empty() { "all rows".into() } else { errors.join("; ") }),
        Check::new(
            "solver residual",
            worst <= RESIDUAL_TOL,
            format!("max residual {worst:.2e} (tolerance {RESIDUAL_TOL:.0e})"),
        ),
        Check::new(
            "mesh rule",
            under.is_empty(),
            format!("{} cells per gap required; under-resolved lengths {under:?}", cfg.mesh.cells_per_gap),
        ),
    ];
    Ok(RunReport {
        kind: cfg.kind,
        outputs,
        checks,
    })
}

pub fn run_density_orientation(cfg: &ExperimentConfig) -> Result<RunReport> {
    let fin = FInfinity::new(&cfg.field, &cfg.domain, DEFAULT_QUAD_CELLS)?;
    let per_length: Vec<(f64, Patchwork, Vec<DensityRow>)> = cfg
        .lengths
        .par_iter()
        .map(|&l| {
            let plan = plan_for(cfg, l)?;
            let pw = build_patchwork_detailed(&plan, &cfg.domain)?;
            let rows = optimality_deviation(&pw.sigma, &cfg.field, plan.board(), &cfg.domain, &fin)
                .into_iter()
                .map(|d| DensityRow {
                    l,
                    square: d.square,
                    i: d.i,
                    j: d.j,
                    length_share: d.length_share,
                    target_share: d.target_share,
                    share_deviation: d.length_share - d.target_share,
                    angle_tv: d.angle_tv,
                })
                .collect();
            Ok((l, pw, rows))
        })
        .collect::<Result<_>>()?;
    let mut outputs = Vec::new();
    let path = cfg.out.join(format!("{}.csv", cfg.kind));
    let table: Vec<DensityRow> = per_length.iter().flat_map(|p| p.2.iter().cloned()).collect();
    write_rows(&table, &path)?;
    outputs.push(path);
    let (l_max, pw_max, rows_max) = per_length.last().expect("lengths are non-empty");
    let svg = cfg.out.join(format!("sigma_L{}.svg", tag(*l_max)));
    render_svg(&pw_max.sigma, &cfg.domain, &svg)?;
    outputs.push(svg);

    let sums_ok = per_length.iter().all(|(_, _, r)| {
        let t: f64 = r.iter().map(|d| d.length_share).sum();
        (t - 1.0).abs() <= 1e-6
    });
    let max_dev = rows_max.iter().map(|d| d.share_deviation.abs()).fold(0.0, f64::max);
    let tvs: Vec<f64> = rows_max.iter().filter_map(|d| d.angle_tv).collect();
    let mut checks = vec![Check::new("shares sum to one", sums_ok, "every length, within 1e-6")];
    checks.push(Check::new(
        "length density",
        max_dev <= cfg.tolerances.share,
        format!("max |share - target| = {max_dev:.4} at L={l_max} (tolerance {})", cfg.tolerances.share),
    ));
    if cfg.kind == ExperimentKind::Orientation {
        let detail = if tvs.is_empty() {
            "field is isotropic: not applicable".to_string()
        } else {
            let m = tvs.iter().copied().fold(0.0, f64::max);
            format!("max angle TV = {m:.4} at L={l_max} (tolerance {})", cfg.tolerances.angle_tv)
        };
        let ok = tvs.iter().all(|&t| t <= cfg.tolerances.angle_tv);
        checks.push(Check::new("normal orientation", ok, detail));
    }
    Ok(RunReport {
        kind: cfg.kind,
        outputs,
        checks,
    })
}

pub fn run_solver_convergence(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cfg.mesh.n.len());
    let mut outputs = Vec::new();
    for &n in &cfg.mesh.n {
        let mesh = build_mesh(&cfg.domain, n)?;
        let constrained = mark_dirichlet(&mesh, &cfg.domain, None, true)?;
        let sys = assemble_free(&mesh, &cfg.field, &constrained);
        let r = smallest_eig_free(&sys.k, &sys.m)?;
        if cfg.dump_eigenvector {
            let mut full = vec![0.0; mesh.node_count()];
            for (k, &node) in sys.free.iter().enumerate() {
                full[node] = r.eigenvector[k];
            }
            let p = cfg.out.join(format!("eigenvector_n{n}.csv"));
            write_nodal(&mesh, &full, &p)?;
            outputs.push(p);
        }
        let relative_change = rows.last().map(|p| (r.lambda1 - p.lambda1).abs() / p.lambda1);
        rows.push(ConvergenceRow {
            n,
            h: mesh.h(),
            lambda1: r.lambda1,
            residual: r.residual,
            iterations: r.iterations,
            relative_change,
        });
    }
    let path = cfg.out.join("solver_convergence.csv");
    write_rows(&rows, &path)?;
    outputs.insert(0, path);
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(RunReport {
        kind: cfg.kind,
        outputs,
        checks: vec![Check::new(
            "solver residual",
            worst <= RESIDUAL_TOL,
            format!("max residual {worst:.2e} (tolerance {RESIDUAL_TOL:.0e})"),
        )],
    })
}

pub(super) fn feasibility(cfg: &ExperimentConfig) -> Result<(Vec<FeasibilityRow>, Vec<Check>)> {
    let mut checks = vec![Check::new("config", true, format!("{} run is well formed", cfg.kind))];
    match cfg.kind {
        ExperimentKind::Asymptotics | ExperimentKind::Density | ExperimentKind::Orientation => {
            let rows: Vec<FeasibilityRow> = cfg
                .lengths
                .par_iter()
                .map(|&l| match build_row_geometry(cfg, l) {
                    Ok((pw, m)) => FeasibilityRow {
                        l,
                        h1: Some(pw.sigma.total_length()),
                        min_gap: Some(m.min_gap),
                        n_required: Some(m.n_required),
                        n: Some(m.n),
                        under_resolved: Some(m.under_resolved),
                        status: if m.under_resolved { "under-resolved" } else { "ok" }.into(),
                    },
                    Err(e) => FeasibilityRow {
                        l,
                        h1: None,
                        min_gap: None,
                        n_required: None,
                        n: None,
                        under_resolved: None,
                        status: format!("error: {e}"),
                    },
                })
                .collect();
            let bad: Vec<String> = rows
                .iter()
                .filter(|r| r.status != "ok")
                .map(|r| format!("L={}: {}", r.l, r.status))
                .collect();
            // Density statistics need no mesh, only buildable geometry.
            let ok = if cfg.kind == ExperimentKind::Asymptotics {
                bad.is_empty()
            } else {
                rows.iter().all(|r| !r.status.starts_with("error"))
            };
            checks.push(Check::new(
                "geometry and mesh",
                ok,
                if bad.is_empty() { "every length".into() } else { bad.join("; ") },
            ));
            Ok((rows, checks))
        }
        ExperimentKind::BoundsAudit | ExperimentKind::SolverConvergence => {
            for &n in &cfg.mesh.n {
                build_mesh(&cfg.domain, n)?;
            }
            checks.push(Check::new("meshes", true, format!("n = {:?}", cfg.mesh.n)));
            Ok((Vec::new(), checks))
        }
    }
}
