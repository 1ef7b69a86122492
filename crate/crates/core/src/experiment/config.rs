use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain2D, DomainSpec, Point};
use crate::tensor_field::{CellTable, Lattice, SpdTensor2, TensorField};

/// Experiment families driven by a config file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Asymptotics,
    Density,
    Orientation,
    BoundsAudit,
    SolverConvergence,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Asymptotics => "asymptotics",
            Self::Density => "density",
            Self::Orientation => "orientation",
            Self::BoundsAudit => "bounds-audit",
            Self::SolverConvergence => "solver-convergence",
        })
    }
}

/// Tensor entries `[a11, a12, a22]`.
pub type Entries = [f64; 3];

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        a11: f64,
        a12: f64,
        a22: f64,
    },
    /// Row-major table of cell values (`j * nx + i`).
    Piecewise {
        origin: [f64; 2],
        cell: [f64; 2],
        nx: usize,
        ny: usize,
        values: Vec<Entries>,
    },
    /// CSV with columns `x,y,a11,a12,a22` on a rectilinear lattice.
    Sampled { path: PathBuf },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Minimum number of mesh cells across the thinnest comb gap.
    pub cells_per_gap: f64,
    /// Largest admissible `n`; rows needing more are run at `max_n` and flagged.
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    /// Mesh sizes for solver-convergence runs, and the audit mesh for random trees.
    #[serde(default)]
    pub n: Vec<usize>,
}

fn default_max_n() -> usize {
    2048
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub trees: usize,
    pub combs: usize,
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
    /// Largest condition number of the random matrices.
    #[serde(default = "default_condition")]
    pub max_condition: f64,
    #[serde(default = "default_margin")]
    pub upper_margin: f64,
    #[serde(default = "default_margin")]
    pub lower_margin: f64,
}

fn default_max_segments() -> usize {
    6
}

fn default_condition() -> f64 {
    10.0
}

fn default_margin() -> f64 {
    0.02
}

/// Thresholds reported by density and orientation runs.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_share")]
    pub share: f64,
    #[serde(default = "default_tv")]
    pub angle_tv: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            share: default_share(),
            angle_tv: default_tv(),
        }
    }
}

fn default_share() -> f64 {
    0.05
}

fn default_tv() -> f64 {
    0.1
}

/// On-disk configuration. Physical parameters have no defaults.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kind: ExperimentKind,
    pub domain: DomainSpec,
    pub field: FieldSpec,
    #[serde(default)]
    pub lengths: Vec<f64>,
    pub s: Option<f64>,
    pub mesh: MeshSpec,
    pub seed: u64,
    pub out: PathBuf,
    /// Forces every square's direction law to `δ_orientation`.
    pub orientation: Option<f64>,
    pub audit: Option<AuditSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Write the first eigenvector as a grid CSV (solver-convergence only).
    #[serde(default)]
    pub dump_eigenvector: bool,
}

/// Validated configuration with the domain and field built.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub domain: Domain2D,
    pub field: TensorField,
    pub lengths: Vec<f64>,
    pub s: f64,
    pub mesh: MeshSpec,
    pub seed: u64,
    pub out: PathBuf,
    pub orientation: Option<f64>,
    pub audit: Option<AuditSpec>,
    pub tolerances: Tolerances,
    pub dump_eigenvector: bool,
}

fn spd(e: &Entries) -> Result<SpdTensor2> {
    SpdTensor2::new(e[0], e[1], e[2])
}

fn read_lattice(path: &Path) -> Result<Lattice> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        y: f64,
        a11: f64,
        a12: f64,
        a22: f64,
    }
    let mut rows: Vec<Row> = csv::Reader::from_path(path)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    let axis = |f: fn(&Row) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = axis(|r| r.x);
    let ys = axis(|r| r.y);
    if xs.len() * ys.len() != rows.len() {
        return Err(Error::InvalidField(format!(
            "{}: {} rows do not form a {}x{} lattice",
            path.display(),
            rows.len(),
            xs.len(),
            ys.len()
        )));
    }
    rows.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    let values = rows
        .iter()
        .map(|r| SpdTensor2::new(r.a11, r.a12, r.a22))
        .collect::<Result<_>>()?;
    Ok(Lattice { xs, ys, values })
}

impl FieldSpec {
    pub fn build(&self, base: &Path) -> Result<TensorField> {
        match self {
            FieldSpec::Constant { a11, a12, a22 } => Ok(TensorField::constant(SpdTensor2::new(*a11, *a12, *a22)?)),
            FieldSpec::Piecewise {
                origin,
                cell,
                nx,
                ny,
                values,
            } => TensorField::piecewise(CellTable {
                origin: Point::new(origin[0], origin[1]),
                cell_width: cell[0],
                cell_height: cell[1],
                nx: *nx,
                ny: *ny,
                values: values.iter().map(spd).collect::<Result<_>>()?,
            }),
            FieldSpec::Sampled { path } => TensorField::sampled(read_lattice(&base.join(path))?),
        }
    }
}

impl ExperimentConfig {
    /// Reads and validates a TOML config. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        Self::from_file(file, base)
    }

    pub fn from_file(file: ConfigFile, base: &Path) -> Result<Self> {
        let domain = Domain2D::try_from(file.domain)?;
        let field = file.field.build(base)?;
        if !field.covers(&domain.bbox()) {
            return Err(Error::Config("tensor field does not cover the domain".into()));
        }
        if !(file.mesh.cells_per_gap >= 4.0) {
            return Err(Error::Config(format!(
                "mesh.cells_per_gap must be at least 4, got {}",
                file.mesh.cells_per_gap
            )));
        }
        if file.mesh.max_n < 2 {
            return Err(Error::Config("mesh.max_n must be at least 2".into()));
        }
        let needs_lengths = matches!(
            file.kind,
            ExperimentKind::Asymptotics | ExperimentKind::Density | ExperimentKind::Orientation
        );
        if needs_lengths {
            if file.lengths.is_empty() {
                return Err(Error::Config(format!("{} runs need a non-empty `lengths` list", file.kind)));
            }
            if file.lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(Error::Config("lengths must be positive".into()));
            }
            if file.lengths.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("lengths must be strictly increasing".into()));
            }
        }
        let s = match (needs_lengths, file.s) {
            (_, Some(s)) if s > 0.0 && s.is_finite() => s,
            (_, Some(s)) => return Err(Error::Config(format!("board side must be positive, got {s}"))),
            (true, None) => return Err(Error::Config(format!("{} runs need a board side `s`", file.kind))),
            (false, None) => 1.0,
        };
        match file.kind {
            ExperimentKind::BoundsAudit => {
                let a = file
                    .audit
                    .as_ref()
                    .ok_or_else(|| Error::Config("bounds-audit runs need an [audit] table".into()))?;
                if !(a.max_condition >= 1.0) || a.max_segments == 0 {
                    return Err(Error::Config("audit.max_condition must be ≥ 1 and max_segments ≥ 1".into()));
                }
                if file.mesh.n.len() != 1 {
                    return Err(Error::Config("bounds-audit runs need exactly one mesh.n".into()));
                }
            }
            ExperimentKind::SolverConvergence => {
                if file.mesh.n.is_empty() || file.mesh.n.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("mesh.n must be a non-empty increasing list".into()));
                }
            }
            _ => {}
        }
        if file.mesh.n.iter().any(|&n| n < 2 || n > file.mesh.max_n) {
            return Err(Error::Config(format!(
                "mesh.n entries must lie in [2, {}]",
                file.mesh.max_n
            )));
        }
        Ok(Self {
            kind: file.kind,
            domain,
            field,
            lengths: file.lengths,
            s,
            mesh: file.mesh,
            seed: file.seed,
            out: base.join(file.out),
            orientation: file.orientation,
            audit: file.audit,
            tolerances: file.tolerances,
            dump_eigenvector: file.dump_eigenvector,
        })
    }
}
