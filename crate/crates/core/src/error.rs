use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (a11={a11}, a12={a12}, a22={a22})")]
    NotPositiveDefinite { a11: f64, a12: f64, a22: f64 },

    #[error("degenerate segment at ({x}, {y})")]
    DegenerateSegment { x: f64, y: f64 },

    #[error("empty segment set")]
    EmptyContinuum,

    #[error("segment set is not connected ({components} components)")]
    NotConnected { components: usize },

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("invalid tensor field: {0}")]
    InvalidField(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tile spacing too coarse: rectangle {rectangle} admits no segment at spacing {spacing}")]
    TileTooCoarse { rectangle: usize, spacing: f64 },

    #[error("plan has zero density on square ({i}, {j}); the limit energy is infinite")]
    InfiniteEnergyPlan { i: i64, j: i64 },

    #[error("square ({i}, {j}): length {length} is below the tile threshold: {source}")]
    SquareTooShort {
        i: i64,
        j: i64,
        length: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("board side {side} violates the boundary-component condition: a component of the boundary lies inside square ({i}, {j})")]
    BoundaryInsideSquare { side: f64, i: i64, j: i64 },

    #[error("mesh with {n} cells per unit length cannot resolve the domain: {reason}")]
    MeshTooCoarse { n: usize, reason: String },

    #[error("no Dirichlet condition: the constrained problem is singular")]
    EmptyDirichlet,

    #[error("matrix not positive definite on the free space (conjugate gradient breakdown)")]
    SingularSystem,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e}, estimate {lambda})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        lambda: f64,
        last_iterate: Vec<f64>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
