use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension too small: dims {dims:?}, every axis must have at least {min} voxels")]
    DimensionTooSmall { dims: [usize; 3], min: usize },

    #[error("voxel budget exceeded: {count} voxels > budget {budget}")]
    VoxelBudgetExceeded { count: usize, budget: usize },

    #[error("spacing must be positive, got {0:?}")]
    NonPositiveSpacing([f64; 3]),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("margin {margin} leaves no interior voxels on dims {dims:?}")]
    EmptyInterior { dims: [usize; 3], margin: usize },

    #[error("grid too small for stencil margin {margin}")]
    GridTooSmall { margin: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("container format: {0}")]
    Format(String),

    #[error("duplicate field name {0:?}")]
    DuplicateField(String),

    #[error("ellipticity check failed: {0}")]
    Ellipticity(String),

    #[error("matrix is not complex-orthogonally diagonalizable within tolerance: {0}")]
    NotDiagonalizable(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("solver budget exceeded: grid has {got} voxels per axis, limit is {limit}")]
    SolverBudgetExceeded { got: usize, limit: usize },

    #[error("all voxels rejected: {0}")]
    AllMasked(String),

    #[error("need at least {need} fields, got {got}")]
    NotEnoughFields { need: usize, got: usize },

    #[error("mask too small for derivative order {s}")]
    MaskTooSmall { s: usize },

    #[error("anchor: {0}")]
    Anchor(String),

    #[error("cgo parameters: c^2 + a^2/4 - k^2 must be positive (got {0})")]
    CgoRootDomain(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
