use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PLY header: {0}")]
    PlyHeader(String),

    #[error("PLY is missing required property `{0}`")]
    MissingProperty(String),

    #[error("PLY property `{name}` has type `{ty}`, expected float")]
    PropertyType { name: String, ty: String },

    #[error("truncated PLY payload: expected {expected} bytes after header at byte offset {offset}, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("{count} f_rest coefficients do not form a square spherical-harmonic basis")]
    ShCount { count: usize },

    #[error("scene is empty")]
    EmptyScene,

    #[error("non-triangular face at line {line}")]
    NonTriangularFace { line: usize },

    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },

    #[error("OBJ parse error at line {line}: {msg}")]
    Obj { line: usize, msg: String },

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("tangential axes are parallel (cross product norm {norm:e})")]
    DegenerateAxes { norm: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("cage is not closed: {0}")]
    OpenCage(String),

    #[error("weight vector has {weights} entries but the cage has {vertices} vertices")]
    LengthMismatch { weights: usize, vertices: usize },

    #[error("cage topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("degenerate Gaussian: axis matrix is singular")]
    DegenerateGaussian,

    #[error("cage vertices are coplanar; convex hull is degenerate")]
    DegenerateHull,

    #[error("stale deformation cache: {0}")]
    StaleCache(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("voxel grid is empty")]
    EmptyGrid,

    #[error("voxel grids differ in origin, voxel size or dimensions")]
    GridMismatch,

    #[error("volume has zero size")]
    EmptyVolume,

    #[error("split factor must be positive, got {0}")]
    SplitFactor(f64),

    #[error("sample set is empty")]
    EmptySamples,

    #[error("cache file is corrupt: {0}")]
    CacheFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
