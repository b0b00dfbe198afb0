use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation axis must be unit length, got |axis| = {0}")]
    NonUnitAxis(f64),
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("unsupported joint type `{kind}` on joint `{joint}`")]
    UnsupportedJoint { joint: String, kind: String },
    #[error("unsupported geometry on link `{link}`: {detail}")]
    UnsupportedGeometry { link: String, detail: String },
    #[error("malformed kinematic tree: {0}")]
    MalformedTree(String),
    #[error("movable joint `{0}` has no limit element")]
    MissingLimits(String),
    #[error("joint `{joint}` value {value} outside limits [{lo}, {hi}]")]
    OutOfLimits {
        joint: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid activation task: {0}")]
    InvalidTask(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("urdf parse error: {0}")]
    Xml(String),
    #[error("oracle grid too large: {evaluations} evaluations requested (limit {limit})")]
    OracleGridTooLarge { evaluations: u64, limit: u64 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
