use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("support escapes the chart domain: {0}")]
    SupportEscape(String),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("derivative order {0} exceeds the stencil support")]
    DerivativeOrder(usize),
    #[error("inconclusive fit: {0}")]
    InconclusiveFit(String),
    #[error("quadrature range: {0}")]
    QuadratureRange(String),
    #[error("support condition violated: {0}")]
    SupportCondition(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("support overflow: {0}")]
    SupportOverflow(String),
    #[error("symbol order {0} > 0 not allowed here")]
    SymbolOrder(i32),
    #[error("class error: {0}")]
    Class(String),
    #[error("tail error: {0}")]
    Tail(String),
    #[error("frequency floor: {0}")]
    Floor(String),
    #[error("cutoff error: {0}")]
    Cutoff(String),
    #[error("unstable fit: {0}")]
    UnstableFit(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("insufficient decay: {0}")]
    InsufficientDecay(String),
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("missing certificate: {0}")]
    MissingCertificate(String),
    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("family file: {0}")]
    Format(String),
    #[error("{context}: {source}")]
    Scenario { context: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
