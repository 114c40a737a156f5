use std::fmt;

/// Errors produced anywhere in the inference pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("dense eigendecomposition is capped at N = {cap}, requested N = {n}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("Green function inversion failed: {0}")]
    Inversion(String),

    #[error("fixed-point solver did not converge: {0}")]
    NoConvergence(String),

    #[error("iterate left the admissible domain at iteration {iteration}: {detail}")]
    Domain { iteration: usize, detail: String },

    #[error("non-finite value in iterate at step {step}")]
    NonFinite { step: usize },

    #[error("iteration diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("covariance block not positive semidefinite at (t, s) = ({t}, {s})")]
    NotPositiveSemidefinite { t: usize, s: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage, used to attach context to propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Spectrum,
    Replica,
    Simulate,
    Vamp,
    Theory,
    MonteCarlo,
    Compare,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Generate => "generate",
            Stage::Spectrum => "spectrum",
            Stage::Replica => "replica",
            Stage::Simulate => "simulate",
            Stage::Vamp => "vamp",
            Stage::Theory => "theory",
            Stage::MonteCarlo => "mc-oracle",
            Stage::Compare => "compare",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
