use thiserror::Error;

/// Errors raised while building or validating a network model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("adjacency matrix must be square, symmetric, 0/1 and zero on the diagonal: {0}")]
    InvalidGraph(String),
    #[error("coupling A_{{{0}{1}}} supplied for a non-adjacent pair")]
    CouplingWithoutEdge(usize, usize),
    #[error("disturbance input B_w of agent {0} is rank deficient")]
    RankDeficient(usize),
    #[error("invalid physical constant: {0}")]
    InvalidConstant(String),
    #[error("non-finite matrix entry encountered")]
    NonFinite,
}

/// Errors raised by the open-loop data-collection experiment.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state norm exceeded {limit:e} at step {step}; open loop diverges over the horizon")]
    Overflow { step: usize, limit: f64 },
    #[error("realized noise violated the declared bound on {attempts} consecutive draws")]
    NoiseBoundViolated { attempts: usize },
    #[error("malformed data file: {0}")]
    Parse(String),
}

/// Errors raised by the event-triggered simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EtsError {
    #[error("agent {agent}: 1 - lambda - 1/theta = {value} is negative")]
    Inadmissible { agent: usize, value: f64 },
    #[error("invalid trigger parameter: {0}")]
    InvalidParameter(String),
    #[error("triggering matrix of agent {0} is not positive definite")]
    OmegaNotPositive(usize),
    #[error("sigma2[{0}][{1}] is nonzero on a non-edge")]
    SigmaOffGraph(usize, usize),
    #[error("gain block K_{{{0}{1}}} is nonzero but the agents do not communicate")]
    GainPattern(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state norm exceeded {limit:e} at step {step}")]
    Overflow { step: usize, limit: f64 },
}

/// Errors raised by LMI assembly, solving, and design recovery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("sigma2[{0}][{1}] is nonzero on a non-edge")]
    SigmaOffGraph(usize, usize),
    #[error("problem is infeasible (most violated constraint: {constraint})")]
    Infeasible { constraint: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("solver reported feasible but re-verification failed on {constraint}: lambda_max = {lambda_max:e}")]
    Reverification { constraint: String, lambda_max: f64 },
    #[error("G block {block} is ill-conditioned (condition number {cond:e})")]
    IllConditioned { block: usize, cond: f64 },
    #[error("recovered triggering matrix of agent {0} is not positive definite")]
    OmegaNotPositive(usize),
    #[error("unknown decision variable `{0}`")]
    UnknownVariable(String),
}
