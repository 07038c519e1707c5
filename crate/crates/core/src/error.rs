use thiserror::Error;

pub type Result<T> = std::result::Result<T, MjlsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MjlsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("field is not symmetric at node {node} (asymmetry {asymmetry:e})")]
    NotSymmetric { node: usize, asymmetry: f64 },

    #[error(
        "sign condition violated at {}node {node} (label {label}, t = {t}): \
         largest eigenvalue of the disturbance block is {max_eigenvalue:e}",
        step.map(|k| format!("step {k}, ")).unwrap_or_default()
    )]
    SignCondition {
        step: Option<usize>,
        node: usize,
        label: i64,
        t: f64,
        max_eigenvalue: f64,
    },

    #[error("power iteration did not converge in {iterations} iterations (last quotients {previous:e}, {last:e})")]
    PowerIterationDiverged {
        iterations: usize,
        previous: f64,
        last: f64,
    },

    #[error("{solver} did not converge in {iterations} iterations (last increment {last_increment:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        last_increment: f64,
    },

    #[error("unstable, Lyapunov equation has no positive solution in the Neumann sense (spectral radius {radius})")]
    Unstable { radius: f64 },

    #[error("dense operator needs {columns} columns, budget is {budget}")]
    BudgetExceeded { columns: usize, budget: usize },

    #[error("bisection premise violated: {0}")]
    BisectionPremise(String),

    #[error("no disturbance channel: B and D vanish at every node")]
    NoDisturbanceChannel,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
