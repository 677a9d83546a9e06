use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("negative action power U{component}^{twice_pow}/2 produced by a bracket; series is outside the Lie-transform domain")]
    NegativePower { component: usize, twice_pow: i32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Kepler solver did not converge: M = {mean_anomaly}, e = {eccentricity}, last correction {last_step:e}")]
    KeplerNonConvergence {
        mean_anomaly: f64,
        eccentricity: f64,
        last_step: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no equilibrium: obliquity relation has no sign change (residual {lo:e} at {lo_at}, {hi:e} at {hi_at})")]
    NoEquilibrium {
        lo_at: f64,
        lo: f64,
        hi_at: f64,
        hi: f64,
    },

    #[error("equilibrium not found after {iterations} Newton steps; residual trace {trace:?}")]
    EquilibriumNotFound { iterations: usize, trace: Vec<f64> },

    #[error("degenerate equilibrium: singular Jacobian (det = {det:e})")]
    DegenerateEquilibrium { det: f64 },

    #[error("equilibrium is not elliptic: {0}")]
    NotElliptic(String),

    #[error("resonant quadratic part: frequencies {0:e} and {1:e} coincide")]
    ResonantQuadratic(f64, f64),

    #[error("resonant divisor k = ({}, {}) with |k.omega| = {divisor:e} at order {order}", k[0], k[1])]
    ResonantDivisor { k: [i32; 2], divisor: f64, order: usize },

    #[error("term budget of {budget} exceeded at order {order}")]
    TermBudget { budget: usize, order: usize },

    #[error("outside convergence: geometric ratio q = {q} >= 1")]
    OutsideConvergence { q: f64 },

    #[error("no admissible (r, rho) pair for rho0 = {rho0}")]
    NoEstimate { rho0: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("every sweep cell failed ({cells} cells)")]
    SweepFailed { cells: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
