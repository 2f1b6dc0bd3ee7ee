use thiserror::Error;

/// Errors raised by grid, potential, flow and distance computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 64")]
    InvalidGrid(usize),

    #[error("right-hand side has nonzero mean {mean:e} (mass normalization upstream is off)")]
    NonzeroMean { mean: f64 },

    #[error("cusp: density not integrable (minus-pole Lelong number {nu} >= 2 at ({x}, {y}))")]
    Cusp { nu: f64, x: f64, y: f64 },

    #[error("invalid pole configuration: {0}")]
    InvalidPoles(String),

    #[error(
        "poles too close to estimate: circle of radius {radius} passes within 4h of another pole"
    )]
    PolesTooClose { radius: f64 },

    #[error("segment passes through the pole at ({x}, {y}); split the curve there")]
    ThroughPole { x: f64, y: f64 },

    #[error("stiff step: Newton failed at t = {t}, dt = {dt} after repeated halving")]
    StiffStep { t: f64, dt: f64 },

    #[error("flow failed while advancing to t = {target}: {source}")]
    Trajectory {
        target: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-monotone heap update in fast marching at node {node}: {value} < {front}")]
    NonMonotone { node: usize, value: f64, front: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("outside the hypothesis: {0}")]
    Hypothesis(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
