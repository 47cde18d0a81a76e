use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),
    #[error("mode {0} is not a qubit")]
    NotAQubit(usize),
    #[error("discrete mode {0} is unknown or already measured")]
    UnknownDiscreteMode(usize),
    #[error("bus mode {0} is unknown or already consumed")]
    ConsumedMode(usize),
    #[error("environment mode {0} cannot be measured, displaced or interacted")]
    EnvironmentMode(usize),
    #[error("loss reflectivity {0} outside [0, 1]")]
    InvalidLoss(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("register value {value} out of range for mode with {levels} levels")]
    RegisterOutOfRange { value: usize, levels: usize },
    #[error("state norm vanished: conditioning on an impossible outcome")]
    ZeroNorm,
    #[error("homodyne grid holds only {mass:.6} of the probability mass")]
    GridTooSmall { mass: f64 },
    #[error("photon cutoff {given} below required {required}")]
    CutoffViolation { given: usize, required: usize },
    #[error("photon number {n} exceeds cutoff {n_max}")]
    PhotonNumberOutOfRange { n: usize, n_max: usize },
    #[error("empty peak list")]
    EmptyPeaks,
    #[error("peak means are not strictly increasing")]
    UnsortedPeaks,
    #[error("outside the Fock oracle regime: {0}")]
    OracleRegime(String),
    #[error("states have different mode layouts")]
    LayoutMismatch,
    #[error("qubits must be distinct")]
    SameQubit,
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
