use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Jacobian or branch compliance lost rank. `direction` is the 6-D
    /// Cartesian direction (linear, angular) with the smallest singular value.
    #[error("singular configuration{}: smallest singular value {sigma:.3e} along {direction:?}", at_index(*index))]
    Singular {
        sigma: f64,
        direction: [f64; 6],
        index: Option<usize>,
    },

    #[error("kinematic closure violated: position gap {gap_m:.3e} m, rotation gap {gap_rad:.3e} rad")]
    Closure { gap_m: f64, gap_rad: f64 },

    #[error("unreachable target: best residual {residual_m:.3e} m / {residual_rad:.3e} rad")]
    Unreachable { residual_m: f64, residual_rad: f64 },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("line {line}: malformed arc: {reason}")]
    MalformedArc { line: usize, reason: String },

    #[error("line {line}: unsupported g-code: {word}")]
    UnsupportedGcode { line: usize, word: String },

    #[error("plan failed at pose {index}: {source}")]
    Plan {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("tool pose {index} at {position:?} lies outside the workspace box")]
    Workspace { index: usize, position: [f64; 3] },

    #[error("joint jump of {jump_rad:.4} rad on joint {joint} of robot {robot} between poses {index} and {}", index + 1)]
    Continuity {
        index: usize,
        robot: u8,
        joint: usize,
        jump_rad: f64,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

fn at_index(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" at pose {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attaches a setpoint index to a singular-configuration error.
    pub fn with_index(self, idx: usize) -> Self {
        match self {
            Error::Singular {
                sigma, direction, ..
            } => Error::Singular {
                sigma,
                direction,
                index: Some(idx),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
