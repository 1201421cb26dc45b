use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Buffer length does not match `rows * cols`.
    ShapeMismatch { expected: usize, actual: usize },
    /// A pixel or pressure value outside its admissible range.
    ValueOutOfRange { index: usize, value: f64 },
    /// Requested dimensions are zero or otherwise unusable.
    InvalidDimensions { rows: usize, cols: usize },
    /// Image is smaller than an operation requires.
    ImageTooSmall { rows: usize, cols: usize, min_rows: usize, min_cols: usize },
    /// Descriptor patch does not fit in the gradient field.
    PatchOutOfBounds { row: usize, col: usize, size: usize },
    /// Map is smaller than the sliding window.
    MapSmallerThanWindow { map_rows: usize, map_cols: usize, win_rows: usize, win_cols: usize },
    /// Two values that must share a state space do not.
    StateSpaceMismatch,
    /// A state lies outside the state space.
    StateOutOfBounds { row: usize, col: usize },
    /// Invalid configuration parameter.
    InvalidParameter(&'static str),
    /// Empty input where at least one item is required.
    Empty(&'static str),
    /// Measurement update produced zero total mass.
    DegenerateUpdate,
    /// Unknown shape name.
    UnknownShape,
    /// Not enough on-shape window positions to build a path.
    InsufficientPositions { required: usize, available: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { expected, actual } => {
                write!(f, "buffer holds {actual} values, expected {expected}")
            }
            Error::ValueOutOfRange { index, value } => {
                write!(f, "value {value} at index {index} is out of range")
            }
            Error::InvalidDimensions { rows, cols } => write!(f, "invalid dimensions {rows}x{cols}"),
            Error::ImageTooSmall { rows, cols, min_rows, min_cols } => {
                write!(f, "image {rows}x{cols} is smaller than the required {min_rows}x{min_cols}")
            }
            Error::PatchOutOfBounds { row, col, size } => {
                write!(f, "patch of size {size} centered at ({row}, {col}) is out of bounds")
            }
            Error::MapSmallerThanWindow { map_rows, map_cols, win_rows, win_cols } => write!(
                f,
                "map {map_rows}x{map_cols} is smaller than the {win_rows}x{win_cols} window"
            ),
            Error::StateSpaceMismatch => f.write_str("state spaces differ"),
            Error::StateOutOfBounds { row, col } => write!(f, "state ({row}, {col}) is outside the state space"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::Empty(what) => write!(f, "empty input: {what}"),
            Error::DegenerateUpdate => f.write_str("measurement update left zero total mass"),
            Error::UnknownShape => f.write_str("unknown shape spec"),
            Error::InsufficientPositions { required, available } => write!(
                f,
                "need {required} on-shape window positions, only {available} available"
            ),
        }
    }
}

impl core::error::Error for Error {}
