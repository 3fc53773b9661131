use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Image buffer does not match its declared shape.
    Image(String),
    /// A pyramid level would have a zero dimension.
    Dimension(String),
    /// The requested superpixel count cannot be tiled onto the grid.
    Init(String),
    /// Label map and target resolution disagree.
    Mapping(String),
    /// Invalid configuration value; the message names the field.
    Config(String),
    /// Maintained statistics disagree with a recomputation.
    Integrity(String),
    /// A caller broke an operation's precondition.
    Contract(String),
    /// Non-finite or otherwise unusable input value.
    Input(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Image(m) => write!(f, "image error: {m}"),
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Init(m) => write!(f, "initialization error: {m}"),
            Error::Mapping(m) => write!(f, "mapping error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Integrity(m) => write!(f, "integrity error: {m}"),
            Error::Contract(m) => write!(f, "contract error: {m}"),
            Error::Input(m) => write!(f, "input error: {m}"),
        }
    }
}

impl core::error::Error for Error {}
