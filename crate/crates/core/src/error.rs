use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("wavelength {wavelength_nm} nm outside the {material} dispersion window ({min_nm}-{max_nm} nm)")]
    WavelengthOutOfRange {
        wavelength_nm: f64,
        material: &'static str,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("LP{l}{m} is not guided at {wavelength_nm:.3} nm")]
    ModeNotGuided { l: u32, m: u32, wavelength_nm: f64 },

    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("invalid fiber parameter `{key}`: {reason}")]
    InvalidFiber { key: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("overlap normalization failed: {0}")]
    Normalization(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no compatible process for peak `{label}`")]
    Assignment { label: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
