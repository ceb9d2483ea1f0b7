use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpdError {
    #[error("carriers overlap: spacing {spacing_hz} Hz <= bandwidth {bandwidth_hz} Hz")]
    Overlap { spacing_hz: f64, bandwidth_hz: f64 },
    #[error("sample-rate error: {0}")]
    Rate(String),
    #[error("filter design error: {0}")]
    Design(String),
    #[error("alignment failed: {0}")]
    Align(String),
    #[error("band error: {0}")]
    Band(String),
    #[error("order error: {0}")]
    Order(String),
    #[error("degenerate basis: column {column} has residual rms {residual_rms:e} (column rms {column_rms:e})")]
    DegenerateBasis {
        column: usize,
        residual_rms: f64,
        column_rms: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("division by zero: {0}")]
    ZeroDivide(String),
    #[error("learning diverged on {sub_band} at update {update}: residual {residual_db:.1} dB vs initial {initial_db:.1} dB")]
    Divergence {
        sub_band: String,
        update: usize,
        residual_db: f64,
        initial_db: f64,
    },
    #[error("unsupported order {0}: the complexity model covers ninth-order processing only")]
    UnsupportedOrder(u32),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error in {field}: {message}")]
    Config { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl DpdError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        DpdError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for DpdError {
    fn from(e: std::io::Error) -> Self {
        DpdError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DpdError>;
