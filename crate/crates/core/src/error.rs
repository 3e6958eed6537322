use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading inputs or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("missing required column `{column}` in {context}")]
    MissingColumn { column: String, context: String },

    #[error("invalid value for `{field}` at {context}: {message}")]
    InvalidValue {
        field: String,
        context: String,
        message: String,
    },

    #[error("gap in series for {country} at year {year}")]
    SeriesGap { country: String, year: i32 },

    #[error("duplicate year {year} for {country}")]
    DuplicateYear { country: String, year: i32 },

    #[error("panel is empty after applying filters")]
    EmptyPanel,

    #[error("anchor year {year} not found for reference country {country}")]
    AnchorMissing { country: String, year: i32 },

    #[error("life table is missing age {age} for {sex}")]
    MissingAge { sex: String, age: u32 },

    #[error("reverse mortgage not allowed: {0}")]
    ReverseMortgage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(context: impl Into<String>, source: csv::Error) -> Self {
        SimError::Csv {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by input data (panel, life table, PLF grid).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            SimError::Io { .. }
                | SimError::Csv { .. }
                | SimError::MissingColumn { .. }
                | SimError::InvalidValue { .. }
                | SimError::SeriesGap { .. }
                | SimError::DuplicateYear { .. }
                | SimError::EmptyPanel
                | SimError::AnchorMissing { .. }
                | SimError::MissingAge { .. }
        )
    }
}
