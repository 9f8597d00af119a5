use thiserror::Error;

use crate::geometry::GeomError;
use crate::metric::MetricError;
use crate::normalization::ChartError;
use crate::symbolic::SymError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
