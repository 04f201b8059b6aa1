use thiserror::Error;

use crate::ingest::IngestError;
use crate::metrics::MetricsError;
use crate::mixture::MixtureError;
use crate::packing::PackingError;
use crate::registry::RegistryError;
use crate::runplan::RunPlanError;
use crate::sampling::SamplingError;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Packing(#[from] PackingError),
    #[error(transparent)]
    RunPlan(#[from] RunPlanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
