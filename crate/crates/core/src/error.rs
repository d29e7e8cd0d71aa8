use thiserror::Error;

use crate::netcalc::Unstable;
use crate::platform::FlowId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Unstable(#[from] Unstable),
    #[error("unknown flow {0}")]
    UnknownFlow(FlowId),
}
