//! Reaction networks, kernels, placement measures and configuration.

pub mod config;
pub mod domain;
pub mod kernel;
pub mod mollifier;
pub mod network;
pub mod placement;

pub use config::parse_network;
pub use domain::{ball_volume, Boundary, Domain, SpatialShape};
pub use kernel::{calibrate_doi_lambda, scale_kernel, RateKernel};
pub use mollifier::Mollifier;
pub use network::{InitialCondition, Reaction, ReactionNetwork, Species, Stoichiometry};
pub use placement::{sample_placement, PlacementSpec, SeparationDensity, WeightedAlpha};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel expects {expected} positions, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not normalized: {0}")]
    Unnormalized(String),
    #[error("{location}: {message}")]
    Config { location: String, message: String },
    #[error("{location}: unknown species `{name}`")]
    UnknownSpecies { location: String, name: String },
    #[error("{location}: reaction can grow the population without bound; set system.allow_growth = true to accept it")]
    Growth { location: String },
    #[error("{location}: {source}")]
    Located { location: String, source: Box<ModelError> },
}

impl ModelError {
    pub fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Config { location: location.into(), message: message.into() }
    }

    /// Attaches a location unless the error already carries one.
    pub fn located(self, location: &str) -> Self {
        match self {
            e @ (ModelError::Config { .. }
            | ModelError::UnknownSpecies { .. }
            | ModelError::Growth { .. }
            | ModelError::Located { .. }) => e,
            e => ModelError::Located { location: location.to_string(), source: Box::new(e) },
        }
    }
}
