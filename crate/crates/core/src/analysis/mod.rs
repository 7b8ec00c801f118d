//! Population and landscape analytics over tree distances.

mod axioms;
mod distances;
mod sensitivity;
mod variogram;

pub use axioms::{metric_axiom_check, AxiomPlan, AxiomReport};
pub use distances::{pairwise_distance_matrix, pairwise_distance_matrix_with, population_diversity, DistanceMatrix};
pub use sensitivity::{scoring_sensitivity, PresetComparison, SensitivityReport, MIN_SENSITIVITY_PAIRS};
pub use variogram::{
    empirical_semivariogram, fit_spherical, spherical, SemivariogramModel, VariogramBin,
    DEFAULT_BINS, FIT_STARTS,
};
