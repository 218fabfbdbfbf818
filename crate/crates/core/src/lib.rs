//! Entropy-Transport distances between finite measures and the
//! Sturm-Entropy-Transport distance between finite metric measure spaces of
//! arbitrary total mass.

pub mod checks;
pub mod conic;
pub mod entropy;
pub mod error;
pub mod et;
pub mod fixtures;
pub mod ext;
pub mod lp;
pub mod mmspace;
pub mod presets;
pub mod sturm;

pub use entropy::{CostFunction, EntropyFunction, MarginalPerspectiveValue};
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use mmspace::{CrossDistanceMatrix, Coupling, MetricMeasureSpace, ValidationReport};
pub use presets::{et_distance, EtDistance, Preset};
