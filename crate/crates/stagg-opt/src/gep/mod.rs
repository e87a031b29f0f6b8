//! Joint power / natural-gas generation expansion planning: instance
//! data, MILP construction, spatio-temporal instance aggregation, the
//! generic two-class block decomposition, and feasibility checking.

pub mod aggregate;
pub mod builder;
pub mod feasibility;
pub mod generic;
pub mod instance;
pub mod io;
#[cfg(test)]
pub(crate) mod testutil;

pub use aggregate::{aggregate_instance, NodeGrouping};
pub use builder::{build_gep, BuiltGep, GepVariables};
pub use feasibility::{check_feasibility, FeasibilityReport};
pub use generic::{to_generic, GenericCephn};
pub use instance::{GepError, GepInstance, Pipeline, PlantType, RepStructure, StorageType};
