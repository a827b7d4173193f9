pub mod domain;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod oracle;
pub mod policies;
pub mod reward;
pub mod sim;

pub use domain::{ActionSet, InventoryState, LoggedDataset, LoggedTuple, Trajectory, UserPopulation};
pub use error::{Error, Result};
pub use policies::{Policy, PolicyKind, SupplyPartition};
pub use reward::{RewardEstimate, RewardModel};
pub use sim::{EnvironmentSpec, ValueEstimate};
