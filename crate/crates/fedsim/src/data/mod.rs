//! Dataset containers, providers, and distribution strategies.
//!
//! A [`DataContainer`] is the universal dataset object: a dense row-major
//! feature matrix plus integer labels. Providers (synthetic generator, IDX
//! reader, CSV reader) produce containers; distributors carve one container
//! into per-client index sets described by a [`DistributionPlan`].

mod container;
mod distribute;
mod providers;
mod synthetic;

pub use container::{train_test_split, DataContainer};
pub use distribute::{
    distribute_dirichlet, distribute_label, distribute_shard, distribute_unique, DistributionPlan,
};
pub use providers::{load_csv, load_idx};
pub use synthetic::generate_synthetic;
