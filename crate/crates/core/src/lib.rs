//! Model sorting and selection by nested empirical risk.
//!
//! The library grows sequentially nested model families, measures the
//! drop in minimum empirical risk between successive models (the SEER),
//! and tests each drop against closed-form chi-square thresholds to
//! decide where a model family should stop growing. On top of that sit
//! a sparse linear-regression pipeline, OMP/LARS/information-criterion
//! baselines, a grouped variant for multiclass ridge classification,
//! and a reproducible Monte Carlo harness for head-to-head support
//! recovery benchmarks.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod group_ner;
pub mod linreg;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod selection;

pub use dataset::{CsvLayout, Dataset, IndexSet};
pub use error::{Error, Result};
pub use model::{ChainStep, NestedChain};
pub use selection::{SelectionResult, ThresholdRule};
