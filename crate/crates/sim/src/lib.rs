//! Monte-Carlo harness: a synthetic population on a `D1 x D2` grid of
//! monotone means, an informative stratified design, and replicated
//! estimation with the unconstrained and shape-constrained estimators.
//!
//! Randomness comes from ChaCha8 streams of one seed: stream 0 draws the
//! population, stream `r + 1` draws replication `r` (sample and jackknife
//! grouping). Replications run on rayon and are merged in order, so a report
//! depends only on the seed.

pub mod design;
pub mod error;
pub mod instances;
pub mod population;
pub mod report;
pub mod study;

pub use design::{draw_sample, DrawnSample, StratifiedDesign};
pub use error::{Result, SimError};
pub use population::{generate_population, Layout, Population, PopulationSpec};
pub use report::{write_wmse_csv, SimulationReport};
pub use study::{run_study, wmse, Scenario, Shape, StudyConfig, VarianceMethod};
