//! Entropy production rate of discrete play sequences.
//!
//! The crate estimates first-order Markov chains from recorded sessions,
//! computes entropy, entropy production rate (EPR), the velocity field and
//! motion of the estimated chain, and compares them with Monte-Carlo null
//! models: independent mixed-strategy play and the i.i.d. occupancy baseline
//! that absorbs finite-sample EPR bias.
//!
//! ```
//! use epr_core::{estimate_markov, epr, StateSpace, Trajectory, TreatmentDataset, ZeroFluxPolicy};
//!
//! let data = TreatmentDataset::new(
//!     "demo",
//!     StateSpace::square_2x2(),
//!     vec![Trajectory::new("s1", vec![0, 2, 3, 1, 0, 2, 3, 1, 0, 1, 0])],
//! )?;
//! let chain = estimate_markov(&data, 0)?;
//! let rate = epr(&chain, ZeroFluxPolicy::Skip)?;
//! assert!(rate.value >= 0.0);
//! # Ok::<(), epr_core::Error>(())
//! ```

pub mod dataio;
mod error;
pub mod model;
pub mod nullmodels;
pub mod observables;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    estimate_from_sequences, estimate_markov, stationarity_diagnostic, MarkovEstimate, StateSpace,
    StationarityDiagnostic, Trajectory, TreatmentDataset,
};
pub use nullmodels::{
    dos_baseline, dos_baseline_sessions, simulate_chain, simulate_vnm, vnm_null_distribution, BaselineDistribution,
    BaselineSummary, ConstraintSummary, VnmParams,
};
pub use observables::{entropy, epr, full_report, motion, velocity, Epr, ObservableReport, ZeroFluxPolicy};
pub use seed::Seed;
pub use stats::{ols_fit, one_sample_t, paired_t, percentile_of, welch_t, Direction, OlsFit, TestResult};
