//! Boson sampling with partially distinguishable photons, computed through
//! low-order marginal probabilities.
//!
//! The crate evaluates k-photon marginals of the output distribution of a
//! linear interferometer for Fock, Gaussian (two-mode squeezed) and
//! superposition inputs, optionally truncating multi-photon interference at
//! a chosen order, and uses them to sample photon by photon. Brute-force
//! reference distributions and a likelihood contest round it out.
//!
//! ```
//! use boson_marginals::{fock_state, marginal_probability, Distinguishability,
//!     Interferometer, MarginalQuery, OutputPattern};
//!
//! let u = Interferometer::balanced_beamsplitter();
//! let state = fock_state(2, &[0, 1]).unwrap();
//! let q = MarginalQuery::exact(OutputPattern::unordered(vec![0, 1]), Distinguishability::INDISTINGUISHABLE);
//! // Hong-Ou-Mandel: no coincidences for identical photons.
//! assert!(marginal_probability(&u, &state, &q).unwrap().abs() < 1e-15);
//! ```

pub mod error;
pub mod limits;
pub mod marginals;
pub mod oracle;
pub mod permanent;
pub mod sampler;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use limits::EnumerationLimits;
pub use marginals::{
    marginal_distribution, marginal_multiset_distribution, marginal_probability, truncated_marginal,
    MarginalKernel, MarginalQuery, MarginalTable, OutputPattern,
};
pub use oracle::{classical_distribution, full_distribution, FullDistribution};
pub use permanent::{permanent, submatrix, ComplexMatrix, Interferometer};
pub use sampler::{sample, sample_lossy, sample_mixture, sample_truncated, Sample, SamplerConfig};
pub use states::{
    disjoint_superposition, fock_state, gbs_state, Distinguishability, FockVector, GbsSpec, InputState,
    StateSpec,
};
pub use verify::{likelihood_contest, marginal_report, ContestConfig, ContestResult, Winner};
