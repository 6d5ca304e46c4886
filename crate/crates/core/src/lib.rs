//! Differentially private categorical histograms over weakly constrained domains.
//!
//! A publisher declares a global domain (an explicit list, a wordlist, the
//! product of a wordlist with itself, or just a size) that may be vastly
//! larger than the set of values actually observed. [`cat_hist`] releases a
//! noisy histogram in which observed bins receive Laplace noise and are
//! thresholded at τ, while the bins that full-domain noise would have pushed
//! above τ are sampled analytically: their number is drawn from a binomial
//! over the whole domain and their weights from an exponential shifted to τ.
//! Nothing proportional to the domain size is ever materialized.
//!
//! τ itself is not set by hand. It is derived from ρ, the probability that
//! no out-of-domain ("random") bin shows up at all, which makes it a policy
//! knob that can be chosen without looking at the data.
//!
//! ```
//! use cathist::{cat_hist, CatHistConfig, DomainSampler, DomainSpec, Histogram, PrivacyParams};
//!
//! let domain = DomainSampler::load(DomainSpec::size_only(171_000, "word")).unwrap();
//! let h = Histogram::from_counts([("word-1", 900.0), ("word-2", 1200.0)]).unwrap();
//! let config = CatHistConfig::new(PrivacyParams::new(1.0, 0.9).unwrap(), 7);
//! let released = cat_hist(&config, &domain, &h).unwrap();
//! assert!(released.bins().iter().all(|b| b.count > 0.0));
//! ```

pub mod domain;
pub mod error;
pub mod histogram;
pub mod ingest;
pub mod mechanism;
pub mod metrics;
pub mod numerics;

pub use domain::{DomainSampler, DomainSpec};
pub use error::{Error, Result};
pub use histogram::{Category, Histogram, NoisyBin, NoisyHistogram, Origin, PrivacyParams, ReleaseMeta};
pub use mechanism::{cat_hist, naive_full_domain_oracle, synthesize_records, CatHistConfig, TrialsConvention};
pub use metrics::{fidelity, fidelity_with, FidelityScore, FidelityVariant};
