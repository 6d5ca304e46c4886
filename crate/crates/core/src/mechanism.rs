//! The categorical histogram release, its brute-force reference, and record
//! synthesis from a release.
//!
//! Conceptually every category of the global domain gets Laplace(·, 1/ε)
//! noise and only bins reaching τ are kept. For the active bins that is done
//! literally. For the rest, the number of bins that would have crossed τ is
//! Binomial(n, ½e^(−ετ)) and each crossing bin's value is τ + Exp(ε), so
//! both are sampled directly and labels are drawn uniformly from the domain.
//!
//! Input counts are raw occurrence counts (unit sensitivity under adding or
//! removing one record), which is what a Laplace scale of 1/ε calibrates for.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::domain::DomainSampler;
use crate::error::{Error, Result};
use crate::histogram::{Category, Histogram, NoisyBin, NoisyHistogram, Origin, PrivacyParams, ReleaseMeta};
use crate::numerics::{self, derive_seed, seeded_rng};

/// Number of binomial trials used to count injected bins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrialsConvention {
    /// The whole domain size n; makes P(no injected bin) exactly ρ.
    #[default]
    FullN,
    /// n minus the active categories, which are handled separately.
    NMinusActive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatHistConfig {
    pub privacy: PrivacyParams,
    pub trials: TrialsConvention,
    pub seed: u64,
    /// Treat active categories missing from the declared domain as members
    /// instead of failing.
    pub allow_out_of_domain_active: bool,
}

impl CatHistConfig {
    pub fn new(privacy: PrivacyParams, seed: u64) -> Self {
        CatHistConfig { privacy, trials: TrialsConvention::FullN, seed, allow_out_of_domain_active: false }
    }

    pub fn with_trials(mut self, trials: TrialsConvention) -> Self {
        self.trials = trials;
        self
    }

    pub fn allow_out_of_domain_active(mut self, allow: bool) -> Self {
        self.allow_out_of_domain_active = allow;
        self
    }
}

// independent streams below the config seed
const ACTIVE_STREAM: u64 = 0;
const INJECT_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;

struct Prepared {
    tau: f64,
    n: u64,
    active: BTreeSet<Category>,
}

fn prepare(config: &CatHistConfig, domain: &DomainSampler, h: &Histogram) -> Result<Prepared> {
    let n = domain.size();
    let tau = config.privacy.tau(n)?;
    let active = h.active_domain();
    if !config.allow_out_of_domain_active {
        let offenders: Vec<String> =
            active.iter().filter(|c| !domain.contains(c.as_str())).map(|c| c.as_str().to_string()).collect();
        if !offenders.is_empty() {
            return Err(Error::OutOfDomain(offenders));
        }
    }
    Ok(Prepared { tau, n, active })
}

/// Laplace-noised active bins that reach τ, in input order.
fn noisy_active_bins<R: Rng + ?Sized>(rng: &mut R, h: &Histogram, epsilon: f64, tau: f64) -> (Vec<NoisyBin>, usize) {
    let scale = 1.0 / epsilon;
    let mut kept = Vec::new();
    let mut removed = 0;
    for (category, count) in h.bins().iter().filter(|(_, c)| *c > 0.0) {
        let noisy = numerics::sample_laplace(rng, *count, scale);
        if noisy >= tau && noisy > 0.0 {
            kept.push(NoisyBin { category: category.clone(), count: noisy, origin: Origin::Active });
        } else {
            removed += 1;
        }
    }
    (kept, removed)
}

/// Releases a differentially private histogram of `h` over `domain`.
///
/// Output order is the surviving active bins in input order followed by the
/// injected bins. Zero-count input bins are treated as unobserved domain
/// members. Identical `(config, domain, h)` give identical output.
pub fn cat_hist(config: &CatHistConfig, domain: &DomainSampler, h: &Histogram) -> Result<NoisyHistogram> {
    let Prepared { tau, n, active } = prepare(config, domain, h)?;
    let epsilon = config.privacy.epsilon();

    let mut active_rng = seeded_rng(derive_seed(config.seed, &[ACTIVE_STREAM]));
    let (mut bins, removed) = noisy_active_bins(&mut active_rng, h, epsilon, tau);

    // Everything below depends on the data only through the active set.
    let mut rng = seeded_rng(derive_seed(config.seed, &[INJECT_STREAM]));
    let p = numerics::inclusion_prob(epsilon, tau)?;
    let trials = match config.trials {
        TrialsConvention::FullN => n,
        TrialsConvention::NMinusActive => n.saturating_sub(active.len() as u64),
    };
    let k = if trials == 0 { 0 } else { numerics::sample_num_injected_bins(&mut rng, trials, p)? };
    let available = n - active.iter().filter(|c| domain.contains(c.as_str())).count() as u64;
    // FullN can ask for more bins than remain outside the active domain
    let k = k.min(available);
    for category in domain.sample_distinct(&mut rng, k, &active)? {
        let count = numerics::sample_shifted_exp(&mut rng, epsilon, tau);
        bins.push(NoisyBin { category, count, origin: Origin::Injected });
    }

    let meta = ReleaseMeta { epsilon, rho: config.privacy.rho(), n, tau, seed: config.seed, removed };
    Ok(NoisyHistogram::new(bins)?.with_meta(meta))
}

/// Largest domain [`naive_full_domain_oracle`] will enumerate.
pub const ORACLE_MAX_DOMAIN: u64 = 10_000;

/// Reference release that noises every category of the domain explicitly.
///
/// Infeasible beyond small domains; exists to check [`cat_hist`] against.
/// Bins outside the active domain that survive are marked injected and
/// follow the active bins in domain order.
pub fn naive_full_domain_oracle(config: &CatHistConfig, domain: &DomainSampler, h: &Histogram) -> Result<NoisyHistogram> {
    if domain.size() > ORACLE_MAX_DOMAIN {
        return Err(Error::DomainTooLarge { size: domain.size(), limit: ORACLE_MAX_DOMAIN });
    }
    let Prepared { tau, n, active } = prepare(config, domain, h)?;
    let epsilon = config.privacy.epsilon();

    let mut active_rng = seeded_rng(derive_seed(config.seed, &[ACTIVE_STREAM]));
    let (mut bins, removed) = noisy_active_bins(&mut active_rng, h, epsilon, tau);

    let mut rng = seeded_rng(derive_seed(config.seed, &[ORACLE_STREAM]));
    let scale = 1.0 / epsilon;
    for i in 0..n {
        let category = domain.label_at(i).expect("index in range");
        if active.contains(&category) {
            continue;
        }
        let noisy = numerics::sample_laplace(&mut rng, 0.0, scale);
        if noisy >= tau && noisy > 0.0 {
            bins.push(NoisyBin { category, count: noisy, origin: Origin::Injected });
        }
    }

    let meta = ReleaseMeta { epsilon, rho: config.privacy.rho(), n, tau, seed: config.seed, removed };
    Ok(NoisyHistogram::new(bins)?.with_meta(meta))
}

/// `m` i.i.d. records drawn proportionally to the released counts.
pub fn synthesize_records<R: Rng + ?Sized>(rng: &mut R, nh: &NoisyHistogram, m: usize) -> Result<Vec<Category>> {
    if nh.is_empty() {
        return Err(Error::NothingToSample);
    }
    let weights = WeightedIndex::new(nh.bins().iter().map(|b| b.count))
        .map_err(|e| Error::InvalidParameter(format!("unusable noisy counts: {e}")))?;
    Ok((0..m).map(|_| nh.bins()[weights.sample(rng)].category.clone()).collect())
}
