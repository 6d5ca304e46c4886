//! Value types shared by the mechanism, the metrics and the file formats.
//!
//! Everything here is immutable after construction and free of randomness.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// An opaque, non-empty category label. Equality is exact byte equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Category(String);

impl Category {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::EmptyLabel);
        }
        Ok(Category(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(label: String) -> Result<Self> {
        Category::new(label)
    }
}

impl TryFrom<&str> for Category {
    type Error = Error;

    fn try_from(label: &str) -> Result<Self> {
        Category::new(label)
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.0
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for Category {
    fn borrow(&self) -> &str {
        &self.0
    }
}

fn check_unique<'a>(labels: impl Iterator<Item = &'a Category>) -> Result<()> {
    let mut seen = HashSet::new();
    for c in labels {
        if !seen.insert(c) {
            return Err(Error::DuplicateCategory(c.0.clone()));
        }
    }
    Ok(())
}

/// The true histogram of one column: distinct categories with real,
/// non-negative counts, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Histogram {
    bins: Vec<(Category, f64)>,
}

impl Histogram {
    pub fn new(bins: Vec<(Category, f64)>) -> Result<Self> {
        for (c, count) in &bins {
            if !count.is_finite() || *count < 0.0 {
                return Err(Error::InvalidCount { label: c.0.clone(), count: *count });
            }
        }
        check_unique(bins.iter().map(|(c, _)| c))?;
        Ok(Histogram { bins })
    }

    /// Convenience constructor from `(label, count)` pairs.
    pub fn from_counts<L, I>(pairs: I) -> Result<Self>
    where
        L: Into<String>,
        I: IntoIterator<Item = (L, f64)>,
    {
        let bins = pairs
            .into_iter()
            .map(|(l, c)| Category::new(l).map(|cat| (cat, c)))
            .collect::<Result<Vec<_>>>()?;
        Histogram::new(bins)
    }

    pub fn empty() -> Self {
        Histogram::default()
    }

    pub fn bins(&self) -> &[(Category, f64)] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().map(|(_, c)| c).sum()
    }

    pub fn count_of(&self, label: &str) -> Option<f64> {
        self.bins.iter().find(|(c, _)| c.as_str() == label).map(|(_, n)| *n)
    }

    /// Categories with a strictly positive count.
    pub fn active_domain(&self) -> BTreeSet<Category> {
        self.bins.iter().filter(|(_, n)| *n > 0.0).map(|(c, _)| c.clone()).collect()
    }

    /// Probability vector proportional to the counts, in bin order.
    pub fn normalize(&self) -> Result<Vec<(Category, f64)>> {
        normalize_weights(self.bins.iter().map(|(c, n)| (c, *n)))
    }
}

pub(crate) fn normalize_weights<'a>(
    weights: impl Iterator<Item = (&'a Category, f64)> + Clone,
) -> Result<Vec<(Category, f64)>> {
    let total = numerics::kahan_sum(weights.clone().map(|(_, w)| w));
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    Ok(weights.map(|(c, w)| (c.clone(), w / total)).collect())
}

/// Privacy budget ε and the tolerance ρ for releasing zero random bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    epsilon: f64,
    rho: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie strictly between 0 and 1, got {rho}")));
        }
        Ok(PrivacyParams { epsilon, rho })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The threshold for a domain of `n` categories; fails when ρ^(1/n) < ½.
    pub fn tau(&self, n: u64) -> Result<f64> {
        numerics::tau(self.epsilon, self.rho, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Observed in the input and survived the threshold.
    Active,
    /// Drawn from the global domain outside the active domain.
    Injected,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Active => "active",
            Origin::Injected => "injected",
        }
    }
}

impl std::str::FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "active" => Ok(Origin::Active),
            "injected" => Ok(Origin::Injected),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyBin {
    pub category: Category,
    pub count: f64,
    pub origin: Origin,
}

/// Provenance of a release.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReleaseMeta {
    pub epsilon: f64,
    pub rho: f64,
    pub n: u64,
    pub tau: f64,
    pub seed: u64,
    /// Active bins dropped for falling below τ.
    pub removed: usize,
}

/// A released histogram: surviving active bins followed by injected bins.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoisyHistogram {
    bins: Vec<NoisyBin>,
    meta: Option<ReleaseMeta>,
}

impl NoisyHistogram {
    pub fn new(bins: Vec<NoisyBin>) -> Result<Self> {
        for b in &bins {
            if !(b.count > 0.0 && b.count.is_finite()) {
                return Err(Error::InvalidCount { label: b.category.0.clone(), count: b.count });
            }
        }
        check_unique(bins.iter().map(|b| &b.category))?;
        Ok(NoisyHistogram { bins, meta: None })
    }

    pub fn with_meta(mut self, meta: ReleaseMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn bins(&self) -> &[NoisyBin] {
        &self.bins
    }

    pub fn meta(&self) -> Option<&ReleaseMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn count_of(&self, label: &str) -> Option<f64> {
        self.bins.iter().find(|b| b.category.as_str() == label).map(|b| b.count)
    }

    pub fn injected_count(&self) -> usize {
        self.bins.iter().filter(|b| b.origin == Origin::Injected).count()
    }

    pub fn active_count(&self) -> usize {
        self.bins.iter().filter(|b| b.origin == Origin::Active).count()
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.bins.iter().map(|b| &b.category)
    }

    pub fn normalize(&self) -> Result<Vec<(Category, f64)>> {
        normalize_weights(self.bins.iter().map(|b| (&b.category, b.count)))
    }

    /// Drops provenance, keeping labels and noisy counts.
    pub fn to_histogram(&self) -> Histogram {
        Histogram { bins: self.bins.iter().map(|b| (b.category.clone(), b.count)).collect() }
    }
}
