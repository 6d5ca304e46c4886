//! Closed-form threshold quantities and the samplers the mechanism draws from.
//!
//! The domain sizes of interest reach 10^10 and beyond, where `1 - ρ^(1/n)`
//! evaluated directly cancels to zero. Every quantity here goes through
//! `expm1`/`log1p` instead. All randomness comes from a caller-supplied
//! generator; [`seeded_rng`] and [`derive_seed`] give reproducible streams.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reproducible generator used throughout the crate.
pub type SeededRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stable seed for the stream at `path` below `base`.
///
/// The result depends only on the values, never on call order, so adding
/// streams elsewhere leaves existing ones untouched.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"cathist-seed-v1");
    hasher.update(base.to_le_bytes());
    for p in path {
        hasher.update(p.to_le_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Upper bound on n·p accepted by [`sample_num_injected_bins`].
pub const MAX_EXPECTED_BINS: f64 = 1e6;

/// Noisy-count threshold τ such that a domain of `n` empty bins, each given
/// Laplace(0, 1/ε) noise, has probability ρ of no bin reaching τ.
///
/// τ = −(1/ε)·ln(−2·expm1(ln(ρ)/n)); defined only while ρ^(1/n) ≥ ½.
pub fn tau(epsilon: f64, rho: f64, n: u64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie strictly between 0 and 1, got {rho}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("domain size must be at least 1".into()));
    }
    let log_root = rho.ln() / n as f64;
    if log_root < -std::f64::consts::LN_2 {
        return Err(Error::TauUndefined { rho, n, root: log_root.exp() });
    }
    // 2(1 − ρ^(1/n)) ∈ (0, 1]
    let twice_gap = -2.0 * log_root.exp_m1();
    let t = -twice_gap.ln() / epsilon;
    if !t.is_finite() {
        return Err(Error::NonFinite("tau"));
    }
    // mathematically non-negative under the gate; clear −0.0 and rounding dust
    Ok(if t > 0.0 { t } else { 0.0 })
}

/// Probability ½·e^(−ετ) that Laplace(0, 1/ε) noise reaches τ ≥ 0.
pub fn inclusion_prob(epsilon: f64, tau: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 || tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inclusion probability needs epsilon > 0 and tau >= 0, got epsilon = {epsilon}, tau = {tau}"
        )));
    }
    Ok(0.5 * (-epsilon * tau).exp())
}

/// ln P(no success in `n` trials of probability `p`) = n·log1p(−p).
pub fn log_prob_zero(n: u64, p: f64) -> f64 {
    n as f64 * (-p).ln_1p()
}

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Compensated summation.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// One draw from Laplace(location, scale) by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, location: f64, scale: f64) -> f64 {
    debug_assert!(scale > 0.0);
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        // u = −½ maps to an infinite sample
        if u > -0.5 {
            return location - scale * u.signum() * (-2.0 * u.abs()).ln_1p();
        }
    }
}

/// τ plus an Exp(ε) draw: the law of Laplace(0, 1/ε) noise given that it
/// reached τ ≥ 0. Always strictly greater than τ.
pub fn sample_shifted_exp<R: Rng + ?Sized>(rng: &mut R, epsilon: f64, tau: f64) -> f64 {
    debug_assert!(epsilon > 0.0 && tau >= 0.0);
    let u: f64 = rng.sample(Open01);
    tau - u.ln() / epsilon
}

/// Binomial(n, p) draw by sequential inversion in log space.
///
/// Walks k = 0, 1, … accumulating the log CDF until it passes ln U. P(0) is
/// computed as n·log1p(−p) and later terms by the ratio recurrence
/// P(k+1)/P(k) = ((n−k)/(k+1))·(p/(1−p)), so nothing underflows even when
/// P(0) itself is unrepresentable. Expected cost is O(n·p).
pub fn sample_num_injected_bins<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidParameter("binomial trials must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("binomial probability must lie in [0, 1), got {p}")));
    }
    if p == 0.0 {
        return Ok(0);
    }
    let expected = n as f64 * p;
    if expected > MAX_EXPECTED_BINS {
        return Err(Error::OutOfEnvelope { n, p, expected, limit: MAX_EXPECTED_BINS });
    }

    let log_u = rng.sample::<f64, _>(Open01).ln();
    let log_odds = p.ln() - (-p).ln_1p();
    let trials = n as f64;
    let mut k: u64 = 0;
    let mut log_pmf = log_prob_zero(n, p);
    let mut log_cdf = log_pmf;
    while log_cdf < log_u {
        if k == n {
            break;
        }
        log_pmf += ((trials - k as f64) / (k as f64 + 1.0)).ln() + log_odds;
        k += 1;
        let next = log_add_exp(log_cdf, log_pmf);
        // Past the mode with terms no longer moving the sum: the remaining
        // mass is below rounding, so U fell into the representational gap.
        if next == log_cdf && k as f64 > expected {
            break;
        }
        log_cdf = next;
    }
    Ok(k)
}
