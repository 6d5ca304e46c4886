//! Distributional checks of the numerics samplers against closed forms.

use cathist::numerics::{
    inclusion_prob, log_prob_zero, sample_laplace, sample_num_injected_bins, sample_shifted_exp, seeded_rng, tau,
};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn laplace_moments() {
    let mut rng = seeded_rng(100);
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_laplace(&mut rng, 0.0, 1.0)).collect();
    let (mean, var) = mean_var(&xs);
    assert!(mean.abs() < 0.005, "mean {mean}");
    assert!((var - 2.0).abs() < 0.05, "variance {var}");
}

#[test]
fn laplace_tail_is_the_inclusion_probability() {
    let mut rng = seeded_rng(101);
    let runs = 1_000_000;
    for (epsilon, threshold) in [(1.0, 2.0), (0.1, 15.0), (2.0, 0.0)] {
        let hits = (0..runs).filter(|_| sample_laplace(&mut rng, 0.0, 1.0 / epsilon) >= threshold).count();
        let p = inclusion_prob(epsilon, threshold).unwrap();
        let sigma = (p * (1.0 - p) / runs as f64).sqrt();
        let freq = hits as f64 / runs as f64;
        assert!((freq - p).abs() < 3.0 * sigma, "eps {epsilon} tau {threshold}: {freq} vs {p}");
    }
}

#[test]
fn shifted_exponential_means() {
    let mut rng = seeded_rng(102);
    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_shifted_exp(&mut rng, 2.0, 0.0)).collect();
    let (mean, _) = mean_var(&xs);
    assert!((mean - 0.5).abs() < 0.002, "{mean}");

    let xs: Vec<f64> = (0..1_000_000).map(|_| sample_shifted_exp(&mut rng, 1.0, 13.6)).collect();
    assert!(xs.iter().all(|x| *x >= 13.6));
    let (mean, _) = mean_var(&xs);
    assert!((mean - 14.6).abs() < 0.004, "{mean}");
}

fn chi_square_against_pmf(n: u64, p: f64, draws: usize, seed: u64) {
    let mut rng = seeded_rng(seed);
    let mut observed = vec![0u64; n as usize + 1];
    for _ in 0..draws {
        observed[sample_num_injected_bins(&mut rng, n, p).unwrap() as usize] += 1;
    }
    let exact = Binomial::new(p, n).unwrap();
    let expected: Vec<f64> = (0..=n).map(|k| exact.pmf(k) * draws as f64).collect();

    // pool outcomes until each cell expects at least 5
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for k in 0..=n as usize {
        e_acc += expected[k];
        o_acc += observed[k] as f64;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    if cells.len() < 2 {
        return;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let critical = ChiSquared::new((cells.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "n={n} p={p}: chi2 {stat} >= {critical} on {} cells", cells.len());
}

#[test]
fn binomial_matches_exact_pmf_on_small_cases() {
    let cases = [(1, 0.3), (5, 0.5), (10, 0.05), (20, 0.2), (30, 0.01), (30, 0.45), (25, 0.9), (12, 0.7)];
    for (i, (n, p)) in cases.into_iter().enumerate() {
        chi_square_against_pmf(n, p, 100_000, 200 + i as u64);
    }
}

#[test]
fn binomial_mean_in_the_huge_domain_regime() {
    let n = 29_400_000_000u64;
    let p = inclusion_prob(1.0, tau(1.0, 0.5, n).unwrap()).unwrap();
    assert!((n as f64 * p - std::f64::consts::LN_2).abs() < 1e-9);
    let mut rng = seeded_rng(300);
    let draws = 100_000;
    let total: u64 = (0..draws).map(|_| sample_num_injected_bins(&mut rng, n, p).unwrap()).sum();
    let mean = total as f64 / draws as f64;
    assert!((mean - 0.693).abs() < 0.01, "{mean}");
}

#[test]
fn binomial_zero_fraction_is_rho() {
    let n = 171_000u64;
    let p = inclusion_prob(1.0, tau(1.0, 0.9, n).unwrap()).unwrap();
    let mut rng = seeded_rng(301);
    let draws = 100_000;
    let zeros = (0..draws).filter(|_| sample_num_injected_bins(&mut rng, n, p).unwrap() == 0).count();
    let frac = zeros as f64 / draws as f64;
    assert!((frac - 0.9).abs() < 0.01, "{frac}");
}

#[test]
fn binomial_handles_moderate_expected_counts() {
    // n·p = 5000: P(0) = e^-5000 underflows, the walk must still land near the mean
    let n = 1u64 << 50;
    let p = 5000.0 / n as f64;
    let mut rng = seeded_rng(302);
    let draws = 2000;
    let xs: Vec<f64> = (0..draws).map(|_| sample_num_injected_bins(&mut rng, n, p).unwrap() as f64).collect();
    let (mean, var) = mean_var(&xs);
    assert!((mean - 5000.0).abs() < 4.0 * (5000.0f64 / draws as f64).sqrt(), "{mean}");
    assert!((var / 5000.0 - 1.0).abs() < 0.15, "{var}");
}

proptest! {
    #[test]
    fn tau_round_trip(epsilon in 1e-3f64..10.0, rho in 1e-6f64..0.999_999, log_n in 0.0f64..12.0, jitter in 0u64..1000) {
        let n = 10f64.powf(log_n) as u64 + jitter + 1;
        prop_assume!(rho.ln() / n as f64 >= -std::f64::consts::LN_2);
        let t = tau(epsilon, rho, n).unwrap();
        prop_assert!(t >= 0.0 && t.is_finite());
        let p = inclusion_prob(epsilon, t).unwrap();
        let rho_back = log_prob_zero(n, p).exp();
        prop_assert!(((rho_back - rho) / rho).abs() < 1e-9, "{rho_back} vs {rho}");
    }

    #[test]
    fn samplers_reproduce_from_seed(seed in any::<u64>()) {
        let run = |seed| {
            let mut rng = seeded_rng(seed);
            let a = sample_laplace(&mut rng, 3.0, 0.5);
            let b = sample_shifted_exp(&mut rng, 0.7, 1.0);
            let c = sample_num_injected_bins(&mut rng, 1 << 40, 3.0 / (1u64 << 40) as f64).unwrap();
            let d: u32 = rng.gen();
            (a, b, c, d)
        };
        prop_assert_eq!(run(seed), run(seed));
    }
}
