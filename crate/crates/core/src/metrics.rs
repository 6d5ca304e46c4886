//! Fidelity of a release with respect to the true active domain.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::histogram::{Histogram, NoisyHistogram};
use crate::numerics::kahan_sum;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FidelityVariant {
    /// True mass on the shared categories times synthetic mass on them.
    #[default]
    IntersectionMass,
    /// Σ over shared categories of p_true(c)·p_synth(c).
    PointwiseProduct,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityScore {
    pub value: f64,
    pub intersection_size: usize,
    pub true_mass_in_intersection: f64,
    pub synth_mass_in_intersection: f64,
}

/// F = (true mass on I)·(synthetic mass on I), where I is the set of true
/// active categories present in the release and each distribution is
/// normalized over its own support.
///
/// 1 when both releases cover the same categories, 0 when they share none
/// (including an empty release).
pub fn fidelity(true_h: &Histogram, synth: &NoisyHistogram) -> Result<FidelityScore> {
    fidelity_with(true_h, synth, FidelityVariant::IntersectionMass)
}

pub fn fidelity_with(true_h: &Histogram, synth: &NoisyHistogram, variant: FidelityVariant) -> Result<FidelityScore> {
    let true_p = true_h.normalize()?;
    if synth.is_empty() {
        return Ok(FidelityScore {
            value: 0.0,
            intersection_size: 0,
            true_mass_in_intersection: 0.0,
            synth_mass_in_intersection: 0.0,
        });
    }
    let synth_p = synth.normalize()?;

    let active: HashSet<&str> =
        true_p.iter().filter(|(_, p)| *p > 0.0).map(|(c, _)| c.as_str()).collect();
    let shared: HashSet<&str> =
        synth_p.iter().map(|(c, _)| c.as_str()).filter(|c| active.contains(c)).collect();

    let true_mass = kahan_sum(true_p.iter().filter(|(c, _)| shared.contains(c.as_str())).map(|(_, p)| *p));
    let synth_mass = kahan_sum(synth_p.iter().filter(|(c, _)| shared.contains(c.as_str())).map(|(_, p)| *p));
    let value = match variant {
        FidelityVariant::IntersectionMass => true_mass * synth_mass,
        FidelityVariant::PointwiseProduct => {
            let synth_of: std::collections::HashMap<&str, f64> =
                synth_p.iter().map(|(c, p)| (c.as_str(), *p)).collect();
            kahan_sum(
                true_p
                    .iter()
                    .filter(|(c, _)| shared.contains(c.as_str()))
                    .map(|(c, p)| p * synth_of[c.as_str()]),
            )
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("fidelity"));
    }
    Ok(FidelityScore {
        value: value.clamp(0.0, 1.0),
        intersection_size: shared.len(),
        true_mass_in_intersection: true_mass.min(1.0),
        synth_mass_in_intersection: synth_mass.min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::histogram::{Category, NoisyBin, Origin};

    fn noisy(pairs: &[(&str, f64)]) -> NoisyHistogram {
        NoisyHistogram::new(
            pairs
                .iter()
                .map(|(l, c)| NoisyBin { category: Category::new(*l).unwrap(), count: *c, origin: Origin::Active })
                .collect(),
        )
        .unwrap()
    }

    // Straight from the definition, with no shared code.
    fn reference_f(true_pairs: &[(&str, f64)], synth_pairs: &[(&str, f64)]) -> f64 {
        let tt: f64 = true_pairs.iter().map(|p| p.1).sum();
        let st: f64 = synth_pairs.iter().map(|p| p.1).sum();
        let mut tm = 0.0;
        let mut sm = 0.0;
        for (l, c) in true_pairs {
            if *c > 0.0 {
                if let Some((_, s)) = synth_pairs.iter().find(|(sl, _)| sl == l) {
                    tm += c / tt;
                    sm += s / st;
                }
            }
        }
        tm * sm
    }

    #[test]
    fn boundary_cases() {
        let t = Histogram::from_counts([("a", 3.0), ("b", 5.0)]).unwrap();
        assert_eq!(fidelity(&t, &noisy(&[("a", 3.0), ("b", 5.0)])).unwrap().value, 1.0);
        assert_eq!(fidelity(&t, &noisy(&[("a", 30.0), ("b", 1.0)])).unwrap().value, 1.0);
        assert_eq!(fidelity(&t, &noisy(&[("x", 3.0), ("y", 5.0)])).unwrap().value, 0.0);
        let empty = fidelity(&t, &NoisyHistogram::default()).unwrap();
        assert_eq!(empty.value, 0.0);
        assert_eq!(empty.intersection_size, 0);
    }

    #[test]
    fn hand_case() {
        let t = Histogram::from_counts([("a", 1.0), ("b", 1.0)]).unwrap();
        let s = noisy(&[("a", 1.0), ("x", 1.0)]);
        let f = fidelity(&t, &s).unwrap();
        assert_eq!(f.value, 0.25);
        assert_eq!(f.intersection_size, 1);
        assert_eq!(reference_f(&[("a", 1.0), ("b", 1.0)], &[("a", 1.0), ("x", 1.0)]), 0.25);
        // the pointwise reading
        assert_eq!(fidelity_with(&t, &s, FidelityVariant::PointwiseProduct).unwrap().value, 0.25);
        let same = fidelity_with(&t, &noisy(&[("a", 1.0), ("b", 1.0)]), FidelityVariant::PointwiseProduct).unwrap();
        assert_eq!(same.value, 0.5);
    }

    #[test]
    fn zero_total_truth_is_an_error() {
        let t = Histogram::from_counts([("a", 0.0)]).unwrap();
        assert!(fidelity(&t, &noisy(&[("a", 1.0)])).is_err());
    }

    fn arb_pairs(prefix: &'static str) -> impl Strategy<Value = Vec<(String, f64)>> {
        prop::collection::btree_map(0u8..12, 0.5f64..1e4, 1..8)
            .prop_map(move |m| m.into_iter().map(|(k, v)| (format!("{prefix}{k}"), v)).collect())
    }

    proptest! {
        #[test]
        fn bounded_scale_invariant_and_matches_reference(
            t in arb_pairs("c"), s in arb_pairs("c"), scale in 0.01f64..100.0
        ) {
            let th = Histogram::from_counts(t.iter().map(|(l, c)| (l.clone(), *c))).unwrap();
            let s_ref: Vec<(&str, f64)> = s.iter().map(|(l, c)| (l.as_str(), *c)).collect();
            let t_ref: Vec<(&str, f64)> = t.iter().map(|(l, c)| (l.as_str(), *c)).collect();
            let f = fidelity(&th, &noisy(&s_ref)).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.value));
            prop_assert!((f.value - f.true_mass_in_intersection * f.synth_mass_in_intersection).abs() < 1e-15);
            prop_assert!((f.value - reference_f(&t_ref, &s_ref)).abs() < 1e-12);

            let scaled: Vec<(&str, f64)> = s_ref.iter().map(|(l, c)| (*l, c * scale)).collect();
            prop_assert!((fidelity(&th, &noisy(&scaled)).unwrap().value - f.value).abs() < 1e-12);
            let th_scaled = Histogram::from_counts(t.iter().map(|(l, c)| (l.clone(), c * scale))).unwrap();
            prop_assert!((fidelity(&th_scaled, &noisy(&s_ref)).unwrap().value - f.value).abs() < 1e-12);
        }

        #[test]
        fn adding_a_true_category_never_lowers_f(t in arb_pairs("c"), s in arb_pairs("c"), w in 0.5f64..1e4) {
            let th = Histogram::from_counts(t.iter().map(|(l, c)| (l.clone(), *c))).unwrap();
            let s_ref: Vec<(&str, f64)> = s.iter().map(|(l, c)| (l.as_str(), *c)).collect();
            let before = fidelity(&th, &noisy(&s_ref)).unwrap().value;
            if let Some((missing, _)) = t.iter().find(|(l, _)| !s.iter().any(|(sl, _)| sl == l)) {
                let mut more = s_ref.clone();
                more.push((missing.as_str(), w));
                let after = fidelity(&th, &noisy(&more)).unwrap().value;
                prop_assert!(after >= before - 1e-12, "{after} < {before}");
            }
        }
    }
}
