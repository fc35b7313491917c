//! Goodness-of-fit helpers for checking samplers against exact laws.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Bins whose expected count falls below this are pooled.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit test of `observed` counts against probabilities
/// `expected` (same length, summing to 1). Bins with expected count below
/// [`MIN_EXPECTED_COUNT`] are pooled into one bin; observations outside the
/// listed bins belong in a final `expected = 0` entry and make the
/// statistic infinite.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), expected.len(), "bin counts differ");
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        let e = p * total;
        if e >= MIN_EXPECTED_COUNT {
            bins.push((o as f64, e));
        } else {
            pooled.0 += o as f64;
            pooled.1 += e;
        }
    }
    if pooled.0 > 0.0 || pooled.1 > 0.0 {
        bins.push(pooled);
    }
    let mut statistic = 0.0;
    for &(o, e) in &bins {
        statistic += if e > 0.0 {
            (o - e) * (o - e) / e
        } else if o > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let dof = bins.len().saturating_sub(1);
    let p_value = if !statistic.is_finite() {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

/// Chi-square test of a tally of outcomes against an exact law given as a
/// map; outcomes missing from the law count as impossible.
pub fn chi_square_against<K: Ord + Clone>(
    counts: &BTreeMap<K, u64>,
    law: &BTreeMap<K, f64>,
) -> ChiSquare {
    let mut observed: Vec<u64> = law
        .keys()
        .map(|k| counts.get(k).copied().unwrap_or(0))
        .collect();
    let mut expected: Vec<f64> = law.values().copied().collect();
    let stray: u64 = counts
        .iter()
        .filter(|(k, _)| !law.contains_key(k))
        .map(|(_, c)| c)
        .sum();
    observed.push(stray);
    expected.push(0.0);
    chi_square_gof(&observed, &expected)
}

/// Total-variation distance between two empirical laws.
pub fn total_variation<K: Ord>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let fa = |k: &K| a.get(k).map_or(0.0, |&c| c as f64 / na.max(1) as f64);
    let fb = |k: &K| b.get(k).map_or(0.0, |&c| c as f64 / nb.max(1) as f64);
    let keys: std::collections::BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    0.5 * keys.into_iter().map(|k| (fa(k) - fb(k)).abs()).sum::<f64>()
}

/// Tally of items.
pub fn tally<K: Ord, I: IntoIterator<Item = K>>(items: I) -> BTreeMap<K, u64> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_reference_value() {
        // Statistic 2.0 on 3 degrees of freedom: upper tail 0.5724067.
        let r = chi_square_gof(&[30, 20, 25, 25], &[0.25; 4]);
        assert_eq!(r.dof, 3);
        assert!((r.statistic - 2.0).abs() < 1e-12);
        assert!((r.p_value - 0.572_406_7).abs() < 1e-6);
    }

    #[test]
    fn impossible_observations_fail() {
        let law: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        let counts = tally([0u8, 1, 1, 0, 2].into_iter().cycle().take(100));
        assert_eq!(chi_square_against(&counts, &law).p_value, 0.0);
    }

    #[test]
    fn pooling_small_bins() {
        let r = chi_square_gof(&[50, 48, 1, 1], &[0.5, 0.48, 0.01, 0.01]);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn total_variation_values() {
        let a = tally([1, 1, 2, 2]);
        let b = tally([1, 1, 1, 3]);
        assert!((total_variation(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
