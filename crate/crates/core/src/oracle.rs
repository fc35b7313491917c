//! Brute-force enumeration of truncated per-index outcome spaces and the
//! probability oracle built on it.
//!
//! The oracle never uses the probability formulas: it runs the generative
//! construction over every tuple of per-index outcomes and sums the mass of
//! the tuples whose assembled allocation equals the target.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::alloc::TraitAllocation;
use crate::error::{Error, Result};
use crate::model::{
    assemble, ConstraintSet, DeFinettiMeasure, FrequencyModel, Outcome, TruncationCaps,
};

/// Guard on the size of an exhaustive N-fold product.
pub const MAX_ENUMERATED_TUPLES: u128 = 50_000_000;

/// `P(Poisson(rate) = k)`.
pub fn poisson_pmf(rate: f64, k: usize) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut p = (-rate).exp();
    for i in 1..=k {
        p *= rate / i as f64;
    }
    p
}

/// `P(Poisson(rate) ≤ d)`.
pub fn poisson_cdf(rate: f64, d: usize) -> f64 {
    (0..=d).map(|k| poisson_pmf(rate, k)).sum::<f64>().min(1.0)
}

/// Truncated per-index outcome law.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSpace {
    /// Every outcome with positive probability under the caps.
    pub outcomes: Vec<(Outcome, f64)>,
    /// Probability of the outcomes cut off by the dust cap.
    pub deficit: f64,
}

/// Lists every per-index outcome `(ξ, ξ')` with `ξ_k ≤ J` and `ξ'_j ≤ D`
/// together with `Π_k θ_{k,ξ_k} · Π_j Pois(θ'_j)(ξ'_j)`. Zero-probability
/// outcomes are omitted.
pub fn enumerate_membership_outcomes(
    model: &FrequencyModel,
    caps: &TruncationCaps,
) -> Result<OutcomeSpace> {
    caps.check(model)?;
    let mut partial: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for k in 1..=model.columns() {
        let mut next = Vec::new();
        for (xi, p) in &partial {
            for j in 0..=caps.max_multiplicity {
                let q = model.theta(k, j);
                if q > 0.0 {
                    let mut xi = xi.clone();
                    xi.push(j);
                    next.push((xi, p * q));
                }
            }
        }
        partial = next;
    }
    let mut outcomes: Vec<(Outcome, f64)> = partial
        .into_iter()
        .map(|(xi, p)| (Outcome::new(xi, Vec::new()), p))
        .collect();
    let mut kept = 1.0;
    for j in 1..=model.dust_levels() {
        let rate = model.dust_rate(j);
        let mut next = Vec::new();
        for (o, p) in &outcomes {
            for d in 0..=caps.max_dust {
                let q = poisson_pmf(rate, d);
                if q > 0.0 {
                    let mut o = o.clone();
                    o.dust.push(d);
                    next.push((o, p * q));
                }
            }
        }
        outcomes = next;
        kept *= poisson_cdf(rate, caps.max_dust);
    }
    Ok(OutcomeSpace {
        outcomes,
        deficit: (1.0 - kept).max(0.0),
    })
}

/// Truncated product measure of a frequency model, renormalized, with the
/// removed mass.
pub fn product_measure(
    model: &FrequencyModel,
    caps: &TruncationCaps,
) -> Result<(DeFinettiMeasure, f64)> {
    let space = enumerate_membership_outcomes(model, caps)?;
    Ok((DeFinettiMeasure::normalized(space.outcomes)?, space.deficit))
}

/// Counts of singleton traits `{n, …, n}` (multiplicity `j`), keyed `(n, j)`.
pub(crate) fn singleton_counts(t: &TraitAllocation) -> BTreeMap<(usize, usize), usize> {
    t.iter()
        .filter_map(|(tr, c)| tr.singleton().map(|nj| (nj, c)))
        .collect()
}

/// Whether no outcome tuple producing `t` exceeds the dust cap, so the
/// truncated oracle value of `t` is exact.
pub fn is_exact_under_caps(t: &TraitAllocation, caps: &TruncationCaps) -> bool {
    singleton_counts(t).values().all(|&c| c <= caps.max_dust)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableEntry {
    pub probability: f64,
    /// The value is unaffected by truncation.
    pub exact: bool,
}

/// Probability table over the allocations of `[N]` reachable under caps.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    horizon: usize,
    entries: BTreeMap<TraitAllocation, TableEntry>,
    deficit: f64,
}

impl ProbabilityTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Upper bound on the total mass missing from the table.
    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Probability of `t`; zero when unreachable.
    pub fn get(&self, t: &TraitAllocation) -> f64 {
        self.entries.get(t).map_or(0.0, |e| e.probability)
    }

    pub fn entry(&self, t: &TraitAllocation) -> Option<&TableEntry> {
        self.entries.get(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TraitAllocation, &TableEntry)> {
        self.entries.iter()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().map(|e| e.probability).sum()
    }

    /// Law conditioned on every index having an admissible profile. The
    /// deficit is carried over unchanged as a bound on the unconditioned
    /// missing mass.
    pub fn condition(&self, c: &ConstraintSet) -> Result<ProbabilityTable> {
        let kept: BTreeMap<_, _> = self
            .entries
            .iter()
            .filter(|(t, _)| c.admits(t))
            .map(|(t, e)| (t.clone(), *e))
            .collect();
        let z: f64 = kept.values().map(|e| e.probability).sum();
        if z <= 0.0 {
            return Err(Error::DegenerateConstraint);
        }
        Ok(ProbabilityTable {
            horizon: self.horizon,
            entries: kept
                .into_iter()
                .map(|(t, e)| {
                    (
                        t,
                        TableEntry {
                            probability: e.probability / z,
                            exact: e.exact,
                        },
                    )
                })
                .collect(),
            deficit: self.deficit,
        })
    }

    /// `allocation,probability,exact` rows in canonical order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["allocation", "probability", "exact"])
            .expect("writing to memory");
        for (t, e) in &self.entries {
            w.write_record([
                t.to_string(),
                e.probability.to_string(),
                e.exact.to_string(),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 output")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "horizon": self.horizon,
            "deficit": self.deficit,
            "entries": self.entries.iter().map(|(t, e)| serde_json::json!({
                "allocation": t.to_string(),
                "probability": e.probability,
                "exact": e.exact,
            })).collect::<Vec<_>>(),
        })
    }
}

fn check_product_size(per_index: &[usize]) -> Result<()> {
    let mut total: u128 = 1;
    for &s in per_index {
        total = total.saturating_mul(s as u128);
    }
    if total > MAX_ENUMERATED_TUPLES {
        return Err(Error::CapsExceeded(format!(
            "{total} outcome tuples exceed the enumeration limit {MAX_ENUMERATED_TUPLES}"
        )));
    }
    Ok(())
}

/// Calls `visit` with every tuple `(o_1, …, o_N)`, `o_n ∈ choices[n]`, and the
/// product of the probabilities.
fn for_each_tuple(choices: &[Vec<&(Outcome, f64)>], mut visit: impl FnMut(&[Outcome], f64)) {
    fn rec(
        choices: &[Vec<&(Outcome, f64)>],
        depth: usize,
        current: &mut Vec<Outcome>,
        p: f64,
        visit: &mut dyn FnMut(&[Outcome], f64),
    ) {
        if depth == choices.len() {
            visit(current, p);
            return;
        }
        for (o, q) in &choices[depth] {
            current.push(o.clone());
            rec(choices, depth + 1, current, p * q, visit);
            current.pop();
        }
    }
    rec(choices, 0, &mut Vec::new(), 1.0, &mut visit);
}

fn table_from_atoms(
    atoms: &[(Outcome, f64)],
    n: usize,
    deficit_per_index: f64,
    exact: impl Fn(&TraitAllocation) -> bool,
) -> Result<ProbabilityTable> {
    let positive: Vec<&(Outcome, f64)> = atoms.iter().filter(|(_, p)| *p > 0.0).collect();
    let choices = vec![positive; n];
    check_product_size(&choices.iter().map(Vec::len).collect::<Vec<_>>())?;
    let mut entries: BTreeMap<TraitAllocation, TableEntry> = BTreeMap::new();
    for_each_tuple(&choices, |outcomes, p| {
        let t = assemble(outcomes);
        let e = entries.entry(t).or_insert(TableEntry {
            probability: 0.0,
            exact: true,
        });
        e.probability += p;
    });
    for (t, e) in entries.iter_mut() {
        e.exact = exact(t);
    }
    Ok(ProbabilityTable {
        horizon: n,
        entries,
        deficit: 1.0 - (1.0 - deficit_per_index).powi(n as i32),
    })
}

/// Complete table of `P(T_N = t)` over the truncated outcome space; the
/// probabilities sum to `1 − deficit`.
pub fn enumerate_support(
    model: &FrequencyModel,
    n: usize,
    caps: &TruncationCaps,
) -> Result<ProbabilityTable> {
    let space = enumerate_membership_outcomes(model, caps)?;
    table_from_atoms(&space.outcomes, n, space.deficit, |t| {
        space.deficit == 0.0 || is_exact_under_caps(t, caps)
    })
}

/// Complete table of `P(T_N = t)` for a de Finetti measure with finite support.
pub fn enumerate_support_definetti(mu: &DeFinettiMeasure, n: usize) -> Result<ProbabilityTable> {
    table_from_atoms(mu.atoms(), n, 0.0, |_| true)
}

/// Oracle value with its truncation contract.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleValue {
    pub probability: f64,
    /// Upper bound on `|true value − probability|`.
    pub error_bound: f64,
    /// Some outcome tuple producing `t` lies beyond the dust cap.
    pub caps_exceeded: bool,
}

/// Sum of `Π_n p(o_n)` over outcome tuples assembling to `t`. Only outcomes
/// whose membership profile equals that of index `n` in `t` can contribute
/// at index `n`; the others are skipped.
fn oracle_sum(atoms: &[(Outcome, f64)], t: &TraitAllocation) -> Result<f64> {
    let n = t.horizon();
    let choices: Vec<Vec<&(Outcome, f64)>> = (1..=n)
        .map(|i| {
            let target = t.memb(i);
            atoms
                .iter()
                .filter(|(o, p)| *p > 0.0 && o.membership_profile() == target)
                .collect()
        })
        .collect();
    check_product_size(&choices.iter().map(Vec::len).collect::<Vec<_>>())?;
    let mut total = 0.0;
    for_each_tuple(&choices, |outcomes, p| {
        if assemble(outcomes) == *t {
            total += p;
        }
    });
    Ok(total)
}

/// `P(T_N = t)` under a frequency model by direct outcome enumeration,
/// `N = t.horizon()`.
pub fn oracle_prob_frequency(
    model: &FrequencyModel,
    t: &TraitAllocation,
    caps: &TruncationCaps,
) -> Result<OracleValue> {
    let space = enumerate_membership_outcomes(model, caps)?;
    let probability = oracle_sum(&space.outcomes, t)?;
    let exact = space.deficit == 0.0 || is_exact_under_caps(t, caps);
    Ok(OracleValue {
        probability,
        error_bound: if exact {
            0.0
        } else {
            1.0 - (1.0 - space.deficit).powi(t.horizon() as i32)
        },
        caps_exceeded: !exact,
    })
}

/// `P(T_N = t)` under a de Finetti measure, `N = t.horizon()`.
pub fn oracle_prob_definetti(mu: &DeFinettiMeasure, t: &TraitAllocation) -> Result<f64> {
    oracle_sum(mu.atoms(), t)
}
