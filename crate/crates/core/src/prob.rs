//! Closed-form probability functions of frequency models and their
//! constrained versions, plus support checks for de Finetti measures.
//!
//! `etpf_prob` evaluates `P(T_N = t)` by splitting the singleton traits of
//! `t` into dust and regular copies, scoring the dust counts with Poisson
//! factors, and matching the remaining regular traits to columns with a
//! dynamic program over columns. It shares no code with the oracle.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::alloc::{Trait, TraitAllocation};
use crate::error::{Error, Result};
use crate::model::{ConstraintSet, DeFinettiMeasure, FrequencyModel, Outcome, TruncationCaps};
use crate::oracle::{poisson_cdf, poisson_pmf, singleton_counts};
use crate::profile::MembershipProfile;

/// Tolerance on `w_0 + Σ w_k = 1` for partition weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// `log(e^a + e^b)` with `-∞` as the additive identity.
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `log P(column k generates exactly τ)` at horizon `n`.
fn column_log_prob(model: &FrequencyModel, k: usize, tau: Option<&Trait>, n: usize) -> f64 {
    let absent = n - tau.map_or(0, Trait::support_len);
    let mut lp = if absent > 0 {
        absent as f64 * ln(model.theta(k, 0))
    } else {
        0.0
    };
    if let Some(tau) = tau {
        for &(_, m) in tau.entries() {
            lp += ln(model.theta(k, m));
        }
    }
    lp
}

/// `log P(the nonempty column traits form exactly the multiset `regular`)`.
fn regular_log_prob(model: &FrequencyModel, regular: &[(Trait, usize)], n: usize) -> f64 {
    let total: usize = regular.iter().map(|(_, c)| c).sum();
    let k_max = model.columns();
    if total > k_max {
        return f64::NEG_INFINITY;
    }
    // State: remaining copies per distinct trait.
    let mut states: HashMap<Vec<usize>, f64> = HashMap::new();
    states.insert(regular.iter().map(|(_, c)| *c).collect(), 0.0);
    for k in 1..=k_max {
        let columns_left = k_max - k + 1;
        let empty = column_log_prob(model, k, None, n);
        let traits: Vec<f64> = regular
            .iter()
            .map(|(t, _)| column_log_prob(model, k, Some(t), n))
            .collect();
        let mut next: HashMap<Vec<usize>, f64> = HashMap::new();
        for (state, lp) in states {
            let remaining: usize = state.iter().sum();
            if remaining > columns_left {
                continue;
            }
            if remaining < columns_left {
                let e = next.entry(state.clone()).or_insert(f64::NEG_INFINITY);
                *e = log_add(*e, lp + empty);
            }
            for (i, &c) in state.iter().enumerate() {
                if c > 0 && traits[i] > f64::NEG_INFINITY {
                    let mut s = state.clone();
                    s[i] -= 1;
                    let e = next.entry(s).or_insert(f64::NEG_INFINITY);
                    *e = log_add(*e, lp + traits[i]);
                }
            }
        }
        states = next;
    }
    states
        .get(&vec![0; regular.len()])
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

/// `log P(T_N = t)` under `model`, with `N = t.horizon()`.
pub fn etpf_log_prob(model: &FrequencyModel, t: &TraitAllocation) -> f64 {
    let n = t.horizon();
    if t.max_multiplicity() > model.max_level().max(model.dust_levels()) {
        return f64::NEG_INFINITY;
    }
    let singles = singleton_counts(t);
    let keys: Vec<(usize, usize)> = singles.keys().copied().collect();
    let non_singleton: Vec<(Trait, usize)> = t
        .iter()
        .filter(|(tr, _)| tr.support_len() > 1)
        .map(|(tr, c)| (tr.clone(), c))
        .collect();

    // Dust factor for indices and levels with no singleton trait.
    let mut base = 0.0;
    for j in 1..=model.dust_levels() {
        let free = n - keys.iter().filter(|&&(_, lj)| lj == j).count();
        base += free as f64 * -model.dust_rate(j);
    }

    // Enumerate the dust count d ≤ c of every singleton trait.
    let mut total = f64::NEG_INFINITY;
    let mut d = vec![0usize; keys.len()];
    loop {
        let mut lp = base;
        let mut regular = non_singleton.clone();
        for (i, &(idx, j)) in keys.iter().enumerate() {
            lp += ln(poisson_pmf(model.dust_rate(j), d[i]));
            let c = singles[&(idx, j)];
            if c > d[i] {
                regular.push((Trait::from_sorted_unchecked(vec![(idx, j)]), c - d[i]));
            }
        }
        if lp > f64::NEG_INFINITY {
            total = log_add(total, lp + regular_log_prob(model, &regular, n));
        }
        // Odometer step.
        let mut pos = 0;
        loop {
            if pos == keys.len() {
                return total;
            }
            if d[pos] < singles[&keys[pos]] {
                d[pos] += 1;
                break;
            }
            d[pos] = 0;
            pos += 1;
        }
    }
}

/// `P(T_N = t)` under `model`: `κ(t) · p(N, mult(t))`.
pub fn etpf_prob(model: &FrequencyModel, t: &TraitAllocation) -> f64 {
    etpf_log_prob(model, t).exp()
}

/// Per-index acceptance probability with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Acceptance {
    pub probability: f64,
    pub error_bound: f64,
}

/// `a = P(membership profile of one index ∈ C)`.
pub fn acceptance_prob(
    model: &FrequencyModel,
    c: &ConstraintSet,
    caps: &TruncationCaps,
) -> Result<Acceptance> {
    if c.is_all() {
        return Ok(Acceptance {
            probability: 1.0,
            error_bound: 0.0,
        });
    }
    caps.check(model)?;
    let bound = c.max_profile_size();
    let fits = |p: &MembershipProfile| bound.is_none_or(|b| p.len() <= b);
    let mut states: BTreeMap<MembershipProfile, f64> = BTreeMap::new();
    states.insert(MembershipProfile::empty(), 1.0);
    for k in 1..=model.columns() {
        let mut next = BTreeMap::new();
        for (p, q) in &states {
            for j in 0..=caps.max_multiplicity {
                let r = model.theta(k, j);
                if r > 0.0 {
                    let mut p = p.clone();
                    p.add(j, 1);
                    if fits(&p) {
                        *next.entry(p).or_insert(0.0) += q * r;
                    }
                }
            }
        }
        states = next;
    }
    let mut kept = 1.0;
    for j in 1..=model.dust_levels() {
        let rate = model.dust_rate(j);
        let mut next = BTreeMap::new();
        for (p, q) in &states {
            for d in 0..=caps.max_dust {
                let r = poisson_pmf(rate, d);
                if r > 0.0 {
                    let mut p = p.clone();
                    p.add(j, d);
                    if fits(&p) {
                        *next.entry(p).or_insert(0.0) += q * r;
                    }
                }
            }
        }
        states = next;
        kept *= poisson_cdf(rate, caps.max_dust);
    }
    let probability = states
        .iter()
        .filter(|(p, _)| c.contains(p))
        .map(|(_, q)| q)
        .sum();
    // Dust counts above D make the profile longer than D; when no admissible
    // profile is that long the truncation loses nothing.
    let exact = bound.is_some_and(|b| b <= caps.max_dust) || !model.has_dust();
    Ok(Acceptance {
        probability,
        error_bound: if exact { 0.0 } else { (1.0 - kept).max(0.0) },
    })
}

/// Constrained law `P(T_N = t) · Π_n 1[memb(n, t) ∈ C] / a^N`.
pub fn cetpf_prob(
    model: &FrequencyModel,
    c: &ConstraintSet,
    t: &TraitAllocation,
    caps: &TruncationCaps,
) -> Result<f64> {
    Ok(cetpf_log_prob(model, c, t, caps)?.exp())
}

pub fn cetpf_log_prob(
    model: &FrequencyModel,
    c: &ConstraintSet,
    t: &TraitAllocation,
    caps: &TruncationCaps,
) -> Result<f64> {
    let a = acceptance_prob(model, c, caps)?;
    if a.probability <= 0.0 {
        return Err(Error::DegenerateConstraint);
    }
    if !c.admits(t) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(etpf_log_prob(model, t) - t.horizon() as f64 * a.probability.ln())
}

/// Partition model of a paintbox with dust weight `w0` and block weights
/// `w`: `θ_k1 = w_k / (w_k + 1)`, `θ'_1 = w0`, constraint `{1}`. Unless
/// `normalize` is set, `w0 + Σ w_k` must equal 1.
pub fn eppf_model(w0: f64, w: &[f64], normalize: bool) -> Result<(FrequencyModel, ConstraintSet)> {
    if !(w0.is_finite() && w0 >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "dust weight {w0} must be nonnegative"
        )));
    }
    if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidModel(format!(
            "block weight {x} must be positive"
        )));
    }
    let total = w0 + w.iter().sum::<f64>();
    let scale = if normalize {
        if total <= 0.0 {
            return Err(Error::InvalidModel("weights have zero total".into()));
        }
        total
    } else {
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "weights sum to {total}, not 1"
            )));
        }
        1.0
    };
    let theta = w
        .iter()
        .map(|&x| {
            let x = x / scale;
            vec![x / (x + 1.0)]
        })
        .collect();
    let dust = if w0 > 0.0 {
        vec![w0 / scale]
    } else {
        Vec::new()
    };
    Ok((FrequencyModel::new(theta, dust)?, ConstraintSet::Partition))
}

/// Vertex popularity model: `θ_k1 = w_k / (1 + w_k)`, no dust, constraint
/// `{1, 1}`.
pub fn evpf_model(w: &[f64]) -> Result<(FrequencyModel, ConstraintSet)> {
    if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidModel(format!(
            "vertex weight {x} must be positive"
        )));
    }
    if w.len() < 2 {
        return Err(Error::Degenerate(
            "a vertex model needs at least two vertices".into(),
        ));
    }
    let theta = w.iter().map(|&x| vec![x / (1.0 + x)]).collect();
    Ok((
        FrequencyModel::new(theta, Vec::new())?,
        ConstraintSet::Vertex,
    ))
}

/// Structural family whose de Finetti support conditions are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// No dust.
    Regular,
    /// One regular trait, or one dust trait of multiplicity 1.
    Partition,
    /// Multiplicities at most 1, dust only at level 1.
    Feature,
    /// Two distinct regular traits, one regular plus one level-1 dust, or two
    /// level-1 dust traits; all at multiplicity 1.
    Vertex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    /// Position of the offending atom in the measure.
    pub atom: usize,
    pub regular: Vec<usize>,
    pub dust: Vec<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Validation {
    pub valid: bool,
    pub first_violation: Option<Violation>,
}

fn atom_violation(o: &Outcome, family: Family) -> Option<&'static str> {
    let reg: usize = o.regular_total();
    let dust: usize = o.dust_total();
    let dust1 = o.dust.first().copied().unwrap_or(0);
    let reg_ones = o.regular.iter().all(|&x| x <= 1);
    match family {
        Family::Regular => (dust != 0).then_some("dust present"),
        Family::Partition => {
            let ok = (reg == 1 && dust == 0) || (reg == 0 && dust1 == 1 && dust == 1);
            (!ok).then_some("not exactly one trait of multiplicity 1")
        }
        Family::Feature => {
            if !reg_ones {
                Some("regular multiplicity above 1")
            } else if dust != dust1 {
                Some("dust at a level above 1")
            } else {
                None
            }
        }
        Family::Vertex => {
            let ok = reg_ones
                && ((reg == 2 && dust == 0)
                    || (reg == 1 && dust1 == 1 && dust == 1)
                    || (reg == 0 && dust1 == 2 && dust == 2));
            (!ok).then_some("not two memberships of multiplicity 1")
        }
    }
}

/// Checks every positive-probability atom against the family's support
/// conditions and reports the first failing atom.
pub fn validate_definetti(mu: &DeFinettiMeasure, family: Family) -> Validation {
    for (i, (o, p)) in mu.atoms().iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        if let Some(reason) = atom_violation(o, family) {
            return Validation {
                valid: false,
                first_violation: Some(Violation {
                    atom: i,
                    regular: o.regular.clone(),
                    dust: o.dust.clone(),
                    reason: reason.into(),
                }),
            };
        }
    }
    Validation {
        valid: true,
        first_violation: None,
    }
}
