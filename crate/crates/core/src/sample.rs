//! Seeded samplers: de Finetti and frequency-model draws, per-index and
//! whole-allocation rejection under a constraint set, and uniform orderings.
//!
//! Randomness is counter-based. A draw is identified by `(seed, draw,
//! attempt)`, which keys a ChaCha8 generator; data index `n` reads from
//! stream `n` and auxiliary randomness (ordering tags) from stream 0. The
//! draws of index `n` therefore do not depend on the horizon, so sampling at
//! horizon `N` and restricting to `M` reproduces the sample at horizon `M`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::alloc::{AllocationPrefix, OrderedTraitAllocation, TraitAllocation};
use crate::error::{Error, Result};
use crate::model::{assemble, ConstraintSet, DeFinettiMeasure, FrequencyModel, Outcome};

/// Per-index retry budget for rejection sampling.
pub const DEFAULT_MAX_RETRIES: u64 = 1_000_000;

/// Poisson rates below this use inversion on a single uniform stream.
pub const POISSON_INVERSION_LIMIT: f64 = 10.0;

/// Position in a reproducible sequence of draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngState {
    seed: u64,
    draw: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, draw: 0 }
    }

    /// State positioned at draw `draw`; equal to `new(seed)` advanced `draw`
    /// times, so draws can be generated independently in parallel.
    pub fn at(seed: u64, draw: u64) -> Self {
        Self { seed, draw }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw(&self) -> u64 {
        self.draw
    }

    pub(crate) fn advance(&mut self) {
        self.draw += 1;
    }

    /// Generator for stream `index` of attempt `attempt` of the current draw.
    pub(crate) fn stream(&self, attempt: u64, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.draw.to_le_bytes());
        key[16..24].copy_from_slice(&attempt.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

fn poisson_draw(rate: f64, rng: &mut ChaCha8Rng) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    if rate >= POISSON_INVERSION_LIMIT {
        let d = Poisson::new(rate).expect("positive finite rate");
        return d.sample(rng) as usize;
    }
    let u: f64 = rng.gen();
    let mut k = 0usize;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u >= cdf && p > 0.0 {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
    }
    k
}

/// One index's outcome under the frequency model: a categorical draw per
/// column, then a Poisson count per dust level.
fn frequency_outcome(model: &FrequencyModel, rng: &mut ChaCha8Rng) -> Outcome {
    let regular = model
        .theta_rows()
        .iter()
        .map(|row| {
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            for (j, &q) in row.iter().enumerate() {
                cum += q;
                if u < cum {
                    return j + 1;
                }
            }
            0
        })
        .collect();
    let dust = model
        .dust_rates()
        .iter()
        .map(|&rate| poisson_draw(rate, rng))
        .collect();
    Outcome { regular, dust }
}

fn definetti_outcome(mu: &DeFinettiMeasure, rng: &mut ChaCha8Rng) -> Outcome {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let atoms = mu.atoms();
    for (o, p) in atoms {
        cum += p;
        if u < cum {
            return o.clone();
        }
    }
    // Rounding left `u` above the accumulated mass: take the last positive atom.
    atoms
        .iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|(o, _)| o.clone())
        .expect("a normalized measure has a positive atom")
}

/// Per-index outcomes of one frequency-model draw.
pub fn sample_frequency_outcomes(
    model: &FrequencyModel,
    n: usize,
    rng: &mut RngState,
) -> Vec<Outcome> {
    let out = (1..=n)
        .map(|i| frequency_outcome(model, &mut rng.stream(0, i as u64)))
        .collect();
    rng.advance();
    out
}

/// `T_N` under the frequency model.
pub fn sample_frequency(model: &FrequencyModel, n: usize, rng: &mut RngState) -> TraitAllocation {
    assemble(&sample_frequency_outcomes(model, n, rng))
}

/// `T_N` under the de Finetti representation with directing measure `mu`.
pub fn sample_definetti(mu: &DeFinettiMeasure, n: usize, rng: &mut RngState) -> TraitAllocation {
    let outcomes: Vec<Outcome> = (1..=n)
        .map(|i| definetti_outcome(mu, &mut rng.stream(0, i as u64)))
        .collect();
    rng.advance();
    assemble(&outcomes)
}

/// Per-index rejection: each index redraws from its own stream until its
/// membership profile lies in `c`.
pub fn sample_constrained_outcomes(
    model: &FrequencyModel,
    c: &ConstraintSet,
    n: usize,
    rng: &mut RngState,
    max_retries: u64,
) -> Result<Vec<Outcome>> {
    let mut out = Vec::with_capacity(n);
    let mut failure = None;
    for i in 1..=n {
        let mut stream = rng.stream(0, i as u64);
        let mut accepted = None;
        for _ in 0..max_retries.max(1) {
            let o = frequency_outcome(model, &mut stream);
            if c.contains(&o.membership_profile()) {
                accepted = Some(o);
                break;
            }
        }
        match accepted {
            Some(o) => out.push(o),
            None => {
                failure = Some(i);
                break;
            }
        }
    }
    rng.advance();
    match failure {
        None => Ok(out),
        Some(i) => Err(Error::RetriesExhausted {
            index: Some(i),
            retries: max_retries,
        }),
    }
}

/// `T_N` under the constrained frequency model, by per-index rejection.
pub fn sample_constrained(
    model: &FrequencyModel,
    c: &ConstraintSet,
    n: usize,
    rng: &mut RngState,
    max_retries: u64,
) -> Result<TraitAllocation> {
    sample_constrained_outcomes(model, c, n, rng, max_retries).map(|o| assemble(&o))
}

/// `T_N` under the constrained frequency model, by redrawing the whole
/// allocation until every index is admissible. Attempt `a` of a draw uses
/// fresh streams keyed by `a`.
pub fn sample_whole_rejection(
    model: &FrequencyModel,
    c: &ConstraintSet,
    n: usize,
    rng: &mut RngState,
    max_retries: u64,
) -> Result<TraitAllocation> {
    let mut result = None;
    for attempt in 0..max_retries.max(1) {
        let outcomes: Vec<Outcome> = (1..=n)
            .map(|i| frequency_outcome(model, &mut rng.stream(attempt, i as u64)))
            .collect();
        if outcomes.iter().all(|o| c.contains(&o.membership_profile())) {
            result = Some(assemble(&outcomes));
            break;
        }
    }
    rng.advance();
    result.ok_or(Error::RetriesExhausted {
        index: None,
        retries: max_retries,
    })
}

/// Independent uniform tag per trait copy of `order(t)`, in order.
fn tags(count: usize, rng: &RngState) -> Vec<f64> {
    let mut stream = rng.stream(0, 0);
    (0..count).map(|_| stream.gen()).collect()
}

fn sort_by_tags<T: Clone>(items: &[T], tags: &[f64]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| tags[a].total_cmp(&tags[b]).then(a.cmp(&b)));
    idx.into_iter().map(|i| items[i].clone()).collect()
}

/// Uniformly random ordering of the traits of `t`.
pub fn uniform_order(t: &TraitAllocation, rng: &mut RngState) -> OrderedTraitAllocation {
    let traits: Vec<_> = t.iter_copies().cloned().collect();
    let tags = tags(traits.len(), rng);
    rng.advance();
    OrderedTraitAllocation::new(t.horizon(), sort_by_tags(&traits, &tags))
        .expect("traits of a valid allocation")
}

/// Consistent random ordering of a prefix: element `N` orders the traits of
/// `t_N` by tags attached once to the traits of `t_L`, so restricting
/// element `N` to `M` gives element `M`.
pub fn uniform_order_prefix(
    prefix: &AllocationPrefix,
    rng: &mut RngState,
) -> Vec<OrderedTraitAllocation> {
    let Some(last) = prefix.last() else {
        rng.advance();
        return Vec::new();
    };
    let labelled: Vec<_> = last.iter_copies().cloned().collect();
    let tags = tags(labelled.len(), rng);
    rng.advance();
    let full = sort_by_tags(&labelled, &tags);
    let top =
        OrderedTraitAllocation::new(last.horizon(), full).expect("traits of a valid allocation");
    (1..=prefix.len()).map(|n| top.restrict(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn al(s: &str, n: usize) -> TraitAllocation {
        TraitAllocation::parse_with_horizon(s, n).unwrap()
    }

    #[test]
    fn reproducible_and_positionable() {
        let m = FrequencyModel::new(vec![vec![0.3, 0.2], vec![0.5]], vec![0.4]).unwrap();
        let mut a = RngState::new(7);
        let mut b = RngState::new(7);
        let xs: Vec<_> = (0..20).map(|_| sample_frequency(&m, 4, &mut a)).collect();
        let ys: Vec<_> = (0..20).map(|_| sample_frequency(&m, 4, &mut b)).collect();
        assert_eq!(xs, ys);
        for (d, x) in xs.iter().enumerate() {
            assert_eq!(&sample_frequency(&m, 4, &mut RngState::at(7, d as u64)), x);
        }
        let mut c = RngState::new(8);
        let zs: Vec<_> = (0..20).map(|_| sample_frequency(&m, 4, &mut c)).collect();
        assert_ne!(xs, zs);
    }

    #[test]
    fn restriction_is_pathwise() {
        let m = FrequencyModel::new(vec![vec![0.3, 0.2], vec![0.5]], vec![0.4, 0.1]).unwrap();
        for d in 0..50 {
            let big = sample_frequency(&m, 5, &mut RngState::at(3, d));
            let small = sample_frequency(&m, 3, &mut RngState::at(3, d));
            assert_eq!(big.restrict(3), small);
        }
    }

    #[test]
    fn trivial_models() {
        let empty = FrequencyModel::new(vec![], vec![]).unwrap();
        let mut rng = RngState::new(1);
        assert_eq!(
            sample_frequency(&empty, 3, &mut rng),
            TraitAllocation::empty(3)
        );
        let mu = DeFinettiMeasure::new(vec![(Outcome::default(), 1.0)]).unwrap();
        assert_eq!(
            sample_definetti(&mu, 3, &mut rng),
            TraitAllocation::empty(3)
        );
        let mu = DeFinettiMeasure::new(vec![(Outcome::new(vec![1], vec![]), 1.0)]).unwrap();
        assert_eq!(sample_definetti(&mu, 4, &mut rng), al("{{1,2,3,4}}", 4));
    }

    #[test]
    fn unconstrained_rejection_matches_frequency() {
        let m = FrequencyModel::new(vec![vec![0.3, 0.2]], vec![0.4]).unwrap();
        for d in 0..20 {
            let f = sample_frequency(&m, 3, &mut RngState::at(5, d));
            let c = sample_constrained(&m, &ConstraintSet::All, 3, &mut RngState::at(5, d), 10)
                .unwrap();
            let w = sample_whole_rejection(&m, &ConstraintSet::All, 3, &mut RngState::at(5, d), 1)
                .unwrap();
            assert_eq!(f, c);
            assert_eq!(f, w);
        }
    }

    #[test]
    fn constrained_outputs_are_admissible() {
        let (m, c) = crate::prob::eppf_model(0.1, &[0.5, 0.4], false).unwrap();
        let mut rng = RngState::new(11);
        for _ in 0..200 {
            let t = sample_constrained(&m, &c, 3, &mut rng, DEFAULT_MAX_RETRIES).unwrap();
            assert!(t.classify().partition, "{t}");
        }
        let (m, c) = crate::prob::evpf_model(&[0.5, 0.3, 0.2]).unwrap();
        for _ in 0..200 {
            let t = sample_constrained(&m, &c, 4, &mut rng, DEFAULT_MAX_RETRIES).unwrap();
            assert!(t.classify().vertex_allocation, "{t}");
        }
    }

    #[test]
    fn retry_exhaustion() {
        let m = FrequencyModel::new(vec![vec![0.5]], vec![]).unwrap();
        let never = ConstraintSet::Vertex;
        let mut rng = RngState::new(0);
        assert!(matches!(
            sample_constrained(&m, &never, 2, &mut rng, 50),
            Err(Error::RetriesExhausted {
                index: Some(1),
                retries: 50
            })
        ));
        assert!(matches!(
            sample_whole_rejection(&m, &never, 2, &mut rng, 50),
            Err(Error::RetriesExhausted { index: None, .. })
        ));
    }

    #[test]
    fn poisson_inversion_mean() {
        let mut total = 0usize;
        let draws = 20_000;
        for d in 0..draws {
            total += poisson_draw(0.5, &mut RngState::at(9, d).stream(0, 1));
        }
        let mean = total as f64 / draws as f64;
        assert!((mean - 0.5).abs() < 4.0 * (0.5f64 / draws as f64).sqrt());
        let big: usize = (0..2000)
            .map(|d| poisson_draw(20.0, &mut RngState::at(9, d).stream(0, 1)))
            .sum();
        assert!((big as f64 / 2000.0 - 20.0).abs() < 1.0);
    }

    #[test]
    fn uniform_order_is_an_ordering() {
        let t = al("{{3,3},{3,3},{1}}", 3);
        let mut rng = RngState::new(2);
        for _ in 0..20 {
            let o = uniform_order(&t, &mut rng);
            assert_eq!(o.to_allocation(), t);
        }
        let single = al("{{2}}", 2);
        assert_eq!(
            uniform_order(&single, &mut rng).traits(),
            &[single.iter_copies().next().unwrap().clone()]
        );
    }

    #[test]
    fn uniform_order_prefix_is_consistent() {
        let prefix = AllocationPrefix::from_last(&al("{{1,2},{2},{3},{1,3,3},{2,3}}", 3));
        let mut rng = RngState::new(4);
        for _ in 0..50 {
            let ordered = uniform_order_prefix(&prefix, &mut rng);
            assert_eq!(ordered.len(), 3);
            for n in 1..=3 {
                assert_eq!(ordered[n - 1].to_allocation(), *prefix.get(n).unwrap());
                for m in 1..=n {
                    assert_eq!(ordered[n - 1].restrict(m), ordered[m - 1]);
                }
            }
        }
    }
}
