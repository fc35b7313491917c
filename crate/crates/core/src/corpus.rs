//! Exhaustive enumeration of small traits and allocations, for invariant
//! checks over complete finite corpora.

use itertools::Itertools;

use crate::alloc::{Trait, TraitAllocation};

/// Every trait over `[horizon]` with each multiplicity at most
/// `max_multiplicity`, in lexicographic trait order.
pub fn traits_with_max_multiplicity(horizon: usize, max_multiplicity: usize) -> Vec<Trait> {
    let mut out: Vec<Trait> = (1..=horizon)
        .map(|_| 0..=max_multiplicity)
        .multi_cartesian_product()
        .filter_map(|mults| Trait::new(mults.into_iter().enumerate().map(|(i, m)| (i + 1, m))).ok())
        .collect();
    out.sort();
    out
}

/// Every trait over `[horizon]` with total size `Σ_n τ(n)` at most `max_size`,
/// in lexicographic trait order.
pub fn traits_with_max_size(horizon: usize, max_size: usize) -> Vec<Trait> {
    let mut out: Vec<Trait> = (1..=max_size)
        .flat_map(|size| (1..=horizon).combinations_with_replacement(size))
        .map(|ix| Trait::from_indices(&ix).expect("nonempty index list"))
        .collect();
    out.sort();
    out
}

/// Every allocation of `[horizon]` with at most `max_traits` traits drawn
/// (with repetition) from `pool`.
pub fn allocations_from(
    pool: &[Trait],
    horizon: usize,
    max_traits: usize,
) -> impl Iterator<Item = TraitAllocation> + '_ {
    (0..=max_traits).flat_map(move |k| {
        (0..pool.len())
            .combinations_with_replacement(k)
            .map(move |ix| {
                TraitAllocation::new(horizon, ix.into_iter().map(|i| pool[i].clone()))
                    .expect("pool traits lie within the horizon")
            })
    })
}

/// Allocations of `[N]` for every `N ≤ max_horizon`, at most `max_traits`
/// traits, each of total size at most `max_trait_size`.
pub fn small_allocations(
    max_horizon: usize,
    max_traits: usize,
    max_trait_size: usize,
) -> Vec<TraitAllocation> {
    (1..=max_horizon)
        .flat_map(|n| {
            let pool = traits_with_max_size(n, max_trait_size);
            allocations_from(&pool, n, max_traits).collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(traits_with_max_multiplicity(4, 3).len(), 255);
        assert_eq!(traits_with_max_multiplicity(2, 1).len(), 3);
        assert_eq!(traits_with_max_size(4, 3).len(), 4 + 10 + 20);
        // Multisets of at most 2 traits from 3: 1 + 3 + 6.
        let pool = traits_with_max_size(2, 1);
        assert_eq!(pool.len(), 2);
        assert_eq!(allocations_from(&pool, 2, 2).count(), 1 + 2 + 3);
    }
}
