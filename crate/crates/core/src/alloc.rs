//! Traits, trait allocations and their ordered counterparts.
//!
//! A [`Trait`] is a finite, nonempty multiset of positive data indices. A
//! [`TraitAllocation`] of `[N]` is a multiset of traits none of which mentions an
//! index beyond the horizon `N`. Traits are totally ordered by the lexicographic
//! trait order (lowest index with differing multiplicity, higher multiplicity
//! first), and [`TraitAllocation`] stores its traits in that order so that
//! [`TraitAllocation::order`] is a plain traversal.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};

/// A finite, nonempty multiset of positive integer indices.
///
/// Entries are kept sorted by index; zero multiplicities are never stored.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Trait {
    entries: Vec<(usize, usize)>,
}

impl Trait {
    /// Builds a trait from `(index, multiplicity)` pairs. Repeated indices are
    /// summed and zero multiplicities dropped.
    pub fn new(entries: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        for (index, mult) in entries {
            if index == 0 {
                return Err(Error::InvalidTrait("indices start at 1".into()));
            }
            if mult > 0 {
                *map.entry(index).or_insert(0) += mult;
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidTrait("a trait must be nonempty".into()));
        }
        Ok(Self {
            entries: map.into_iter().collect(),
        })
    }

    /// Builds a trait from an index list with repetition, e.g. `[1, 1, 4]`.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| (i, 1)))
    }

    /// Caller guarantees sorted, positive, deduplicated, nonempty entries.
    pub(crate) fn from_sorted_unchecked(entries: Vec<(usize, usize)>) -> Self {
        debug_assert!(!entries.is_empty());
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(i, m)| i > 0 && m > 0));
        Self { entries }
    }

    /// Multiplicity of `index` in this trait (zero when absent).
    pub fn multiplicity(&self, index: usize) -> usize {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0)
    }

    /// `(index, multiplicity)` pairs sorted by index.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    /// Number of distinct indices.
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Total size counting multiplicity.
    pub fn size(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    pub fn min_index(&self) -> usize {
        self.entries[0].0
    }

    pub fn max_index(&self) -> usize {
        self.entries[self.entries.len() - 1].0
    }

    pub fn max_multiplicity(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m).max().unwrap_or(0)
    }

    /// Indices listed with repetition in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .flat_map(|&(i, m)| std::iter::repeat_n(i, m))
    }

    /// Removes every index above `m`. Returns `None` when nothing remains.
    pub fn restrict(&self, m: usize) -> Option<Trait> {
        let kept: Vec<_> = self
            .entries
            .iter()
            .copied()
            .take_while(|&(i, _)| i <= m)
            .collect();
        if kept.is_empty() {
            None
        } else {
            Some(Trait { entries: kept })
        }
    }

    /// Strict lexicographic trait order: `self` precedes `other`.
    pub fn precedes(&self, other: &Trait) -> bool {
        self.cmp(other) == Ordering::Less
    }

    /// If the support is a single index `n` with multiplicity `j`, returns `(n, j)`.
    pub fn singleton(&self) -> Option<(usize, usize)> {
        match self.entries.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }
}

impl Ord for Trait {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.entries.iter();
        let mut b = other.entries.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&(i, x)), Some(&(j, y))) => {
                    if i != j {
                        // The trait holding the smaller index has the larger
                        // multiplicity there.
                        return i.cmp(&j);
                    }
                    if x != y {
                        return y.cmp(&x);
                    }
                }
            }
        }
    }
}

impl PartialOrd for Trait {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compares two possibly-empty restricted traits. The empty multiset sorts
/// after every trait: a nonempty trait has positive multiplicity at its lowest
/// index, where the empty multiset has zero.
pub fn cmp_restricted(a: Option<&Trait>, b: Option<&Trait>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

/// A multiset of traits bound to the horizon `[N]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraitAllocation {
    horizon: usize,
    traits: BTreeMap<Trait, usize>,
}

impl TraitAllocation {
    pub fn empty(horizon: usize) -> Self {
        Self {
            horizon,
            traits: BTreeMap::new(),
        }
    }

    /// Builds an allocation from individual traits (repeats accumulate).
    pub fn new(horizon: usize, traits: impl IntoIterator<Item = Trait>) -> Result<Self> {
        Self::from_counts(horizon, traits.into_iter().map(|t| (t, 1)))
    }

    /// Builds an allocation from `(trait, count)` pairs; zero counts are dropped.
    pub fn from_counts(
        horizon: usize,
        traits: impl IntoIterator<Item = (Trait, usize)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (t, count) in traits {
            if t.max_index() > horizon {
                return Err(Error::IndexBeyondHorizon {
                    index: t.max_index(),
                    horizon,
                });
            }
            if count > 0 {
                *map.entry(t).or_insert(0) += count;
            }
        }
        Ok(Self {
            horizon,
            traits: map,
        })
    }

    pub(crate) fn from_map_unchecked(horizon: usize, traits: BTreeMap<Trait, usize>) -> Self {
        debug_assert!(traits.keys().all(|t| t.max_index() <= horizon));
        debug_assert!(traits.values().all(|&c| c > 0));
        Self { horizon, traits }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Same traits under a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::from_counts(horizon, self.iter().map(|(t, c)| (t.clone(), c)))
    }

    pub fn is_empty(&self) -> bool {
        self.traits.is_empty()
    }

    /// Number of traits counted with multiplicity.
    pub fn num_traits(&self) -> usize {
        self.traits.values().sum()
    }

    pub fn num_distinct(&self) -> usize {
        self.traits.len()
    }

    /// Multiplicity of `t` in the allocation.
    pub fn count(&self, t: &Trait) -> usize {
        self.traits.get(t).copied().unwrap_or(0)
    }

    /// Distinct traits with their multiplicities, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&Trait, usize)> + '_ {
        self.traits.iter().map(|(t, &c)| (t, c))
    }

    /// Every trait copy, in lexicographic order.
    pub fn iter_copies(&self) -> impl Iterator<Item = &Trait> + '_ {
        self.traits
            .iter()
            .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
    }

    /// Largest index appearing in any trait (zero for the empty allocation).
    pub fn max_index(&self) -> usize {
        self.traits.keys().map(Trait::max_index).max().unwrap_or(0)
    }

    pub fn max_multiplicity(&self) -> usize {
        self.traits
            .keys()
            .map(Trait::max_multiplicity)
            .max()
            .unwrap_or(0)
    }

    /// Total membership `Σ_τ t(τ)·τ(n)` of index `n`.
    pub fn total_membership(&self, n: usize) -> usize {
        self.iter().map(|(t, c)| c * t.multiplicity(n)).sum()
    }

    /// Restriction to `[m]`: indices above `m` are removed, emptied traits
    /// dropped and coinciding restricted traits accumulate.
    pub fn restrict(&self, m: usize) -> TraitAllocation {
        let mut traits = BTreeMap::new();
        for (t, c) in self.iter() {
            if let Some(r) = t.restrict(m) {
                *traits.entry(r).or_insert(0) += c;
            }
        }
        TraitAllocation {
            horizon: self.horizon.min(m),
            traits,
        }
    }

    /// Whether `self` is the restriction of `larger` to `self.horizon()`.
    pub fn is_consistent_with(&self, larger: &TraitAllocation) -> Result<bool> {
        if self.horizon > larger.horizon {
            return Err(Error::HorizonOrder {
                smaller: self.horizon,
                larger: larger.horizon,
            });
        }
        Ok(larger.restrict(self.horizon) == *self)
    }

    /// Lexicographic ordering of the traits; equal traits are adjacent.
    pub fn order(&self) -> OrderedTraitAllocation {
        OrderedTraitAllocation {
            horizon: self.horizon,
            traits: self.iter_copies().cloned().collect(),
        }
    }

    /// Number of distinct orderings, `(Σ t(τ))! / Π t(τ)!`.
    pub fn kappa(&self) -> BigUint {
        let mut result = BigUint::one();
        let mut placed: u64 = 0;
        for &c in self.traits.values() {
            // Multiply by C(placed + c, c) incrementally, keeping every step integral.
            for i in 1..=c as u64 {
                placed += 1;
                result *= placed;
                result /= i;
            }
        }
        result
    }
}

/// An ordered sequence of traits bound to the horizon `[N]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct OrderedTraitAllocation {
    horizon: usize,
    traits: Vec<Trait>,
}

impl OrderedTraitAllocation {
    pub fn new(horizon: usize, traits: Vec<Trait>) -> Result<Self> {
        if let Some(t) = traits.iter().find(|t| t.max_index() > horizon) {
            return Err(Error::IndexBeyondHorizon {
                index: t.max_index(),
                horizon,
            });
        }
        Ok(Self { horizon, traits })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn traits(&self) -> &[Trait] {
        &self.traits
    }

    pub fn len(&self) -> usize {
        self.traits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traits.is_empty()
    }

    /// Per-trait restriction followed by removal of emptied positions; the
    /// relative order of surviving traits is kept.
    pub fn restrict(&self, m: usize) -> OrderedTraitAllocation {
        OrderedTraitAllocation {
            horizon: self.horizon.min(m),
            traits: self.traits.iter().filter_map(|t| t.restrict(m)).collect(),
        }
    }

    /// Forgets the order.
    pub fn to_allocation(&self) -> TraitAllocation {
        let mut map = BTreeMap::new();
        for t in &self.traits {
            *map.entry(t.clone()).or_insert(0) += 1;
        }
        TraitAllocation::from_map_unchecked(self.horizon, map)
    }
}

/// A pairwise-consistent sequence `t_1, …, t_L` where `t_N` is an allocation of `[N]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationPrefix {
    elements: Vec<TraitAllocation>,
}

impl AllocationPrefix {
    /// Validates horizons (`t_N` has horizon `N`) and consistency of neighbours,
    /// which implies pairwise consistency.
    pub fn new(elements: Vec<TraitAllocation>) -> Result<Self> {
        for (i, t) in elements.iter().enumerate() {
            if t.horizon() != i + 1 {
                return Err(Error::InconsistentPrefix { position: i + 1 });
            }
            if i > 0 && !elements[i - 1].is_consistent_with(t)? {
                return Err(Error::InconsistentPrefix { position: i + 1 });
            }
        }
        Ok(Self { elements })
    }

    /// The unique consistent prefix ending in `last`.
    pub fn from_last(last: &TraitAllocation) -> Self {
        let elements = (1..=last.horizon()).map(|m| last.restrict(m)).collect();
        Self { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element `t_n`, 1-based.
    pub fn get(&self, n: usize) -> Option<&TraitAllocation> {
        n.checked_sub(1).and_then(|i| self.elements.get(i))
    }

    pub fn last(&self) -> Option<&TraitAllocation> {
        self.elements.last()
    }

    pub fn elements(&self) -> &[TraitAllocation] {
        &self.elements
    }
}
