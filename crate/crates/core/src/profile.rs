//! Multiplicity profiles, membership profiles and structural classification.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::alloc::{Trait, TraitAllocation};
use crate::error::{Error, Result};

impl Trait {
    /// Multiset of the multiplicities of this trait's elements: value `n`
    /// occurs once per distinct index of multiplicity `n`.
    pub fn mult(&self) -> Trait {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &(_, m) in self.entries() {
            *counts.entry(m).or_insert(0) += 1;
        }
        Trait::from_sorted_unchecked(counts.into_iter().collect())
    }
}

/// The multiset of per-trait multiplicity profiles of an allocation.
///
/// Structurally a trait allocation over multiplicity values; its horizon is
/// the largest value present and carries no meaning.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiplicityProfile(TraitAllocation);

impl MultiplicityProfile {
    pub fn as_allocation(&self) -> &TraitAllocation {
        &self.0
    }
}

impl fmt::Display for MultiplicityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for MultiplicityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl TraitAllocation {
    /// Multiset image of [`Trait::mult`] over the traits.
    pub fn mult(&self) -> MultiplicityProfile {
        let mut map: BTreeMap<Trait, usize> = BTreeMap::new();
        for (t, c) in self.iter() {
            *map.entry(t.mult()).or_insert(0) += c;
        }
        let horizon = map.keys().map(Trait::max_index).max().unwrap_or(0);
        MultiplicityProfile(TraitAllocation::from_map_unchecked(horizon, map))
    }

    /// Membership profile of index `n`: value `j` occurs once for every trait
    /// copy containing `n` with multiplicity `j`.
    pub fn memb(&self, n: usize) -> MembershipProfile {
        let mut counts = BTreeMap::new();
        for (t, c) in self.iter() {
            let j = t.multiplicity(n);
            if j > 0 {
                *counts.entry(j).or_insert(0) += c;
            }
        }
        MembershipProfile(counts)
    }

    pub fn classify(&self) -> Classification {
        let profiles: Vec<MembershipProfile> = (1..=self.horizon()).map(|n| self.memb(n)).collect();
        let single = MembershipProfile::from_values(&[1]);
        let pair = MembershipProfile::from_values(&[1, 1]);
        let partition = profiles.iter().all(|p| *p == single);
        let feature_allocation = profiles.iter().all(|p| p.max_value() <= 1);
        let vertex_allocation = profiles.iter().all(|p| *p == pair);
        Classification {
            partition,
            feature_allocation,
            vertex_allocation,
            free_form: !(partition || feature_allocation || vertex_allocation),
        }
    }
}

/// Structural flags of an allocation of `[N]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    /// Every index lies in exactly one trait, with multiplicity 1.
    pub partition: bool,
    /// Every membership has multiplicity at most 1.
    pub feature_allocation: bool,
    /// Every index lies in exactly two traits, each with multiplicity 1.
    pub vertex_allocation: bool,
    /// None of the above.
    pub free_form: bool,
}

/// A finite, possibly empty multiset of positive integers, stored as
/// value ↦ count.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MembershipProfile(BTreeMap<usize, usize>);

impl MembershipProfile {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Panics on a zero value; use [`MembershipProfile::try_from_values`] for
    /// untrusted input.
    pub fn from_values(values: &[usize]) -> Self {
        Self::try_from_values(values).expect("membership profile values are positive")
    }

    pub fn try_from_values(values: &[usize]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for &v in values {
            if v == 0 {
                return Err(Error::InvalidTrait(
                    "membership profile values must be positive".into(),
                ));
            }
            *counts.entry(v).or_insert(0) += 1;
        }
        Ok(Self(counts))
    }

    /// `(value, count)` pairs sorted by value.
    pub fn counts(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|(&v, &c)| (v, c))
    }

    pub fn count_of(&self, value: usize) -> usize {
        self.0.get(&value).copied().unwrap_or(0)
    }

    /// Number of elements counted with multiplicity.
    pub fn len(&self) -> usize {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_value(&self) -> usize {
        self.0.keys().next_back().copied().unwrap_or(0)
    }

    /// Sorted values with repetition.
    pub fn values(&self) -> Vec<usize> {
        self.0
            .iter()
            .flat_map(|(&v, &c)| std::iter::repeat_n(v, c))
            .collect()
    }

    pub fn add(&mut self, value: usize, count: usize) {
        if value > 0 && count > 0 {
            *self.0.entry(value).or_insert(0) += count;
        }
    }
}

impl fmt::Display for MembershipProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str(crate::text::EMPTY_SYMBOL);
        }
        let parts: Vec<String> = self.values().iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl fmt::Debug for MembershipProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for MembershipProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        self.values().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MembershipProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let values = Vec::<usize>::deserialize(deserializer)?;
        Self::try_from_values(&values).map_err(serde::de::Error::custom)
    }
}
