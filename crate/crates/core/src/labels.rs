//! Label multiset sequences: per-index multisets of trait labels, and the
//! bijection with consistent allocation prefixes.

use std::collections::BTreeMap;

use crate::alloc::{AllocationPrefix, Trait, TraitAllocation};

/// Opaque trait label. Regular labels share one namespace; dust labels are
/// keyed by the index that owns them, their multiplicity level and a copy
/// number, so they never collide with each other or with regular labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Regular(usize),
    Dust {
        index: usize,
        level: usize,
        copy: usize,
    },
}

/// Finite sequence `Y_1, …, Y_N` of label multisets.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LabelMultisetSequence {
    entries: Vec<BTreeMap<Label, usize>>,
}

impl LabelMultisetSequence {
    /// `len` empty multisets.
    pub fn with_len(len: usize) -> Self {
        Self {
            entries: vec![BTreeMap::new(); len],
        }
    }

    pub fn from_entries(entries: Vec<BTreeMap<Label, usize>>) -> Self {
        let entries = entries
            .into_iter()
            .map(|mut e| {
                e.retain(|_, c| *c > 0);
                e
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Multiset `Y_n`, 1-based.
    pub fn entry(&self, n: usize) -> &BTreeMap<Label, usize> {
        &self.entries[n - 1]
    }

    pub fn entries(&self) -> &[BTreeMap<Label, usize>] {
        &self.entries
    }

    /// Adds `count` copies of `label` to `Y_n` (1-based).
    pub fn add(&mut self, n: usize, label: Label, count: usize) {
        if count > 0 {
            *self.entries[n - 1].entry(label).or_insert(0) += count;
        }
    }

    /// Label sequence of a consistent prefix `t_1, …, t_L`: the `k`-th trait
    /// of the ordering of `t_L` gets `Label::Regular(k)` (equal traits get
    /// increasing labels in order), and `Y_n` holds each label with the
    /// multiplicity of `n` in its trait.
    pub fn from_prefix(prefix: &AllocationPrefix) -> Self {
        match prefix.last() {
            Some(last) => Self::from_allocation(last),
            None => Self::default(),
        }
    }

    /// Same as [`LabelMultisetSequence::from_prefix`] on the prefix ending in `t`.
    pub fn from_allocation(t: &TraitAllocation) -> Self {
        let mut seq = Self::with_len(t.horizon());
        for (k, tr) in t.iter_copies().enumerate() {
            for &(n, m) in tr.entries() {
                seq.add(n, Label::Regular(k + 1), m);
            }
        }
        seq
    }

    /// Inverse map: every label becomes the trait `τ(n) = Y_n(label)`; the
    /// horizon is the sequence length.
    pub fn to_allocation(&self) -> TraitAllocation {
        let mut per_label: BTreeMap<Label, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, entry) in self.entries.iter().enumerate() {
            for (&label, &m) in entry {
                per_label.entry(label).or_default().push((i + 1, m));
            }
        }
        let mut traits: BTreeMap<Trait, usize> = BTreeMap::new();
        for entries in per_label.into_values() {
            *traits
                .entry(Trait::from_sorted_unchecked(entries))
                .or_insert(0) += 1;
        }
        TraitAllocation::from_map_unchecked(self.len(), traits)
    }

    /// Sequence with entries reordered by a permutation of positions:
    /// entry `π(n)` of the result is entry `n` of `self`.
    pub fn permute_positions(&self, pi: &crate::perm::Permutation) -> Self {
        let mut entries = self.entries.clone();
        for (i, e) in self.entries.iter().enumerate() {
            let target = pi.apply(i + 1);
            assert!(target <= entries.len(), "permutation moves beyond sequence");
            entries[target - 1] = e.clone();
        }
        Self { entries }
    }

    /// Applies `f` to every label.
    pub fn relabel(&self, f: impl Fn(Label) -> Label) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let mut out = BTreeMap::new();
                for (&l, &c) in e {
                    *out.entry(f(l)).or_insert(0) += c;
                }
                out
            })
            .collect();
        Self { entries }
    }
}
