//! Finite permutations of the data indices and their action on traits,
//! allocations and consistent prefixes.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;

use crate::alloc::{AllocationPrefix, Trait, TraitAllocation};
use crate::error::{Error, Result};

/// A bijection of the positive integers that moves finitely many indices.
/// Only moved indices are stored.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Permutation {
    moved: BTreeMap<usize, usize>,
}

impl Permutation {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds a permutation from disjoint cycles, e.g. `[[3, 1, 4], [2]]` for
    /// `(314)(2)`: 3 ↦ 1 ↦ 4 ↦ 3.
    pub fn from_cycles<C: AsRef<[usize]>>(cycles: &[C]) -> Result<Self> {
        let mut moved = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for cycle in cycles {
            let cycle = cycle.as_ref();
            for &i in cycle {
                if i == 0 {
                    return Err(Error::InvalidPermutation("indices start at 1".into()));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidPermutation(format!(
                        "index {i} appears in more than one cycle position"
                    )));
                }
            }
            for (pos, &from) in cycle.iter().enumerate() {
                let to = cycle[(pos + 1) % cycle.len()];
                if from != to {
                    moved.insert(from, to);
                }
            }
        }
        Ok(Self { moved })
    }

    /// One-line notation on `[M]`: `images[i]` is the image of `i + 1`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let m = images.len();
        let mut hit = vec![false; m + 1];
        for &x in images {
            if x == 0 || x > m || hit[x] {
                return Err(Error::InvalidPermutation(format!(
                    "{images:?} is not a permutation of [{m}]"
                )));
            }
            hit[x] = true;
        }
        let moved = images
            .iter()
            .enumerate()
            .filter(|&(i, &x)| i + 1 != x)
            .map(|(i, &x)| (i + 1, x))
            .collect();
        Ok(Self { moved })
    }

    /// Every permutation of `[n]`.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        (1..=n)
            .permutations(n)
            .map(|images| Self::from_images(&images).expect("permutations of [n] are valid"))
    }

    pub fn apply(&self, i: usize) -> usize {
        self.moved.get(&i).copied().unwrap_or(i)
    }

    pub fn inverse(&self) -> Self {
        Self {
            moved: self.moved.iter().map(|(&a, &b)| (b, a)).collect(),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Self {
        let keys: std::collections::BTreeSet<usize> = self
            .moved
            .keys()
            .chain(other.moved.keys())
            .copied()
            .collect();
        let moved = keys
            .into_iter()
            .map(|i| (i, self.apply(other.apply(i))))
            .filter(|&(i, x)| i != x)
            .collect();
        Self { moved }
    }

    /// Smallest `M` such that every index above `M` is fixed.
    pub fn bound(&self) -> usize {
        self.moved.keys().next_back().copied().unwrap_or(0)
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("()");
        }
        let mut done = std::collections::BTreeSet::new();
        for &start in self.moved.keys() {
            if done.contains(&start) {
                continue;
            }
            f.write_str("(")?;
            let mut i = start;
            loop {
                done.insert(i);
                if i != start {
                    f.write_str(" ")?;
                }
                write!(f, "{i}")?;
                i = self.apply(i);
                if i == start {
                    break;
                }
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl Trait {
    /// `(πτ)(m) = τ(π⁻¹(m))`, i.e. index `i` is relabelled `π(i)`.
    pub fn permute(&self, pi: &Permutation) -> Trait {
        Trait::new(self.entries().iter().map(|&(i, m)| (pi.apply(i), m)))
            .expect("permuting a nonempty trait keeps it nonempty")
    }
}

impl TraitAllocation {
    /// Image of every trait under `π`, multiplicities preserved. The horizon
    /// becomes `max(horizon, π.bound())`.
    pub fn permute(&self, pi: &Permutation) -> TraitAllocation {
        let horizon = self.horizon().max(pi.bound());
        let mut map = BTreeMap::new();
        for (t, c) in self.iter() {
            *map.entry(t.permute(pi)).or_insert(0) += c;
        }
        TraitAllocation::from_map_unchecked(horizon, map)
    }
}

impl AllocationPrefix {
    /// Element `N` of the result is `(π t_max(M, N))|_N` where `π` fixes all
    /// indices above `M`. Requires `M ≤ L`.
    pub fn permute(&self, pi: &Permutation) -> Result<AllocationPrefix> {
        let m = pi.bound();
        if m > self.len() {
            return Err(Error::InvalidPermutation(format!(
                "permutation moves index {m} beyond prefix length {}",
                self.len()
            )));
        }
        let elements = (1..=self.len())
            .map(|n| {
                self.get(m.max(n))
                    .expect("index within prefix")
                    .permute(pi)
                    .restrict(n)
            })
            .collect();
        AllocationPrefix::new(elements)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(ix: &[usize]) -> Trait {
        Trait::from_indices(ix).unwrap()
    }

    fn al(s: &str, n: usize) -> TraitAllocation {
        TraitAllocation::parse_with_horizon(s, n).unwrap()
    }

    #[test]
    fn construction() {
        let p = Permutation::from_cycles(&[[1, 2, 3]]).unwrap();
        assert_eq!(
            (p.apply(1), p.apply(2), p.apply(3), p.apply(4)),
            (2, 3, 1, 4)
        );
        assert_eq!(p.bound(), 3);
        assert_eq!(Permutation::from_images(&[2, 3, 1]).unwrap(), p);
        assert!(Permutation::from_images(&[1, 1]).is_err());
        assert!(Permutation::from_cycles(&[vec![1, 2], vec![2, 3]]).is_err());
        assert_eq!(Permutation::all(3).count(), 6);
        assert_eq!(format!("{:?}", p), "(1 2 3)");
    }

    #[test]
    fn permute_trait_examples() {
        let p = Permutation::from_cycles(&[[1, 2, 3]]).unwrap();
        assert_eq!(tr(&[1, 1, 2, 4]).permute(&p), tr(&[2, 2, 3, 4]));
        let t = tr(&[1, 3, 3]);
        assert_eq!(t.permute(&Permutation::identity()), t);
        let swap = Permutation::from_cycles(&[[1, 2]]).unwrap();
        assert_eq!(tr(&[1, 1, 2]).permute(&swap), tr(&[2, 2, 1]));
    }

    #[test]
    fn permute_alloc_examples() {
        let p = Permutation::from_cycles(&[vec![3, 1, 4], vec![2]]).unwrap();
        let t = al("{{1,2,4},{2},{1,4},{3},{3}}", 4);
        assert_eq!(t.permute(&p), al("{{4,2,3},{2},{4,3},{1},{1}}", 4));
        assert_eq!(t.permute(&Permutation::identity()), t);
        let swap = Permutation::from_cycles(&[[1, 2]]).unwrap();
        assert_eq!(
            al("{{1,1,2},{2}}", 2).permute(&swap),
            al("{{2,2,1},{1}}", 2)
        );
        // Horizon grows to the permutation bound.
        assert_eq!(al("{{1}}", 1).permute(&swap).horizon(), 2);
    }

    #[test]
    fn permute_prefix_examples() {
        let swap = Permutation::from_cycles(&[[1, 2]]).unwrap();
        let prefix = AllocationPrefix::new(vec![
            al("{{1,1}}", 1),
            al("{{1,1,2},{2}}", 2),
            al("{{1,1,2},{2},{3,3}}", 3),
        ])
        .unwrap();
        let got = prefix.permute(&swap).unwrap();
        assert_eq!(
            got.elements(),
            &[
                al("{{1},{1}}", 1),
                al("{{2,2,1},{1}}", 2),
                al("{{2,2,1},{1},{3,3}}", 3)
            ]
        );
        assert_eq!(prefix.permute(&Permutation::identity()).unwrap(), prefix);

        // (23) on ({{1}}, {{1},{2}}, {{1},{2},{3,3}}): the permuted t_3 is
        // {{1},{3},{2,2}}, whose restriction to [2] is {{1},{2,2}}.
        let swap23 = Permutation::from_cycles(&[[2, 3]]).unwrap();
        let prefix = AllocationPrefix::new(vec![
            al("{{1}}", 1),
            al("{{1},{2}}", 2),
            al("{{1},{2},{3,3}}", 3),
        ])
        .unwrap();
        let got = prefix.permute(&swap23).unwrap();
        assert_eq!(
            got.elements(),
            &[
                al("{{1}}", 1),
                al("{{1},{2,2}}", 2),
                al("{{1},{3},{2,2}}", 3)
            ]
        );

        let far = Permutation::from_cycles(&[[1, 4]]).unwrap();
        assert!(prefix.permute(&far).is_err());
    }

    #[test]
    fn group_action() {
        let t = al("{{1,2,4},{2},{1,4},{3},{3,3,1}}", 4);
        let perms: Vec<_> = Permutation::all(4).collect();
        for p in perms.iter().step_by(5) {
            for q in perms.iter().step_by(7) {
                assert_eq!(t.permute(&p.compose(q)), t.permute(q).permute(p));
            }
            assert_eq!(t.permute(p).permute(&p.inverse()), t);
        }
    }
}
