//! Exchangeable trait allocations: multiset combinatorics, de Finetti and
//! frequency-model samplers, exact probability functions, and a brute-force
//! enumeration oracle that cross-checks them at small horizons.
//!
//! A trait is a finite nonempty multiset of data indices; an allocation of
//! `[N]` is a multiset of traits over the indices `1..=N`. Partitions,
//! feature allocations and edge-exchangeable graphs are special cases picked
//! out by constraints on each index's membership profile.

pub mod alloc;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod labels;
pub mod model;
pub mod oracle;
pub mod perm;
pub mod prob;
pub mod profile;
pub mod sample;
pub mod stats;
pub mod text;

pub use alloc::{AllocationPrefix, OrderedTraitAllocation, Trait, TraitAllocation};
pub use error::{Error, Result};
pub use labels::{Label, LabelMultisetSequence};
pub use model::{
    assemble, ConstraintSet, DeFinettiMeasure, FrequencyModel, ModelSpec, Outcome, TruncationCaps,
};
pub use perm::Permutation;
pub use profile::{Classification, MembershipProfile, MultiplicityProfile};
pub use sample::RngState;
