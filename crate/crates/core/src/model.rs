//! Parameter types shared by the oracle, the probability functions and the
//! samplers: frequency models, de Finetti measures, constraint sets and
//! truncation caps.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::alloc::TraitAllocation;
use crate::error::{Error, Result};
use crate::labels::{Label, LabelMultisetSequence};
use crate::profile::MembershipProfile;

/// Slack allowed on `Σ_j θ_kj ≤ 1` and on measure normalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Frequency model: column `k` takes multiplicity `j ≥ 1` with probability
/// `θ_kj` and abstains with `θ_k0 = 1 − Σ_j θ_kj`; each index additionally
/// owns `Poisson(θ'_j)` dust traits of multiplicity `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyModel {
    theta: Vec<Vec<f64>>,
    dust_rates: Vec<f64>,
}

impl FrequencyModel {
    /// `theta[k][j - 1]` is `θ_{k+1, j}`; rows may differ in length.
    pub fn new(theta: Vec<Vec<f64>>, dust_rates: Vec<f64>) -> Result<Self> {
        for (k, row) in theta.iter().enumerate() {
            if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "theta row {} has invalid entry {x}",
                    k + 1
                )));
            }
            let s: f64 = row.iter().sum();
            if s > 1.0 + NORMALIZATION_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "theta row {} sums to {s} > 1",
                    k + 1
                )));
            }
        }
        if let Some(x) = dust_rates.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidModel(format!("invalid dust rate {x}")));
        }
        Ok(Self { theta, dust_rates })
    }

    /// Number of regular columns `K`.
    pub fn columns(&self) -> usize {
        self.theta.len()
    }

    /// Largest regular multiplicity with a (possibly zero) parameter.
    pub fn max_level(&self) -> usize {
        self.theta.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of dust levels `J'`.
    pub fn dust_levels(&self) -> usize {
        self.dust_rates.len()
    }

    /// `θ_kj` with 1-based column `k`; `j = 0` gives the abstention probability.
    pub fn theta(&self, k: usize, j: usize) -> f64 {
        let row = &self.theta[k - 1];
        if j == 0 {
            (1.0 - row.iter().sum::<f64>()).max(0.0)
        } else {
            row.get(j - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn theta_rows(&self) -> &[Vec<f64>] {
        &self.theta
    }

    /// `θ'_j`, 1-based level; zero beyond the configured levels.
    pub fn dust_rate(&self, j: usize) -> f64 {
        self.dust_rates.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn dust_rates(&self) -> &[f64] {
        &self.dust_rates
    }

    pub fn has_dust(&self) -> bool {
        self.dust_rates.iter().any(|&r| r > 0.0)
    }
}

/// One index's draw: regular multiplicities `ξ` (one per column) and dust
/// counts `ξ'` (one per level).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Outcome {
    pub regular: Vec<usize>,
    pub dust: Vec<usize>,
}

impl Outcome {
    pub fn new(regular: Vec<usize>, dust: Vec<usize>) -> Self {
        Self { regular, dust }
    }

    /// Membership profile of the index drawing this outcome.
    pub fn membership_profile(&self) -> MembershipProfile {
        let mut p = MembershipProfile::empty();
        for &m in &self.regular {
            p.add(m, 1);
        }
        for (j, &c) in self.dust.iter().enumerate() {
            p.add(j + 1, c);
        }
        p
    }

    pub fn regular_total(&self) -> usize {
        self.regular.iter().sum()
    }

    pub fn dust_total(&self) -> usize {
        self.dust.iter().sum()
    }
}

/// Label multiset sequence built from per-index outcomes: column `k` carries
/// `Label::Regular(k)`, dust traits get fresh per-index labels.
pub fn label_sequence(outcomes: &[Outcome]) -> LabelMultisetSequence {
    let mut seq = LabelMultisetSequence::with_len(outcomes.len());
    for (i, o) in outcomes.iter().enumerate() {
        let n = i + 1;
        for (k, &m) in o.regular.iter().enumerate() {
            seq.add(n, Label::Regular(k + 1), m);
        }
        for (j, &count) in o.dust.iter().enumerate() {
            for copy in 1..=count {
                seq.add(
                    n,
                    Label::Dust {
                        index: n,
                        level: j + 1,
                        copy,
                    },
                    j + 1,
                );
            }
        }
    }
    seq
}

/// Allocation of `[outcomes.len()]` generated by the given per-index outcomes.
pub fn assemble(outcomes: &[Outcome]) -> TraitAllocation {
    label_sequence(outcomes).to_allocation()
}

/// A finitely supported distribution over outcome pairs `(ξ, ξ')`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeFinettiMeasure {
    atoms: Vec<(Outcome, f64)>,
}

impl DeFinettiMeasure {
    /// Probabilities must be nonnegative and sum to 1 within
    /// [`NORMALIZATION_TOLERANCE`].
    pub fn new(atoms: Vec<(Outcome, f64)>) -> Result<Self> {
        if let Some((_, p)) = atoms.iter().find(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "invalid atom probability {p}"
            )));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Rescales nonnegative weights to a probability measure.
    pub fn normalized(atoms: Vec<(Outcome, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        Self::new(atoms.into_iter().map(|(o, p)| (o, p / total)).collect())
    }

    pub fn atoms(&self) -> &[(Outcome, f64)] {
        &self.atoms
    }
}

/// Admissible membership profiles for every index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstraintSet {
    /// Every profile, including `∅`.
    All,
    /// `{1}`.
    Partition,
    /// Profiles of ones only, including `∅`.
    Feature,
    /// `{1, 1}`.
    Vertex,
    /// `{1, 1}` or `{1}`.
    VertexWithLoops,
    /// `{j, j}` for `min ≤ j ≤ max`.
    WeightedEdges { min: usize, max: usize },
    Explicit {
        profiles: BTreeSet<MembershipProfile>,
        allow_empty: bool,
    },
}

impl ConstraintSet {
    pub fn contains(&self, p: &MembershipProfile) -> bool {
        match self {
            Self::All => true,
            Self::Partition => p.len() == 1 && p.count_of(1) == 1,
            Self::Feature => p.max_value() <= 1,
            Self::Vertex => p.len() == 2 && p.count_of(1) == 2,
            Self::VertexWithLoops => p.count_of(1) == p.len() && (p.len() == 1 || p.len() == 2),
            Self::WeightedEdges { min, max } => {
                p.len() == 2
                    && (*min..=*max).contains(&p.max_value())
                    && p.count_of(p.max_value()) == 2
            }
            Self::Explicit {
                profiles,
                allow_empty,
            } => {
                if p.is_empty() {
                    *allow_empty || profiles.contains(p)
                } else {
                    profiles.contains(p)
                }
            }
        }
    }

    /// Largest admissible profile size, when bounded.
    pub fn max_profile_size(&self) -> Option<usize> {
        match self {
            Self::All | Self::Feature => None,
            Self::Partition => Some(1),
            Self::Vertex | Self::VertexWithLoops | Self::WeightedEdges { .. } => Some(2),
            Self::Explicit { profiles, .. } => Some(
                profiles
                    .iter()
                    .map(MembershipProfile::len)
                    .max()
                    .unwrap_or(0),
            ),
        }
    }

    pub fn is_all(&self) -> bool {
        matches!(self, Self::All)
    }

    /// Whether every index `1..=horizon` of `t` has an admissible profile.
    pub fn admits(&self, t: &TraitAllocation) -> bool {
        self.is_all() || (1..=t.horizon()).all(|n| self.contains(&t.memb(n)))
    }

    /// Name used on the command line and in JSON.
    pub fn parse_name(name: &str) -> Result<Self> {
        match name {
            "all" => Ok(Self::All),
            "partition" => Ok(Self::Partition),
            "feature" => Ok(Self::Feature),
            "vertex" => Ok(Self::Vertex),
            "vertex_loops" => Ok(Self::VertexWithLoops),
            other => Err(Error::InvalidModel(format!("unknown constraint '{other}'"))),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Self::All => json!("all"),
            Self::Partition => json!("partition"),
            Self::Feature => json!("feature"),
            Self::Vertex => json!("vertex"),
            Self::VertexWithLoops => json!("vertex_loops"),
            Self::WeightedEdges { min, max } => json!({"weighted_edges": {"min": min, "max": max}}),
            Self::Explicit {
                profiles,
                allow_empty,
            } => json!({
                "explicit": profiles.iter().map(MembershipProfile::values).collect::<Vec<_>>(),
                "allow_empty": allow_empty,
            }),
        }
    }

    fn from_json(v: &Value) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidModel(format!("constraint: {msg}"));
        match v {
            Value::String(s) => Self::parse_name(s),
            Value::Object(map) => {
                if let Some(w) = map.get("weighted_edges") {
                    if map.len() != 1 {
                        return Err(bad("unexpected fields next to weighted_edges"));
                    }
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct Range {
                        min: usize,
                        max: usize,
                    }
                    let r: Range =
                        serde_json::from_value(w.clone()).map_err(|e| bad(&e.to_string()))?;
                    if r.min == 0 || r.min > r.max {
                        return Err(bad("weighted_edges needs 1 <= min <= max"));
                    }
                    Ok(Self::WeightedEdges {
                        min: r.min,
                        max: r.max,
                    })
                } else if let Some(list) = map.get("explicit") {
                    if map.keys().any(|k| k != "explicit" && k != "allow_empty") {
                        return Err(bad("unexpected fields next to explicit"));
                    }
                    let profiles: BTreeSet<MembershipProfile> =
                        serde_json::from_value(list.clone()).map_err(|e| bad(&e.to_string()))?;
                    let allow_empty = match map.get("allow_empty") {
                        None => false,
                        Some(Value::Bool(b)) => *b,
                        Some(_) => return Err(bad("allow_empty must be a boolean")),
                    };
                    Ok(Self::Explicit {
                        profiles,
                        allow_empty,
                    })
                } else {
                    Err(bad("expected weighted_edges or explicit"))
                }
            }
            _ => Err(bad("expected a string or an object")),
        }
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl Serialize for ConstraintSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConstraintSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Self::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// Finite truncation of the outcome space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationCaps {
    /// Maximum number of regular columns `K`.
    pub max_columns: usize,
    /// Maximum multiplicity `J`, for regular columns and dust levels alike.
    pub max_multiplicity: usize,
    /// Maximum dust count `D` per index and level.
    pub max_dust: usize,
}

impl Default for TruncationCaps {
    fn default() -> Self {
        Self {
            max_columns: 3,
            max_multiplicity: 3,
            max_dust: 2,
        }
    }
}

impl TruncationCaps {
    pub fn new(max_columns: usize, max_multiplicity: usize, max_dust: usize) -> Self {
        Self {
            max_columns,
            max_multiplicity,
            max_dust,
        }
    }

    pub fn check(&self, model: &FrequencyModel) -> Result<()> {
        if model.columns() > self.max_columns {
            return Err(Error::CapsExceeded(format!(
                "model has {} columns, cap is {}",
                model.columns(),
                self.max_columns
            )));
        }
        let level = model.max_level().max(model.dust_levels());
        if level > self.max_multiplicity {
            return Err(Error::CapsExceeded(format!(
                "model uses multiplicity {level}, cap is {}",
                self.max_multiplicity
            )));
        }
        Ok(())
    }
}

/// JSON model file: `{"theta": [[…], …], "dust_rates": […], "constraint": …}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub theta: Vec<Vec<f64>>,
    #[serde(default)]
    pub dust_rates: Vec<f64>,
    #[serde(default = "default_constraint")]
    pub constraint: ConstraintSet,
}

fn default_constraint() -> ConstraintSet {
    ConstraintSet::All
}

impl ModelSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    /// Validated model and its constraint set.
    pub fn build(&self) -> Result<(FrequencyModel, ConstraintSet)> {
        Ok((
            FrequencyModel::new(self.theta.clone(), self.dust_rates.clone())?,
            self.constraint.clone(),
        ))
    }

    pub fn from_parts(model: &FrequencyModel, constraint: &ConstraintSet) -> Self {
        Self {
            theta: model.theta_rows().to_vec(),
            dust_rates: model.dust_rates().to_vec(),
            constraint: constraint.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(v: &[usize]) -> MembershipProfile {
        MembershipProfile::from_values(v)
    }

    #[test]
    fn model_validation() {
        assert!(FrequencyModel::new(vec![vec![0.5, 0.6]], vec![]).is_err());
        assert!(FrequencyModel::new(vec![vec![-0.1]], vec![]).is_err());
        assert!(FrequencyModel::new(vec![], vec![f64::NAN]).is_err());
        let m = FrequencyModel::new(vec![vec![0.25, 0.25], vec![0.5]], vec![0.0, 0.3]).unwrap();
        assert_eq!(m.theta(1, 0), 0.5);
        assert_eq!(m.theta(2, 2), 0.0);
        assert_eq!(m.dust_rate(2), 0.3);
        assert_eq!(m.dust_rate(5), 0.0);
        assert_eq!(m.max_level(), 2);
    }

    #[test]
    fn constraint_membership() {
        use ConstraintSet::*;
        assert!(All.contains(&mp(&[])));
        assert!(Partition.contains(&mp(&[1])));
        assert!(!Partition.contains(&mp(&[1, 1])));
        assert!(!Partition.contains(&mp(&[])));
        assert!(Feature.contains(&mp(&[])) && Feature.contains(&mp(&[1, 1, 1])));
        assert!(!Feature.contains(&mp(&[1, 2])));
        assert!(Vertex.contains(&mp(&[1, 1])) && !Vertex.contains(&mp(&[1])));
        assert!(VertexWithLoops.contains(&mp(&[1])) && VertexWithLoops.contains(&mp(&[1, 1])));
        assert!(!VertexWithLoops.contains(&mp(&[2])));
        let w = WeightedEdges { min: 1, max: 3 };
        assert!(w.contains(&mp(&[3, 3])) && !w.contains(&mp(&[1, 2])) && !w.contains(&mp(&[4, 4])));
        let e = Explicit {
            profiles: [mp(&[2])].into_iter().collect(),
            allow_empty: true,
        };
        assert!(e.contains(&mp(&[])) && e.contains(&mp(&[2])) && !e.contains(&mp(&[1])));
    }

    #[test]
    fn constraint_json() {
        for s in [
            r#""all""#,
            r#""partition""#,
            r#""feature""#,
            r#""vertex""#,
            r#""vertex_loops""#,
            r#"{"weighted_edges":{"max":3,"min":1}}"#,
            r#"{"allow_empty":true,"explicit":[[1],[1,1]]}"#,
        ] {
            let c: ConstraintSet = serde_json::from_str(s).unwrap();
            assert_eq!(serde_json::to_string(&c).unwrap(), s);
        }
        for bad in [
            r#""nope""#,
            r#"{"weighted_edges":{"min":2,"max":1}}"#,
            r#"{"explicit":[[0]]}"#,
            r#"{"explicit":[[1]],"extra":1}"#,
            "3",
        ] {
            assert!(serde_json::from_str::<ConstraintSet>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn model_spec_rejects_unknown_fields() {
        let ok = ModelSpec::from_json(r#"{"theta":[[0.5]],"constraint":"partition"}"#).unwrap();
        let (m, c) = ok.build().unwrap();
        assert_eq!(m.columns(), 1);
        assert_eq!(c, ConstraintSet::Partition);
        assert!(ModelSpec::from_json(r#"{"theta":[[0.5]],"thetas":[]}"#).is_err());
        let bad = ModelSpec::from_json(r#"{"theta":[[0.7,0.7]]}"#).unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn assemble_matches_definition() {
        // ξ_1 = (1,0,2), ξ_2 = ξ_4 = (0,0,1), ξ_3 = (1,2,0).
        let outcomes = vec![
            Outcome::new(vec![1, 0, 2], vec![]),
            Outcome::new(vec![0, 0, 1], vec![]),
            Outcome::new(vec![1, 2, 0], vec![]),
            Outcome::new(vec![0, 0, 1], vec![]),
        ];
        let t = assemble(&outcomes);
        assert_eq!(
            t,
            TraitAllocation::parse_with_horizon("{{1,3},{3,3},{1,1,2,4}}", 4).unwrap()
        );
        let dust = assemble(&[Outcome::new(vec![], vec![2, 1])]);
        assert_eq!(
            dust,
            TraitAllocation::parse_with_horizon("{{1},{1},{1,1}}", 1).unwrap()
        );
        assert_eq!(
            Outcome::new(vec![1, 0, 2], vec![1]).membership_profile(),
            mp(&[1, 1, 2])
        );
    }

    #[test]
    fn measure_validation() {
        let o = Outcome::default();
        assert!(DeFinettiMeasure::new(vec![(o.clone(), 0.5)]).is_err());
        assert!(DeFinettiMeasure::new(vec![(o.clone(), 1.0)]).is_ok());
        assert!(DeFinettiMeasure::normalized(vec![(o.clone(), 2.0)]).is_ok());
        assert!(DeFinettiMeasure::new(vec![(o, -1.0), (Outcome::default(), 2.0)]).is_err());
    }
}
