//! Edge-exchangeable multigraphs encoded as vertex allocations: every trait
//! is a vertex and every data index is an edge joining the traits that
//! contain it.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{Trait, TraitAllocation};
use crate::error::{Error, Result};
use crate::model::{assemble, ConstraintSet, FrequencyModel, Outcome, TruncationCaps};
use crate::oracle::enumerate_membership_outcomes;
use crate::prob::evpf_model;
use crate::sample::{sample_constrained_outcomes, RngState};

/// Which membership profiles encode an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphVariant {
    /// Profile `{1, 1}`: an edge between two vertices.
    Simple,
    /// Profiles `{1, 1}` and `{1}`; the latter is a loop.
    Loops,
    /// Profiles `{j, j}` with `min ≤ j ≤ max`: an edge of weight `j`.
    Weighted { min: usize, max: usize },
}

impl GraphVariant {
    pub fn constraint(&self) -> ConstraintSet {
        match *self {
            Self::Simple => ConstraintSet::Vertex,
            Self::Loops => ConstraintSet::VertexWithLoops,
            Self::Weighted { min, max } => ConstraintSet::WeightedEdges { min, max },
        }
    }

    fn name(&self) -> String {
        match self {
            Self::Simple => "simple".into(),
            Self::Loops => "loops".into(),
            Self::Weighted { min, max } => format!("weighted({min}..{max})"),
        }
    }
}

/// Edge `n` (1-based position in `edges`) joins vertices `a ≤ b`; `a == b`
/// is a loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: usize,
}

/// Multigraph on vertices `1..=vertex_count` with an indexed edge sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multigraph {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
}

impl Multigraph {
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        for (i, e) in edges.iter().enumerate() {
            if e.a == 0 || e.a > e.b || e.b > vertex_count || e.weight == 0 {
                return Err(Error::Encoding {
                    index: i + 1,
                    profile: format!("{e:?}"),
                    variant: "graph".into(),
                });
            }
        }
        Ok(Self {
            vertex_count,
            edges,
        })
    }

    /// Edge list CSV: `edge_index,vertex_a,vertex_b,weight`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["edge_index", "vertex_a", "vertex_b", "weight"])
            .expect("writing to memory");
        for (i, e) in self.edges.iter().enumerate() {
            w.serialize((i + 1, e.a, e.b, e.weight))
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 output")
    }
}

/// Graph encoded by `t`: vertex `v` is the `v`-th trait of `order(t)` and
/// edge `n` joins the traits containing index `n`.
pub fn alloc_to_graph(t: &TraitAllocation, variant: GraphVariant) -> Result<Multigraph> {
    let c = variant.constraint();
    let traits: Vec<&Trait> = t.iter_copies().collect();
    let mut edges = Vec::with_capacity(t.horizon());
    for n in 1..=t.horizon() {
        let profile = t.memb(n);
        if !c.contains(&profile) {
            return Err(Error::Encoding {
                index: n,
                profile: profile.to_string(),
                variant: variant.name(),
            });
        }
        let hits: Vec<(usize, usize)> = traits
            .iter()
            .enumerate()
            .filter_map(|(v, tr)| {
                let m = tr.multiplicity(n);
                (m > 0).then_some((v + 1, m))
            })
            .collect();
        let edge = match hits[..] {
            [(a, w)] => Edge { a, b: a, weight: w },
            [(a, w), (b, _)] => Edge { a, b, weight: w },
            _ => unreachable!("admissible profiles have one or two memberships"),
        };
        edges.push(edge);
    }
    Multigraph::new(traits.len(), edges)
}

/// Inverse encoding: vertex `v` becomes the trait holding every incident
/// edge index with the edge's weight. Every vertex must have an edge.
pub fn graph_to_alloc(g: &Multigraph) -> Result<TraitAllocation> {
    let mut per_vertex: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.vertex_count];
    for (i, e) in g.edges.iter().enumerate() {
        per_vertex[e.a - 1].push((i + 1, e.weight));
        if e.b != e.a {
            per_vertex[e.b - 1].push((i + 1, e.weight));
        }
    }
    let traits = per_vertex
        .into_iter()
        .enumerate()
        .map(|(v, entries)| {
            Trait::new(entries)
                .map_err(|_| Error::InvalidTrait(format!("vertex {} has no incident edge", v + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    TraitAllocation::new(g.edges.len(), traits)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub vertex_count: usize,
    /// Number of edges counted with repetition.
    pub edge_count: usize,
    /// Number of distinct `(a, b, weight)` edges.
    pub distinct_edge_count: usize,
    /// Sum of incident edge weights per vertex; a loop counts once.
    pub degrees: Vec<usize>,
    pub max_degree: usize,
}

pub fn graph_stats(g: &Multigraph) -> GraphStats {
    let mut degrees = vec![0; g.vertex_count];
    for e in &g.edges {
        degrees[e.a - 1] += e.weight;
        if e.b != e.a {
            degrees[e.b - 1] += e.weight;
        }
    }
    let distinct: BTreeSet<&Edge> = g.edges.iter().collect();
    GraphStats {
        vertex_count: g.vertex_count,
        edge_count: g.edges.len(),
        distinct_edge_count: distinct.len(),
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        degrees,
    }
}

/// Positive vertex weights of a vertex popularity model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VertexWeights(Vec<f64>);

impl VertexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "vertex weight {x} must be positive"
            )));
        }
        Ok(Self(w))
    }

    /// `w_k ∝ k^(−alpha)` for `k ≤ count`, normalized to sum 1.
    pub fn power_law(count: usize, alpha: f64) -> Result<Self> {
        let raw: Vec<f64> = (1..=count).map(|k| (k as f64).powf(-alpha)).collect();
        let total: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|x| x / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn require_pair(&self) -> Result<()> {
        if self.0.len() < 2 {
            return Err(Error::Degenerate(
                "a vertex popularity model needs at least two vertices".into(),
            ));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for VertexWeights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<VertexWeights> for Vec<f64> {
    fn from(w: VertexWeights) -> Self {
        w.0
    }
}

/// `P(edge = {k, l}) = w_k w_l / Σ_{a<b} w_a w_b` for `k < l` (1-based).
pub fn pair_law(w: &VertexWeights) -> Result<Vec<((usize, usize), f64)>> {
    w.require_pair()?;
    let w = w.as_slice();
    let mut pairs = Vec::new();
    for k in 0..w.len() {
        for l in k + 1..w.len() {
            pairs.push(((k + 1, l + 1), w[k] * w[l]));
        }
    }
    let z: f64 = pairs.iter().map(|(_, p)| p).sum();
    Ok(pairs.into_iter().map(|(kl, p)| (kl, p / z)).collect())
}

fn pair_of(o: &Outcome) -> (usize, usize) {
    let cols: Vec<usize> = o
        .regular
        .iter()
        .enumerate()
        .filter(|&(_, &x)| x == 1)
        .map(|(k, _)| k + 1)
        .collect();
    (cols[0], cols[1])
}

/// Single-edge law of the constrained frequency model with
/// `θ_k1 = w_k / (1 + w_k)`, by enumerating one index's outcomes and
/// conditioning on the profile `{1, 1}`.
pub fn cfm_edge_law(w: &VertexWeights) -> Result<Vec<((usize, usize), f64)>> {
    w.require_pair()?;
    let (model, c) = evpf_model(w.as_slice())?;
    let caps = TruncationCaps::new(model.columns(), 1, 0);
    let space = enumerate_membership_outcomes(&model, &caps)?;
    let accepted: Vec<_> = space
        .outcomes
        .iter()
        .filter(|(o, _)| c.contains(&o.membership_profile()))
        .map(|(o, p)| (pair_of(o), *p))
        .collect();
    let a: f64 = accepted.iter().map(|(_, p)| p).sum();
    let mut law: Vec<_> = accepted.into_iter().map(|(kl, p)| (kl, p / a)).collect();
    law.sort_by_key(|x| x.0);
    Ok(law)
}

/// Edge sequence of the direct sampler: edge `n` draws its pair from stream
/// `n` of the current draw.
pub fn sample_vertex_popularity_edges(
    w: &VertexWeights,
    edges: usize,
    rng: &mut RngState,
) -> Result<Vec<(usize, usize)>> {
    let law = pair_law(w)?;
    let out = (1..=edges)
        .map(|n| {
            let u: f64 = rng.stream(0, n as u64).gen();
            let mut cum = 0.0;
            for &(kl, p) in &law {
                cum += p;
                if u < cum {
                    return kl;
                }
            }
            law[law.len() - 1].0
        })
        .collect();
    rng.advance();
    Ok(out)
}

fn edges_to_alloc(k: usize, pairs: &[(usize, usize)]) -> TraitAllocation {
    let outcomes: Vec<Outcome> = pairs
        .iter()
        .map(|&(a, b)| {
            let mut xi = vec![0; k];
            xi[a - 1] = 1;
            xi[b - 1] = 1;
            Outcome::new(xi, Vec::new())
        })
        .collect();
    assemble(&outcomes)
}

/// Vertex allocation with `edges` edges from the direct pairwise sampler.
pub fn sample_vertex_popularity(
    w: &VertexWeights,
    edges: usize,
    rng: &mut RngState,
) -> Result<TraitAllocation> {
    let pairs = sample_vertex_popularity_edges(w, edges, rng)?;
    Ok(edges_to_alloc(w.len(), &pairs))
}

/// Edge sequence of the constrained frequency model sampler: the pair is the
/// two columns an accepted index joins.
pub fn sample_vertex_popularity_edges_via_cfm(
    w: &VertexWeights,
    edges: usize,
    rng: &mut RngState,
    max_retries: u64,
) -> Result<Vec<(usize, usize)>> {
    w.require_pair()?;
    let (model, c) = evpf_model(w.as_slice())?;
    let outcomes = sample_constrained_outcomes(&model, &c, edges, rng, max_retries)?;
    Ok(outcomes.iter().map(pair_of).collect())
}

/// Vertex allocation with `edges` edges from the constrained frequency model.
pub fn sample_vertex_popularity_via_cfm(
    w: &VertexWeights,
    edges: usize,
    rng: &mut RngState,
    max_retries: u64,
) -> Result<TraitAllocation> {
    let pairs = sample_vertex_popularity_edges_via_cfm(w, edges, rng, max_retries)?;
    Ok(edges_to_alloc(w.len(), &pairs))
}

/// Generator of one edge sequence for growth statistics.
#[derive(Clone, Debug)]
pub enum GrowthSource {
    Weights(VertexWeights),
    Model {
        model: FrequencyModel,
        constraint: ConstraintSet,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub vertices: usize,
    pub edges: usize,
}

/// Prefix statistics of one sampled sequence of `n_max` edges at
/// `n = 0, step, 2·step, … ≤ n_max`. Empty when `n_max = 0`.
pub fn growth_curve(
    source: &GrowthSource,
    n_max: usize,
    step: usize,
    rng: &mut RngState,
    max_retries: u64,
) -> Result<Vec<GrowthRow>> {
    if step == 0 {
        return Err(Error::InvalidModel("growth step must be positive".into()));
    }
    if n_max == 0 {
        return Ok(Vec::new());
    }
    let t = match source {
        GrowthSource::Weights(w) => sample_vertex_popularity(w, n_max, rng)?,
        GrowthSource::Model { model, constraint } => assemble(&sample_constrained_outcomes(
            model,
            constraint,
            n_max,
            rng,
            max_retries,
        )?),
    };
    Ok((0..=n_max)
        .step_by(step)
        .map(|n| GrowthRow {
            n,
            vertices: t.restrict(n).num_traits(),
            edges: n,
        })
        .collect())
}

/// Growth curve CSV: `n,vertices,edges`.
pub fn growth_to_csv(rows: &[GrowthRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "vertices", "edges"])
        .expect("writing to memory");
    for r in rows {
        w.serialize((r.n, r.vertices, r.edges))
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 output")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn al(s: &str, n: usize) -> TraitAllocation {
        TraitAllocation::parse_with_horizon(s, n).unwrap()
    }

    fn fig2() -> TraitAllocation {
        al("{{1,2,4},{2},{1,4},{3},{3}}", 4)
    }

    #[test]
    fn encodes_the_example_graph() {
        // Lexicographic vertices: {1,2,4}, {1,4}, {2}, {3}, {3}.
        let g = alloc_to_graph(&fig2(), GraphVariant::Simple).unwrap();
        assert_eq!(g.vertex_count, 5);
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.a, e.b, e.weight)).collect();
        assert_eq!(pairs, vec![(1, 2, 1), (1, 3, 1), (4, 5, 1), (1, 2, 1)]);
        assert_eq!(graph_to_alloc(&g).unwrap(), fig2());
        let s = graph_stats(&g);
        assert_eq!(s.degrees, vec![3, 2, 1, 1, 1]);
        assert_eq!(
            (
                s.vertex_count,
                s.edge_count,
                s.distinct_edge_count,
                s.max_degree
            ),
            (5, 4, 3, 3)
        );
    }

    #[test]
    fn variant_checks() {
        let pair = al("{{1},{1}}", 1);
        let g = alloc_to_graph(&pair, GraphVariant::Simple).unwrap();
        assert_eq!(
            g.edges,
            vec![Edge {
                a: 1,
                b: 2,
                weight: 1
            }]
        );
        let double = al("{{1,1}}", 1);
        for v in [
            GraphVariant::Simple,
            GraphVariant::Loops,
            GraphVariant::Weighted { min: 1, max: 3 },
        ] {
            assert!(matches!(
                alloc_to_graph(&double, v),
                Err(Error::Encoding { index: 1, .. })
            ));
        }
        let lp = al("{{1,2},{2}}", 2);
        assert!(alloc_to_graph(&lp, GraphVariant::Simple).is_err());
        let g = alloc_to_graph(&lp, GraphVariant::Loops).unwrap();
        assert_eq!(
            g.edges[0],
            Edge {
                a: 1,
                b: 1,
                weight: 1
            }
        );
        assert_eq!(graph_stats(&g).degrees, vec![2, 1]);
        assert_eq!(graph_to_alloc(&g).unwrap(), lp);
        let heavy = al("{{1,1,1},{1,1,1,2},{2}}", 2);
        let g = alloc_to_graph(&heavy, GraphVariant::Weighted { min: 1, max: 3 }).unwrap();
        assert_eq!(g.edges[0].weight, 3);
        assert_eq!(graph_to_alloc(&g).unwrap(), heavy);

        let empty = alloc_to_graph(&TraitAllocation::empty(0), GraphVariant::Simple).unwrap();
        assert_eq!(
            empty,
            Multigraph {
                vertex_count: 0,
                edges: vec![]
            }
        );
        let s = graph_stats(&empty);
        assert_eq!((s.vertex_count, s.edge_count, s.max_degree), (0, 0, 0));
    }

    #[test]
    fn single_edge_stats() {
        let g = Multigraph::new(
            2,
            vec![Edge {
                a: 1,
                b: 2,
                weight: 1,
            }],
        )
        .unwrap();
        assert_eq!(graph_stats(&g).degrees, vec![1, 1]);
        assert!(Multigraph::new(
            2,
            vec![Edge {
                a: 2,
                b: 1,
                weight: 1
            }]
        )
        .is_err());
        assert!(graph_to_alloc(&Multigraph::new(3, g.edges.clone()).unwrap()).is_err());
    }

    #[test]
    fn csv_export() {
        let g = alloc_to_graph(&al("{{1},{1}}", 1), GraphVariant::Simple).unwrap();
        assert_eq!(g.to_csv(), "edge_index,vertex_a,vertex_b,weight\n1,1,2,1\n");
    }

    #[test]
    fn pair_laws_agree() {
        let w = VertexWeights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let direct = pair_law(&w).unwrap();
        let cfm = cfm_edge_law(&w).unwrap();
        let expect = [
            ((1, 2), 15.0 / 31.0),
            ((1, 3), 10.0 / 31.0),
            ((2, 3), 6.0 / 31.0),
        ];
        for ((d, c), e) in direct.iter().zip(&cfm).zip(expect) {
            assert_eq!(d.0, e.0);
            assert_eq!(c.0, e.0);
            assert!((d.1 - e.1).abs() < 1e-12);
            assert!((c.1 - e.1).abs() < 1e-12);
        }
        let two = VertexWeights::new(vec![0.9, 0.1]).unwrap();
        assert_eq!(pair_law(&two).unwrap(), vec![((1, 2), 1.0)]);
        assert!(pair_law(&VertexWeights::new(vec![1.0]).unwrap()).is_err());
        assert!(VertexWeights::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn samplers_produce_vertex_allocations() {
        let w = VertexWeights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let mut rng = RngState::new(5);
        for _ in 0..100 {
            let t = sample_vertex_popularity(&w, 3, &mut rng).unwrap();
            assert!(t.classify().vertex_allocation);
            let t = sample_vertex_popularity_via_cfm(&w, 3, &mut rng, 1000).unwrap();
            assert!(t.classify().vertex_allocation);
        }
        let two = VertexWeights::new(vec![1.0, 1.0]).unwrap();
        let t = sample_vertex_popularity(&two, 5, &mut rng).unwrap();
        assert_eq!(t, al("{{1,2,3,4,5},{1,2,3,4,5}}", 5));
        let edges = sample_vertex_popularity_edges_via_cfm(&two, 5, &mut rng, 1000).unwrap();
        assert_eq!(edges, vec![(1, 2); 5]);
    }

    #[test]
    fn growth_curves() {
        let mut rng = RngState::new(1);
        let two = GrowthSource::Weights(VertexWeights::new(vec![1.0, 1.0]).unwrap());
        let rows = growth_curve(&two, 10, 2, &mut rng, 10).unwrap();
        assert_eq!(
            rows[0],
            GrowthRow {
                n: 0,
                vertices: 0,
                edges: 0
            }
        );
        assert!(rows[1..].iter().all(|r| r.vertices == 2 && r.edges == r.n));
        assert_eq!(rows.len(), 6);
        assert!(growth_curve(&two, 0, 1, &mut rng, 10).unwrap().is_empty());
        assert_eq!(growth_to_csv(&[]), "n,vertices,edges\n");

        let uniform = GrowthSource::Weights(VertexWeights::new(vec![1.0; 100]).unwrap());
        let rows = growth_curve(&uniform, 400, 20, &mut rng, 10).unwrap();
        assert!(rows.windows(2).all(|p| p[0].vertices <= p[1].vertices));
        assert!(rows.last().unwrap().vertices <= 100);
    }

    #[test]
    fn weights_json() {
        let w: VertexWeights = serde_json::from_str("[0.5,0.5]").unwrap();
        assert_eq!(w.len(), 2);
        assert!(serde_json::from_str::<VertexWeights>("[0.5,-1]").is_err());
        let p = VertexWeights::power_law(4, 1.0).unwrap();
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.as_slice().windows(2).all(|x| x[0] > x[1]));
    }
}
