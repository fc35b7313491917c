//! Invariant suite run by `trait-alloc check`: exhaustive properties at
//! small horizons and goodness-of-fit properties of the samplers.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use trait_alloc::alloc::cmp_restricted;
use trait_alloc::corpus::{small_allocations, traits_with_max_multiplicity};
use trait_alloc::oracle::{enumerate_support, ProbabilityTable};
use trait_alloc::prob::{cetpf_prob, etpf_prob};
use trait_alloc::sample::{sample_whole_rejection, uniform_order};
use trait_alloc::stats::{chi_square_gof, tally, total_variation};
use trait_alloc::{
    ConstraintSet, ModelSpec, Permutation, RngState, TraitAllocation, TruncationCaps,
};

use crate::{draw_allocation, Format, Loaded};

/// Minimum p-value for goodness-of-fit properties.
pub const P_MIN: f64 = 1e-3;
/// Exchangeability tolerance on enumerated probabilities.
pub const ORACLE_TOL: f64 = 1e-12;
/// Tolerance on closed-form probabilities.
pub const FORMULA_TOL: f64 = 1e-9;
/// Total-variation bound between rejection samplers at 10^5 draws; scaled
/// by `sqrt(10^5 / draws)` for fewer draws.
pub const TV_TOL: f64 = 0.02;

// Disjoint draw ranges per sampler so properties use independent streams.
const WHOLE_REJECTION: u64 = 1 << 40;
const ORDER_TAGS: u64 = 2 << 40;
const ORDER_SAMPLES: u64 = 3 << 40;

pub struct CheckConfig {
    pub n: usize,
    pub draws: u64,
    pub seed: u64,
    pub max_retries: u64,
}

/// Outcome of one property. `p_value` measures pass when above the
/// threshold; every other measure passes when at most the threshold.
#[derive(Clone, Debug, Serialize)]
pub struct Property {
    pub name: String,
    pub pass: bool,
    pub measure: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Property {
    fn at_most(
        name: &str,
        measure: &'static str,
        value: f64,
        threshold: f64,
        detail: String,
    ) -> Self {
        Self {
            name: name.into(),
            pass: value <= threshold,
            measure,
            value,
            threshold,
            detail,
        }
    }

    fn above(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: value > threshold,
            measure: "p_value",
            value,
            threshold,
            detail,
        }
    }

    fn failed(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            pass: false,
            measure: "error",
            value: f64::NAN,
            threshold: f64::NAN,
            detail,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub pass: bool,
    pub model_valid: bool,
    pub model: Option<ModelSpec>,
    pub caps: Option<TruncationCaps>,
    pub n: Option<usize>,
    pub draws: Option<u64>,
    pub seed: Option<u64>,
    pub properties: Vec<Property>,
}

impl CheckReport {
    pub fn invalid(message: String) -> Self {
        Self {
            pass: false,
            model_valid: false,
            model: None,
            caps: None,
            n: None,
            draws: None,
            seed: None,
            properties: vec![Property::failed("model_validation", message)],
        }
    }

    pub fn to_text(&self, format: Format) -> String {
        let mut out = String::new();
        if format == Format::Csv {
            out.push_str("property,pass,measure,value,threshold,detail\n");
        }
        for p in &self.properties {
            let line = match format {
                Format::Csv => format!(
                    "{},{},{},{},{},{}\n",
                    p.name,
                    p.pass,
                    p.measure,
                    p.value,
                    p.threshold,
                    crate::csv_field(&p.detail)
                ),
                _ => format!(
                    "{} {}: {} {:.3e} (threshold {:.1e}); {}\n",
                    if p.pass { "PASS" } else { "FAIL" },
                    p.name,
                    p.measure,
                    p.value,
                    p.threshold,
                    p.detail
                ),
            };
            out.push_str(&line);
        }
        if format != Format::Csv {
            out.push_str(if self.pass {
                "all properties pass\n"
            } else {
                "some properties fail\n"
            });
        }
        out
    }
}

pub fn run(l: &Loaded, cfg: &CheckConfig) -> CheckReport {
    let mut props = vec![Property::at_most(
        "model_validation",
        "violations",
        0.0,
        0.0,
        format!(
            "{} columns, {} dust levels, constraint {}",
            l.model.columns(),
            l.model.dust_levels(),
            l.constraint
        ),
    )];
    props.push(ordering_consistency(cfg.n));
    match (1..=cfg.n)
        .map(|n| enumerate_support(&l.model, n, &l.caps))
        .collect::<trait_alloc::Result<Vec<_>>>()
    {
        Ok(tables) => {
            props.extend(exhaustive_properties(l, &tables));
        }
        Err(e) => props.push(Property::failed("exhaustive_enumeration", e.to_string())),
    }
    props.extend(sampler_properties(l, cfg));
    CheckReport {
        pass: props.iter().all(|p| p.pass),
        model_valid: true,
        model: Some(l.spec.clone()),
        caps: Some(l.caps),
        n: Some(cfg.n),
        draws: Some(cfg.draws),
        seed: Some(cfg.seed),
        properties: props,
    }
}

/// `order(t|M) = order(t)|M`, `order` is sorted, and restriction never
/// reverses a pair of traits.
fn ordering_consistency(n: usize) -> Property {
    let h = n.min(4);
    let corpus = small_allocations(h, 3, 3);
    let mut failures = 0usize;
    let mut checks = 0usize;
    for t in &corpus {
        let o = t.order();
        checks += 1;
        if o.traits().windows(2).any(|w| w[0] > w[1]) {
            failures += 1;
        }
        for m in 1..=t.horizon() {
            checks += 1;
            if t.restrict(m).order() != o.restrict(m) {
                failures += 1;
            }
        }
    }
    let pool = traits_with_max_multiplicity(h.min(3), 2);
    for a in &pool {
        for b in pool.iter().filter(|b| a <= *b) {
            for m in 1..=h.min(3) {
                checks += 1;
                if cmp_restricted(a.restrict(m).as_ref(), b.restrict(m).as_ref()).is_gt() {
                    failures += 1;
                }
            }
        }
    }
    Property::at_most(
        "ordering_consistency",
        "violations",
        failures as f64,
        0.0,
        format!(
            "{} allocations, {} trait pairs, {checks} checks",
            corpus.len(),
            pool.len() * pool.len()
        ),
    )
}

fn closed_form(l: &Loaded, t: &TraitAllocation) -> trait_alloc::Result<f64> {
    if l.constraint.is_all() {
        Ok(etpf_prob(&l.model, t))
    } else {
        cetpf_prob(&l.model, &l.constraint, t, &l.caps)
    }
}

fn exhaustive_properties(l: &Loaded, tables: &[ProbabilityTable]) -> Vec<Property> {
    let Some(top) = tables.last() else {
        return Vec::new();
    };
    let n = top.horizon();
    let constrained = !l.constraint.is_all();
    let conditioned = if constrained {
        match tables
            .iter()
            .map(|t| t.condition(&l.constraint))
            .collect::<trait_alloc::Result<Vec<_>>>()
        {
            Ok(c) => Some(c),
            Err(e) => return vec![Property::failed("constrained_enumeration", e.to_string())],
        }
    } else {
        None
    };
    let mut out = Vec::new();

    let perms: Vec<Permutation> = Permutation::all(n).collect();
    let mut oracle_dev: f64 = 0.0;
    let mut formula_dev: f64 = 0.0;
    let mut formula_error = None;
    for (t, _) in top.iter() {
        let p = top.get(t);
        let f = closed_form(l, t);
        for pi in &perms {
            let u = t.permute(pi);
            oracle_dev = oracle_dev.max((top.get(&u) - p).abs());
            if let Some(c) = &conditioned {
                let c = &c[n - 1];
                oracle_dev = oracle_dev.max((c.get(&u) - c.get(t)).abs());
            }
            match (&f, closed_form(l, &u)) {
                (Ok(f), Ok(g)) => formula_dev = formula_dev.max((g - f).abs()),
                (Err(e), _) => formula_error = Some(e.to_string()),
                (_, Err(e)) => formula_error = Some(e.to_string()),
            }
        }
    }
    let detail = format!(
        "{} atoms at N = {n}, {} permutations",
        top.len(),
        perms.len()
    );
    out.push(Property::at_most(
        "oracle_exchangeability",
        "max_abs_deviation",
        oracle_dev,
        ORACLE_TOL,
        detail.clone(),
    ));
    out.push(match formula_error {
        Some(e) => Property::failed("formula_exchangeability", e),
        None => Property::at_most(
            "formula_exchangeability",
            "max_abs_deviation",
            formula_dev,
            FORMULA_TOL,
            detail,
        ),
    });

    let mut classes: BTreeMap<_, Vec<f64>> = BTreeMap::new();
    for (t, e) in top.iter().filter(|(_, e)| e.exact) {
        let k = t.kappa().to_f64().unwrap_or(f64::INFINITY);
        classes.entry(t.mult()).or_default().push(e.probability / k);
    }
    let spread = classes
        .values()
        .map(|v| {
            let hi = v.iter().cloned().fold(f64::MIN, f64::max);
            let lo = v.iter().cloned().fold(f64::MAX, f64::min);
            if hi > 0.0 {
                (hi - lo) / hi
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    out.push(Property::at_most(
        "etpf_factorization",
        "max_relative_spread",
        spread,
        ORACLE_TOL,
        format!("{} multiplicity-profile classes at N = {n}", classes.len()),
    ));

    let mut dev: f64 = 0.0;
    let mut atoms = 0usize;
    for table in tables {
        for (t, e) in table.iter() {
            atoms += 1;
            let slack = if e.exact { 0.0 } else { table.deficit() };
            dev = dev.max(((etpf_prob(&l.model, t) - e.probability).abs() - slack).max(0.0));
        }
    }
    out.push(Property::at_most(
        "formula_vs_oracle",
        "max_abs_deviation",
        dev,
        FORMULA_TOL,
        format!("{atoms} atoms, N = 1..={n}"),
    ));

    if let Some(conditioned) = &conditioned {
        let mut dev: f64 = 0.0;
        let mut error = None;
        for (table, cond) in tables.iter().zip(conditioned) {
            for (t, e) in cond.iter() {
                let slack = if e.exact { 0.0 } else { table.deficit() };
                match closed_form(l, t) {
                    Ok(f) => dev = dev.max(((f - e.probability).abs() - slack).max(0.0)),
                    Err(err) => error = Some(err.to_string()),
                }
            }
        }
        out.push(match error {
            Some(e) => Property::failed("cetpf_vs_oracle", e),
            None => Property::at_most(
                "cetpf_vs_oracle",
                "max_abs_deviation",
                dev,
                FORMULA_TOL,
                format!("N = 1..={n}"),
            ),
        });
        let violations = conditioned[n - 1]
            .iter()
            .filter(|(t, e)| e.probability > 0.0 && !closed_under(&l.constraint, t))
            .count();
        out.push(Property::at_most(
            closure_name(&l.constraint),
            "violations",
            violations as f64,
            0.0,
            format!("{} constrained atoms at N = {n}", conditioned[n - 1].len()),
        ));
    }
    out
}

fn closure_name(c: &ConstraintSet) -> &'static str {
    match c {
        ConstraintSet::Partition => "partition_closure",
        ConstraintSet::Vertex => "vertex_closure",
        _ => "constraint_closure",
    }
}

/// `t` satisfies the constraint, and the structural class it implies.
fn closed_under(c: &ConstraintSet, t: &TraitAllocation) -> bool {
    let class = t.classify();
    c.admits(t)
        && match c {
            ConstraintSet::Partition => class.partition,
            ConstraintSet::Vertex => class.vertex_allocation,
            ConstraintSet::Feature => class.feature_allocation,
            _ => true,
        }
}

fn draws_parallel<T: Send>(
    draws: u64,
    f: impl Fn(u64) -> trait_alloc::Result<T> + Sync + Send,
) -> Result<Vec<T>, String> {
    (0..draws)
        .into_par_iter()
        .map(f)
        .collect::<trait_alloc::Result<Vec<T>>>()
        .map_err(|e| e.to_string())
}

/// Chi-square of samples against the closed-form law on the atoms of
/// `table`, with a final bin for everything outside it.
fn fit(
    l: &Loaded,
    table: &ProbabilityTable,
    counts: &BTreeMap<TraitAllocation, u64>,
) -> trait_alloc::Result<f64> {
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    for (t, _) in table.iter() {
        observed.push(counts.get(t).copied().unwrap_or(0));
        expected.push(closed_form(l, t)?);
    }
    let inside: u64 = observed.iter().sum();
    let total: u64 = counts.values().sum();
    observed.push(total - inside);
    expected.push((1.0 - expected.iter().sum::<f64>()).max(0.0));
    Ok(chi_square_gof(&observed, &expected).p_value)
}

fn sampler_properties(l: &Loaded, cfg: &CheckConfig) -> Vec<Property> {
    if cfg.draws == 0 || cfg.n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let n = cfg.n.min(2);
    let table = enumerate_support(&l.model, n, &l.caps).and_then(|t| {
        if l.constraint.is_all() {
            Ok(t)
        } else {
            t.condition(&l.constraint)
        }
    });
    let table = match table {
        Ok(t) => t,
        Err(e) => return vec![Property::failed("sampler_calibration", e.to_string())],
    };

    let per_index = draws_parallel(cfg.draws, |d| {
        draw_allocation(l, n, cfg.seed, d, cfg.max_retries)
    });
    let whole = draws_parallel(cfg.draws, |d| {
        let mut rng = RngState::at(cfg.seed, WHOLE_REJECTION + d);
        sample_whole_rejection(&l.model, &l.constraint, n, &mut rng, cfg.max_retries)
    });
    let (per_index, whole) = match (per_index, whole) {
        (Ok(a), Ok(b)) => (tally(a), tally(b)),
        (Err(e), _) | (_, Err(e)) => {
            return vec![Property::failed("sampler_calibration", e)];
        }
    };

    match fit(l, &table, &per_index) {
        Ok(p) => out.push(Property::above(
            "sampler_calibration",
            p,
            P_MIN,
            format!(
                "{} draws at N = {n} against {} exact atoms",
                cfg.draws,
                table.len()
            ),
        )),
        Err(e) => out.push(Property::failed("sampler_calibration", e.to_string())),
    }

    let tv = total_variation(&per_index, &whole);
    let tv_tol = TV_TOL * (1e5 / cfg.draws as f64).sqrt().max(1.0);
    let p_whole = fit(l, &table, &whole).unwrap_or(0.0);
    let mut rejection = Property::at_most(
        "rejection_equivalence",
        "total_variation",
        tv,
        tv_tol,
        format!("per-index vs whole-allocation rejection, {} draws each at N = {n}; whole-rejection chi-square p {p_whole:.3}", cfg.draws),
    );
    rejection.pass &= p_whole > P_MIN;
    out.push(rejection);

    if !l.constraint.is_all() {
        let violations = per_index
            .keys()
            .chain(whole.keys())
            .filter(|t| !closed_under(&l.constraint, t))
            .count();
        out.push(Property::at_most(
            "sampled_closure",
            "violations",
            violations as f64,
            0.0,
            format!(
                "{} distinct sampled allocations",
                per_index.len() + whole.len()
            ),
        ));
    }

    out.push(uniform_ordering(l, cfg));
    out
}

/// Conditional on `T_N = t`, a uniform ordering hits each of the `κ(t)`
/// orderings with probability `1/κ(t)`. Tested per sampled allocation with
/// enough draws, Bonferroni-corrected.
fn uniform_ordering(l: &Loaded, cfg: &CheckConfig) -> Property {
    const NAME: &str = "uniform_ordering";
    let ordered = draws_parallel(cfg.draws, |d| {
        let t = draw_allocation(l, cfg.n, cfg.seed, ORDER_SAMPLES + d, cfg.max_retries)?;
        let o = uniform_order(&t, &mut RngState::at(cfg.seed, ORDER_TAGS + d));
        Ok((t, o))
    });
    let ordered = match ordered {
        Ok(o) => o,
        Err(e) => return Property::failed(NAME, e),
    };
    let mut invalid = 0usize;
    let mut groups: BTreeMap<TraitAllocation, BTreeMap<String, u64>> = BTreeMap::new();
    for (t, o) in &ordered {
        if o.to_allocation() != *t {
            invalid += 1;
        }
        *groups
            .entry(t.clone())
            .or_default()
            .entry(o.to_string())
            .or_insert(0) += 1;
    }
    let mut tested = Vec::new();
    for (t, counts) in &groups {
        let Some(kappa) = t.kappa().to_u64() else {
            continue;
        };
        let total: u64 = counts.values().sum();
        if !(2..=1000).contains(&kappa) || total < 20 * kappa {
            continue;
        }
        let mut observed: Vec<u64> = counts.values().copied().collect();
        observed.resize(kappa as usize, 0);
        let expected = vec![1.0 / kappa as f64; kappa as usize];
        let extra = counts.len() > kappa as usize;
        tested.push(if extra {
            0.0
        } else {
            chi_square_gof(&observed, &expected).p_value
        });
    }
    if invalid > 0 {
        return Property::failed(
            NAME,
            format!("{invalid} orderings do not reassemble to their allocation"),
        );
    }
    let m = tested.len().max(1) as f64;
    let p = tested.iter().cloned().fold(1.0, f64::min);
    Property::above(
        NAME,
        (p * m).min(1.0),
        P_MIN,
        format!(
            "{} allocations with at least two orderings tested at N = {}; Bonferroni-adjusted minimum p",
            tested.len(),
            cfg.n
        ),
    )
}
