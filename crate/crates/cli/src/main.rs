//! `trait-alloc`: sampling, exact probabilities, invariant checks and graph
//! generation for exchangeable trait allocations.
//!
//! Exit codes: 0 success, 1 validation error, 2 property-check failure,
//! 3 retry exhaustion.

mod check;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;
use trait_alloc::graph::{
    alloc_to_graph, graph_stats, growth_curve, growth_to_csv, sample_vertex_popularity_edges,
    sample_vertex_popularity_edges_via_cfm, Edge, GraphVariant, GrowthSource, Multigraph,
    VertexWeights,
};
use trait_alloc::oracle::{enumerate_support, oracle_prob_frequency};
use trait_alloc::prob::{cetpf_prob, etpf_prob};
use trait_alloc::sample::{sample_constrained, sample_frequency, DEFAULT_MAX_RETRIES};
use trait_alloc::{
    ConstraintSet, FrequencyModel, ModelSpec, RngState, TraitAllocation, TruncationCaps,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Retries(String),
    #[error("property check failed")]
    CheckFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::CheckFailed => 2,
            Self::Retries(_) => 3,
        }
    }
}

impl From<trait_alloc::Error> for CliError {
    fn from(e: trait_alloc::Error) -> Self {
        match e {
            trait_alloc::Error::RetriesExhausted { .. } => Self::Retries(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "trait-alloc",
    version,
    about = "Exchangeable trait allocations: sampling, exact probabilities and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw allocations of [N] from a (constrained) frequency model.
    Sample(SampleArgs),
    /// Exact probability of one allocation.
    Prob(ProbArgs),
    /// Run the invariant suite against a model and report per property.
    Check(CheckArgs),
    /// Edge-exchangeable graphs: edge lists, growth curves and encodings.
    Graph(GraphArgs),
    /// Dump the full probability table of T_N by exhaustive enumeration.
    Enumerate(EnumerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model JSON file, or inline JSON starting with '{'.
    #[arg(long)]
    model: String,
    /// Constraint overriding the model's: a name (all, partition, feature,
    /// vertex, vertex_loops) or constraint JSON.
    #[arg(long)]
    constraint: Option<String>,
    /// Truncation caps "K,J,D": columns, multiplicity, dust count per level.
    #[arg(long)]
    caps: Option<String>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct ProbArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Allocation in canonical text form, e.g. "{{1,2},{2}}".
    allocation: String,
    /// Horizon; defaults to the largest index in the allocation.
    #[arg(long)]
    n: Option<usize>,
    /// Also compute the brute-force enumeration value.
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Largest horizon checked exhaustively.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Draws per sampler property.
    #[arg(long, default_value_t = 100_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(subcommand)]
    command: GraphCommand,
}

#[derive(Subcommand, Debug)]
enum GraphCommand {
    /// Sample an edge sequence from a vertex popularity model.
    Edges(EdgesArgs),
    /// Vertex count against edge count along one sampled edge sequence.
    Growth(GrowthArgs),
    /// Decode an allocation string as a multigraph.
    Encode(EncodeArgs),
}

#[derive(Args, Debug)]
struct EdgesArgs {
    /// Comma-separated positive vertex weights.
    #[arg(long)]
    weights: String,
    #[arg(long)]
    edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample through the constrained frequency model instead of pairwise
    /// products.
    #[arg(long)]
    cfm: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).multiple(false)))]
struct GrowthArgs {
    /// Comma-separated positive vertex weights.
    #[arg(long, group = "source")]
    weights: Option<String>,
    /// "K,ALPHA": K vertices with weights proportional to k^-ALPHA.
    #[arg(long, group = "source")]
    power_law: Option<String>,
    /// Model JSON file or inline JSON; its constraint selects edges.
    #[arg(long, group = "source")]
    model: Option<String>,
    #[arg(long)]
    n_max: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    allocation: String,
    /// simple, loops, or "weighted:MIN..MAX".
    #[arg(long, default_value = "simple")]
    variant: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::CheckFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Prob(a) => cmd_prob(a),
        Command::Check(a) => cmd_check(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Graph(g) => match g.command {
            GraphCommand::Edges(a) => cmd_graph_edges(a),
            GraphCommand::Growth(a) => cmd_graph_growth(a),
            GraphCommand::Encode(a) => cmd_graph_encode(a),
        },
    }
}

/// Validated model, constraint and caps.
pub struct Loaded {
    pub spec: ModelSpec,
    pub model: FrequencyModel,
    pub constraint: ConstraintSet,
    pub caps: TruncationCaps,
}

fn read_spec(source: &str) -> CliResult<ModelSpec> {
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        fs::read_to_string(source)
            .map_err(|e| CliError::Validation(format!("cannot read model '{source}': {e}")))?
    };
    Ok(ModelSpec::from_json(&text)?)
}

fn parse_constraint(s: &str) -> CliResult<ConstraintSet> {
    if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| CliError::Validation(format!("constraint: {e}")))
    } else {
        Ok(ConstraintSet::parse_name(s.trim())?)
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{what}: cannot parse '{}'", x.trim())))
        })
        .collect()
}

fn parse_caps(s: &str) -> CliResult<TruncationCaps> {
    match parse_list::<usize>(s, "caps")?[..] {
        [k, j, d] => Ok(TruncationCaps::new(k, j, d)),
        _ => Err(CliError::Validation("caps: expected \"K,J,D\"".into())),
    }
}

/// Default caps, widened to the model's column count and multiplicity.
fn default_caps(model: &FrequencyModel) -> TruncationCaps {
    let d = TruncationCaps::default();
    TruncationCaps::new(
        d.max_columns.max(model.columns()),
        d.max_multiplicity
            .max(model.max_level())
            .max(model.dust_levels()),
        d.max_dust,
    )
}

impl ModelArgs {
    fn load(&self) -> CliResult<Loaded> {
        let mut spec = read_spec(&self.model)?;
        if let Some(c) = &self.constraint {
            spec.constraint = parse_constraint(c)?;
        }
        let (model, constraint) = spec.build()?;
        let caps = match &self.caps {
            Some(s) => parse_caps(s)?,
            None => default_caps(&model),
        };
        Ok(Loaded {
            spec,
            model,
            constraint,
            caps,
        })
    }
}

pub fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// Draw `d` of a sampler keyed by `(seed, d)`, so results do not depend on
/// scheduling.
pub fn draw_allocation(
    l: &Loaded,
    n: usize,
    seed: u64,
    d: u64,
    max_retries: u64,
) -> trait_alloc::Result<TraitAllocation> {
    let mut rng = RngState::at(seed, d);
    if l.constraint.is_all() {
        Ok(sample_frequency(&l.model, n, &mut rng))
    } else {
        sample_constrained(&l.model, &l.constraint, n, &mut rng, max_retries)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> CliResult<()> {
    let l = a.model.load()?;
    let results: Vec<_> = thread_pool(a.jobs)?.install(|| {
        (0..a.draws)
            .into_par_iter()
            .map(|d| draw_allocation(&l, a.n, a.seed, d, a.max_retries))
            .collect()
    });
    let mut body = String::new();
    if a.format == Format::Csv {
        body.push_str("draw,allocation\n");
    }
    let mut exhausted = 0u64;
    for (d, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                let line = match a.format {
                    Format::Text => t.to_string(),
                    Format::Json => json!({"draw": d, "allocation": t.to_string(), "horizon": t.horizon(), "traits": t}).to_string(),
                    Format::Csv => format!("{d},{}", csv_field(&t.to_string())),
                };
                body.push_str(&line);
                body.push('\n');
            }
            Err(e) => {
                exhausted += 1;
                eprintln!("draw {d}: {e}");
            }
        }
    }
    emit(None, &body)?;
    if exhausted > 0 {
        return Err(CliError::Retries(format!(
            "{exhausted} of {} draws exhausted their retries",
            a.draws
        )));
    }
    Ok(())
}

fn cmd_prob(a: ProbArgs) -> CliResult<()> {
    let l = a.model.load()?;
    let t: TraitAllocation = match a.n {
        Some(n) => TraitAllocation::parse_with_horizon(&a.allocation, n)?,
        None => a.allocation.parse()?,
    };
    let p = if l.constraint.is_all() {
        etpf_prob(&l.model, &t)
    } else {
        cetpf_prob(&l.model, &l.constraint, &t, &l.caps)?
    };
    let oracle = if a.oracle {
        Some(if l.constraint.is_all() {
            let v = oracle_prob_frequency(&l.model, &t, &l.caps)?;
            (v.probability, v.error_bound)
        } else {
            let table = enumerate_support(&l.model, t.horizon(), &l.caps)?;
            let entry_exact = table.entry(&t).is_none_or(|e| e.exact);
            let conditioned = table.condition(&l.constraint)?;
            (
                conditioned.get(&t),
                if entry_exact { 0.0 } else { table.deficit() },
            )
        })
    } else {
        None
    };
    let body = match a.format {
        Format::Json => {
            let mut v = json!({"allocation": t.to_string(), "horizon": t.horizon(), "probability": p});
            if let Some((q, bound)) = oracle {
                v["oracle"] = json!(q);
                v["difference"] = json!((p - q).abs());
                v["oracle_error_bound"] = json!(bound);
            }
            format!("{v}\n")
        }
        Format::Csv => match oracle {
            Some((q, bound)) => format!(
                "allocation,probability,oracle,difference,oracle_error_bound\n{},{p},{q},{},{bound}\n",
                csv_field(&t.to_string()),
                (p - q).abs()
            ),
            None => format!("allocation,probability\n{},{p}\n", csv_field(&t.to_string())),
        },
        Format::Text => match oracle {
            Some((q, bound)) => format!(
                "probability {p}\noracle {q}\ndifference {}\noracle_error_bound {bound}\n",
                (p - q).abs()
            ),
            None => format!("{p}\n"),
        },
    };
    emit(None, &body)
}

fn cmd_enumerate(a: EnumerateArgs) -> CliResult<()> {
    let l = a.model.load()?;
    let mut table = enumerate_support(&l.model, a.n, &l.caps)?;
    if !l.constraint.is_all() {
        table = table.condition(&l.constraint)?;
    }
    let body = match a.format {
        Format::Json => format!("{}\n", table.to_json()),
        Format::Csv | Format::Text => table.to_csv(),
    };
    emit(None, &body)
}

fn cmd_check(a: CheckArgs) -> CliResult<()> {
    let config = check::CheckConfig {
        n: a.n,
        draws: a.draws,
        seed: a.seed,
        max_retries: a.max_retries,
    };
    let report = match a.model.load() {
        Ok(l) => thread_pool(a.jobs)?.install(|| check::run(&l, &config)),
        Err(CliError::Validation(msg)) => check::CheckReport::invalid(msg),
        Err(e) => return Err(e),
    };
    let body = match a.format {
        Format::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
        Format::Text | Format::Csv => report.to_text(a.format),
    };
    emit(None, &body)?;
    if !report.model_valid {
        Err(CliError::Validation("model validation failed".into()))
    } else if !report.pass {
        Err(CliError::CheckFailed)
    } else {
        Ok(())
    }
}

fn weights_from(s: &str) -> CliResult<VertexWeights> {
    Ok(VertexWeights::new(parse_list(s, "weights")?)?)
}

fn graph_body(g: &Multigraph, format: Format, extra: serde_json::Value) -> String {
    match format {
        Format::Json => {
            let mut v = json!({"graph": g, "stats": graph_stats(g)});
            if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
                obj.extend(more);
            }
            format!("{v}\n")
        }
        Format::Csv | Format::Text => g.to_csv(),
    }
}

fn cmd_graph_edges(a: EdgesArgs) -> CliResult<()> {
    let w = weights_from(&a.weights)?;
    let mut rng = RngState::new(a.seed);
    let pairs = if a.cfm {
        sample_vertex_popularity_edges_via_cfm(&w, a.edges, &mut rng, a.max_retries)?
    } else {
        sample_vertex_popularity_edges(&w, a.edges, &mut rng)?
    };
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge { a, b, weight: 1 })
        .collect();
    let g = Multigraph::new(w.len(), edges)?;
    emit(a.out.as_deref(), &graph_body(&g, a.format, json!({})))
}

fn cmd_graph_growth(a: GrowthArgs) -> CliResult<()> {
    let source = if let Some(s) = &a.weights {
        GrowthSource::Weights(weights_from(s)?)
    } else if let Some(s) = &a.power_law {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [k, alpha] = parts[..] else {
            return Err(CliError::Validation(
                "power-law: expected \"K,ALPHA\"".into(),
            ));
        };
        let k = k
            .parse()
            .map_err(|_| CliError::Validation(format!("power-law: bad vertex count '{k}'")))?;
        let alpha = alpha
            .parse()
            .map_err(|_| CliError::Validation(format!("power-law: bad exponent '{alpha}'")))?;
        GrowthSource::Weights(VertexWeights::power_law(k, alpha)?)
    } else {
        let spec = read_spec(a.model.as_deref().expect("clap requires one source"))?;
        let (model, constraint) = spec.build()?;
        GrowthSource::Model { model, constraint }
    };
    let rows = growth_curve(
        &source,
        a.n_max,
        a.step,
        &mut RngState::new(a.seed),
        a.max_retries,
    )?;
    let body = match a.format {
        Format::Json => format!(
            "{}\n",
            serde_json::to_string(&rows).expect("rows serialize")
        ),
        Format::Csv | Format::Text => growth_to_csv(&rows),
    };
    emit(a.out.as_deref(), &body)
}

fn parse_variant(s: &str) -> CliResult<GraphVariant> {
    match s.trim() {
        "simple" => Ok(GraphVariant::Simple),
        "loops" => Ok(GraphVariant::Loops),
        other => {
            let range = other.strip_prefix("weighted:").ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown variant '{other}'; expected simple, loops or weighted:MIN..MAX"
                ))
            })?;
            let (min, max) = range
                .split_once("..")
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .filter(|&(min, max): &(usize, usize)| min >= 1 && min <= max)
                .ok_or_else(|| CliError::Validation(format!("bad weight range '{range}'")))?;
            Ok(GraphVariant::Weighted { min, max })
        }
    }
}

fn cmd_graph_encode(a: EncodeArgs) -> CliResult<()> {
    let t: TraitAllocation = a.allocation.parse()?;
    let g = alloc_to_graph(&t, parse_variant(&a.variant)?)?;
    emit(
        a.out.as_deref(),
        &graph_body(&g, a.format, json!({"allocation": t.to_string()})),
    )
}
