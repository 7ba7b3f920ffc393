//! `netauction`: run, verify, generate and compare diffusion auctions.
//!
//! Exit codes: 0 success, 1 a property failed or a counterexample was found,
//! 2 bad input or usage, 3 μ below the valid bound, 4 verification budget
//! exceeded.

mod genspec;
mod render;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use netauction::io::{parse_instance, serialize_instance, GeneratorConfig, Instance, IoError, Topology, ValueModel};
use netauction::market::tree_from_profile;
use netauction::mechanisms::{MechanismError, MechanismKind, ReservePrice, TraversalOrder};
use netauction::removed::min_valid_mu;
use netauction::verify::{
    compare_vs_vcg, run_properties, search_counterexample, MechanismSpec, MisreportGrid, Property, SearchMode,
    Status, VerifyBudget, VerifyError,
};
use netauction::{par_map, Money};
use serde::Serialize;
use serde_json::{json, Map, Value};

use genspec::{parse_reserves, GenSpec};
use render::{CompareReport, CompareRow, InstanceVerdict, PropertyOut, RunReport, Tally, VerifyReport};

#[derive(Parser)]
#[command(name = "netauction", version, about = "Multi-unit diffusion auctions over invitation networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mech {
    #[value(name = "vcg-l1")]
    VcgL1,
    #[value(name = "dna-mu")]
    DnaMu,
    #[value(name = "ldm-tree")]
    LdmTree,
    #[value(name = "ldm")]
    Ldm,
}

impl From<Mech> for MechanismKind {
    fn from(m: Mech) -> Self {
        match m {
            Mech::VcgL1 => MechanismKind::VcgL1,
            Mech::DnaMu => MechanismKind::DnaMu,
            Mech::LdmTree => MechanismKind::LdmTree,
            Mech::Ldm => MechanismKind::Ldm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Tree,
    Graph,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValuesArg {
    Sorted,
    Unit,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mechanism on an instance file (`-` reads stdin).
    Run {
        instance: PathBuf,
        #[arg(long, value_enum)]
        mechanism: Mech,
        /// Overrides the instance's μ.
        #[arg(long)]
        mu: Option<usize>,
        /// Fail instead of falling back to the smallest valid μ.
        #[arg(long)]
        require_mu: bool,
        #[arg(long)]
        reserve: Option<i64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Include per-layer or per-step diagnostics.
        #[arg(long)]
        trace: bool,
        /// Visit each DNA-MU layer in a seeded random order.
        #[arg(long)]
        shuffle_seed: Option<u64>,
    },
    /// Check mechanism properties on an instance or a generated batch.
    Verify {
        #[arg(required_unless_present = "gen", conflicts_with = "gen")]
        instance: Option<PathBuf>,
        /// Generator spec, e.g. `seed=3,n=1..8,k=1..3,topology=graph,count=100`.
        #[arg(long)]
        gen: Option<String>,
        /// Number of generated instances (default 100).
        #[arg(long)]
        count: Option<u64>,
        #[arg(long, value_enum)]
        mechanism: Mech,
        /// Repeatable; every property when omitted.
        #[arg(long = "property", value_parser = parse_property)]
        properties: Vec<Property>,
        #[arg(long, conflicts_with = "properties")]
        all: bool,
        /// Fixed μ; the default is the smallest μ valid under every
        /// enumerated invitation deviation.
        #[arg(long)]
        mu: Option<usize>,
        #[arg(long)]
        reserve: Option<i64>,
        #[arg(long, default_value_t = VerifyBudget::default().max_invitations)]
        max_invitations: usize,
        #[arg(long, default_value_t = VerifyBudget::default().max_grid)]
        max_grid: u64,
        /// Largest misreported marginal value; defaults to the largest
        /// reported value plus 2.
        #[arg(long)]
        grid_max: Option<i64>,
        #[arg(long, default_value_t = 1)]
        grid_step: i64,
        /// Write each violating instance to this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print one generated instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Buyer count, `n` or `lo..hi`.
        #[arg(long, default_value = "1..8")]
        n: String,
        /// Units, `k` or `lo..hi`.
        #[arg(long, default_value = "1..3")]
        k: String,
        #[arg(long, default_value_t = 10)]
        max_value: i64,
        #[arg(long, value_enum, default_value = "tree")]
        topology: TopologyArg,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 0.15)]
        density: f64,
        #[arg(long, value_enum, default_value = "sorted")]
        values: ValuesArg,
        /// Position in the seeded stream.
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Scan generated instances for an incentive violation.
    Search {
        #[arg(long, value_enum, default_value = "dna-mu")]
        mechanism: Mech,
        /// Number of instances to scan.
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value = "seed=1,n=7,k=4,depth=3,values=unit")]
        gen: String,
        /// Also try value misreports.
        #[arg(long)]
        with_values: bool,
        #[arg(long)]
        mu: Option<usize>,
        #[arg(long, default_value_t = VerifyBudget::default().max_invitations)]
        max_invitations: usize,
        /// Write the counterexample instance here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare LDM with first-layer VCG on welfare and revenue.
    Compare {
        #[arg(required_unless_present = "gen", conflicts_with = "gen")]
        instance: Option<PathBuf>,
        #[arg(long)]
        gen: Option<String>,
        /// Number of generated instances (default 200).
        #[arg(long)]
        count: Option<u64>,
        /// `r` or an inclusive range `lo..hi`.
        #[arg(long)]
        reserve: Option<String>,
        #[arg(long)]
        mu: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn parse_property(s: &str) -> Result<Property, String> {
    s.parse()
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<MechanismError> for Failure {
    fn from(e: MechanismError) -> Self {
        let code = if matches!(e, MechanismError::MuTooSmall { .. }) { 3 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Mechanism(m) => m.into(),
            VerifyError::SearchBudgetExceeded { .. } => Failure {
                code: 4,
                message: e.to_string(),
            },
            other => Failure::usage(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            instance,
            mechanism,
            mu,
            require_mu,
            reserve,
            format,
            trace,
            shuffle_seed,
        } => cmd_run(&instance, mechanism.into(), mu, require_mu, reserve, format, trace, shuffle_seed),
        Command::Verify {
            instance,
            gen,
            count,
            mechanism,
            properties,
            all,
            mu,
            reserve,
            max_invitations,
            max_grid,
            grid_max,
            grid_step,
            out_dir,
            format,
        } => {
            let props = if all || properties.is_empty() {
                Property::ALL.to_vec()
            } else {
                properties
            };
            let budget = VerifyBudget {
                max_invitations,
                max_grid,
            };
            let grid = MisreportGrid {
                step: grid_step,
                max: grid_max.map(Money),
                ..MisreportGrid::default()
            };
            cmd_verify(
                instance.as_deref(),
                gen.as_deref(),
                count,
                mechanism.into(),
                &props,
                mu,
                reserve,
                &grid,
                &budget,
                out_dir.as_deref(),
                format,
            )
        }
        Command::Gen {
            seed,
            n,
            k,
            max_value,
            topology,
            depth,
            density,
            values,
            index,
            output,
        } => cmd_gen(seed, &n, &k, max_value, topology, depth, density, values, index, output.as_deref()),
        Command::Search {
            mechanism,
            budget,
            gen,
            with_values,
            mu,
            max_invitations,
            output,
        } => cmd_search(mechanism.into(), budget, &gen, with_values, mu, max_invitations, output.as_deref()),
        Command::Compare {
            instance,
            gen,
            count,
            reserve,
            mu,
            format,
        } => cmd_compare(instance.as_deref(), gen.as_deref(), count, reserve.as_deref(), mu, format),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_instance(path: &Path) -> CliResult<Instance> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
    };
    parse_instance(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn reserve_of(r: Option<i64>) -> CliResult<Option<ReservePrice>> {
    match r {
        Some(r) if r < 0 => Err(Failure::usage("reserve must be non-negative")),
        Some(r) => Ok(Some(ReservePrice::new(Money(r)))),
        None => Ok(None),
    }
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data");
    s.push('\n');
    s
}

/// `--mu`, then the instance's μ, then the smallest valid μ.
fn choose_mu(explicit: Option<usize>, instance: &Instance, require: bool) -> CliResult<usize> {
    if let Some(mu) = explicit.or(instance.mu) {
        return Ok(mu);
    }
    if require {
        return Err(Failure::usage("no mu given and the instance has none (--require-mu)"));
    }
    let tree = tree_from_profile(instance.profile.clone()).map_err(MechanismError::from)?;
    let mu = min_valid_mu(&tree);
    eprintln!("warning: no mu given, using the smallest valid mu = {mu}");
    Ok(mu)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    path: &Path,
    kind: MechanismKind,
    mu: Option<usize>,
    require_mu: bool,
    reserve: Option<i64>,
    format: Format,
    trace: bool,
    shuffle_seed: Option<u64>,
) -> CliResult<u8> {
    let instance = read_instance(path)?;
    let reserve = reserve_of(reserve)?;
    let mu = if kind.is_layered() {
        Some(choose_mu(mu, &instance, require_mu)?)
    } else {
        None
    };
    let order = shuffle_seed.map_or(TraversalOrder::Ascending, TraversalOrder::Shuffled);
    let mechanism = kind.instantiate(mu.unwrap_or(0), reserve, order);
    let outcome = mechanism.run(&instance.profile)?;
    let report = RunReport::new(&instance.profile, &outcome, mu, reserve.map(|r| r.price), trace);
    emit(
        &match format {
            Format::Text => report.text(),
            Format::Json => json_text(&report),
        },
        None,
    )?;
    Ok(0)
}

/// Named instances from a file or a generator spec.
fn load_batch(
    path: Option<&Path>,
    gen: Option<&str>,
    count: Option<u64>,
    default_count: u64,
) -> CliResult<Vec<(String, Instance)>> {
    if let Some(p) = path {
        return Ok(vec![(p.display().to_string(), read_instance(p)?)]);
    }
    let spec = GenSpec::parse_onto(GeneratorConfig::default(), gen.unwrap_or_default()).map_err(Failure::usage)?;
    let count = count.or(spec.count).unwrap_or(default_count);
    Ok((0..count)
        .map(|i| (format!("gen#{i}"), Instance::new(spec.config.instance(i))))
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    path: Option<&Path>,
    gen: Option<&str>,
    count: Option<u64>,
    kind: MechanismKind,
    props: &[Property],
    mu: Option<usize>,
    reserve: Option<i64>,
    grid: &MisreportGrid,
    budget: &VerifyBudget,
    out_dir: Option<&Path>,
    format: Format,
) -> CliResult<u8> {
    let batch = load_batch(path, gen, count, 100)?;
    let spec = MechanismSpec {
        mu,
        reserve: reserve_of(reserve)?,
        ..MechanismSpec::new(kind)
    };
    let results = par_map(&batch, |(_, inst)| {
        let mu = spec.resolve_mu(&inst.profile, budget).ok().filter(|_| kind.is_layered());
        (mu, run_properties(&spec, &inst.profile, props, grid, budget))
    });

    let mut summary: BTreeMap<String, Tally> = BTreeMap::new();
    let (mut failed, mut mu_small, mut errored, mut over_budget) = (false, false, false, false);
    let mut verdicts = Vec::with_capacity(batch.len());
    let mut written = 0usize;
    for ((name, inst), (mu, rs)) in batch.iter().zip(&results) {
        for r in rs {
            summary.entry(r.property.name().to_string()).or_default().add(r.status);
            match r.status {
                Status::Fail => failed = true,
                Status::Error => match &r.error {
                    Some(VerifyError::Mechanism(MechanismError::MuTooSmall { .. })) => mu_small = true,
                    _ => errored = true,
                },
                Status::BudgetExceeded => over_budget = true,
                Status::Pass | Status::Skipped => {}
            }
            if let Some(dir) = out_dir {
                for v in &r.violations {
                    fs::create_dir_all(dir)?;
                    let mut violating = Instance::new(v.instance.clone());
                    violating.mu = *mu;
                    violating.meta = violation_meta(name, r.property, &render::ViolationOut::new(v));
                    fs::write(dir.join(format!("violation-{written:04}.json")), serialize_instance(&violating))?;
                    written += 1;
                }
            }
        }
        verdicts.push(InstanceVerdict {
            instance: name.clone(),
            mu: *mu,
            results: rs.iter().map(|r| PropertyOut::new(&inst.profile, r)).collect(),
        });
    }
    let report = VerifyReport {
        mechanism: kind.name().to_string(),
        instances: verdicts,
        summary,
    };
    emit(
        &match format {
            Format::Text => report.text(),
            Format::Json => json_text(&report),
        },
        None,
    )?;
    Ok(if failed {
        1
    } else if mu_small {
        3
    } else if errored {
        2
    } else if over_budget {
        4
    } else {
        0
    })
}

fn violation_meta(source: &str, property: Property, v: &render::ViolationOut) -> Map<String, Value> {
    let mut meta = Map::new();
    meta.insert("source".into(), json!(source));
    meta.insert("property".into(), json!(property.name()));
    meta.insert("mechanism".into(), json!(v.mechanism));
    meta.insert("violation".into(), json!(v.kind));
    meta.insert("buyer".into(), json!(v.buyer));
    meta.insert("deviator".into(), json!(v.deviator));
    meta.insert("deviating_report".into(), serde_json::to_value(&v.deviating_report).expect("plain data"));
    meta.insert("truthful_utility".into(), json!(v.truthful_utility));
    meta.insert("deviating_utility".into(), json!(v.deviating_utility));
    meta
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    seed: u64,
    n: &str,
    k: &str,
    max_value: i64,
    topology: TopologyArg,
    depth: usize,
    density: f64,
    values: ValuesArg,
    index: u64,
    output: Option<&Path>,
) -> CliResult<u8> {
    let config = GeneratorConfig {
        seed,
        buyers: genspec::range("n", n).map_err(Failure::usage)?,
        k: genspec::range("k", k).map_err(Failure::usage)?,
        max_value,
        topology: match topology {
            TopologyArg::Tree => Topology::Tree,
            TopologyArg::Graph => Topology::Graph,
        },
        max_depth: depth,
        edge_density: density,
        values: match values {
            ValuesArg::Sorted => ValueModel::Sorted,
            ValuesArg::Unit => ValueModel::Unit,
        },
    };
    config.check().map_err(Failure::usage)?;
    let mut instance = Instance::new(config.instance(index));
    instance.meta.insert("generator".into(), generator_meta(&config, index));
    emit(&serialize_instance(&instance), output)?;
    Ok(0)
}

fn generator_meta(config: &GeneratorConfig, index: u64) -> Value {
    let mut v = serde_json::to_value(config).expect("plain data");
    v["index"] = json!(index);
    v
}

fn cmd_search(
    kind: MechanismKind,
    count: u64,
    gen: &str,
    with_values: bool,
    mu: Option<usize>,
    max_invitations: usize,
    output: Option<&Path>,
) -> CliResult<u8> {
    let spec_text = GenSpec::parse_onto(GeneratorConfig::default(), gen).map_err(Failure::usage)?;
    let spec = MechanismSpec {
        mu,
        ..MechanismSpec::new(kind)
    };
    let budget = VerifyBudget {
        max_invitations,
        ..VerifyBudget::default()
    };
    let mode = if with_values {
        SearchMode::InvitationAndValue(MisreportGrid::default())
    } else {
        SearchMode::Invitation
    };
    let config = &spec_text.config;
    let summary = search_counterexample(&spec, config, count, mode, &budget);
    let Some(found) = summary.found else {
        eprintln!(
            "no violation in {} instances ({} examined, {} skipped)",
            count, summary.examined, summary.skipped
        );
        return Ok(0);
    };
    let v = render::ViolationOut::new(&found.report);
    eprintln!("found at index {}: {}", found.index, v.summary());
    let mut instance = Instance::new(found.report.instance.clone());
    if kind.is_layered() {
        instance.mu = spec.resolve_mu(&instance.profile, &budget).ok();
    }
    let mut meta = violation_meta(&format!("search index {}", found.index), property_for(mode), &v);
    meta.insert("generator".into(), generator_meta(config, found.index));
    meta.insert("examined".into(), json!(summary.examined));
    instance.meta = meta;
    emit(&serialize_instance(&instance), output)?;
    Ok(1)
}

fn property_for(mode: SearchMode) -> Property {
    match mode {
        SearchMode::Invitation => Property::InviteIc,
        SearchMode::InvitationAndValue(_) => Property::ValueIc,
    }
}

fn cmd_compare(
    path: Option<&Path>,
    gen: Option<&str>,
    count: Option<u64>,
    reserve: Option<&str>,
    mu: Option<usize>,
    format: Format,
) -> CliResult<u8> {
    let batch = load_batch(path, gen, count, 200)?;
    let reserves: Vec<Option<i64>> = match reserve {
        Some(text) => parse_reserves(text).map_err(Failure::usage)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let rows = par_map(&batch, |(name, inst)| -> CliResult<Vec<CompareRow>> {
        let mu = match mu.or(inst.mu) {
            Some(mu) => mu,
            None => min_valid_mu(&tree_from_profile(inst.profile.clone()).map_err(MechanismError::from)?),
        };
        reserves
            .iter()
            .map(|&r| {
                let comparison = compare_vs_vcg(&inst.profile, mu, r.map(|r| ReservePrice::new(Money(r))))?;
                Ok(CompareRow {
                    instance: name.clone(),
                    reserve: r.map(Money),
                    mu,
                    comparison,
                })
            })
            .collect()
    });
    let rows: Vec<CompareRow> = rows.into_iter().collect::<CliResult<Vec<_>>>()?.into_iter().flatten().collect();
    let all_dominate = rows
        .iter()
        .all(|r| r.comparison.welfare_dominates && r.comparison.revenue_dominates);
    let report = CompareReport { rows, all_dominate };
    emit(
        &match format {
            Format::Text => report.text(),
            Format::Json => json_text(&report),
        },
        None,
    )?;
    Ok(if all_dominate { 0 } else { 1 })
}
