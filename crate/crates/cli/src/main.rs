//! Command-line front end: run orbits and censuses, build presentations,
//! emit kernel certificates and quotient reports, drive the deduction
//! engine, and persist fact stores.
//!
//! Output is pretty JSON on stdout (schema `divseq-report/1`); errors are
//! structured JSON on stderr. Exit codes: 0 success, 1 usage error, 2
//! computation aborted by the size guard, 3 certificate replay failure.

use clap::{Args, Parser, Subcommand};
use divseq::deduce::{
    request_power_quotient, DeduceError, Fact, FactId, FactStore, KernelCertificateDoc, Pattern,
    Statement,
};
use divseq::dynamics::{
    census, class_lower_bound, orbit, Budget, ClassPartition, Cycle, DomainSpec, DynamicsError,
    OrbitStatus, SeedRange, SeedResolution, SequenceParams, Unresolved,
};
use divseq::lattice::LatticeError;
use divseq::presentation::{
    build_overline, harvest, kernel_member, quotient_report, BasisPolicy, ExcludedRelation,
    ExclusionReason, HarvestConfig, KernelAnswer, OverlineRowStatus, PresentationError,
    PresentationReport,
};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

const SCHEMA: &str = "divseq-report/1";

#[derive(Parser)]
#[command(
    name = "divseq",
    version,
    about = "Division-sequence censuses, relation lattices, kernel certificates, and deduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MapArgs {
    /// Multiplier parameter of the map.
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    /// Divisor parameter of the map (|q| >= 2).
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Domain: `pos` for positive integers, `nonzero` for nonzero integers.
    #[arg(long)]
    domain: Domain,
    /// Admit parameters outside the default guard (p >= 1).
    #[arg(long)]
    allow_unusual_params: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Domain {
    Pos,
    Nonzero,
}

impl From<Domain> for DomainSpec {
    fn from(d: Domain) -> DomainSpec {
        match d {
            Domain::Pos => DomainSpec::PositiveIntegers,
            Domain::Nonzero => DomainSpec::NonzeroIntegers,
        }
    }
}

#[derive(Args)]
struct BudgetArgs {
    /// Maximum number of map applications per orbit.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Abort an orbit when |value| exceeds this cap.
    #[arg(long, allow_hyphen_values = true)]
    max_magnitude: Option<String>,
}

#[derive(Args)]
struct HarvestArgs {
    /// Harvest one-step relations for all |c| <= N coprime to q.
    #[arg(long, default_value_t = 10)]
    seed_bound: u64,
    /// Additionally harvest along orbits of the seeds, up to D steps each.
    #[arg(long, default_value_t = 0)]
    depth: u64,
    /// Fixed prime bound for the basis; rows over the bound are excluded.
    #[arg(long, conflicts_with = "adaptive")]
    prime_bound: Option<u64>,
    /// Let the basis absorb every prime the harvest encounters (default).
    #[arg(long)]
    adaptive: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate one orbit and report its resolution and path.
    Orbit {
        #[command(flatten)]
        map: MapArgs,
        /// Starting value.
        #[arg(long, allow_hyphen_values = true)]
        seed: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Resolve a whole seed range: cycles, class lower bound, unresolved list.
    Census {
        #[command(flatten)]
        map: MapArgs,
        /// Inclusive seed range `A..B`.
        #[arg(long, allow_hyphen_values = true)]
        seeds: String,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Shard the range over this many workers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// `json` (default) or `csv` for the per-seed table.
        #[arg(long, default_value = "json")]
        format: Format,
    },
    /// Harvest relations and report the truncated quotient structure.
    Present {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        harvest: HarvestArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Report the quotient over all primes up to this bound instead of
        /// the full discovered basis.
        #[arg(long)]
        report_bound: Option<u64>,
    },
    /// Certify membership of an element in the presentation kernel.
    Kernel {
        #[command(flatten)]
        map: MapArgs,
        /// Element to test.
        #[arg(long, allow_hyphen_values = true)]
        element: String,
        #[command(flatten)]
        harvest: HarvestArgs,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Build the complementary presentation from a census.
    Overline {
        #[command(flatten)]
        map: MapArgs,
        /// Inclusive seed range `A..B` for the underlying census.
        #[arg(long, allow_hyphen_values = true)]
        seeds: String,
        /// Admit rows for unresolved components as hypotheses.
        #[arg(long)]
        allow_hypotheses: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Assert facts, run the deduction rules, query the store.
    Deduce {
        /// Fact-store file (schema divseq-facts/1); created when absent.
        #[arg(long)]
        store: PathBuf,
        /// Fact JSON (inline or `@file`): `{"hypothesis": ...}`,
        /// `{"certified_kernel": ...}`, a kernel report, or
        /// `{"request_power_quotient": ...}`. Repeatable.
        #[arg(long)]
        assert: Vec<String>,
        /// Run the deduction rules to a fixpoint.
        #[arg(long)]
        apply: bool,
        /// Round cap for --apply.
        #[arg(long, default_value_t = 8)]
        max_rounds: u32,
        /// Pattern JSON; matching facts are reported with derivation trees.
        #[arg(long)]
        query: Option<String>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Errors mapped onto the documented exit codes.
enum CliError {
    Usage(String),
    Aborted(String),
    Replay(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Aborted(_) => 2,
            CliError::Replay(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Aborted(_) => "aborted",
            CliError::Replay(_) => "replay_failure",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Aborted(m) | CliError::Replay(m) => m,
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<PresentationError> for CliError {
    fn from(e: PresentationError) -> Self {
        use divseq::numth::NumthError;
        match e {
            PresentationError::CertificateReplay => CliError::Replay(e.to_string()),
            PresentationError::Lattice(LatticeError::SizeGuard(_))
            | PresentationError::Numth(NumthError::FactorizationStalled(_)) => {
                CliError::Aborted(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::SizeGuard(_) => CliError::Aborted(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<DeduceError> for CliError {
    fn from(e: DeduceError) -> Self {
        use divseq::numth::NumthError;
        match e {
            DeduceError::CorruptCertificate(..) | DeduceError::InvalidCertificate(_) => {
                CliError::Replay(e.to_string())
            }
            DeduceError::Numth(NumthError::FactorizationStalled(_)) => {
                CliError::Aborted(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            emit_error(&CliError::Usage(e.to_string()));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(&e);
            ExitCode::from(e.code())
        }
    }
}

fn emit_error(e: &CliError) {
    let doc = json!({
        "schema": SCHEMA,
        "error": { "kind": e.kind(), "message": e.message() },
    });
    eprintln!("{}", serde_json::to_string_pretty(&doc).expect("error serializes"));
}

fn emit<T: Serialize>(report: &T) {
    println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
}

fn parse_int(text: &str, what: &str) -> Result<BigInt, CliError> {
    BigInt::from_str(text.trim())
        .map_err(|_| CliError::Usage(format!("invalid {what} `{text}`: expected an integer")))
}

fn parse_params(map: &MapArgs) -> Result<SequenceParams, CliError> {
    let p = parse_int(&map.p, "--p")?;
    let q = parse_int(&map.q, "--q")?;
    SequenceParams::with_options(p, q, map.domain.into(), map.allow_unusual_params)
        .map_err(CliError::from)
}

fn parse_budget(args: &BudgetArgs) -> Result<Budget, CliError> {
    let mut budget = Budget::default();
    if let Some(steps) = args.max_steps {
        if steps == 0 {
            return Err(CliError::Usage("--max-steps must be at least 1".into()));
        }
        budget.max_steps = steps;
    }
    if let Some(mag) = &args.max_magnitude {
        let mag = parse_int(mag, "--max-magnitude")?;
        if mag < BigInt::from(1) {
            return Err(CliError::Usage("--max-magnitude must be at least 1".into()));
        }
        budget.max_magnitude = mag;
    }
    Ok(budget)
}

fn parse_seed_range(text: &str, domain: DomainSpec) -> Result<SeedRange, CliError> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| CliError::Usage(format!("invalid range `{text}`: expected `A..B`")))?;
    let start = parse_int(lo, "range start")?;
    let end = parse_int(hi, "range end")?;
    if domain == DomainSpec::PositiveIntegers && (start < BigInt::from(1) || end < BigInt::from(1)) {
        return Err(CliError::Usage(
            "negative or zero bounds require --domain nonzero".into(),
        ));
    }
    SeedRange::new(start, end).map_err(CliError::from)
}

fn parse_harvest(args: &HarvestArgs, budget: Budget) -> HarvestConfig {
    HarvestConfig {
        seed_bound: args.seed_bound,
        trajectory_depth: args.depth,
        budget,
        basis_policy: match args.prime_bound {
            Some(b) => BasisPolicy::FixedBound(b),
            None => BasisPolicy::Adaptive,
        },
    }
}

fn domain_tag(domain: DomainSpec) -> &'static str {
    match domain {
        DomainSpec::PositiveIntegers => "pos",
        DomainSpec::NonzeroIntegers => "nonzero",
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Orbit { map, seed, budget } => run_orbit(&map, &seed, &budget),
        Command::Census {
            map,
            seeds,
            budget,
            jobs,
            format,
        } => run_census(&map, &seeds, &budget, jobs, format),
        Command::Present {
            map,
            harvest,
            budget,
            report_bound,
        } => run_present(&map, &harvest, &budget, report_bound),
        Command::Kernel {
            map,
            element,
            harvest,
            budget,
        } => run_kernel(&map, &element, &harvest, &budget),
        Command::Overline {
            map,
            seeds,
            allow_hypotheses,
            budget,
        } => run_overline(&map, &seeds, allow_hypotheses, &budget),
        Command::Deduce {
            store,
            assert,
            apply,
            max_rounds,
            query,
        } => run_deduce(&store, &assert, apply, max_rounds, query.as_deref()),
    }
}

fn cycle_json(cycle: &Cycle) -> Value {
    json!({
        "id": cycle.id(),
        "length": cycle.len(),
        "members": cycle.members().iter().map(|m| m.to_string()).collect::<Vec<_>>(),
    })
}

fn run_orbit(map: &MapArgs, seed: &str, budget: &BudgetArgs) -> Result<(), CliError> {
    let params = parse_params(map)?;
    let seed = parse_int(seed, "--seed")?;
    if !params.domain().contains(&seed) {
        return Err(CliError::Usage(format!(
            "seed {seed} is not an element of the domain"
        )));
    }
    let budget = parse_budget(budget)?;
    let result = orbit(seed.clone(), &params, &budget);
    let status = match &result.status {
        OrbitStatus::ReachedCycle(c) => json!({ "kind": "reached_cycle", "cycle": cycle_json(c) }),
        OrbitStatus::BudgetExceeded(steps) => {
            json!({ "kind": "budget_exceeded", "steps": steps })
        }
        OrbitStatus::MagnitudeExceeded(v) => {
            json!({ "kind": "magnitude_exceeded", "value": v.to_string() })
        }
        OrbitStatus::DomainViolation(at) => json!({ "kind": "domain_violation", "index": at }),
    };
    emit(&json!({
        "schema": SCHEMA,
        "command": "orbit",
        "p": params.p().to_string(),
        "q": params.q().to_string(),
        "domain": domain_tag(params.domain()),
        "seed": seed.to_string(),
        "steps": result.path.len() - 1,
        "status": status,
        "path": result.path.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn unresolved_json(reason: &Unresolved) -> Value {
    match reason {
        Unresolved::BudgetExceeded(steps) => json!({ "kind": "budget_exceeded", "steps": steps }),
        Unresolved::MagnitudeExceeded(v) => {
            json!({ "kind": "magnitude_exceeded", "value": v.to_string() })
        }
        Unresolved::DomainViolation(at) => json!({ "kind": "domain_violation", "index": at }),
    }
}

fn partition_json(partition: &ClassPartition, jobs: usize) -> Value {
    let (bound, witnesses) = class_lower_bound(partition);
    let unresolved: Vec<Value> = partition
        .unresolved()
        .map(|(seed, reason)| json!({ "seed": seed.to_string(), "reason": unresolved_json(reason) }))
        .collect();
    let resolved_count = partition.resolutions().len() - unresolved.len();
    json!({
        "schema": SCHEMA,
        "command": "census",
        "p": partition.params().p().to_string(),
        "q": partition.params().q().to_string(),
        "domain": domain_tag(partition.params().domain()),
        "seeds": {
            "start": partition.range().start.to_string(),
            "end": partition.range().end.to_string(),
        },
        "jobs": jobs,
        "cycles": witnesses.iter().map(cycle_json).collect::<Vec<_>>(),
        "cycle_count": partition.cycles().len(),
        "class_lower_bound": bound,
        "resolved_count": resolved_count,
        "unresolved_count": unresolved.len(),
        "unresolved": unresolved,
    })
}

fn run_census(
    map: &MapArgs,
    seeds: &str,
    budget: &BudgetArgs,
    jobs: usize,
    format: Format,
) -> Result<(), CliError> {
    let params = parse_params(map)?;
    let range = parse_seed_range(seeds, params.domain())?;
    let budget = parse_budget(budget)?;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let partition = census(&params, &range, &budget, jobs)?;
    match format {
        Format::Json => emit(&partition_json(&partition, jobs)),
        Format::Csv => {
            println!("seed,status,cycle_id,detail");
            for (seed, res) in partition.resolutions() {
                match res {
                    SeedResolution::InCycle(i) => {
                        println!("{seed},cycle,{},", partition.cycles()[*i].id());
                    }
                    SeedResolution::Unresolved(Unresolved::BudgetExceeded(steps)) => {
                        println!("{seed},budget_exceeded,,{steps}");
                    }
                    SeedResolution::Unresolved(Unresolved::MagnitudeExceeded(v)) => {
                        println!("{seed},magnitude_exceeded,,{v}");
                    }
                    SeedResolution::Unresolved(Unresolved::DomainViolation(at)) => {
                        println!("{seed},domain_violation,,{at}");
                    }
                }
            }
        }
    }
    Ok(())
}

fn excluded_json(excluded: &[ExcludedRelation]) -> Vec<Value> {
    excluded
        .iter()
        .map(|e| {
            let reason = match &e.reason {
                ExclusionReason::PrimeOverBound(primes) => json!({
                    "kind": "prime_over_bound",
                    "primes": primes.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                }),
                ExclusionReason::StepLeavesDomain => json!({ "kind": "step_leaves_domain" }),
                ExclusionReason::FactorizationStalled(cofactor) => json!({
                    "kind": "factorization_stalled",
                    "cofactor": cofactor.to_string(),
                }),
            };
            json!({ "provenance": e.provenance, "reason": reason })
        })
        .collect()
}

fn presentation_report_json(report: &PresentationReport) -> Value {
    json!({
        "quotient": report.quotient,
        "primes": report.primes.iter().map(|f| json!({
            "prime": f.prime.to_string(),
            "in_kernel_certified": f.in_kernel_certified,
        })).collect::<Vec<_>>(),
        "truncated": report.truncated,
        "note": report.note,
    })
}

fn run_present(
    map: &MapArgs,
    harvest_args: &HarvestArgs,
    budget: &BudgetArgs,
    report_bound: Option<u64>,
) -> Result<(), CliError> {
    let params = parse_params(map)?;
    let config = parse_harvest(harvest_args, parse_budget(budget)?);
    let handle = harvest(&params, &config)?;
    let report = quotient_report(&handle, report_bound)?;
    emit(&json!({
        "schema": SCHEMA,
        "command": "present",
        "p": params.p().to_string(),
        "q": params.q().to_string(),
        "domain": domain_tag(params.domain()),
        "seed_bound": config.seed_bound,
        "depth": config.trajectory_depth,
        "basis_policy": match config.basis_policy {
            BasisPolicy::Adaptive => json!("adaptive"),
            BasisPolicy::FixedBound(b) => json!({ "fixed_bound": b }),
        },
        "report_bound": report_bound,
        "basis_size": handle.basis().len(),
        "relation_count": handle.matrix().len(),
        "excluded": excluded_json(handle.excluded()),
        "report": presentation_report_json(&report),
    }));
    Ok(())
}

fn run_kernel(
    map: &MapArgs,
    element: &str,
    harvest_args: &HarvestArgs,
    budget: &BudgetArgs,
) -> Result<(), CliError> {
    let params = parse_params(map)?;
    let element = parse_int(element, "--element")?;
    if element.is_zero() {
        return Err(CliError::Usage("--element must be nonzero".into()));
    }
    let config = parse_harvest(harvest_args, parse_budget(budget)?);
    let handle = harvest(&params, &config)?;
    let head = json!({
        "schema": SCHEMA,
        "command": "kernel",
        "p": params.p().to_string(),
        "q": params.q().to_string(),
        "domain": domain_tag(params.domain()),
        "element": element.to_string(),
        "seed_bound": config.seed_bound,
        "depth": config.trajectory_depth,
    });
    match kernel_member(&element, &handle)? {
        KernelAnswer::Yes(cert) => {
            let doc = KernelCertificateDoc::from_presentation(&handle, &element, &cert)
                .map_err(|e| CliError::Replay(e.to_string()))?;
            let mut out = head;
            out["result"] = json!("yes");
            out["certificate"] = serde_json::to_value(&doc).expect("certificate serializes");
            emit(&out);
        }
        KernelAnswer::Unknown { diagnostic } => {
            let mut out = head;
            out["result"] = json!("unknown");
            out["diagnostic"] = json!(diagnostic);
            emit(&out);
        }
    }
    Ok(())
}

fn run_overline(
    map: &MapArgs,
    seeds: &str,
    allow_hypotheses: bool,
    budget: &BudgetArgs,
) -> Result<(), CliError> {
    let params = parse_params(map)?;
    let range = parse_seed_range(seeds, params.domain())?;
    let budget = parse_budget(budget)?;
    let mut partition = census(&params, &range, &budget, 1)?;
    let config = HarvestConfig {
        budget,
        ..HarvestConfig::default()
    };
    let handle = build_overline(&params, &mut partition, &config, allow_hypotheses)?;
    let quotient = handle.quotient()?;
    let rows: Vec<Value> = handle
        .rows()
        .iter()
        .map(|row| {
            let status = match &row.status {
                OverlineRowStatus::Certified { witness } => json!({
                    "kind": "certified",
                    "witness_cycles": [cycle_json(&witness.0), cycle_json(&witness.1)],
                }),
                OverlineRowStatus::Hypothesis => json!({ "kind": "hypothesis" }),
                OverlineRowStatus::Structural => json!({ "kind": "structural" }),
            };
            json!({ "provenance": row.provenance, "status": status })
        })
        .collect();
    emit(&json!({
        "schema": SCHEMA,
        "command": "overline",
        "p": params.p().to_string(),
        "q": params.q().to_string(),
        "domain": domain_tag(params.domain()),
        "seeds": {
            "start": partition.range().start.to_string(),
            "end": partition.range().end.to_string(),
        },
        "allow_hypotheses": allow_hypotheses,
        "row_count": handle.rows().len(),
        "certified_count": handle.certified_count(),
        "has_hypotheses": handle.has_hypotheses(),
        "rows": rows,
        "quotient": quotient,
        "excluded": excluded_json(handle.excluded()),
    }));
    Ok(())
}

fn fact_tree(store: &FactStore, id: FactId) -> Value {
    let fact = store.get(id).expect("fact exists");
    let premises: Vec<Value> = fact
        .derivation
        .as_ref()
        .map(|d| d.premises.iter().map(|&p| fact_tree(store, p)).collect())
        .unwrap_or_default();
    json!({ "fact": fact, "premises": premises })
}

fn load_assertion(text: &str) -> Result<Value, CliError> {
    let body = if let Some(path) = text.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?
    } else {
        text.to_string()
    };
    serde_json::from_str(&body).map_err(|e| CliError::Usage(format!("invalid fact JSON: {e}")))
}

fn apply_assertion(store: &mut FactStore, doc: &Value) -> Result<Vec<FactId>, CliError> {
    // a kernel report embeds its certificate
    if doc.get("command").and_then(Value::as_str) == Some("kernel") {
        let Some(cert) = doc.get("certificate") else {
            return Err(CliError::Usage(
                "kernel report has no certificate (result was not `yes`)".into(),
            ));
        };
        let cert: KernelCertificateDoc = serde_json::from_value(cert.clone())
            .map_err(|e| CliError::Usage(format!("invalid certificate: {e}")))?;
        return Ok(vec![cert.assert_into(store)?]);
    }
    if let Some(cert) = doc.get("certified_kernel") {
        let cert: KernelCertificateDoc = serde_json::from_value(cert.clone())
            .map_err(|e| CliError::Usage(format!("invalid certificate: {e}")))?;
        return Ok(vec![cert.assert_into(store)?]);
    }
    if let Some(statement) = doc.get("hypothesis") {
        let statement: Statement = serde_json::from_value(statement.clone())
            .map_err(|e| CliError::Usage(format!("invalid statement: {e}")))?;
        return Ok(vec![store.assert_hypothesis(statement)?]);
    }
    if let Some(req) = doc.get("request_power_quotient") {
        let p = parse_int(
            req.get("p").and_then(Value::as_str).unwrap_or_default(),
            "p",
        )?;
        let q = parse_int(
            req.get("q").and_then(Value::as_str).unwrap_or_default(),
            "q",
        )?;
        let n = req
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| CliError::Usage("request needs an integer n".into()))?;
        let domain = match req.get("domain").and_then(Value::as_str) {
            Some("pos") => DomainSpec::PositiveIntegers,
            Some("nonzero") => DomainSpec::NonzeroIntegers,
            other => {
                return Err(CliError::Usage(format!(
                    "request domain must be `pos` or `nonzero`, got {other:?}"
                )))
            }
        };
        return Ok(vec![request_power_quotient(store, p, q, n as u32, domain)?]);
    }
    Err(CliError::Usage(
        "assertion must contain `hypothesis`, `certified_kernel`, `request_power_quotient`, \
         or be a kernel report"
            .into(),
    ))
}

fn run_deduce(
    store_path: &PathBuf,
    assertions: &[String],
    apply: bool,
    max_rounds: u32,
    query: Option<&str>,
) -> Result<(), CliError> {
    let mut store = if store_path.exists() {
        let text = std::fs::read_to_string(store_path)
            .map_err(|e| CliError::Usage(format!("cannot read store: {e}")))?;
        FactStore::import_json(&text)?
    } else {
        FactStore::new()
    };

    let mut asserted = Vec::new();
    for text in assertions {
        let doc = load_assertion(text)?;
        asserted.extend(apply_assertion(&mut store, &doc)?);
    }

    let derived: Vec<FactId> = if apply {
        store.apply_rules(max_rounds)?
    } else {
        Vec::new()
    };

    // every certified fact must replay before anything is persisted or shown
    store.replay_all()?;

    let mutated = !assertions.is_empty() || apply;
    if mutated {
        std::fs::write(store_path, store.export_json())
            .map_err(|e| CliError::Usage(format!("cannot write store: {e}")))?;
    }

    let query_hits: Vec<Value> = match query {
        None => Vec::new(),
        Some(text) => {
            let pattern: Pattern = serde_json::from_str(text)
                .map_err(|e| CliError::Usage(format!("invalid pattern JSON: {e}")))?;
            store
                .query(&pattern)
                .into_iter()
                .map(|f| fact_tree(&store, f.id))
                .collect()
        }
    };

    let derived_facts: Vec<&Fact> = derived.iter().map(|&id| store.get(id).expect("derived")).collect();
    emit(&json!({
        "schema": SCHEMA,
        "command": "deduce",
        "store": store_path.display().to_string(),
        "fact_count": store.len(),
        "asserted": asserted,
        "derived": derived_facts,
        "query": query_hits,
    }));
    Ok(())
}
