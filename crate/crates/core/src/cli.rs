//! Command-line front end. Every subcommand supports `--format text|json|csv`;
//! JSON outputs are `{"manifest": .., "result": ..}` and CSV outputs carry the
//! manifest in a leading `#` comment line. Exit codes: 0 success, 2 usage
//! error, 3 guard violation, 4 budget exhaustion.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{Duration, SystemTime};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::audit::audit_theorem4;
use crate::coloring::Coloring;
use crate::error::{Error, Result};
use crate::matrix::{exact_zarankiewicz, kst_bound};
use crate::numtheory::{wigert_ratio, DivisorProfile, TauTable};
use crate::progression::{count_aps_formula, count_aps_through_pair, enumerate_aps};
use crate::search::{
    scan_tk_facts, search_rainbow_free, verify_all, ScanStatus, SearchConfig, VerifyStatus,
    WitnessStore,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "rainbow-aps",
    version,
    about = "Rainbow arithmetic progressions in equinumerous colorings: exact counts, \
             witness search, Zarankiewicz values, divisor bounds, and proof audits"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed recorded in the run manifest (reserved for randomized runs).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    /// Maximum number of search-tree nodes.
    #[arg(long)]
    node_budget: Option<u64>,
    /// Wall-clock budget in seconds (ignored in deterministic mode).
    #[arg(long)]
    time_budget: Option<f64>,
    /// Number of subtree workers.
    #[arg(long)]
    threads: Option<usize>,
    /// Make results independent of the worker count (and omit volatile
    /// fields from outputs).
    #[arg(long)]
    deterministic: bool,
}

impl BudgetArgs {
    fn to_config(&self, default_node_budget: u64) -> SearchConfig {
        SearchConfig {
            node_budget: self.node_budget.unwrap_or(default_node_budget),
            time_budget: self.time_budget.map(Duration::from_secs_f64),
            parallel_width: self.threads.unwrap_or_else(default_width),
            deterministic: self.deterministic,
        }
    }

    fn record(&self, params: &mut BTreeMap<String, String>, default_node_budget: u64) {
        params.insert(
            "node-budget".into(),
            self.node_budget.unwrap_or(default_node_budget).to_string(),
        );
        if let Some(tb) = self.time_budget {
            params.insert("time-budget".into(), tb.to_string());
        }
        params.insert("deterministic".into(), self.deterministic.to_string());
        if !self.deterministic {
            params.insert(
                "threads".into(),
                self.threads.unwrap_or_else(default_width).to_string(),
            );
        }
    }
}

fn default_width() -> usize {
    #[cfg(feature = "parallel")]
    {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Count APs of length k in [m] (closed form, or --oracle enumeration).
    Apcount {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        k: u32,
        /// Force the enumeration backend for cross-checking the formula.
        #[arg(long)]
        oracle: bool,
    },
    /// Count APs of length k in [m] through both x and y.
    Pair {
        #[arg(long)]
        x: u64,
        #[arg(long)]
        y: u64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        m: u64,
    },
    /// Search for a rainbow-free equinumerous t-coloring of [t*n].
    Search {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Exhaustively verify that every equinumerous t-coloring of [t*n]
    /// contains a rainbow AP(k).
    Verify {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Run the witness search over a grid of (t, n) cells.
    Scan {
        #[arg(long)]
        k: u32,
        /// Comma-separated list of color counts, e.g. "3,4,5".
        #[arg(long)]
        t: String,
        #[arg(long)]
        n_max: u32,
        /// Append verified witnesses to this JSON-lines store.
        #[arg(long)]
        store: Option<PathBuf>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Exact ex(m, n, R_{s,t}) and the KST bound.
    Zarankiewicz {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        t: usize,
        /// Compute the exact value (default).
        #[arg(long, conflicts_with = "bound_only")]
        exact: bool,
        /// Evaluate only the KST bound.
        #[arg(long)]
        bound_only: bool,
    },
    /// Divisor counts: a single profile (--n) or the sieve argmax (--max).
    Tau {
        #[arg(long, conflicts_with = "max", required_unless_present = "max")]
        n: Option<u64>,
        /// Sieve 1..=MAX and report the smallest tau-maximizer; with
        /// --format csv, emit the full batch table n,tau,wigert_ratio.
        #[arg(long)]
        max: Option<u64>,
    },
    /// Audit the proof inequality chain on a coloring document.
    Audit {
        /// Path to a coloring JSON document.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: u32,
        /// Wide-gap threshold W (default: k^8).
        #[arg(long)]
        wide_threshold: Option<u64>,
    },
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    params: BTreeMap<String, String>,
    seed: Option<u64>,
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    started_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    finished_unix: Option<u64>,
    format: String,
}

struct Rendered {
    stdout: String,
    exit: i32,
}

/// Parses and executes an argument vector, printing results to stdout and
/// errors to stderr. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(rendered) => {
            println!("{}", rendered.stdout);
            rendered.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Guard(_) => 3,
                _ => 2,
            }
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn execute(cli: &Cli) -> Result<Rendered> {
    let started = unix_now();
    match &cli.cmd {
        Cmd::Apcount { m, k, oracle } => {
            let (backend, count) = if *oracle {
                ("enumeration", enumerate_aps(*m, *k)?.len() as u64)
            } else {
                ("formula", count_aps_formula(*m, *k)?)
            };
            let mut params = BTreeMap::new();
            params.insert("m".into(), m.to_string());
            params.insert("k".into(), k.to_string());
            params.insert("oracle".into(), oracle.to_string());
            let manifest = manifest(cli, "apcount", params, None);
            let result = json!({"m": m, "k": k, "backend": backend, "count": count});
            Ok(render(
                cli.format,
                &manifest,
                result,
                count.to_string(),
                &["m", "k", "backend", "count"],
                vec![vec![m.to_string(), k.to_string(), backend.into(), count.to_string()]],
                0,
            ))
        }
        Cmd::Pair { x, y, k, m } => {
            let count = count_aps_through_pair(*x, *y, *k, *m)?;
            let mut params = BTreeMap::new();
            for (key, value) in
                [("x", x.to_string()), ("y", y.to_string()), ("k", k.to_string()), ("m", m.to_string())]
            {
                params.insert(key.into(), value);
            }
            let manifest = manifest(cli, "pair", params, None);
            let result = json!({"x": x, "y": y, "k": k, "m": m, "count": count});
            Ok(render(
                cli.format,
                &manifest,
                result,
                count.to_string(),
                &["x", "y", "k", "m", "count"],
                vec![vec![x.to_string(), y.to_string(), k.to_string(), m.to_string(), count.to_string()]],
                0,
            ))
        }
        Cmd::Search { k, t, n, budget } => {
            let cfg = budget.to_config(u64::MAX);
            let outcome = search_rainbow_free(*k, *t, *n, &cfg)?;
            let mut params = base_ktn(*k, *t, *n);
            budget.record(&mut params, u64::MAX);
            let finished = (!budget.deterministic).then(unix_now);
            let manifest = manifest_at(cli, "search", params, started, finished, budget.deterministic);
            let exit = if outcome.witness.is_none() && !outcome.complete { 4 } else { 0 };
            let text = match &outcome.witness {
                Some(w) => format!(
                    "witness: {}\nnodes: {}",
                    join_colors(w.colors()),
                    outcome.stats.nodes
                ),
                None if outcome.complete => {
                    format!("no witness (search exhaustive)\nnodes: {}", outcome.stats.nodes)
                }
                None => format!("no witness (budget exhausted)\nnodes: {}", outcome.stats.nodes),
            };
            let row = vec![
                k.to_string(),
                t.to_string(),
                n.to_string(),
                outcome.witness.is_some().to_string(),
                outcome.complete.to_string(),
                outcome.stats.nodes.to_string(),
                outcome
                    .witness
                    .as_ref()
                    .map(|w| join_colors(w.colors()))
                    .unwrap_or_default(),
            ];
            Ok(render(
                cli.format,
                &manifest,
                serde_json::to_value(&outcome)?,
                text,
                &["k", "t", "n", "witness_found", "complete", "nodes", "witness"],
                vec![row],
                exit,
            ))
        }
        Cmd::Verify { k, t, n, budget } => {
            let cfg = budget.to_config(u64::MAX);
            let result = verify_all(*k, *t, *n, &cfg)?;
            let mut params = base_ktn(*k, *t, *n);
            budget.record(&mut params, u64::MAX);
            let finished = (!budget.deterministic).then(unix_now);
            let manifest = manifest_at(cli, "verify", params, started, finished, budget.deterministic);
            let exit = if result.status == VerifyStatus::BudgetExhausted { 4 } else { 0 };
            let status = status_str(result.status);
            let text = format!(
                "status: {status}\ncanonical colorings examined: {}\nnodes: {}",
                result.canonical_colorings_examined, result.stats.nodes
            );
            let row = vec![
                k.to_string(),
                t.to_string(),
                n.to_string(),
                status.to_string(),
                result.canonical_colorings_examined.to_string(),
                result.stats.nodes.to_string(),
            ];
            Ok(render(
                cli.format,
                &manifest,
                serde_json::to_value(&result)?,
                text,
                &["k", "t", "n", "status", "canonical_colorings_examined", "nodes"],
                vec![row],
                exit,
            ))
        }
        Cmd::Scan { k, t, n_max, store, budget } => {
            let t_values = parse_t_list(t)?;
            let cfg = budget.to_config(100_000_000);
            let mut params = BTreeMap::new();
            params.insert("k".into(), k.to_string());
            params.insert("t".into(), t.clone());
            params.insert("n-max".into(), n_max.to_string());
            if let Some(path) = store {
                params.insert("store".into(), path.display().to_string());
            }
            budget.record(&mut params, 100_000_000);
            let manifest_value = serde_json::to_value(manifest_at(
                cli,
                "scan",
                params.clone(),
                started,
                None,
                budget.deterministic,
            ))?;
            let mut store_handle = store.as_ref().map(WitnessStore::open).transpose()?;
            let (facts, records) = scan_tk_facts(
                *k,
                &t_values,
                *n_max,
                &cfg,
                store_handle.as_mut(),
                Some(&manifest_value),
            )?;
            let finished = (!budget.deterministic).then(unix_now);
            let manifest = manifest_at(cli, "scan", params, started, finished, budget.deterministic);
            let exit = if facts.iter().any(|f| f.status == ScanStatus::BudgetExhausted) {
                4
            } else {
                0
            };
            let text = facts
                .iter()
                .map(|f| {
                    format!(
                        "k={} t={} n={}: {} (nodes={})",
                        f.k,
                        f.t,
                        f.n,
                        scan_status_str(f.status),
                        f.nodes
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            let rows = facts
                .iter()
                .map(|f| {
                    vec![
                        f.k.to_string(),
                        f.t.to_string(),
                        f.n.to_string(),
                        scan_status_str(f.status).to_string(),
                        f.nodes.to_string(),
                    ]
                })
                .collect();
            let result = json!({"facts": facts, "witnesses": records});
            Ok(render(
                cli.format,
                &manifest,
                result,
                text,
                &["k", "t", "n", "status", "nodes"],
                rows,
                exit,
            ))
        }
        Cmd::Zarankiewicz { m, n, s, t, exact: _, bound_only } => {
            let mut params = BTreeMap::new();
            for (key, value) in [("m", m), ("n", n), ("s", s), ("t", t)] {
                params.insert(key.to_string(), value.to_string());
            }
            params.insert("bound-only".into(), bound_only.to_string());
            let manifest = manifest(cli, "zarankiewicz", params, None);
            if *bound_only {
                let bound = kst_bound(*m, *n, *s, *t)?;
                let result = json!({"m": m, "n": n, "s": s, "t": t, "kst_upper": bound});
                return Ok(render(
                    cli.format,
                    &manifest,
                    result,
                    format!("kst_bound = {bound}"),
                    &["m", "n", "s", "t", "kst_upper"],
                    vec![vec![
                        m.to_string(),
                        n.to_string(),
                        s.to_string(),
                        t.to_string(),
                        bound.to_string(),
                    ]],
                    0,
                ));
            }
            let result = exact_zarankiewicz(*m, *n, *s, *t)?;
            let text = format!(
                "exact = {}\nkst_bound = {}\nwitness:\n{}",
                result.exact_value,
                result.kst_upper.map(|b| b.to_string()).unwrap_or_else(|| "n/a".into()),
                result.witness.to_text().trim_end()
            );
            let row = vec![
                m.to_string(),
                n.to_string(),
                s.to_string(),
                t.to_string(),
                result.exact_value.to_string(),
                result.kst_upper.map(|b| b.to_string()).unwrap_or_default(),
            ];
            Ok(render(
                cli.format,
                &manifest,
                serde_json::to_value(&result)?,
                text,
                &["m", "n", "s", "t", "exact_value", "kst_upper"],
                vec![row],
                0,
            ))
        }
        Cmd::Tau { n: Some(n), max: None } => {
            let profile = DivisorProfile::new(*n)?;
            let mut params = BTreeMap::new();
            params.insert("n".into(), n.to_string());
            let manifest = manifest(cli, "tau", params, None);
            let row = vec![
                n.to_string(),
                profile.tau.to_string(),
                profile.wigert_ratio.map(|r| r.to_string()).unwrap_or_default(),
            ];
            Ok(render(
                cli.format,
                &manifest,
                serde_json::to_value(&profile)?,
                profile.tau.to_string(),
                &["n", "tau", "wigert_ratio"],
                vec![row],
                0,
            ))
        }
        Cmd::Tau { n: None, max: Some(limit) } => {
            let table = TauTable::build(*limit)?;
            let (argmax, best_tau) = table.argmax();
            let ratio = wigert_ratio(argmax, best_tau);
            let mut params = BTreeMap::new();
            params.insert("max".into(), limit.to_string());
            let manifest = manifest(cli, "tau", params, None);
            let result = json!({
                "limit": limit,
                "argmax": argmax,
                "tau": best_tau,
                "wigert_ratio": ratio,
            });
            let text = format!(
                "argmax = {argmax}\ntau = {best_tau}\nwigert_ratio = {}",
                ratio.map(|r| r.to_string()).unwrap_or_else(|| "n/a".into())
            );
            // the CSV form is the full batch report
            let rows = (1..=*limit)
                .map(|n| {
                    let t = table.tau(n);
                    vec![
                        n.to_string(),
                        t.to_string(),
                        wigert_ratio(n, t).map(|r| r.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            Ok(render(
                cli.format,
                &manifest,
                result,
                text,
                &["n", "tau", "wigert_ratio"],
                rows,
                0,
            ))
        }
        Cmd::Tau { .. } => Err(Error::Invalid("tau requires exactly one of --n or --max".into())),
        Cmd::Audit { input, k, wide_threshold } => {
            let text = std::fs::read_to_string(input)?;
            let coloring = Coloring::from_json(&text)?;
            let w = wide_threshold.unwrap_or_else(|| u64::from(*k).saturating_pow(8));
            let report = audit_theorem4(&coloring, *k, w)?;
            let mut params = BTreeMap::new();
            params.insert("input".into(), input.display().to_string());
            params.insert("k".into(), k.to_string());
            params.insert("wide-threshold".into(), w.to_string());
            let manifest = manifest(cli, "audit", params, None);
            let mut lines: Vec<String> = report
                .checks
                .iter()
                .map(|c| {
                    format!(
                        "{} {}: lhs={} rhs={}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.lhs,
                        c.rhs
                    )
                })
                .collect();
            lines.push(format!("overall: {}", if report.pass { "PASS" } else { "FAIL" }));
            let rows = report
                .checks
                .iter()
                .map(|c| {
                    vec![c.name.clone(), c.lhs.to_string(), c.rhs.to_string(), c.pass.to_string()]
                })
                .collect();
            Ok(render(
                cli.format,
                &manifest,
                serde_json::to_value(&report)?,
                lines.join("\n"),
                &["name", "lhs", "rhs", "pass"],
                rows,
                0,
            ))
        }
    }
}

fn base_ktn(k: u32, t: u32, n: u32) -> BTreeMap<String, String> {
    let mut params = BTreeMap::new();
    params.insert("k".into(), k.to_string());
    params.insert("t".into(), t.to_string());
    params.insert("n".into(), n.to_string());
    params
}

fn join_colors(colors: &[u32]) -> String {
    colors.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn status_str(status: VerifyStatus) -> &'static str {
    match status {
        VerifyStatus::AllContainRainbow => "all_contain_rainbow",
        VerifyStatus::CounterexampleFound => "counterexample_found",
        VerifyStatus::BudgetExhausted => "budget_exhausted",
    }
}

fn scan_status_str(status: ScanStatus) -> &'static str {
    match status {
        ScanStatus::WitnessFound => "witness_found",
        ScanStatus::AllContainRainbow => "all_contain_rainbow",
        ScanStatus::BudgetExhausted => "budget_exhausted",
    }
}

fn parse_t_list(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::Invalid(format!("invalid t value '{part}' in list")))
        })
        .collect()
}

/// Manifest for pure (timing-free) subcommands.
fn manifest(cli: &Cli, subcommand: &str, params: BTreeMap<String, String>, _: Option<()>) -> RunManifest {
    RunManifest {
        subcommand: subcommand.into(),
        params,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        started_unix: None,
        finished_unix: None,
        format: cli.format.as_str().into(),
    }
}

/// Manifest for search-family subcommands; timestamps are omitted in
/// deterministic mode so outputs stay byte-identical.
fn manifest_at(
    cli: &Cli,
    subcommand: &str,
    params: BTreeMap<String, String>,
    started: u64,
    finished: Option<u64>,
    deterministic: bool,
) -> RunManifest {
    RunManifest {
        subcommand: subcommand.into(),
        params,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        started_unix: (!deterministic).then_some(started),
        finished_unix: finished,
        format: cli.format.as_str().into(),
    }
}

fn render(
    format: Format,
    manifest: &RunManifest,
    result: Value,
    text: String,
    csv_header: &[&str],
    csv_rows: Vec<Vec<String>>,
    exit: i32,
) -> Rendered {
    let stdout = match format {
        Format::Text => text,
        Format::Json => {
            let wrapped = json!({
                "manifest": serde_json::to_value(manifest).expect("manifest serializes"),
                "result": result,
            });
            serde_json::to_string(&wrapped).expect("output serializes")
        }
        Format::Csv => {
            let mut out = format!(
                "# manifest {}\n{}",
                serde_json::to_string(manifest).expect("manifest serializes"),
                csv_header.join(",")
            );
            for row in csv_rows {
                out.push('\n');
                out.push_str(&row.join(","));
            }
            out
        }
    };
    Rendered { stdout, exit }
}
