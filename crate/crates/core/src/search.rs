//! Backtracking search for rainbow-free equinumerous colorings (lower-bound
//! witnesses) and exhaustive verification over canonical colorings.
//!
//! The search enumerates only canonical colorings (position 1 gets color 0;
//! color `c+1` may first appear only after color `c`), dividing the space by
//! `t!`. Positions are filled left to right, colors tried in increasing
//! index under a remaining-capacity check. After each assignment the APs
//! ending at that position are complete, so every rainbow AP is detected
//! exactly once, at its last term; a branch dies the moment a completed AP
//! is rainbow.
//!
//! For parallelism the tree is split at a fixed prefix depth (independent of
//! the worker count) into subtrees. In deterministic mode the node budget is
//! divided evenly across subtrees, workers communicate only through a
//! monotone best-subtree cell, and the reported witness, node count, and
//! examined count are identical for every `parallel_width`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};

use crate::coloring::{ColorSet, Coloring};
use crate::error::{Error, Result};

/// Largest `t*n` accepted by the search operations.
pub const SEARCH_GUARD: u64 = 200;

/// The search tree is split into at least this many subtrees (when the tree
/// is deep enough); fixed so results do not depend on the worker count. The
/// tree is strongly skewed toward lexicographically small prefixes, so the
/// split is generous.
const PREFIX_TARGET: usize = 1024;

/// How often (in nodes) workers poll for cross-subtree cancellation and the
/// time budget.
const POLL_MASK: u64 = 0xFFF;

/// Budgets and parallelism knobs for one search run.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Maximum number of search-tree nodes (color assignments). In
    /// deterministic mode the budget is split evenly across subtrees.
    pub node_budget: u64,
    /// Wall-clock budget. Ignored in deterministic mode, where results must
    /// not depend on timing.
    pub time_budget: Option<Duration>,
    /// Number of independent subtree workers. With the `parallel` feature
    /// disabled (or width 1) subtrees run sequentially in order.
    pub parallel_width: usize,
    /// Force results (witness, node count, examined count) to be identical
    /// for every `parallel_width`.
    pub deterministic: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            node_budget: u64::MAX,
            time_budget: None,
            parallel_width: 1,
            deterministic: true,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.parallel_width < 1 {
            return Err(Error::Invalid("parallel_width must be >= 1".into()));
        }
        if self.node_budget < 1 {
            return Err(Error::Invalid("node_budget must be >= 1".into()));
        }
        Ok(())
    }
}

/// Node count and (outside deterministic mode) elapsed time of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub elapsed_ms: Option<u64>,
}

/// Result of [`search_rainbow_free`]. `complete` is true when no budget
/// triggered, so an absent witness is a proof of non-existence and a present
/// one is the lexicographically smallest canonical witness.
#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    pub k: u32,
    pub t: u32,
    pub n: u32,
    pub witness: Option<Coloring>,
    pub complete: bool,
    pub stats: SearchStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyStatus {
    AllContainRainbow,
    CounterexampleFound,
    BudgetExhausted,
}

/// Result of [`verify_all`]. `canonical_colorings_examined` counts complete
/// canonical colorings accounted for (branches cut at a completed rainbow AP
/// contribute all their completions); it saturates at `2^64 - 1`.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationResult {
    pub k: u32,
    pub t: u32,
    pub n: u32,
    pub status: VerifyStatus,
    pub canonical_colorings_examined: u64,
    pub counterexample: Option<Coloring>,
    pub stats: SearchStats,
}

/// One persisted lower-bound witness: a rainbow-free equinumerous coloring
/// re-verified by the coloring model before it is ever written.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub k: u32,
    pub t: u32,
    pub n: u32,
    pub coloring: Coloring,
    pub verified: bool,
    /// Unix seconds; absent in deterministic mode so outputs stay
    /// byte-identical.
    pub discovered_at: Option<u64>,
    pub search_stats: SearchStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest: Option<serde_json::Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStatus {
    WitnessFound,
    AllContainRainbow,
    BudgetExhausted,
}

/// One `(t, n)` cell of a scan.
#[derive(Clone, Debug, Serialize)]
pub struct ScanFact {
    pub k: u32,
    pub t: u32,
    pub n: u32,
    pub status: ScanStatus,
    pub nodes: u64,
}

/// Searches for an equinumerous `t`-coloring of `[t*n]` with no rainbow
/// `AP(k)`.
pub fn search_rainbow_free(k: u32, t: u32, n: u32, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let engine = Engine::new(k, t, n, cfg, false)?;
    let out = engine.run()?;
    let stats = out.stats();
    let witness = out
        .witness
        .map(|raw| {
            Coloring::validate_equinumerous(raw, t, n)
                .map(|c| c.with_k_context(Some(k)))
                .map_err(|e| Error::Invalid(format!("search produced an invalid witness: {e}")))
        })
        .transpose()?;
    if let Some(w) = &witness {
        if w.find_rainbow_ap(k).is_some() {
            return Err(Error::Invalid(
                "search produced a witness containing a rainbow AP".into(),
            ));
        }
    }
    Ok(SearchOutcome { k, t, n, witness, complete: out.complete, stats })
}

/// Exhaustively enumerates canonical equinumerous colorings and reports
/// whether every one contains a rainbow `AP(k)`.
pub fn verify_all(k: u32, t: u32, n: u32, cfg: &SearchConfig) -> Result<VerificationResult> {
    let engine = Engine::new(k, t, n, cfg, true)?;
    let out = engine.run()?;
    let stats = out.stats();
    let counterexample = out
        .witness
        .map(|raw| {
            Coloring::validate_equinumerous(raw, t, n)
                .map(|c| c.with_k_context(Some(k)))
                .map_err(|e| Error::Invalid(format!("search produced an invalid witness: {e}")))
        })
        .transpose()?;
    let status = match (&counterexample, out.complete) {
        (Some(_), _) => VerifyStatus::CounterexampleFound,
        (None, true) => VerifyStatus::AllContainRainbow,
        (None, false) => VerifyStatus::BudgetExhausted,
    };
    Ok(VerificationResult {
        k,
        t,
        n,
        status,
        canonical_colorings_examined: u64::try_from(out.examined).unwrap_or(u64::MAX),
        counterexample,
        stats,
    })
}

/// Runs [`search_rainbow_free`] over every `(t, n)` with `t` in `t_values`
/// and `n <= n_max`. Each witness is re-verified by the coloring model and,
/// when a store is supplied, appended to it. `manifest` is stamped into the
/// persisted records.
pub fn scan_tk_facts(
    k: u32,
    t_values: &[u32],
    n_max: u32,
    cfg: &SearchConfig,
    mut store: Option<&mut WitnessStore>,
    manifest: Option<&serde_json::Value>,
) -> Result<(Vec<ScanFact>, Vec<WitnessRecord>)> {
    let mut facts = Vec::new();
    let mut records = Vec::new();
    for &t in t_values {
        for n in 1..=n_max {
            let outcome = search_rainbow_free(k, t, n, cfg)?;
            let status = match (&outcome.witness, outcome.complete) {
                (Some(_), _) => ScanStatus::WitnessFound,
                (None, true) => ScanStatus::AllContainRainbow,
                (None, false) => ScanStatus::BudgetExhausted,
            };
            facts.push(ScanFact { k, t, n, status, nodes: outcome.stats.nodes });
            if let Some(witness) = outcome.witness {
                // the witness came back through validate_equinumerous and the
                // rainbow checker inside search_rainbow_free; record it
                let record = WitnessRecord {
                    k,
                    t,
                    n,
                    coloring: witness,
                    verified: true,
                    discovered_at: if cfg.deterministic { None } else { Some(unix_now()) },
                    search_stats: outcome.stats,
                    manifest: manifest.cloned(),
                };
                if let Some(store) = store.as_deref_mut() {
                    store.append(&record)?;
                }
                records.push(record);
            }
        }
    }
    Ok((facts, records))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Append-only JSON-lines store of [`WitnessRecord`]s; re-running a scan
/// never overwrites prior records. Single-writer: the open handle owns the
/// file for its lifetime.
pub struct WitnessStore {
    path: PathBuf,
    file: File,
}

impl WitnessStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<WitnessStore> {
        let path = path.into();
        let file = OpenOptions::new().append(true).create(true).open(&path)?;
        Ok(WitnessStore { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &WitnessRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }

    /// Reads and validates every record in a store file.
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<WitnessRecord>> {
        let reader = BufReader::new(File::open(path.as_ref())?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

struct Engine {
    k: u32,
    t: u32,
    n: u32,
    tn: usize,
    count_completions: bool,
    cfg: SearchConfig,
}

struct EngineOutput {
    witness: Option<Vec<u32>>,
    examined: u128,
    nodes: u64,
    complete: bool,
    elapsed: Duration,
    deterministic: bool,
}

impl EngineOutput {
    fn stats(&self) -> SearchStats {
        SearchStats {
            nodes: self.nodes,
            elapsed_ms: if self.deterministic {
                None
            } else {
                Some(self.elapsed.as_millis() as u64)
            },
        }
    }
}

/// A partial canonical coloring.
#[derive(Clone)]
struct State {
    colors: Vec<u32>,
    used: Vec<u32>,
    seen_colors: u32,
}

impl State {
    fn empty(t: u32) -> State {
        State { colors: Vec::new(), used: vec![0; t as usize], seen_colors: 0 }
    }

    fn push(&mut self, c: u32) {
        self.colors.push(c);
        self.used[c as usize] += 1;
        if c == self.seen_colors {
            self.seen_colors += 1;
        }
    }

    fn pop(&mut self) {
        let c = self.colors.pop().expect("pop on empty state");
        self.used[c as usize] -= 1;
        if self.used[c as usize] == 0 && c + 1 == self.seen_colors {
            self.seen_colors -= 1;
        }
    }
}

struct SubtreeOutcome {
    witness: Option<Vec<u32>>,
    nodes: u64,
    examined: u128,
    exhausted: bool,
    skipped: bool,
}

struct Ctl<'a> {
    nodes: u64,
    examined: u128,
    witness: Option<Vec<u32>>,
    exhausted: bool,
    aborted: bool,
    allotment: u64,
    shared_nodes: Option<&'a AtomicU64>,
    global_budget: u64,
    deadline: Option<Instant>,
    best_idx: &'a AtomicUsize,
    my_idx: usize,
}

impl Ctl<'_> {
    /// Counts one node; false means the subtree must stop.
    fn note_node(&mut self) -> bool {
        self.nodes += 1;
        if let Some(shared) = self.shared_nodes {
            if shared.fetch_add(1, Ordering::Relaxed) + 1 > self.global_budget {
                self.exhausted = true;
                return false;
            }
        } else if self.nodes > self.allotment {
            self.exhausted = true;
            return false;
        }
        if self.nodes & POLL_MASK == 0 {
            if self.best_idx.load(Ordering::Relaxed) < self.my_idx {
                self.aborted = true;
                return false;
            }
            if let Some(deadline) = self.deadline {
                if Instant::now() > deadline {
                    self.exhausted = true;
                    return false;
                }
            }
        }
        true
    }
}

impl Engine {
    fn new(k: u32, t: u32, n: u32, cfg: &SearchConfig, count_completions: bool) -> Result<Engine> {
        if k < 3 {
            return Err(Error::Invalid(format!("k must be >= 3, got {k}")));
        }
        if t < 1 || n < 1 {
            return Err(Error::Invalid(format!("t and n must be >= 1, got t = {t}, n = {n}")));
        }
        let tn = u64::from(t) * u64::from(n);
        if tn > SEARCH_GUARD {
            return Err(Error::Guard(format!("t*n = {tn} exceeds search guard {SEARCH_GUARD}")));
        }
        cfg.validate()?;
        Ok(Engine { k, t, n, tn: tn as usize, count_completions, cfg: cfg.clone() })
    }

    fn run(&self) -> Result<EngineOutput> {
        let start = Instant::now();
        let deadline = if self.cfg.deterministic {
            None
        } else {
            self.cfg.time_budget.map(|d| start + d)
        };

        // phase 1: expand a deterministic prefix frontier
        let mut frontier = vec![State::empty(self.t)];
        let mut base_examined: u128 = 0;
        let mut expansion_nodes: u64 = 0;
        let mut depth = 0usize;
        let mut seen_set = ColorSet::new(self.t);
        while depth < self.tn && frontier.len() < PREFIX_TARGET {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for st in &frontier {
                let mut st = st.clone();
                let top = st.seen_colors.min(self.t - 1);
                for c in 0..=top {
                    if st.used[c as usize] == self.n {
                        continue;
                    }
                    st.push(c);
                    expansion_nodes += 1;
                    if expansion_nodes > self.cfg.node_budget {
                        return Ok(EngineOutput {
                            witness: None,
                            examined: base_examined,
                            nodes: expansion_nodes,
                            complete: false,
                            elapsed: start.elapsed(),
                            deterministic: self.cfg.deterministic,
                        });
                    }
                    if self.completes_rainbow_ap(&st.colors, &mut seen_set) {
                        if self.count_completions {
                            base_examined =
                                base_examined.saturating_add(self.canonical_completions(&st));
                        }
                    } else {
                        next.push(st.clone());
                    }
                    st.pop();
                }
            }
            frontier = next;
            depth += 1;
            if frontier.is_empty() {
                break;
            }
        }

        // the frontier may already consist of complete colorings
        if depth == self.tn && !frontier.is_empty() {
            return Ok(EngineOutput {
                witness: Some(frontier[0].colors.clone()),
                examined: base_examined.saturating_add(1),
                nodes: expansion_nodes,
                complete: true,
                elapsed: start.elapsed(),
                deterministic: self.cfg.deterministic,
            });
        }
        if frontier.is_empty() {
            return Ok(EngineOutput {
                witness: None,
                examined: base_examined,
                nodes: expansion_nodes,
                complete: true,
                elapsed: start.elapsed(),
                deterministic: self.cfg.deterministic,
            });
        }

        // phase 2: run the subtrees
        let remaining_budget = self.cfg.node_budget.saturating_sub(expansion_nodes);
        let allotment = if self.cfg.deterministic {
            remaining_budget / frontier.len() as u64
        } else {
            remaining_budget
        };
        let shared_nodes = AtomicU64::new(0);
        let best_idx = AtomicUsize::new(usize::MAX);

        let run_one = |(idx, prefix): (usize, &State)| -> SubtreeOutcome {
            if best_idx.load(Ordering::Relaxed) < idx {
                return SubtreeOutcome {
                    witness: None,
                    nodes: 0,
                    examined: 0,
                    exhausted: false,
                    skipped: true,
                };
            }
            let mut ctl = Ctl {
                nodes: 0,
                examined: 0,
                witness: None,
                exhausted: false,
                aborted: false,
                allotment,
                shared_nodes: if self.cfg.deterministic { None } else { Some(&shared_nodes) },
                global_budget: remaining_budget,
                deadline,
                best_idx: &best_idx,
                my_idx: idx,
            };
            let mut st = prefix.clone();
            let mut seen = ColorSet::new(self.t);
            self.dfs(&mut st, &mut ctl, &mut seen);
            if ctl.witness.is_some() {
                best_idx.fetch_min(idx, Ordering::Relaxed);
            }
            SubtreeOutcome {
                witness: ctl.witness,
                nodes: ctl.nodes,
                examined: ctl.examined,
                exhausted: ctl.exhausted,
                skipped: ctl.aborted,
            }
        };

        #[cfg(feature = "parallel")]
        let outcomes: Vec<SubtreeOutcome> = if self.cfg.parallel_width > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.parallel_width)
                .build()
                .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?;
            pool.install(|| frontier.par_iter().enumerate().map(run_one).collect())
        } else {
            frontier.iter().enumerate().map(run_one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let outcomes: Vec<SubtreeOutcome> = frontier.iter().enumerate().map(run_one).collect();

        // deterministic ordered aggregation: count subtrees up to and
        // including the leftmost witness
        let mut witness = None;
        let mut nodes = expansion_nodes;
        let mut examined = base_examined;
        let mut exhausted = false;
        for outcome in &outcomes {
            if outcome.skipped {
                continue;
            }
            if self.cfg.deterministic {
                nodes += outcome.nodes;
            }
            examined = examined.saturating_add(outcome.examined);
            exhausted |= outcome.exhausted;
            if let Some(w) = &outcome.witness {
                witness = Some(w.clone());
                break;
            }
        }
        if !self.cfg.deterministic {
            nodes = expansion_nodes + shared_nodes.load(Ordering::Relaxed);
        }
        Ok(EngineOutput {
            complete: !exhausted,
            witness,
            examined,
            nodes,
            elapsed: start.elapsed(),
            deterministic: self.cfg.deterministic,
        })
    }

    fn dfs(&self, st: &mut State, ctl: &mut Ctl<'_>, seen: &mut ColorSet) -> bool {
        if st.colors.len() == self.tn {
            ctl.witness = Some(st.colors.clone());
            ctl.examined = ctl.examined.saturating_add(1);
            return false;
        }
        let top = st.seen_colors.min(self.t - 1);
        for c in 0..=top {
            if st.used[c as usize] == self.n {
                continue;
            }
            st.push(c);
            if !ctl.note_node() {
                st.pop();
                return false;
            }
            if self.completes_rainbow_ap(&st.colors, seen) {
                if self.count_completions {
                    ctl.examined = ctl.examined.saturating_add(self.canonical_completions(st));
                }
                st.pop();
                continue;
            }
            let keep_going = self.dfs(st, ctl, seen);
            st.pop();
            if !keep_going {
                return false;
            }
        }
        true
    }

    /// True iff some AP(k) ending exactly at the last assigned position is
    /// rainbow. All its other terms are already colored.
    fn completes_rainbow_ap(&self, colors: &[u32], seen: &mut ColorSet) -> bool {
        if self.k > self.t {
            return false;
        }
        let p = colors.len();
        let span = (self.k - 1) as usize;
        let mut d = 1;
        while span * d < p {
            let first = p - span * d;
            seen.clear();
            let mut rainbow = true;
            let mut pos = first;
            loop {
                if !seen.insert(colors[pos - 1]) {
                    rainbow = false;
                    break;
                }
                if pos == p {
                    break;
                }
                pos += d;
            }
            if rainbow {
                return true;
            }
            d += 1;
        }
        false
    }

    /// Number of canonical completions of a partial canonical coloring:
    /// the multinomial of the remaining capacities divided by the number of
    /// orderings of the still-unseen (interchangeable) colors. Saturates.
    fn canonical_completions(&self, st: &State) -> u128 {
        let mut acc: u128 = 1;
        let mut placed: u64 = 0;
        for c in 0..self.t as usize {
            let cap = u64::from(self.n - st.used[c]);
            placed += cap;
            acc = sat_mul(acc, binom_sat(placed, cap));
        }
        let unseen = u64::from(self.t - st.seen_colors);
        let denom = factorial_sat(unseen);
        if acc == u128::MAX {
            return u128::MAX;
        }
        acc / denom
    }
}

fn sat_mul(a: u128, b: u128) -> u128 {
    a.saturating_mul(b)
}

/// `C(a, b)` with sticky saturation at `u128::MAX`.
fn binom_sat(a: u64, b: u64) -> u128 {
    if b > a {
        return 0;
    }
    let k = b.min(a - b);
    let mut res: u128 = 1;
    for i in 1..=k {
        res = sat_mul(res, u128::from(a - k + i));
        if res == u128::MAX {
            return u128::MAX;
        }
        res /= u128::from(i);
    }
    res
}

fn factorial_sat(x: u64) -> u128 {
    let mut res: u128 = 1;
    for i in 2..=x {
        res = sat_mul(res, u128::from(i));
        if res == u128::MAX {
            return u128::MAX;
        }
    }
    res
}
