//! Verification jobs: named processes composed in parallel, an initial
//! condition, a loop condition and a safety goal, run end to end into a
//! report with obligations, statistics and oracle results.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertion::Assertion;
use crate::expr::{frac, BExpr, BoundKind, Expr, State, Valuation};
use crate::lang::{parse, parse_bexpr, ParseError, Process};
use crate::obligation::{Obligation, ObligationKind};
use crate::oracle::{check_parallel, DriveOptions, Verdict};
use crate::solver::{Answer, Solver};
use crate::specgen::{Generator, SpecError};
use crate::sync_engine::{
    prefix_program, synchronize, LeafKind, Mutation, NamedAssertion, Prefixer, PruneStats, RecStats, SyncConfig,
    SyncError,
};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Composition {
    Process(String),
    Parallel { left: Box<Composition>, channels: Vec<String>, right: Box<Composition> },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobOptions {
    /// Number of oracle runs; 0 disables the oracle.
    pub oracle: usize,
    pub seed: u64,
    /// Solver command line, e.g. `"z3 -smt2"`.
    pub smt: Option<String>,
    pub smt_timeout_secs: u64,
    /// Loop iterations per process in oracle runs.
    pub unroll: usize,
    pub prune: bool,
}

impl Default for JobOptions {
    fn default() -> Self {
        JobOptions { oracle: 0, seed: 0, smt: None, smt_timeout_secs: 30, unroll: 2, prune: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    #[serde(default)]
    pub name: String,
    /// Process name to program text.
    pub processes: BTreeMap<String, String>,
    pub parallel: Composition,
    #[serde(default = "true_text")]
    pub init_cond: String,
    #[serde(default = "true_text")]
    pub rec_cond: String,
    /// Safety property required at every completed branch.
    #[serde(default)]
    pub goal: Option<String>,
    #[serde(default)]
    pub options: JobOptions,
}

fn true_text() -> String {
    "true".into()
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("job file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("process `{process}`: {err}")]
    Parse { process: String, err: ParseError },
    #[error("{field}: {err}")]
    Cond { field: &'static str, err: ParseError },
    #[error("process `{process}`: {err}")]
    Spec { process: String, err: SpecError },
    #[error("process `{0}` is not sequential")]
    NotSequential(String),
    #[error("composition names unknown process `{0}`")]
    UnknownProcess(String),
    #[error("process `{0}` is used more than once or never")]
    ProcessUse(String),
    #[error("channel `{ch}` is shared but not used by {side}")]
    Channel { ch: String, side: String },
    #[error("{field} mentions `{var}`, which belongs to no process")]
    Owner { field: &'static str, var: String },
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error("solver `{0}` could not be started")]
    Solver(String),
}

impl Job {
    pub fn from_json(text: &str) -> Result<Job, JobError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// No solver was configured.
    Unchecked,
    /// `unsat`: the implication is valid (for feasibility: the branch is dead).
    Valid,
    /// `sat`: the implication has a counterexample (for feasibility: the branch is live).
    Invalid,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObligationRecord {
    pub id: String,
    pub kind: ObligationKind,
    pub label: String,
    pub hyp: String,
    pub goal: String,
    pub file: String,
    pub status: Status,
    #[serde(skip)]
    pub script: String,
}

impl ObligationRecord {
    /// A failed proof: a validity claim the solver did not establish.
    pub fn failed(&self) -> bool {
        self.kind != ObligationKind::Feasibility && matches!(self.status, Status::Invalid | Status::Unknown)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopStats {
    pub generated: usize,
    pub pruned: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub loops: Vec<LoopStats>,
    pub leaves: usize,
    pub pruning: PruneStats,
    pub obligations: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleSummary {
    pub requested: usize,
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
    pub note: Option<String>,
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    pub specs: Vec<(String, String)>,
    pub assertion: String,
    pub obligations: Vec<ObligationRecord>,
    pub stats: Stats,
    pub oracle: OracleSummary,
    pub solver: Option<String>,
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const OBLIGATION_FAILED: i32 = 2;
    pub const COUNTEREXAMPLE: i32 = 3;
}

impl Report {
    /// 3 on an oracle counterexample, else 2 on a failed obligation, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.oracle.fail > 0 {
            exit::COUNTEREXAMPLE
        } else if self.obligations.iter().any(ObligationRecord::failed) {
            exit::OBLIGATION_FAILED
        } else {
            exit::OK
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let name = if self.name.is_empty() { "job" } else { &self.name };
        s.push_str(&format!("# {name}\n\n## specifications\n"));
        for (n, a) in &self.specs {
            s.push_str(&format!("{n}: {a}\n"));
        }
        s.push_str(&format!("\n## synchronized\n{}\n\n## loops\n", self.assertion));
        for (i, l) in self.stats.loops.iter().enumerate() {
            s.push_str(&format!("loop {}: generated {}, pruned {}, kept {}\n", i + 1, l.generated, l.pruned, l.kept));
        }
        let p = &self.stats.pruning;
        s.push_str(&format!(
            "\n## pruning\nchecks {}, refuted {} (syntactic {}, linear {}, smt {}), feasible {}, undecided {}\n",
            p.checks,
            p.syntactic + p.linear + p.smt,
            p.syntactic,
            p.linear,
            p.smt,
            p.feasible,
            p.undecided
        ));
        s.push_str(&format!("\n## obligations (solver: {})\n", self.solver.as_deref().unwrap_or("none")));
        for o in &self.obligations {
            let st =
                serde_json::to_value(o.status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            s.push_str(&format!("{} [{}] {} {}\n  {} --> {}\n", o.id, o.kind, st, o.label, o.hyp, o.goal));
        }
        let o = &self.oracle;
        s.push_str(&format!(
            "\n## oracle\nrequested {}, pass {}, fail {}, skipped {}\n",
            o.requested, o.pass, o.fail, o.skipped
        ));
        if let Some(n) = &o.note {
            s.push_str(&format!("note: {n}\n"));
        }
        if let Some(c) = &o.counterexample {
            s.push_str(&format!("counterexample:\n{c}\n"));
        }
        s
    }

    /// Writes `report.txt`, `obligations/*.smt2`, `index.json` and `stats.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let obl = dir.join("obligations");
        std::fs::create_dir_all(&obl)?;
        std::fs::write(dir.join("report.txt"), self.text())?;
        for o in &self.obligations {
            std::fs::write(dir.join(&o.file), &o.script)?;
        }
        let index = serde_json::to_string_pretty(&self.obligations)?;
        std::fs::write(dir.join("index.json"), index + "\n")?;
        let stats = serde_json::json!({ "stats": self.stats, "oracle": self.oracle });
        std::fs::write(dir.join("stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
        Ok(())
    }
}

struct Prepared {
    programs: BTreeMap<String, Process>,
    named: BTreeMap<String, NamedAssertion>,
    specs: Vec<(String, String)>,
    spec_obligations: Vec<Obligation>,
    init: BExpr,
    rec_cond: BExpr,
    goal: Option<BExpr>,
}

fn cond(field: &'static str, text: &str, px: &Prefixer) -> Result<BExpr, JobError> {
    let b = parse_bexpr(text).map_err(|err| JobError::Cond { field, err })?;
    if let Some(var) = b.vars().into_iter().find(|x| px.owner(x).is_none()) {
        return Err(JobError::Owner { field, var });
    }
    Ok(b)
}

fn leaves_of(c: &Composition, out: &mut Vec<String>) {
    match c {
        Composition::Process(n) => out.push(n.clone()),
        Composition::Parallel { left, right, .. } => {
            leaves_of(left, out);
            leaves_of(right, out);
        }
    }
}

fn prepare(job: &Job) -> Result<Prepared, JobError> {
    let mut used = Vec::new();
    leaves_of(&job.parallel, &mut used);
    for n in &used {
        if !job.processes.contains_key(n) {
            return Err(JobError::UnknownProcess(n.clone()));
        }
    }
    for n in job.processes.keys() {
        if used.iter().filter(|u| *u == n).count() != 1 {
            return Err(JobError::ProcessUse(n.clone()));
        }
    }
    let mut px = Prefixer::new();
    let mut g = Generator::new();
    let mut programs = BTreeMap::new();
    let mut named = BTreeMap::new();
    let mut specs = Vec::new();
    let mut spec_obligations = Vec::new();
    for n in &used {
        let text = &job.processes[n];
        let c = parse(text).map_err(|err| JobError::Parse { process: n.clone(), err })?;
        if !c.is_sequential() {
            return Err(JobError::NotSequential(n.clone()));
        }
        let a = g.generate(&c).map_err(|err| JobError::Spec { process: n.clone(), err })?;
        let res = g.finish(a);
        let na = px.prefix_process(n, &res.assertion)?;
        let rn = |x: &str| format!("{n}{x}");
        for o in res.obligations {
            let hyp = o.hyp.rename_vars(&rn);
            let goal = o.goal.rename_vars(&rn);
            spec_obligations.push(Obligation::new(o.kind, format!("{n}/{}", o.label), hyp, goal));
        }
        specs.push((n.clone(), na.assertion.pretty()));
        named.insert(n.clone(), na);
        programs.insert(n.clone(), c);
    }
    let init = cond("init_cond", &job.init_cond, &px)?;
    let rec_cond = cond("rec_cond", &job.rec_cond, &px)?;
    let goal = job.goal.as_deref().map(|t| cond("goal", t, &px)).transpose()?;
    Ok(Prepared { programs, named, specs, spec_obligations, init, rec_cond, goal })
}

struct Synced {
    named: NamedAssertion,
    channels: BTreeSet<String>,
    obligations: Vec<Obligation>,
    leaves: Vec<crate::sync_engine::Leaf>,
    rec: Vec<RecStats>,
    pruning: PruneStats,
}

fn add_stats(a: &mut PruneStats, b: &PruneStats) {
    a.checks += b.checks;
    a.syntactic += b.syntactic;
    a.linear += b.linear;
    a.smt += b.smt;
    a.feasible += b.feasible;
    a.undecided += b.undecided;
}

fn sync_tree(c: &Composition, p: &Prepared, cfg: &SyncConfig) -> Result<Synced, JobError> {
    match c {
        Composition::Process(n) => Ok(Synced {
            named: p.named[n].clone(),
            channels: p.programs[n].channels(),
            obligations: vec![],
            leaves: vec![],
            rec: vec![],
            pruning: PruneStats::default(),
        }),
        Composition::Parallel { left, channels, right } => {
            let l = sync_tree(left, p, cfg)?;
            let r = sync_tree(right, p, cfg)?;
            let chs: BTreeSet<String> = channels.iter().cloned().collect();
            for ch in &chs {
                for (side, s) in [("the left side", &l), ("the right side", &r)] {
                    if !s.channels.contains(ch) {
                        return Err(JobError::Channel { ch: ch.clone(), side: side.into() });
                    }
                }
            }
            let (named, out) = synchronize(&chs, &l.named, &r.named, &p.init, &p.rec_cond, cfg)?;
            let mut pruning = l.pruning;
            add_stats(&mut pruning, &r.pruning);
            add_stats(&mut pruning, &out.prune_stats);
            let obligations = l.obligations.into_iter().chain(r.obligations).chain(out.obligations).collect();
            let rec = l.rec.into_iter().chain(r.rec).chain(out.rec_stats).collect();
            Ok(Synced {
                named,
                channels: l.channels.union(&r.channels).cloned().collect(),
                obligations,
                leaves: out.leaves,
                rec,
                pruning,
            })
        }
    }
}

/// Replaces bound variables left in `b` by parameters named by order of
/// creation, so printed obligations do not depend on global counters.
fn canonical(o: &Obligation) -> Obligation {
    let mut bounds: BTreeSet<_> = o.hyp.bounds();
    bounds.extend(o.goal.bounds());
    let mut n = BTreeMap::new();
    let sigma: BTreeMap<_, _> = bounds
        .into_iter()
        .map(|b| {
            let base = if b.kind == BoundKind::Value { "v" } else { "d" };
            let k = n.entry(base).or_insert(0);
            *k += 1;
            (b, Expr::param(&format!("{base}'{k}")))
        })
        .collect();
    Obligation::new(o.kind, o.label.clone(), o.hyp.subst_bound(&sigma), o.goal.subst_bound(&sigma))
}

/// Runs the job. `mutation` seeds a rule defect (oracle sensitivity tests).
pub fn run(job: &Job) -> Result<Report, JobError> {
    run_with(job, None)
}

#[doc(hidden)]
pub fn run_with(job: &Job, mutation: Option<Mutation>) -> Result<Report, JobError> {
    let p = prepare(job)?;
    let opts = &job.options;
    let timeout = Duration::from_secs(opts.smt_timeout_secs);
    let solver = match &opts.smt {
        Some(cmd) => Some(Arc::new(Solver::new(cmd, timeout).ok_or_else(|| JobError::Solver(cmd.clone()))?)),
        None => None,
    };
    let cfg = SyncConfig { prune: opts.prune, solver: solver.clone(), budget: None, mutation };
    let s = sync_tree(&job.parallel, &p, &cfg)?;
    let mut obligations = p.spec_obligations.clone();
    obligations.extend(s.obligations.iter().cloned());
    if let Some(goal) = &p.goal {
        let top = matches!(job.parallel, Composition::Process(_));
        if top {
            obligations.push(Obligation::new(ObligationKind::Goal, "init", p.init.clone(), goal.clone()));
        }
        for l in &s.leaves {
            let kind = match l.kind {
                LeafKind::Init => "end",
                LeafKind::Continue => "iteration",
            };
            obligations.push(Obligation::new(
                ObligationKind::Goal,
                format!("{}/{kind}", l.label),
                l.cond.clone(),
                goal.clone(),
            ));
        }
    }
    let mut records: Vec<ObligationRecord> = obligations
        .iter()
        .map(canonical)
        .enumerate()
        .map(|(i, o)| {
            let id = format!("{:03}", i + 1);
            let script = o.to_smtlib().unwrap_or_else(|e| format!("; not expressible in SMT-LIB: {e}\n"));
            ObligationRecord {
                file: format!("obligations/{id}-{}.smt2", o.kind),
                id,
                kind: o.kind,
                label: o.label.clone(),
                hyp: o.hyp.to_string(),
                goal: o.goal.to_string(),
                status: Status::Unchecked,
                script,
            }
        })
        .collect();
    if let Some(sv) = &solver {
        records.par_iter_mut().for_each(|r| {
            r.status = match sv.check(&r.script) {
                Answer::Unsat => Status::Valid,
                Answer::Sat => Status::Invalid,
                _ => Status::Unknown,
            }
        });
    }
    let mut counts = BTreeMap::new();
    for r in &records {
        *counts.entry(r.kind.to_string()).or_insert(0) += 1;
    }
    let stats = Stats {
        loops: s
            .rec
            .iter()
            .map(|r| LoopStats { generated: r.generated, pruned: r.generated - r.kept, kept: r.kept })
            .collect(),
        leaves: s.leaves.len(),
        pruning: s.pruning,
        obligations: counts,
    };
    let oracle = oracle(job, &p, &s.named.assertion, mutation.is_some());
    Ok(Report {
        name: job.name.clone(),
        specs: p.specs,
        assertion: s.named.assertion.pretty(),
        obligations: records,
        stats,
        oracle,
        solver: solver.map(|s| s.command()),
    })
}

const SAMPLE_VALUES: [(i64, i64); 13] =
    [(-3, 1), (-2, 1), (-1, 1), (-1, 2), (0, 1), (1, 4), (1, 2), (1, 1), (3, 2), (2, 1), (3, 1), (4, 1), (6, 1)];

/// A random state over `vars` satisfying `init`, if one is found. Top-level
/// equations `x == e` are solved for `x` after the random draw.
pub fn sample_state<R: Rng>(vars: &BTreeSet<String>, init: &BExpr, rng: &mut R, tries: usize) -> Option<State> {
    let defs: Vec<(String, Expr)> = init
        .conjuncts()
        .into_iter()
        .filter_map(|c| match c {
            BExpr::Cmp(crate::expr::CmpOp::Eq, Expr::Var(x), e) if !e.mentions_var(x) => Some((x.clone(), e.clone())),
            BExpr::Cmp(crate::expr::CmpOp::Eq, e, Expr::Var(x)) if !e.mentions_var(x) => Some((x.clone(), e.clone())),
            _ => None,
        })
        .collect();
    for _ in 0..tries {
        let mut s = State::new();
        for x in vars {
            let (n, d) = *SAMPLE_VALUES.choose(rng).expect("nonempty");
            s.set(x, frac(n, d));
        }
        for _ in 0..2 {
            for (x, e) in &defs {
                if let Ok(v) = e.eval(&Valuation::new(&s)) {
                    s.set(x, v);
                }
            }
        }
        if init.eval(&Valuation::new(&s)) == Ok(true) {
            return Some(s);
        }
    }
    None
}

fn oracle(job: &Job, p: &Prepared, spec: &Assertion, stop_at_first: bool) -> OracleSummary {
    let n = job.options.oracle;
    let mut sum = OracleSummary { requested: n, ..OracleSummary::default() };
    if n == 0 {
        return sum;
    }
    let Composition::Parallel { left, channels, right } = &job.parallel else {
        sum.note = Some("oracle runs need a parallel composition".into());
        return sum;
    };
    let (Composition::Process(l), Composition::Process(r)) = (&**left, &**right) else {
        sum.note = Some("oracle runs support two-process compositions only".into());
        return sum;
    };
    let c = Process::Parallel(
        Box::new(prefix_program(l, &p.programs[l])),
        channels.iter().cloned().collect(),
        Box::new(prefix_program(r, &p.programs[r])),
    );
    let vars = c.free_vars();
    let opts = DriveOptions { max_unroll: 2 * job.options.unroll, ..DriveOptions::default() };
    let seed = job.options.seed;
    let results: Vec<Result<Verdict, String>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let Some(s0) = sample_state(&vars, &p.init, &mut rng, 2000) else {
                return Err("no initial state satisfying init_cond found".to_string());
            };
            Ok(check_parallel(&c, spec, &s0, &mut rng, &opts, 20))
        })
        .collect();
    for r in results {
        match r {
            Ok(Verdict::Pass) => sum.pass += 1,
            Ok(Verdict::Fail(m)) => {
                sum.fail += 1;
                if sum.counterexample.is_none() {
                    sum.counterexample = Some(m);
                }
                if stop_at_first {
                    break;
                }
            }
            Ok(Verdict::Skipped(_)) => sum.skipped += 1,
            Err(m) => {
                sum.skipped += 1;
                sum.note = Some(m);
            }
        }
    }
    sum
}

#[cfg(test)]
mod tests;
