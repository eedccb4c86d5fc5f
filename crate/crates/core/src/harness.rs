//! Randomized soundness campaigns: generated or synchronized assertions
//! checked against concrete runs of random processes.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::BExpr;
use crate::lang::Process;
use crate::oracle::{check_parallel, check_sequential, DriveOptions, ProcessGen, Verdict};
use crate::specgen::Generator;
use crate::sync_engine::{prefix_program, synchronize, Mutation, Prefixer, SyncConfig};

/// Verdict counts of a campaign, with the failure reports.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Tally {
    pub pass: usize,
    pub fail: Vec<String>,
    /// Runs without a verdict (no run found, or an inconclusive check).
    pub skipped: usize,
    /// Samples outside the fragment handled by the generator or the rules.
    pub unsupported: usize,
}

impl Tally {
    pub fn verdicts(&self) -> usize {
        self.pass + self.fail.len()
    }

    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Verdict(Verdict::Pass) => self.pass += 1,
            Outcome::Verdict(Verdict::Fail(m)) => self.fail.push(m),
            Outcome::Verdict(Verdict::Skipped(_)) => self.skipped += 1,
            Outcome::Unsupported => self.unsupported += 1,
            Outcome::Discarded => {}
        }
    }
}

enum Outcome {
    Verdict(Verdict),
    Unsupported,
    Discarded,
}

const BATCH: usize = 64;

/// Rule applications allowed per synchronization of a random pair. Pairs
/// over unshared channels interleave exponentially; those past the budget
/// count as unsupported.
pub const SYNC_BUDGET: usize = 4000;

/// Draws samples in parallel batches until `n` verdicts, `stop` holds, or
/// `cap` samples were drawn. Sample `i` uses its own RNG stream.
fn run_batches(
    seed: u64,
    n: usize,
    cap: usize,
    stop: impl Fn(&Tally) -> bool,
    sample: impl Fn(&mut ChaCha8Rng) -> Outcome + Sync,
) -> Tally {
    let mut t = Tally::default();
    let mut next = 0;
    while t.verdicts() < n && next < cap && !stop(&t) {
        let outs: Vec<Outcome> = (next..next + BATCH)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                sample(&mut rng)
            })
            .collect();
        next += BATCH;
        for o in outs {
            if t.verdicts() >= n || stop(&t) {
                break;
            }
            t.add(o);
        }
    }
    t
}

/// Generated specifications of random sequential processes of nesting
/// depth `depth` against random runs.
pub fn sequential_campaign(seed: u64, n: usize, depth: usize) -> Tally {
    let pg = ProcessGen::default();
    let opts = DriveOptions::default();
    run_batches(
        seed,
        n,
        20 * n,
        |_| false,
        |rng| {
            let c = pg.process(rng, depth);
            let Ok(spec) = crate::specgen::generate(&c) else { return Outcome::Unsupported };
            let s0 = pg.state(rng);
            Outcome::Verdict(check_sequential(&c, &spec.assertion, &s0, rng, &opts))
        },
    )
}

fn loop_free(p: &Process) -> bool {
    let mut ok = true;
    p.walk(&mut |q| ok &= !matches!(q, Process::Repeat(_)));
    ok
}

/// Synchronized assertions of random loop-free pairs `A ‖ B` against
/// random synchronized runs. With a mutation the campaign stops at the
/// first failure.
pub fn parallel_campaign(seed: u64, n: usize, mutation: Option<Mutation>) -> Tally {
    let pg = ProcessGen { vars: vec!["x".into(), "y".into()], chans: vec!["a".into(), "b".into()], continuous: true };
    let opts = DriveOptions { max_unroll: 2, ..DriveOptions::default() };
    let stop = |t: &Tally| mutation.is_some() && !t.fail.is_empty();
    run_batches(seed, n, 40 * n, stop, |rng| {
        let p1 = pg.process(rng, 2);
        let p2 = pg.process(rng, 2);
        if !loop_free(&p1) || !loop_free(&p2) {
            return Outcome::Discarded;
        }
        let shared: BTreeSet<String> = pg.chans.iter().filter(|_| rng.gen_bool(0.8)).cloned().collect();
        let c = Process::Parallel(Box::new(p1), shared, Box::new(p2));
        let s0 = pg.state(rng).rename(|x| format!("A{x}")).merge(&pg.state(rng).rename(|x| format!("B{x}")));
        let cfg = SyncConfig { prune: true, solver: None, budget: Some(SYNC_BUDGET), mutation };
        match check_pair(&c, &s0.expect("disjoint prefixes"), &BExpr::True, &cfg, rng, &opts) {
            Some(v) => Outcome::Verdict(v),
            None => Outcome::Unsupported,
        }
    })
}

/// One run of `c = p1 ||chs p2` (unprefixed components) from `s0` over the
/// `A`/`B`-prefixed variables, checked against the synchronization of the
/// components' specifications under `cond0`. `None` when the components
/// fall outside the supported fragment.
pub fn check_pair<R: Rng>(
    c: &Process,
    s0: &crate::expr::State,
    cond0: &BExpr,
    cfg: &SyncConfig,
    rng: &mut R,
    opts: &DriveOptions,
) -> Option<Verdict> {
    let Process::Parallel(p1, chs, p2) = c else { return None };
    let mut g = Generator::new();
    let a1 = g.generate(p1).ok()?;
    let a2 = g.generate(p2).ok()?;
    let mut px = Prefixer::new();
    let n1 = px.prefix_process("A", &a1).ok()?;
    let n2 = px.prefix_process("B", &a2).ok()?;
    let (spec, _) = synchronize(chs, &n1, &n2, cond0, &BExpr::True, cfg).ok()?;
    let prefixed = Process::Parallel(Box::new(prefix_program("A", p1)), chs.clone(), Box::new(prefix_program("B", p2)));
    // Trace states carry only the variables of the components.
    let used = prefixed.free_vars();
    let s0 = s0.restrict(|x| used.contains(x));
    Some(match check_parallel(&prefixed, &spec.assertion, &s0, rng, opts, 8) {
        Verdict::Fail(m) => Verdict::Fail(format!("{c}\n{m}")),
        v => v,
    })
}
