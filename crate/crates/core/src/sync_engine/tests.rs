use super::*;
use crate::lang::{parse, parse_bexpr};
use crate::specgen::Generator;

pub(crate) const PLANT: &str = "ch1!v; ch2!p; (ch3?a; <p_dot=v, v_dot=a & true |> skip> |> [] (ch1!v -> ch2!p))*";

pub(crate) const CONTROL: &str = "ch1?v; ch2?p; (\
    pp := p + v*T + 1/2*da*T^2; vv := v + da*T; \
    (if 2*am*(op - pp) >= vm^2 then vlm := vm^2 else \
        if op - pp > 0 then vlm := 2*am*(op - pp) else vlm := 0 endif endif); \
    (if vv <= 0 || vv^2 <= vlm then a := da else \
        (pp := p + v*T; \
        (if 2*am*(op - pp) >= vm^2 then vlm := vm^2 else \
            if op - pp > 0 then vlm := 2*am*(op - pp) else vlm := 0 endif endif); \
        if v <= 0 || v^2 <= vlm then a := 0 else a := -am endif) endif); \
    ch3!a; wait T; ch1?v; ch2?p)*";

pub(crate) const INV: &str = "BT > 0 && Bam > 0 && Bda > 0 && Bvm > 0 && Ap <= Bop && Av == Bv && Ap == Bp \
    && ((2*Bam*(Bop - Ap) >= Bvm^2 && Av <= Bvm) \
        || (2*Bam*(Bop - Ap) < Bvm^2 && (Av <= 0 || Av^2 <= 2*Bam*(Bop - Ap))))";

fn chs(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Specs of two programs, prefixed `A` and `B`.
fn pair(a: &str, b: &str) -> (NamedAssertion, NamedAssertion) {
    let mut g = Generator::new();
    let pa = g.generate(&parse(a).unwrap()).unwrap();
    let pb = g.generate(&parse(b).unwrap()).unwrap();
    let mut px = Prefixer::new();
    (px.prefix_process("A", &pa).unwrap(), px.prefix_process("B", &pb).unwrap())
}

fn run(a: &str, b: &str, ch: &[&str], cfg: &SyncConfig) -> Result<SyncOutput, SyncError> {
    let (na, nb) = pair(a, b);
    synchronize(&chs(ch), &na, &nb, &BExpr::True, &BExpr::True, cfg).map(|(_, o)| o)
}

#[test]
fn false_and_init() {
    let cfg = SyncConfig::default();
    let na = NamedAssertion { names: vec!["A".into()], assertion: Assertion::False };
    let nb = NamedAssertion { names: vec!["B".into()], assertion: Assertion::Init };
    let (r, _) = synchronize(&chs(&[]), &na, &nb, &BExpr::True, &BExpr::True, &cfg).unwrap();
    assert_eq!(r.assertion, Assertion::False);
    let o = run("skip", "skip", &[], &cfg).unwrap();
    assert_eq!(o.assertion, Assertion::Init);
    assert_eq!(o.leaves.len(), 1);
    assert_eq!(o.leaves[0].kind, LeafKind::Init);
}

#[test]
fn duplicate_names_are_rejected() {
    let na = NamedAssertion { names: vec!["A".into()], assertion: Assertion::Init };
    let r = synchronize(&chs(&[]), &na, &na, &BExpr::True, &BExpr::True, &SyncConfig::default());
    assert!(matches!(r, Err(SyncError::Prefix(_))));
}

#[test]
fn handshake_moves_value() {
    let o = run("x := 3; c!x", "c?y", &["c"], &SyncConfig::default()).unwrap();
    assert_eq!(o.assertion.to_string(), "io(c, 3, init[By := 3, Ax := 3])");
    assert_eq!(o.leaves.len(), 1);
    assert_eq!(o.leaves[0].cond, parse_bexpr("Ax == 3 && By == 3").unwrap());
}

#[test]
fn unmatched_channel_deadlocks() {
    let cfg = SyncConfig::pruning(None);
    let o = run("c!1", "d?y", &["c", "d"], &cfg).unwrap();
    // Neither side can move: no leaf is reachable.
    assert!(o.leaves.is_empty(), "{}", o.assertion);
}

#[test]
fn waits_interleave() {
    let cfg = SyncConfig::pruning(None);
    let o = run("wait 1; c!1", "wait 2; c?y", &["c"], &cfg).unwrap();
    assert_eq!(o.leaves.len(), 1, "{}", o.assertion);
    let o = run("wait 1", "skip", &[], &cfg).unwrap();
    // A terminated side blocks the other's delay.
    assert!(o.leaves.is_empty(), "{}", o.assertion);
}

#[test]
fn pruning_only_removes_contradictions() {
    let prog = "if x < 0 then y := 1 else y := 2 endif";
    let loose = run(prog, "skip", &[], &SyncConfig::default()).unwrap();
    let tight = run(prog, "skip", &[], &SyncConfig::pruning(None)).unwrap();
    assert_eq!(loose.leaves.len(), 2);
    assert_eq!(tight.leaves.len(), 2);
    let (na, nb) = pair(prog, "skip");
    let cond0 = parse_bexpr("Ax > 5").unwrap();
    let (_, o) = synchronize(&chs(&[]), &na, &nb, &cond0, &BExpr::True, &SyncConfig::pruning(None)).unwrap();
    assert_eq!(o.leaves.len(), 1);
    assert_eq!(o.pruned.len(), 1);
    assert_eq!(o.pruned[0].by, Refuter::Linear);
}

#[test]
fn subst_post_condition() {
    let mut eng = Engine::new(chs(&[]), BExpr::True, &SyncConfig::default());
    let c = parse_bexpr("x > 1").unwrap();
    let inc = [("x".to_string(), crate::lang::parse_expr("x + 1").unwrap())];
    assert_eq!(eng.post_cond(&c, &inc).to_string(), parse_bexpr("x - 1 > 1").unwrap().simplify().to_string());
    let set = [("y".to_string(), crate::lang::parse_expr("x * 2").unwrap())];
    let r = eng.post_cond(&c, &set);
    assert!(matches!(r, BExpr::And(..)), "{r}");
    let sq = [("x".to_string(), crate::lang::parse_expr("x^2").unwrap())];
    assert!(matches!(eng.post_cond(&c, &sq), BExpr::Exists(..)));
}

#[test]
fn loops_need_matching_partners() {
    let cfg = SyncConfig::pruning(None);
    let o = run("(c!1)*", "(c?x)*", &["c"], &cfg).unwrap();
    assert_eq!(o.rec_stats, [RecStats { generated: 1, kept: 1 }]);
    assert!(o.obligations.iter().any(|ob| ob.kind == ObligationKind::RecCondInductive));
    let r = run("(c!1)*", "skip", &["c"], &cfg);
    assert!(matches!(r, Err(SyncError::Unsupported(_))), "{r:?}");
    // An unshared send lets one loop iterate while the other has exited.
    let r = run("(c!1)*", "(d!1)*", &[], &cfg);
    assert!(matches!(r, Err(SyncError::RecPremise { premise: 1, .. })), "{r:?}");
}

fn cruise(solver: Option<Arc<Solver>>) -> SyncOutput {
    let (na, nb) = pair(PLANT, CONTROL);
    let inv = parse_bexpr(INV).unwrap();
    let cfg = SyncConfig::pruning(solver);
    synchronize(&chs(&["ch1", "ch2", "ch3"]), &na, &nb, &inv, &inv, &cfg).unwrap().1
}

#[test]
fn cruise_control_branches() {
    let o = cruise(None);
    assert_eq!(o.rec_stats, [RecStats { generated: 21, kept: 21 }]);
    assert!(o.prune_stats.undecided > 0);
}

#[test]
fn cruise_control_with_solver() {
    let Some(z3) = Solver::detect(&["z3 -smt2"], std::time::Duration::from_secs(10)) else {
        eprintln!("z3 not found, skipping");
        return;
    };
    let o = cruise(Some(Arc::new(z3)));
    assert_eq!(o.rec_stats, [RecStats { generated: 21, kept: 11 }]);
    assert_eq!(o.prune_stats.undecided, 0);
    assert_eq!(o.leaves.iter().filter(|l| l.kind == LeafKind::Continue).count(), 11);
}
