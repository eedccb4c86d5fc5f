use super::*;

const CRUISE: &str = include_str!("../../jobs/cruise_control.json");

fn job(processes: &[(&str, &str)], parallel: serde_json::Value, init: &str) -> Job {
    let procs: BTreeMap<String, String> = processes.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
    let v = serde_json::json!({ "processes": procs, "parallel": parallel, "init_cond": init });
    serde_json::from_value(v).unwrap()
}

fn two(a: &str, chs: &[&str], b: &str, init: &str) -> Job {
    job(&[("A", a), ("B", b)], serde_json::json!({"left": "A", "channels": chs, "right": "B"}), init)
}

fn z3() -> Option<String> {
    Solver::detect(&["z3 -smt2"], Duration::from_secs(10)).map(|s| s.command())
}

#[test]
fn skip_pair_is_init() {
    let r = run(&two("skip", &[], "skip", "true")).unwrap();
    assert_eq!(r.assertion, "init");
    assert!(r.obligations.is_empty());
    assert_eq!(r.exit_code(), exit::OK);
}

#[test]
fn false_init_prunes_everything() {
    let r = run(&two("x := 1; c!x", &["c"], "c?y", "Ax > 0 && Ax < 0")).unwrap();
    assert_eq!(r.assertion, "false");
    assert_eq!(r.stats.leaves, 0);
    assert_eq!(r.stats.pruning.linear, 1);
}

#[test]
fn malformed_jobs_are_rejected() {
    let parse_err = run(&two("x := ", &[], "skip", "true")).unwrap_err();
    assert!(parse_err.to_string().starts_with("process `A`: 1:"), "{parse_err}");
    let j = job(&[("A", "skip")], serde_json::json!({"left": "A", "channels": [], "right": "C"}), "true");
    assert!(matches!(run(&j), Err(JobError::UnknownProcess(n)) if n == "C"));
    assert!(matches!(run(&two("c!1", &["c"], "skip", "true")), Err(JobError::Channel { .. })));
    assert!(matches!(run(&two("skip", &[], "skip", "Cx > 0")), Err(JobError::Owner { .. })));
    let dup = job(&[("A", "skip")], serde_json::json!({"left": "A", "channels": [], "right": "A"}), "true");
    assert!(matches!(run(&dup), Err(JobError::ProcessUse(_))));
    assert!(matches!(Job::from_json("{\"processes\": {}}"), Err(JobError::Json(_))));
}

#[test]
fn goal_obligations_per_leaf() {
    let mut j = two("x := 3; c!x", &["c"], "c?y", "true");
    j.goal = Some("By > 0".into());
    let r = run(&j).unwrap();
    let goals: Vec<_> = r.obligations.iter().filter(|o| o.kind == ObligationKind::Goal).collect();
    assert_eq!(goals.len(), 1);
    assert_eq!(goals[0].status, Status::Unchecked);
    assert!(goals[0].script.contains("(check-sat)"));
    if let Some(cmd) = z3() {
        j.options.smt = Some(cmd);
        let r = run(&j).unwrap();
        assert!(r.obligations.iter().all(|o| o.status == Status::Valid), "{}", r.text());
        j.goal = Some("By > 3".into());
        let r = run(&j).unwrap();
        assert_eq!(r.exit_code(), exit::OBLIGATION_FAILED);
    }
}

#[test]
fn reports_are_stable() {
    let mut j = Job::from_json(CRUISE).unwrap();
    j.options.oracle = 0;
    let a = run(&j).unwrap();
    let b = run(&j).unwrap();
    assert_eq!(a.text(), b.text());
    assert_eq!(a.stats.loops.len(), 1);
    assert_eq!(a.stats.loops[0].generated, 21);
    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path()).unwrap();
    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap()).unwrap();
    assert_eq!(index.as_array().unwrap().len(), a.obligations.len());
    for o in &a.obligations {
        assert!(dir.path().join(&o.file).exists());
    }
}

#[test]
fn oracle_on_small_job() {
    let mut j = two("wait 1; c!x", &["c"], "c?y; y := y + 1", "Ax >= 0");
    j.options.oracle = 16;
    let r = run(&j).unwrap();
    assert_eq!(r.oracle.fail, 0, "{:?}", r.oracle.counterexample);
    assert_eq!(r.oracle.pass, 16);
    let bad = run_with(&j, Some(Mutation::SubstDrop)).unwrap();
    assert_eq!(bad.exit_code(), exit::COUNTEREXAMPLE);
}

#[test]
fn sampled_states_satisfy_init() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let init = parse_bexpr("x == y && y > 0 && z < y").unwrap();
    let vars: BTreeSet<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    for _ in 0..20 {
        let s = sample_state(&vars, &init, &mut rng, 500).unwrap();
        assert_eq!(init.eval(&Valuation::new(&s)), Ok(true));
    }
    assert!(sample_state(&vars, &BExpr::False, &mut rng, 10).is_none());
}
