//! External SMT-LIB v2 solver invoked as a subprocess.

use std::collections::HashMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    Error(String),
}

/// A solver command line; the script file path is appended as the last
/// argument. Answers are cached by script text.
#[derive(Debug)]
pub struct Solver {
    program: String,
    args: Vec<String>,
    timeout: Duration,
    cache: Mutex<HashMap<String, Answer>>,
}

static NEXT_FILE: AtomicU64 = AtomicU64::new(0);

impl Solver {
    /// `cmd` is split on whitespace, e.g. `"z3"` or `"cvc5 --lang smt2"`.
    pub fn new(cmd: &str, timeout: Duration) -> Option<Solver> {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Solver { program, args: parts.collect(), timeout, cache: Mutex::new(HashMap::new()) })
    }

    /// The first of `candidates` that answers a trivial query.
    pub fn detect(candidates: &[&str], timeout: Duration) -> Option<Solver> {
        candidates.iter().filter_map(|c| Solver::new(c, timeout)).find(|s| {
            s.check("(set-logic QF_NRA)\n(declare-fun x () Real)\n(assert (< x 0.0))\n(check-sat)\n(exit)\n")
                == Answer::Sat
        })
    }

    pub fn command(&self) -> String {
        std::iter::once(self.program.as_str()).chain(self.args.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
    }

    pub fn check(&self, script: &str) -> Answer {
        if let Some(a) = self.cache.lock().expect("cache lock").get(script) {
            return a.clone();
        }
        let a = self.run(script);
        if !matches!(a, Answer::Error(_)) {
            self.cache.lock().expect("cache lock").insert(script.to_string(), a.clone());
        }
        a
    }

    fn run(&self, script: &str) -> Answer {
        let path = script_path();
        if let Err(e) = std::fs::write(&path, script) {
            return Answer::Error(format!("writing {}: {e}", path.display()));
        }
        let answer = self.run_file(&path);
        let _ = std::fs::remove_file(&path);
        answer
    }

    /// Runs the solver on an existing script file.
    pub fn run_file(&self, path: &std::path::Path) -> Answer {
        let child = Command::new(&self.program)
            .args(&self.args)
            .arg(path)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn();
        let mut child = match child {
            Ok(c) => c,
            Err(e) => return Answer::Error(format!("spawning `{}`: {e}", self.program)),
        };
        let start = Instant::now();
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if start.elapsed() > self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Answer::Timeout;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(2)),
                Err(e) => return Answer::Error(e.to_string()),
            }
        }
        let mut out = String::new();
        if let Some(mut s) = child.stdout.take() {
            let _ = s.read_to_string(&mut out);
        }
        parse_answer(&out)
    }
}

fn script_path() -> PathBuf {
    let n = NEXT_FILE.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("hcsp-{}-{n}.smt2", std::process::id()))
}

fn parse_answer(out: &str) -> Answer {
    match out.lines().map(str::trim).find(|l| !l.is_empty()) {
        Some("sat") => Answer::Sat,
        Some("unsat") => Answer::Unsat,
        Some("unknown") => Answer::Unknown,
        Some(other) => Answer::Error(other.to_string()),
        None => Answer::Error("no output".into()),
    }
}
