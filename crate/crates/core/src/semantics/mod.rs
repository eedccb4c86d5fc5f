//! Concrete traces, big-step execution, trace synchronization and the
//! assertion satisfaction checker.

mod exec;
mod satisfies;
mod schedule;
mod sync;

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::chan::{format_rdy, Dir, Rdy};
use crate::expr::{format_rat, parse_rat, BoundVar, Expr, Rat, State, Valuation};
use crate::lang::parse_expr;

pub use exec::{exec, exec_parallel, exec_partial, run, ExecError};
pub use satisfies::{satisfies, satisfies_with, SatError, MAX_UNFOLD};
pub use schedule::{Choice, Need, Schedule};
pub use sync::sync_traces;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommKind {
    In,
    Out,
    /// A completed handshake `<ch, v>` on a shared channel.
    Sync,
}

impl CommKind {
    pub fn symbol(self) -> &'static str {
        match self {
            CommKind::In => "?",
            CommKind::Out => "!",
            CommKind::Sync => "",
        }
    }

    pub fn from_dir(d: Dir) -> CommKind {
        match d {
            Dir::In => CommKind::In,
            Dir::Out => CommKind::Out,
        }
    }
}

/// A continuous path on `[0, d]`: the state at the start of the block and a
/// closed form over path time for each variable that changes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    start: State,
    map: BTreeMap<String, Expr>,
}

impl Path {
    /// Canonicalizes `map` (simplified, constant entries equal to the start
    /// value removed).
    pub fn new(start: State, map: BTreeMap<String, Expr>) -> Path {
        let map = map
            .into_iter()
            .map(|(x, e)| (x, e.simplify()))
            .filter(|(x, e)| match (e.as_const(), start.lookup(x)) {
                (Some(c), Some(v)) => c != v,
                _ => true,
            })
            .collect();
        Path { start, map }
    }

    /// The constant path `I_s`.
    pub fn constant(s: &State) -> Path {
        Path { start: s.clone(), map: BTreeMap::new() }
    }

    pub fn start(&self) -> &State {
        &self.start
    }

    pub fn map(&self) -> &BTreeMap<String, Expr> {
        &self.map
    }

    /// All variables described by the path.
    pub fn vars(&self) -> Vec<String> {
        let mut v: Vec<String> = self.start.vars().cloned().collect();
        for x in self.map.keys() {
            if !self.start.contains(x) {
                v.push(x.clone());
            }
        }
        v.sort();
        v
    }

    /// The value of `x` as an expression over path time.
    pub fn component(&self, x: &str) -> Option<Expr> {
        match self.map.get(x) {
            Some(e) => Some(e.clone()),
            None => self.start.lookup(x).map(|v| Expr::constant(v.clone())),
        }
    }

    pub fn at(&self, t: &Rat) -> Result<State, crate::expr::ExprError> {
        let mut s = self.start.clone();
        let mut val = Valuation::default();
        val.bound.insert(BoundVar::TIME, t.clone());
        for (x, e) in &self.map {
            s.set(x, e.eval(&val)?);
        }
        Ok(s)
    }

    /// `p(· + d)`.
    pub fn shifted(&self, d: &Rat) -> Path {
        let sigma = BTreeMap::from([(BoundVar::TIME, Expr::time() + Expr::constant(d.clone()))]);
        let map = self.map.iter().map(|(x, e)| (x.clone(), e.subst_bound(&sigma))).collect();
        let mut start = self.start.clone();
        if let Ok(s) = self.at(d) {
            start = s;
        }
        Path::new(start, map)
    }

    /// `p1 ⊎ p2` over disjoint variables.
    pub fn merge(&self, other: &Path) -> Option<Path> {
        let start = self.start.merge(&other.start).ok()?;
        let mut map = self.map.clone();
        for (x, e) in &other.map {
            if map.insert(x.clone(), e.clone()).is_some() {
                return None;
            }
        }
        Some(Path::new(start, map))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .vars()
            .iter()
            .map(|x| format!("{x}: {}", self.component(x).map(|e| e.to_string()).unwrap_or_default()))
            .collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Comm {
        ch: String,
        kind: CommKind,
        value: Rat,
    },
    /// `<d, p, rdy>` with `d > 0`.
    Cont {
        d: Rat,
        path: Path,
        rdy: Rdy,
    },
    /// Deadlock marker; only ever the last event.
    Deadlock,
}

pub type Trace = Vec<Event>;

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Comm { ch, kind, value } => write!(f, "<{ch}{}, {}>", kind.symbol(), format_rat(value)),
            Event::Cont { d, path, rdy } => write!(f, "<{}, {path}, {}>", format_rat(d), format_rdy(rdy)),
            Event::Deadlock => write!(f, "δ"),
        }
    }
}

pub fn format_trace(tr: &[Event]) -> String {
    if tr.is_empty() {
        return "ε".into();
    }
    tr.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("^")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

impl Event {
    pub fn to_json(&self) -> Value {
        match self {
            Event::Comm { ch, kind, value } => {
                let k = match kind {
                    CommKind::In => "?",
                    CommKind::Out => "!",
                    CommKind::Sync => "sync",
                };
                json!({"event": "comm", "kind": k, "ch": ch, "value": format_rat(value)})
            }
            Event::Cont { d, path, rdy } => {
                let start: serde_json::Map<String, Value> =
                    path.start.iter().map(|(x, v)| (x.clone(), Value::String(format_rat(v)))).collect();
                let p: serde_json::Map<String, Value> =
                    path.map.iter().map(|(x, e)| (x.clone(), Value::String(e.to_string()))).collect();
                let rdy: Vec<String> = rdy.iter().map(|(c, d)| format!("{c}{d}")).collect();
                json!({"event": "cont", "d": format_rat(d), "start": start, "path": p, "rdy": rdy})
            }
            Event::Deadlock => json!({"event": "deadlock"}),
        }
    }

    pub fn from_json(v: &Value) -> Result<Event, String> {
        let field = |k: &str| v.get(k).ok_or_else(|| format!("missing field `{k}`"));
        let text = |k: &str| -> Result<String, String> {
            field(k)?.as_str().map(str::to_string).ok_or_else(|| format!("field `{k}` is not a string"))
        };
        let number = |s: &str| parse_rat(s).ok_or_else(|| format!("invalid number `{s}`"));
        match text("event")?.as_str() {
            "comm" => {
                let kind = match text("kind")?.as_str() {
                    "?" => CommKind::In,
                    "!" => CommKind::Out,
                    "sync" => CommKind::Sync,
                    k => return Err(format!("unknown comm kind `{k}`")),
                };
                Ok(Event::Comm { ch: text("ch")?, kind, value: number(&text("value")?)? })
            }
            "cont" => {
                let d = number(&text("d")?)?;
                let mut start = State::new();
                for (x, val) in field("start")?.as_object().ok_or("`start` is not an object")? {
                    start.set(x, number(val.as_str().ok_or("start value is not a string")?)?);
                }
                let tvar = BTreeMap::from([("t".to_string(), Expr::time())]);
                let mut map = BTreeMap::new();
                for (x, e) in field("path")?.as_object().ok_or("`path` is not an object")? {
                    let src = e.as_str().ok_or("path entry is not a string")?;
                    let e = parse_expr(src).map_err(|err| err.to_string())?;
                    map.insert(x.clone(), e.subst_vars(&tvar));
                }
                let mut rdy = Rdy::new();
                for r in field("rdy")?.as_array().ok_or("`rdy` is not an array")? {
                    let r = r.as_str().ok_or("rdy entry is not a string")?;
                    let (ch, dir) = if let Some(c) = r.strip_suffix('?') {
                        (c, Dir::In)
                    } else if let Some(c) = r.strip_suffix('!') {
                        (c, Dir::Out)
                    } else {
                        return Err(format!("invalid rdy entry `{r}`"));
                    };
                    rdy.insert((ch.to_string(), dir));
                }
                Ok(Event::Cont { d, path: Path::new(start, map), rdy })
            }
            "deadlock" => Ok(Event::Deadlock),
            e => Err(format!("unknown event `{e}`")),
        }
    }
}

/// One JSON object per line.
pub fn trace_to_jsonl(tr: &[Event]) -> String {
    tr.iter().map(|e| format!("{}\n", e.to_json())).collect()
}

pub fn trace_from_jsonl(text: &str) -> Result<Trace, TraceParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| TraceParseError { line: i + 1, msg };
        let v: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        out.push(Event::from_json(&v).map_err(err)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{frac, rat};

    #[test]
    fn jsonl_roundtrip() {
        let s = State::from_pairs([("x", rat(1)), ("y", frac(1, 2))]);
        let path = Path::new(s.clone(), BTreeMap::from([("x".to_string(), Expr::int(1) + Expr::time())]));
        let tr = vec![
            Event::Cont { d: rat(2), path, rdy: Rdy::from([("ch".to_string(), Dir::Out)]) },
            Event::Comm { ch: "ch".into(), kind: CommKind::Out, value: frac(3, 4) },
            Event::Comm { ch: "c2".into(), kind: CommKind::Sync, value: rat(-1) },
            Event::Deadlock,
        ];
        let text = trace_to_jsonl(&tr);
        assert_eq!(trace_from_jsonl(&text).unwrap(), tr);
        assert!(trace_from_jsonl("{\"event\": \"nope\"}").is_err());
    }

    #[test]
    fn path_shift_and_merge() {
        let s = State::from_pairs([("x", rat(0))]);
        let p = Path::new(s, BTreeMap::from([("x".to_string(), Expr::time())]));
        let q = p.shifted(&rat(2));
        assert_eq!(q.at(&rat(1)).unwrap().get("x").unwrap(), &rat(3));
        let c = Path::constant(&State::from_pairs([("y", rat(5))]));
        let m = p.merge(&c).unwrap();
        assert_eq!(m.vars(), vec!["x".to_string(), "y".to_string()]);
        assert!(m.merge(&c).is_none());
        let same = Path::new(State::from_pairs([("y", rat(5))]), BTreeMap::from([("y".to_string(), Expr::int(5))]));
        assert_eq!(same, c);
    }
}
