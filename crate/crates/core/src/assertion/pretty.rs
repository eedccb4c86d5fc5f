use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{BExpr, BoundKind, BoundNames, BoundVar, DefaultNames, Expr};

use super::{Assertion, CommSpec, PathAssertion, RecVar};

/// Display names for the binders and recursion variables of one assertion:
/// `d, d2, ...` for delays, `v, v2, ...` for values, `R1, R2, ...` for
/// recursion variables, skipping names already used by the assertion.
pub struct AssertionNames {
    bound: BTreeMap<BoundVar, String>,
    rec: BTreeMap<RecVar, String>,
}

impl AssertionNames {
    pub fn for_assertion(a: &Assertion) -> AssertionNames {
        let mut reserved: BTreeSet<String> = a.vars();
        reserved.extend(a.params());
        reserved.insert("t".into());
        let mut names = AssertionNames { bound: BTreeMap::new(), rec: BTreeMap::new() };
        let mut counters: BTreeMap<&'static str, usize> = BTreeMap::new();
        let mut recs = 0;
        let mut assign = |b: BoundVar, names: &mut AssertionNames| {
            if names.bound.contains_key(&b) {
                return;
            }
            let base = if b.kind == BoundKind::Value { "v" } else { "d" };
            let n = counters.entry(base).or_insert(0);
            loop {
                *n += 1;
                let cand = if *n == 1 { base.to_string() } else { format!("{base}{n}") };
                if !reserved.contains(&cand) {
                    names.bound.insert(b, cand);
                    break;
                }
            }
        };
        a.walk(&mut |node| match node {
            Assertion::WaitIn { body, .. } => {
                assign(body.d, &mut names);
                assign(body.v, &mut names);
            }
            Assertion::WaitOutv { body, .. } | Assertion::Wait { body, .. } => assign(body.d, &mut names),
            Assertion::Interrupt { tail, comms, .. } => {
                assign(tail.d, &mut names);
                comm_names(comms, &mut |b| assign(b, &mut names));
            }
            Assertion::InterruptInf { comms, .. } => comm_names(comms, &mut |b| assign(b, &mut names)),
            Assertion::Rec { var, .. } => {
                if !names.rec.contains_key(var) {
                    recs += 1;
                    names.rec.insert(*var, format!("R{recs}"));
                }
            }
            _ => {}
        });
        names
    }

    pub fn rec_name(&self, r: RecVar) -> String {
        self.rec.get(&r).cloned().unwrap_or_else(|| format!("R#{}", r.0))
    }
}

fn comm_names(comms: &[CommSpec], f: &mut dyn FnMut(BoundVar)) {
    for c in comms {
        match c {
            CommSpec::In { body, .. } => {
                f(body.d);
                f(body.v);
            }
            CommSpec::Out { value, body, .. } => {
                f(value.d);
                f(body.d);
            }
        }
    }
}

impl BoundNames for AssertionNames {
    fn name(&self, b: BoundVar) -> String {
        self.bound.get(&b).cloned().unwrap_or_else(|| DefaultNames.name(b))
    }
}

pub fn assertion(a: &Assertion) -> String {
    let names = AssertionNames::for_assertion(a);
    let mut out = String::new();
    write(a, &names, &mut out);
    out
}

pub fn path(p: &PathAssertion) -> String {
    path_with(p, &DefaultNames)
}

fn path_with(p: &PathAssertion, names: &dyn BoundNames) -> String {
    if p.is_id() {
        return "id_inv".into();
    }
    let items: Vec<String> = p.map.iter().map(|(x, e)| format!("{x} ↦ {}", e.display_with(names))).collect();
    format!("s = s0[{}]", items.join(", "))
}

fn expr(e: &Expr, names: &AssertionNames) -> String {
    e.display_with(names).to_string()
}

fn bexpr(b: &BExpr, names: &AssertionNames) -> String {
    b.display_with(names).to_string()
}

fn is_atom(a: &Assertion) -> bool {
    !matches!(a, Assertion::Or(..) | Assertion::And(..) | Assertion::Guard(..) | Assertion::Rec { .. })
}

fn write_paren(a: &Assertion, paren: bool, names: &AssertionNames, out: &mut String) {
    if paren {
        out.push('(');
        write(a, names, out);
        out.push(')');
    } else {
        write(a, names, out);
    }
}

fn write(a: &Assertion, names: &AssertionNames, out: &mut String) {
    match a {
        Assertion::True => out.push_str("true"),
        Assertion::False => out.push_str("false"),
        Assertion::Init => out.push_str("init"),
        Assertion::Hole(r) => out.push_str(&names.rec_name(*r)),
        Assertion::Or(x, y) => {
            write_paren(x, matches!(**x, Assertion::And(..) | Assertion::Guard(..)), names, out);
            out.push_str(" ∨ ");
            write_paren(y, matches!(**y, Assertion::And(..) | Assertion::Guard(..)), names, out);
        }
        Assertion::And(x, y) => {
            write_paren(x, matches!(**x, Assertion::Or(..) | Assertion::Rec { .. }), names, out);
            out.push_str(" ∧ ");
            write_paren(y, matches!(**y, Assertion::Or(..) | Assertion::Rec { .. }), names, out);
        }
        Assertion::Guard(b, p) => {
            out.push_str(&format!("↑({}) ∧ ", bexpr(b, names)));
            write_paren(p, matches!(**p, Assertion::Or(..) | Assertion::Rec { .. }), names, out);
        }
        Assertion::Subst(p, sigma) => {
            write_paren(p, !is_atom(p), names, out);
            let items: Vec<String> = sigma.iter().map(|(x, e)| format!("{x} := {}", expr(e, names))).collect();
            out.push_str(&format!("[{}]", items.join(", ")));
        }
        Assertion::WaitIn { path, ch, body } => {
            out.push_str(&format!(
                "wait_in({}, {ch}, {{({}, {}) => ",
                path_with(path, names),
                names.name(body.d),
                names.name(body.v)
            ));
            write(&body.body, names, out);
            out.push_str("})");
        }
        Assertion::WaitOutv { path, ch, value, body } => {
            out.push_str(&format!(
                "wait_outv({}, {ch}, {}, {{{} => ",
                path_with(path, names),
                expr(value, names),
                names.name(body.d)
            ));
            write(&body.body, names, out);
            out.push_str("})");
        }
        Assertion::Wait { path, time, body } => {
            out.push_str(&format!(
                "wait({}, {}, {{{} => ",
                path_with(path, names),
                expr(time, names),
                names.name(body.d)
            ));
            write(&body.body, names, out);
            out.push_str("})");
        }
        Assertion::Interrupt { path, time, tail, comms } => {
            out.push_str(&format!(
                "interrupt({}, {}, {{{} => ",
                path_with(path, names),
                expr(time, names),
                names.name(tail.d)
            ));
            write(&tail.body, names, out);
            out.push_str("}, ");
            write_comms(comms, names, out);
            out.push(')');
        }
        Assertion::InterruptInf { path, comms } => {
            out.push_str(&format!("interrupt_inf({}, ", path_with(path, names)));
            write_comms(comms, names, out);
            out.push(')');
        }
        Assertion::Io { ch, value, body } => {
            out.push_str(&format!("io({ch}, {}, ", expr(value, names)));
            write(body, names, out);
            out.push(')');
        }
        Assertion::Rec { var, base, step } => {
            out.push_str(&format!("rec {}. (", names.rec_name(*var)));
            write(base, names, out);
            out.push_str(") ∨ (");
            write(step, names, out);
            out.push(')');
        }
        Assertion::Sync { chs, left, right } => {
            out.push_str(&format!("sync({{{}}}, ", chs.iter().cloned().collect::<Vec<_>>().join(", ")));
            write(left, names, out);
            out.push_str(", ");
            write(right, names, out);
            out.push(')');
        }
    }
}

fn write_comms(comms: &[CommSpec], names: &AssertionNames, out: &mut String) {
    out.push('[');
    for (i, c) in comms.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match c {
            CommSpec::In { ch, body } => {
                out.push_str(&format!("<{ch}?, {{({}, {}) => ", names.name(body.d), names.name(body.v)));
                write(&body.body, names, out);
                out.push_str("}>");
            }
            CommSpec::Out { ch, value, body } => {
                out.push_str(&format!(
                    "<{ch}!, {{{} => {}}}, {{{} => ",
                    names.name(value.d),
                    expr(&value.expr, names),
                    names.name(body.d)
                ));
                write(&body.body, names, out);
                out.push_str("}>");
            }
        }
    }
    out.push(']');
}
