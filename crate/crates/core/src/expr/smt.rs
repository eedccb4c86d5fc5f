//! SMT-LIB v2 (QF_NRA) export.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_traits::Signed;

use super::{BExpr, BoundKind, BoundVar, CmpOp, Expr, ExprError, Rat};

#[derive(Default)]
struct Symbols {
    decls: BTreeMap<String, ()>,
    bound: BTreeMap<BoundVar, String>,
}

const RESERVED: &[&str] = &[
    "and", "or", "not", "ite", "let", "forall", "exists", "assert", "true", "false", "distinct", "par", "as", "_", "!",
];

fn simple_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED.contains(&s)
}

fn quote(s: &str) -> String {
    if simple_symbol(s) {
        s.to_string()
    } else {
        format!("|{}|", s.replace('|', "_"))
    }
}

impl Symbols {
    fn named(&mut self, raw: &str) -> String {
        let q = quote(raw);
        self.decls.insert(q.clone(), ());
        q
    }

    fn bound(&mut self, b: BoundVar) -> String {
        if let Some(n) = self.bound.get(&b) {
            return n.clone();
        }
        let prefix = match b.kind {
            BoundKind::Time => "t",
            BoundKind::Delay => "d",
            BoundKind::Value => "v",
        };
        let n = format!("|{}'{}|", prefix, self.bound.len() + 1);
        self.bound.insert(b, n.clone());
        self.decls.insert(n.clone(), ());
        n
    }
}

fn num(c: &Rat) -> String {
    let mag = |r: &Rat| {
        if r.is_integer() {
            format!("{}.0", r.numer())
        } else {
            format!("(/ {}.0 {}.0)", r.numer(), r.denom())
        }
    };
    if c.is_negative() {
        format!("(- {})", mag(&-c))
    } else {
        mag(c)
    }
}

fn expr(e: &Expr, sy: &mut Symbols) -> String {
    match e {
        Expr::Const(c) => num(c),
        Expr::Var(x) | Expr::Param(x) => sy.named(x),
        Expr::Bound(b) => sy.bound(*b),
        Expr::Neg(a) => format!("(- {})", expr(a, sy)),
        Expr::Add(a, b) => format!("(+ {} {})", expr(a, sy), expr(b, sy)),
        Expr::Sub(a, b) => format!("(- {} {})", expr(a, sy), expr(b, sy)),
        Expr::Mul(a, b) => format!("(* {} {})", expr(a, sy), expr(b, sy)),
        Expr::Div(a, b) => format!("(/ {} {})", expr(a, sy), expr(b, sy)),
        Expr::Pow(a, k) => match k {
            0 => "1.0".to_string(),
            1 => expr(a, sy),
            _ => {
                let base = expr(a, sy);
                let mut s = String::from("(*");
                for _ in 0..*k {
                    s.push(' ');
                    s.push_str(&base);
                }
                s.push(')');
                s
            }
        },
    }
}

/// `positive` tracks polarity so that only existentials in positive position
/// are accepted (they become free constants).
fn bexpr(b: &BExpr, sy: &mut Symbols, positive: bool) -> Result<String, ExprError> {
    Ok(match b {
        BExpr::True => "true".into(),
        BExpr::False => "false".into(),
        BExpr::Cmp(op, x, y) => {
            let o = match op {
                CmpOp::Eq => "=",
                CmpOp::Le => "<=",
                CmpOp::Lt => "<",
                CmpOp::Ge => ">=",
                CmpOp::Gt => ">",
            };
            format!("({o} {} {})", expr(x, sy), expr(y, sy))
        }
        BExpr::Not(a) => format!("(not {})", bexpr(a, sy, !positive)?),
        BExpr::And(x, y) => format!("(and {} {})", bexpr(x, sy, positive)?, bexpr(y, sy, positive)?),
        BExpr::Or(x, y) => format!("(or {} {})", bexpr(x, sy, positive)?, bexpr(y, sy, positive)?),
        BExpr::Implies(x, y) => {
            format!("(=> {} {})", bexpr(x, sy, !positive)?, bexpr(y, sy, positive)?)
        }
        BExpr::Exists(_, a) => {
            if !positive {
                return Err(ExprError::Unsupported(format!("existential in negative position: {b}")));
            }
            bexpr(a, sy, positive)?
        }
    })
}

/// Script asserting `hyp ∧ ¬goal`; `unsat` means `hyp → goal` is valid.
pub fn to_smtlib(goal: &BExpr, hyp: &BExpr) -> Result<String, ExprError> {
    let mut sy = Symbols::default();
    let h = bexpr(hyp, &mut sy, true)?;
    let g = bexpr(goal, &mut sy, false)?;
    let mut out = String::new();
    out.push_str("(set-logic QF_NRA)\n");
    for name in sy.decls.keys() {
        let _ = writeln!(out, "(declare-fun {name} () Real)");
    }
    let _ = writeln!(out, "(assert {h})");
    let _ = writeln!(out, "(assert (not {g}))");
    out.push_str("(check-sat)\n(exit)\n");
    Ok(out)
}

/// Script asserting `formula` alone; `unsat` means `formula` is unsatisfiable.
pub fn satisfiability_script(formula: &BExpr) -> Result<String, ExprError> {
    to_smtlib(&BExpr::False, formula)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflexive_goal_script() {
        let x = Expr::var("x");
        let s = to_smtlib(&BExpr::eq(x.clone(), x), &BExpr::True).unwrap();
        assert!(s.starts_with("(set-logic QF_NRA)\n"));
        assert!(s.contains("(declare-fun x () Real)"));
        assert!(s.contains("(assert (not (= x x)))"));
        assert!(s.trim_end().ends_with("(exit)"));
    }

    #[test]
    fn quoting_and_skolemization() {
        let hyp = BExpr::Exists(vec!["Ap#1".into()], Box::new(BExpr::le(Expr::param("Ap#1"), Expr::var("Ap"))));
        let s = to_smtlib(&BExpr::True, &hyp).unwrap();
        assert!(s.contains("(declare-fun |Ap#1| () Real)"));
        let neg = to_smtlib(&hyp, &BExpr::True);
        assert!(matches!(neg, Err(ExprError::Unsupported(_))));
    }
}
