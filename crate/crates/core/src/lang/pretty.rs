use super::{CommBranch, Ode, Process};

// Precedence levels: choice < seq < atom.
const CHOICE: u8 = 1;
const SEQ: u8 = 2;
const ATOM: u8 = 3;

fn level(p: &Process) -> u8 {
    match p {
        Process::IChoice(..) => CHOICE,
        Process::Seq(..) => SEQ,
        _ => ATOM,
    }
}

pub fn process(p: &Process) -> String {
    let mut out = String::new();
    top(p, &mut out);
    out
}

fn top(p: &Process, out: &mut String) {
    match p {
        Process::Parallel(a, chs, b) => {
            top(a, out);
            out.push_str(" ||[");
            out.push_str(&chs.iter().cloned().collect::<Vec<_>>().join(", "));
            out.push_str("] ");
            if b.is_parallel() {
                out.push('(');
                top(b, out);
                out.push(')');
            } else {
                top(b, out);
            }
        }
        _ => seq_level(p, out),
    }
}

fn wrap(p: &Process, paren: bool, out: &mut String) {
    if paren {
        out.push('(');
        seq_level(p, out);
        out.push(')');
    } else {
        seq_level(p, out);
    }
}

fn ode_head(ode: &Ode, out: &mut String) {
    out.push('<');
    let eqs: Vec<String> = ode.eqs.iter().map(|(x, e)| format!("{x}_dot={e}")).collect();
    out.push_str(&eqs.join(", "));
    out.push_str(" & ");
    out.push_str(&ode.domain.to_string());
}

fn seq_level(p: &Process, out: &mut String) {
    match p {
        Process::Skip => out.push_str("skip"),
        Process::Assign(x, e) => out.push_str(&format!("{x} := {e}")),
        Process::Input(ch, x) => out.push_str(&format!("{ch}?{x}")),
        Process::Output(ch, e) => out.push_str(&format!("{ch}!{e}")),
        Process::Wait(e) => out.push_str(&format!("wait {e}")),
        Process::IChoice(a, b) => {
            wrap(a, level(a) < CHOICE, out);
            out.push_str(" $ ");
            wrap(b, level(b) <= CHOICE, out);
        }
        Process::Seq(a, b) => {
            wrap(a, level(a) <= SEQ, out);
            out.push_str("; ");
            wrap(b, level(b) < SEQ, out);
        }
        Process::Repeat(a) => {
            out.push('(');
            seq_level(a, out);
            out.push_str(")*");
        }
        Process::Cond(b, c1, c2) => {
            out.push_str(&format!("if {b} then "));
            seq_level(c1, out);
            out.push_str(" else ");
            seq_level(c2, out);
            out.push_str(" endif");
        }
        Process::Ode(ode) => {
            ode_head(ode, out);
            out.push('>');
        }
        Process::Interrupt { ode, tail, branches } => {
            ode_head(ode, out);
            out.push_str(" |> ");
            seq_level(tail, out);
            out.push_str("> |> [] (");
            for (i, br) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match br {
                    CommBranch::Input { ch, var, cont } => {
                        out.push_str(&format!("{ch}?{var} -> "));
                        seq_level(cont, out);
                    }
                    CommBranch::Output { ch, value, cont } => {
                        out.push_str(&format!("{ch}!{value} -> "));
                        seq_level(cont, out);
                    }
                }
            }
            out.push(')');
        }
        Process::Parallel(..) => {
            // Unreachable for well-formed trees; printed parenthesized so the
            // parser reports the misplacement.
            out.push('(');
            top(p, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{BExpr, Expr};
    use crate::lang::parse;
    use crate::lang::tests::PLANT;
    use crate::lang::Process;

    #[test]
    fn basic_forms() {
        assert_eq!(Process::Skip.pretty(), "skip");
        assert_eq!(Process::Assign("x".into(), Expr::var("x") + Expr::int(1)).pretty(), "x := x+1");
        let nested =
            Process::seq(Process::seq(Process::Skip, Process::Skip), Process::choice(Process::Skip, Process::Skip));
        assert_eq!(nested.pretty(), "(skip; skip); (skip $ skip)");
        assert_eq!(parse(&nested.pretty()).unwrap(), nested);
        let c = Process::cond(BExpr::not(BExpr::lt(Expr::var("x"), Expr::int(1))), Process::Skip, Process::Skip);
        assert_eq!(c.pretty(), "if !(x < 1) then skip else skip endif");
    }

    #[test]
    fn plant_roundtrip() {
        let p = parse(PLANT).unwrap();
        assert_eq!(p.pretty(), PLANT);
        assert_eq!(parse(&p.pretty()).unwrap(), p);
    }
}
