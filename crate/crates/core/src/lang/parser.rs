use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::lexer::{lex, Tok, Token};
use super::{CommBranch, Ode, Process};
use crate::expr::{BExpr, CmpOp, Expr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected ", self.line, self.col)?;
        if self.expected.len() == 1 {
            write!(f, "{}", self.expected[0])?;
        } else {
            write!(f, "one of {{{}}}", self.expected.join(", "))?;
        }
        write!(f, ", found {}", self.found)
    }
}

type PResult<T> = Result<T, ParseError>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

/// Parses a process (sequential or parallel).
pub fn parse(text: &str) -> PResult<Process> {
    let mut p = Parser::new(text)?;
    let proc = p.parallel()?;
    p.expect_eof()?;
    Ok(proc)
}

pub fn parse_expr(text: &str) -> PResult<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.sum()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_bexpr(text: &str) -> PResult<BExpr> {
    let mut p = Parser::new(text)?;
    let b = p.bexpr()?;
    p.expect_eof()?;
    Ok(b)
}

impl Parser {
    fn new(text: &str) -> PResult<Parser> {
        let toks = lex(text).map_err(|(line, col, msg)| ParseError {
            line,
            col,
            expected: vec!["a token".into()],
            found: msg,
        })?;
        Ok(Parser { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(&[&format!("`{s}`")])
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.err(&[&format!("`{s}`")])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(&["identifier"]),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err(&["end of input"])
        }
    }

    // ---- processes ----

    fn parallel(&mut self) -> PResult<Process> {
        let mut left = self.par_operand()?;
        while self.is_sym("||") {
            self.bump();
            self.expect_sym("[")?;
            let mut chans = BTreeSet::new();
            if !self.is_sym("]") {
                chans.insert(self.ident()?);
                while self.eat_sym(",") {
                    chans.insert(self.ident()?);
                }
            }
            self.expect_sym("]")?;
            let right = self.par_operand()?;
            left = Process::Parallel(Box::new(left), chans, Box::new(right));
        }
        Ok(left)
    }

    fn par_operand(&mut self) -> PResult<Process> {
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(inner) = self.parallel() {
                if inner.is_parallel() && self.eat_sym(")") {
                    if self.is_sym("*") || self.is_sym(";") || self.is_sym("$") {
                        return self.err(&["`||`", "`)`", "end of input"]);
                    }
                    return Ok(inner);
                }
            }
            self.pos = save;
        }
        self.choice()
    }

    fn choice(&mut self) -> PResult<Process> {
        let mut left = self.seq()?;
        while self.eat_sym("$") {
            let right = self.seq()?;
            left = Process::choice(left, right);
        }
        Ok(left)
    }

    fn seq(&mut self) -> PResult<Process> {
        let first = self.atom()?;
        if self.eat_sym(";") {
            let rest = self.seq()?;
            Ok(Process::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn atom(&mut self) -> PResult<Process> {
        match self.peek().clone() {
            Tok::Kw("skip") => {
                self.bump();
                Ok(Process::Skip)
            }
            Tok::Kw("wait") => {
                self.bump();
                Ok(Process::Wait(self.sum()?))
            }
            Tok::Kw("if") => {
                self.bump();
                let b = self.bexpr()?;
                self.expect_kw("then")?;
                let c1 = self.choice()?;
                self.expect_kw("else")?;
                let c2 = self.choice()?;
                self.expect_kw("endif")?;
                Ok(Process::cond(b, c1, c2))
            }
            Tok::Sym("(") => {
                self.bump();
                let inner = self.choice()?;
                self.expect_sym(")")?;
                if self.eat_sym("*") {
                    Ok(Process::repeat(inner))
                } else {
                    Ok(inner)
                }
            }
            Tok::Sym("<") => {
                self.bump();
                self.ode_or_interrupt()
            }
            Tok::Ident(name) => {
                self.bump();
                match self.peek() {
                    Tok::Sym(":=") => {
                        self.bump();
                        Ok(Process::Assign(name, self.sum()?))
                    }
                    Tok::Sym("?") => {
                        self.bump();
                        Ok(Process::Input(name, self.ident()?))
                    }
                    Tok::Sym("!") => {
                        self.bump();
                        Ok(Process::Output(name, self.sum()?))
                    }
                    _ => self.err(&["`:=`", "`?`", "`!`"]),
                }
            }
            _ => self.err(&["`skip`", "`wait`", "`if`", "`(`", "`<`", "identifier"]),
        }
    }

    fn ode_or_interrupt(&mut self) -> PResult<Process> {
        let mut eqs: Vec<(String, Expr)> = Vec::new();
        loop {
            let name = self.ident()?;
            let Some(x) = name.strip_suffix("_dot").filter(|x| !x.is_empty()) else {
                self.pos -= 1;
                return self.err(&["`<var>_dot`"]);
            };
            if eqs.iter().any(|(y, _)| y == x) {
                self.pos -= 1;
                return self.err(&["a variable not already defined by this ODE"]);
            }
            self.expect_sym("=")?;
            let rhs = self.sum()?;
            eqs.push((x.to_string(), rhs));
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym("&")?;
        let domain = self.bexpr()?;
        let ode = Ode { eqs, domain };
        if self.eat_sym(">") {
            return Ok(Process::Ode(ode));
        }
        self.expect_sym("|>")?;
        let tail = self.choice()?;
        self.expect_sym(">")?;
        self.expect_sym("|>")?;
        self.expect_sym("[")?;
        self.expect_sym("]")?;
        self.expect_sym("(")?;
        let mut branches = vec![self.branch()?];
        while self.eat_sym(",") {
            branches.push(self.branch()?);
        }
        self.expect_sym(")")?;
        Ok(Process::Interrupt { ode, tail: Box::new(tail), branches })
    }

    fn branch(&mut self) -> PResult<CommBranch> {
        let ch = self.ident()?;
        if self.eat_sym("?") {
            let var = self.ident()?;
            self.expect_sym("->")?;
            let cont = self.choice()?;
            Ok(CommBranch::Input { ch, var, cont })
        } else if self.eat_sym("!") {
            let value = self.sum()?;
            self.expect_sym("->")?;
            let cont = self.choice()?;
            Ok(CommBranch::Output { ch, value, cont })
        } else {
            self.err(&["`?`", "`!`"])
        }
    }

    // ---- boolean expressions ----

    fn bexpr(&mut self) -> PResult<BExpr> {
        let left = self.bor()?;
        if self.eat_sym("-->") {
            let right = self.bexpr()?;
            Ok(BExpr::implies(left, right))
        } else {
            Ok(left)
        }
    }

    fn bor(&mut self) -> PResult<BExpr> {
        let mut left = self.band()?;
        while self.is_sym("||") && !matches!(self.peek_at(1), Tok::Sym("[")) {
            self.bump();
            let right = self.band()?;
            left = BExpr::or(left, right);
        }
        Ok(left)
    }

    fn band(&mut self) -> PResult<BExpr> {
        let mut left = self.bnot()?;
        while self.eat_sym("&&") {
            let right = self.bnot()?;
            left = BExpr::and(left, right);
        }
        Ok(left)
    }

    fn bnot(&mut self) -> PResult<BExpr> {
        if self.eat_sym("!") {
            Ok(BExpr::not(self.bnot()?))
        } else {
            self.batom()
        }
    }

    fn batom(&mut self) -> PResult<BExpr> {
        if self.is_kw("true") {
            self.bump();
            return Ok(BExpr::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(BExpr::False);
        }
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(b) = self.bexpr() {
                if self.eat_sym(")") {
                    return Ok(b);
                }
            }
            self.pos = save;
        }
        let lhs = self.sum()?;
        let op = match self.peek() {
            Tok::Sym("==") | Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym(">") => CmpOp::Gt,
            _ => return self.err(&["`==`", "`<=`", "`<`", "`>=`", "`>`"]),
        };
        self.bump();
        let rhs = self.sum()?;
        Ok(BExpr::Cmp(op, lhs, rhs))
    }

    // ---- arithmetic ----

    fn sum(&mut self) -> PResult<Expr> {
        let mut left = self.prod()?;
        loop {
            if self.eat_sym("+") {
                left = left + self.prod()?;
            } else if self.eat_sym("-") {
                left = left - self.prod()?;
            } else {
                return Ok(left);
            }
        }
    }

    fn prod(&mut self) -> PResult<Expr> {
        let mut left = self.unary()?;
        loop {
            if self.eat_sym("*") {
                left = left * self.unary()?;
            } else if self.eat_sym("/") {
                left = left / self.unary()?;
            } else {
                return Ok(left);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            Ok(-self.unary()?)
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.primary()?;
        if self.eat_sym("^") {
            match self.peek().clone() {
                Tok::Num(n) if n.is_integer() => {
                    self.bump();
                    let k: u32 = n.numer().to_string().parse().map_err(|_| ParseError {
                        line: self.toks[self.pos].line,
                        col: self.toks[self.pos].col,
                        expected: vec!["a small exponent".into()],
                        found: n.to_string(),
                    })?;
                    Ok(base.pow(k))
                }
                _ => self.err(&["non-negative integer exponent"]),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            Tok::Ident(x) => {
                self.bump();
                Ok(Expr::Var(x))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.sum()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => self.err(&["number", "identifier", "`(`"]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::tests::PLANT;

    #[test]
    fn skip_and_assign() {
        assert_eq!(parse("skip").unwrap(), Process::Skip);
        assert_eq!(parse("x := x+1").unwrap(), Process::Assign("x".into(), Expr::var("x") + Expr::int(1)));
    }

    #[test]
    fn plant_structure() {
        let p = parse(PLANT).unwrap();
        let Process::Seq(first, rest) = p else { panic!("seq") };
        assert_eq!(*first, Process::Output("ch1".into(), Expr::var("v")));
        let Process::Seq(_, lp) = *rest else { panic!("seq") };
        let Process::Repeat(body) = *lp else { panic!("repeat") };
        let Process::Seq(recv, intr) = *body else { panic!("seq") };
        assert_eq!(*recv, Process::Input("ch3".into(), "a".into()));
        let Process::Interrupt { ode, tail, branches } = *intr else { panic!("interrupt") };
        assert_eq!(ode.eqs.len(), 2);
        assert_eq!(ode.domain, BExpr::True);
        assert_eq!(*tail, Process::Skip);
        assert_eq!(branches.len(), 1);
    }

    #[test]
    fn parallel_only_at_top_level() {
        assert!(parse("a!1 ||[a] a?x").unwrap().is_parallel());
        assert!(parse("(a!1 ||[a] a?x) ||[] skip").unwrap().is_parallel());
        assert!(parse("skip; (a!1 ||[a] a?x)").is_err());
        assert!(parse("(a!1 ||[a] a?x)*").is_err());
        assert!(parse("if x < 1 then (a!1 ||[a] a?x) else skip endif").is_err());
    }

    #[test]
    fn errors_carry_position_and_expectation() {
        let e = parse("x := ;").unwrap_err();
        assert_eq!((e.line, e.col), (1, 6));
        assert!(e.expected.contains(&"number".to_string()));
        let e = parse("skip;\n  x ? ").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse("<x_dot=1 & x<5 |> skip> |> [] ()").is_err());
        assert!(parse("<x_dot=1, x_dot=2 & true>").is_err());
    }

    #[test]
    fn domain_comparisons_close_ode() {
        let p = parse("<x_dot=1 & x>5>").unwrap();
        let Process::Ode(ode) = p else { panic!() };
        assert_eq!(ode.domain, BExpr::gt(Expr::var("x"), Expr::int(5)));
        assert!(parse("if (x+1) < 3 || !(y == 2) then skip else wait 1 endif").is_ok());
    }
}
