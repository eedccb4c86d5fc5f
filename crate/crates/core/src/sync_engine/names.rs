//! Process names and the prefixing of program variables.

use std::collections::BTreeSet;

use crate::assertion::Assertion;
use crate::expr::{BExpr, Expr};
use crate::lang::Process;

use super::SyncError;

/// An assertion whose program variables all carry one of `names` as prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedAssertion {
    pub names: Vec<String>,
    pub assertion: Assertion,
}

/// Registry of process names. Names must be non-empty and no name may be a
/// prefix of another, so every prefixed variable has a unique owner.
#[derive(Debug, Clone, Default)]
pub struct Prefixer {
    names: BTreeSet<String>,
}

impl Prefixer {
    pub fn new() -> Prefixer {
        Prefixer::default()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Reserves `name`.
    pub fn register(&mut self, name: &str) -> Result<(), SyncError> {
        if name.is_empty() {
            return Err(SyncError::Prefix("empty process name".into()));
        }
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(SyncError::Prefix(format!("process name `{name}` is not alphanumeric")));
        }
        if let Some(other) = self.names.iter().find(|n| n.starts_with(name) || name.starts_with(n.as_str())) {
            return Err(SyncError::Prefix(format!("process name `{name}` collides with `{other}`")));
        }
        self.names.insert(name.to_string());
        Ok(())
    }

    /// `x ↦ name‖x` on every program variable of `a`; bound variables,
    /// parameters and path time are untouched.
    pub fn prefix_process(&mut self, name: &str, a: &Assertion) -> Result<NamedAssertion, SyncError> {
        self.register(name)?;
        let assertion = a.rename_vars(&|x| format!("{name}{x}"));
        Ok(NamedAssertion { names: vec![name.to_string()], assertion })
    }

    /// The registered name owning `var`.
    pub fn owner(&self, var: &str) -> Option<&str> {
        self.names.iter().find(|n| var.starts_with(n.as_str()) && var.len() > n.len()).map(String::as_str)
    }

    /// `e⇑` from side `side`: the identity on syntax once every variable is
    /// checked to belong to `side`.
    pub fn lift_expr(&self, e: &Expr, side: &str) -> Result<Expr, SyncError> {
        self.check_side(&e.vars(), side, &e.to_string())?;
        Ok(e.clone())
    }

    /// `b⇑` from side `side`.
    pub fn lift_bexpr(&self, b: &BExpr, side: &str) -> Result<BExpr, SyncError> {
        self.check_side(&b.vars(), side, &b.to_string())?;
        Ok(b.clone())
    }

    fn check_side(&self, vars: &BTreeSet<String>, side: &str, text: &str) -> Result<(), SyncError> {
        for x in vars {
            if self.owner(x) != Some(side) {
                return Err(SyncError::MixedPrefix { expr: text.to_string(), side: side.to_string() });
            }
        }
        Ok(())
    }
}

/// The process with every program variable renamed to `name‖x`.
pub fn prefix_program(name: &str, c: &Process) -> Process {
    c.rename_vars(&|x| format!("{name}{x}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, parse_bexpr, parse_expr};

    #[test]
    fn prefix_and_collisions() {
        let mut px = Prefixer::new();
        let a = Assertion::subst(Assertion::Init, "x", Expr::int(1));
        let n = px.prefix_process("A", &a).unwrap();
        assert_eq!(n.assertion.to_string(), "init[Ax := 1]");
        assert!(px.prefix_process("A", &a).is_err());
        assert!(px.prefix_process("AB", &a).is_err());
        assert!(px.prefix_process("", &a).is_err());
        assert!(px.prefix_process("B", &a).is_ok());
        assert_eq!(px.owner("Bop"), Some("B"));
        assert_eq!(px.owner("B"), None);
    }

    #[test]
    fn lifting_checks_sides() {
        let mut px = Prefixer::new();
        px.register("A").unwrap();
        px.register("B").unwrap();
        let b = parse_bexpr("Av < 5").unwrap();
        assert_eq!(px.lift_bexpr(&b, "A").unwrap(), b);
        assert!(px.lift_bexpr(&parse_bexpr("Av < Bop").unwrap(), "A").is_err());
        let e = parse_expr("Av + 1").unwrap();
        assert_eq!(px.lift_expr(&e, "A").unwrap().to_string(), e.to_string());
    }

    #[test]
    fn program_prefix() {
        let c = parse("x := x + 1; ch!x").unwrap();
        assert_eq!(prefix_program("A", &c).free_vars().into_iter().collect::<Vec<_>>(), ["Ax"]);
    }
}
