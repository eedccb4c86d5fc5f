use std::collections::BTreeMap;
use std::fmt;

use super::{format_rat, ExprError, Rat};

/// Concrete state: a finite map from variable names to exact reals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct State(BTreeMap<String, Rat>);

impl State {
    pub fn new() -> State {
        State(BTreeMap::new())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Rat)>) -> State {
        State(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn get(&self, x: &str) -> Result<&Rat, ExprError> {
        self.0.get(x).ok_or_else(|| ExprError::Unbound(x.to_string()))
    }

    pub fn lookup(&self, x: &str) -> Option<&Rat> {
        self.0.get(x)
    }

    pub fn set(&mut self, x: &str, v: Rat) {
        self.0.insert(x.to_string(), v);
    }

    pub fn with(&self, x: &str, v: Rat) -> State {
        let mut s = self.clone();
        s.set(x, v);
        s
    }

    pub fn contains(&self, x: &str) -> bool {
        self.0.contains_key(x)
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rat)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Disjoint union; overlapping domains are an error.
    pub fn merge(&self, other: &State) -> Result<State, ExprError> {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            if out.0.insert(k.clone(), v.clone()).is_some() {
                return Err(ExprError::Overlap(k.clone()));
            }
        }
        Ok(out)
    }

    /// Restriction to the variables accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> State {
        State(self.0.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    pub fn rename(&self, f: impl Fn(&str) -> String) -> State {
        State(self.0.iter().map(|(k, v)| (f(k), v.clone())).collect())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {}", format_rat(v))?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rat;

    #[test]
    fn update_then_lookup() {
        let s = State::new().with("x", rat(3));
        assert_eq!(s.get("x").unwrap(), &rat(3));
        assert!(s.get("y").is_err());
    }

    #[test]
    fn merge_requires_disjoint_domains() {
        let a = State::from_pairs([("x", rat(1))]);
        let b = State::from_pairs([("y", rat(2))]);
        assert_eq!(a.merge(&b).unwrap().len(), 2);
        assert_eq!(a.merge(&a), Err(ExprError::Overlap("x".into())));
    }
}
