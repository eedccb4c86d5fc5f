//! Channel directions, ready sets and the compatibility predicate shared by
//! trace synchronization and assertion synchronization.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dir {
    #[serde(rename = "?")]
    In,
    #[serde(rename = "!")]
    Out,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::In => Dir::Out,
            Dir::Out => Dir::In,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Dir::In => "?",
            Dir::Out => "!",
        }
    }
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A ready set: the channel ends a process is waiting on.
pub type Rdy = BTreeSet<(String, Dir)>;

/// No shared channel has an output ready on one side and the matching input
/// ready on the other.
pub fn compat(r1: &Rdy, r2: &Rdy, chs: &BTreeSet<String>) -> bool {
    !chs.iter().any(|ch| {
        let has = |r: &Rdy, d: Dir| r.contains(&(ch.clone(), d));
        (has(r1, Dir::Out) && has(r2, Dir::In)) || (has(r1, Dir::In) && has(r2, Dir::Out))
    })
}

/// `(r1 ∪ r2) − chs`.
pub fn merge_rdy(r1: &Rdy, r2: &Rdy, chs: &BTreeSet<String>) -> Rdy {
    r1.union(r2).filter(|(ch, _)| !chs.contains(ch)).cloned().collect()
}

pub fn format_rdy(r: &Rdy) -> String {
    let items: Vec<String> = r.iter().map(|(ch, d)| format!("{ch}{d}")).collect();
    format!("{{{}}}", items.join(", "))
}
