use serde::{Deserialize, Serialize};

use crate::chan::Dir;
use crate::expr::{rat_serde, Rat};

/// One resolution of a nondeterministic choice, consumed in evaluation order.
///
/// JSON forms: `{"branch": 0}`, `{"repeat": true}`,
/// `{"input": {"delay": "0", "value": "3"}}`, `{"output": {"delay": "1/2"}}`,
/// `{"interrupt": {"index": 1, "delay": "2", "value": "0"}}`, `"boundary"`,
/// `{"parallel": {"left": [...], "right": [...], "pick": 0}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    /// Internal choice: 0 takes the left operand.
    Branch(u8),
    /// Repetition: `true` runs the body once more.
    Repeat(bool),
    Input {
        #[serde(with = "rat_serde")]
        delay: Rat,
        #[serde(with = "rat_serde")]
        value: Rat,
    },
    Output {
        #[serde(with = "rat_serde")]
        delay: Rat,
    },
    /// Interrupt taken by communication branch `index` after `delay`; `value`
    /// is the received value for input branches and ignored otherwise.
    Interrupt {
        index: usize,
        #[serde(with = "rat_serde")]
        delay: Rat,
        #[serde(with = "rat_serde", default = "zero")]
        value: Rat,
    },
    /// Interrupt left through the domain boundary.
    Boundary,
    /// Schedules for both components and the index of the synchronized
    /// trace to select (in the sorted result set).
    Parallel { left: Vec<Choice>, right: Vec<Choice>, pick: usize },
}

fn zero() -> Rat {
    crate::expr::rat(0)
}

/// What the interpreter was about to resolve when the schedule ran out.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Need {
    pub what: &'static str,
    /// Channels offered at this point, in branch order.
    pub offers: Vec<(String, Dir)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    choices: Vec<Choice>,
    #[serde(skip)]
    pos: usize,
    #[serde(skip)]
    need: Option<Need>,
}

impl Schedule {
    pub fn new(choices: Vec<Choice>) -> Schedule {
        Schedule { choices, pos: 0, need: None }
    }

    /// Like [`Schedule::next`], recording `need` when no choice is left.
    pub fn next_for(&mut self, what: &'static str, offers: &[(String, Dir)]) -> Option<Choice> {
        let c = self.next();
        if c.is_none() {
            self.need = Some(Need { what, offers: offers.to_vec() });
        }
        c
    }

    /// The unmet request of the last failed [`Schedule::next_for`].
    pub fn need(&self) -> Option<&Need> {
        self.need.as_ref()
    }

    pub fn next(&mut self) -> Option<Choice> {
        let c = self.choices.get(self.pos).cloned();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    pub fn remaining(&self) -> usize {
        self.choices.len() - self.pos
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{frac, rat};

    #[test]
    fn json_forms() {
        let s = Schedule::new(vec![
            Choice::Branch(1),
            Choice::Repeat(false),
            Choice::Input { delay: rat(0), value: frac(1, 2) },
            Choice::Boundary,
            Choice::Interrupt { index: 0, delay: rat(2), value: rat(0) },
        ]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"[{"branch":1},{"repeat":false},{"input":{"delay":"0","value":"0.5"}},"boundary",{"interrupt":{"index":0,"delay":"2","value":"0"}}]"#
        );
        let back: Schedule = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let loose: Schedule =
            serde_json::from_str(r#"[{"output":{"delay":1.5}},{"interrupt":{"index":1,"delay":"1/3"}}]"#).unwrap();
        assert_eq!(loose.choices()[0], Choice::Output { delay: frac(3, 2) });
    }
}
