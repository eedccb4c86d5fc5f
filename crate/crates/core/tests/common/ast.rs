//! Strategies over the ASTs the parser produces.

use std::collections::BTreeSet;

use proptest::prelude::*;

use hcsp::expr::{frac, BExpr, CmpOp, Expr};
use hcsp::lang::{CommBranch, Ode, Process};

const VARS: [&str; 5] = ["x", "y", "z", "v1", "ab"];
const CHANS: [&str; 3] = ["c", "ch1", "d"];

pub fn var() -> impl Strategy<Value = String> {
    prop::sample::select(&VARS[..]).prop_map(String::from)
}

pub fn chan() -> impl Strategy<Value = String> {
    prop::sample::select(&CHANS[..]).prop_map(String::from)
}

/// Literals the lexer produces: non-negative integers and finite decimals.
pub fn literal() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0i64..100).prop_map(Expr::int),
        (0i64..1000, prop::sample::select(vec![2i64, 4, 5, 10, 100])).prop_map(|(n, d)| Expr::constant(frac(n, d))),
    ]
}

pub fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![literal(), var().prop_map(|x| Expr::var(&x))];
    leaf.prop_recursive(4, 24, 2, |e| {
        prop_oneof![
            e.clone().prop_map(|a| -a),
            (e.clone(), e.clone()).prop_map(|(a, b)| a + b),
            (e.clone(), e.clone()).prop_map(|(a, b)| a - b),
            (e.clone(), e.clone()).prop_map(|(a, b)| a * b),
            (e.clone(), e.clone()).prop_map(|(a, b)| a / b),
            (e, 0u32..4).prop_map(|(a, k)| a.pow(k)),
        ]
    })
}

pub fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Eq, CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt])
}

pub fn bexpr() -> impl Strategy<Value = BExpr> {
    let leaf = prop_oneof![
        Just(BExpr::True),
        Just(BExpr::False),
        (cmp_op(), expr(), expr()).prop_map(|(op, a, b)| BExpr::Cmp(op, a, b)),
    ];
    leaf.prop_recursive(3, 12, 2, |b| {
        prop_oneof![
            b.clone().prop_map(BExpr::not),
            (b.clone(), b.clone()).prop_map(|(p, q)| BExpr::and(p, q)),
            (b.clone(), b).prop_map(|(p, q)| BExpr::or(p, q)),
        ]
    })
}

pub fn ode() -> impl Strategy<Value = Ode> {
    (prop::collection::btree_map(var(), expr(), 1..3), bexpr())
        .prop_map(|(eqs, domain)| Ode { eqs: eqs.into_iter().collect(), domain })
}

pub fn process() -> impl Strategy<Value = Process> {
    let leaf = prop_oneof![
        Just(Process::Skip),
        (var(), expr()).prop_map(|(x, e)| Process::Assign(x, e)),
        (chan(), var()).prop_map(|(c, x)| Process::Input(c, x)),
        (chan(), expr()).prop_map(|(c, e)| Process::Output(c, e)),
        expr().prop_map(Process::Wait),
        ode().prop_map(Process::Ode),
    ];
    leaf.prop_recursive(4, 32, 3, |p| {
        let branch = prop_oneof![
            (chan(), var(), p.clone()).prop_map(|(ch, var, cont)| CommBranch::Input { ch, var, cont }),
            (chan(), expr(), p.clone()).prop_map(|(ch, value, cont)| CommBranch::Output { ch, value, cont }),
        ];
        prop_oneof![
            (p.clone(), p.clone()).prop_map(|(a, b)| Process::seq(a, b)),
            (p.clone(), p.clone()).prop_map(|(a, b)| Process::choice(a, b)),
            p.clone().prop_map(Process::repeat),
            (bexpr(), p.clone(), p.clone()).prop_map(|(b, c1, c2)| Process::cond(b, c1, c2)),
            (ode(), p, prop::collection::vec(branch, 1..3)).prop_map(|(ode, tail, branches)| Process::Interrupt {
                ode,
                tail: Box::new(tail),
                branches
            }),
        ]
    })
}

pub fn parallel() -> impl Strategy<Value = Process> {
    (prop::collection::vec((process(), prop::collection::btree_set(chan(), 0..3)), 1..4), process()).prop_map(
        |(parts, last)| {
            parts.into_iter().rev().fold(last, |acc, (p, chs): (Process, BTreeSet<String>)| {
                Process::Parallel(Box::new(p), chs, Box::new(acc))
            })
        },
    )
}
