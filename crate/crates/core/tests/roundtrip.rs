mod common;

use proptest::prelude::*;

use common::ast::{bexpr, expr, parallel, process};
use hcsp::lang::{parse, parse_bexpr, parse_expr};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn expressions_round_trip(e in expr()) {
        let text = e.to_string();
        let f = parse_expr(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(f, e, "{}", text);
    }

    #[test]
    fn conditions_round_trip(b in bexpr()) {
        let text = b.to_string();
        let c = parse_bexpr(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(c, b, "{}", text);
    }

    #[test]
    fn sequential_processes_round_trip(p in process()) {
        let text = p.pretty();
        let q = parse(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(q, p, "{}", text);
    }

    #[test]
    fn parallel_processes_round_trip(p in parallel()) {
        let text = p.pretty();
        let q = parse(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(q, p, "{}", text);
    }

    #[test]
    fn printing_is_idempotent_after_one_pass(p in process()) {
        let once = parse(&p.pretty()).unwrap().pretty();
        prop_assert_eq!(parse(&once).unwrap().pretty(), once);
    }
}
