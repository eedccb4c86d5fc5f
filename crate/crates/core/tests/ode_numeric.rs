mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hcsp::expr::{frac, rat_to_f64, BoundVar, State, Valuation};
use hcsp::ode::solve;

#[test]
fn closed_forms_match_rk4() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..20 {
        let eqs = common::nilpotent_system(&mut rng);
        let sol = solve(&eqs).unwrap();
        for _ in 0..10 {
            let mut s0 = State::new();
            for v in ["x", "y", "z", "w", "c"] {
                s0.set(v, frac(rng.gen_range(-40..=40), 4));
            }
            for _ in 0..10 {
                let t = frac(rng.gen_range(0..=1000), 100);
                let mut val = Valuation::new(&s0);
                val.bound.insert(BoundVar::TIME, t.clone());
                let init: BTreeMap<String, f64> = s0.iter().map(|(x, v)| (x.clone(), rat_to_f64(v))).collect();
                let num = common::rk4(&eqs, &init, rat_to_f64(&t), 400);
                for (x, e) in &sol.solution {
                    let exact = rat_to_f64(&e.eval(&val).unwrap());
                    assert!(
                        (exact - num[x]).abs() <= 1e-9 * (1.0 + exact.abs()),
                        "{eqs:?} {x} at {t}: {exact} vs {}",
                        num[x]
                    );
                }
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 2000);
}
