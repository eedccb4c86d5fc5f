mod common;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hcsp::semantics::sync_traces;

fn channel_sets() -> Vec<BTreeSet<String>> {
    vec![BTreeSet::new(), ["a".to_string()].into(), ["a".to_string(), "b".to_string()].into()]
}

#[test]
fn matches_exhaustive_derivation_up_to_two_events() {
    let left = common::traces(&common::alphabet("x"), 2);
    let right = common::traces(&common::alphabet("y"), 2);
    for cs in channel_sets() {
        for l in &left {
            for r in &right {
                assert_eq!(sync_traces(l, &cs, r), common::brute_force(l, &cs, r), "{l:?} || {r:?} over {cs:?}");
            }
        }
    }
}

#[test]
fn matches_exhaustive_derivation_on_sampled_three_event_pairs() {
    let left = common::traces(&common::alphabet("x"), 3);
    let right = common::traces(&common::alphabet("y"), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for cs in channel_sets() {
        for _ in 0..3000 {
            let l = left.choose(&mut rng).unwrap();
            let r = right.choose(&mut rng).unwrap();
            assert_eq!(sync_traces(l, &cs, r), common::brute_force(l, &cs, r), "{l:?} || {r:?} over {cs:?}");
        }
    }
}
