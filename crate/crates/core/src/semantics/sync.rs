use std::collections::{BTreeSet, HashMap};

use crate::chan::{compat, merge_rdy};

use super::{CommKind, Event, Trace};

/// All traces `tr` with `tr1 ||_cs tr2 ⇓ tr`.
///
/// Every rule is applied in both orientations. A deadlock marker at the head
/// of either input propagates as the sole result.
pub fn sync_traces(tr1: &[Event], cs: &BTreeSet<String>, tr2: &[Event]) -> BTreeSet<Trace> {
    let mut memo = HashMap::new();
    go(tr1, cs, tr2, &mut memo)
}

type Memo = HashMap<(Trace, Trace), BTreeSet<Trace>>;

fn go(tr1: &[Event], cs: &BTreeSet<String>, tr2: &[Event], memo: &mut Memo) -> BTreeSet<Trace> {
    let key = (tr1.to_vec(), tr2.to_vec());
    if let Some(r) = memo.get(&key) {
        return r.clone();
    }
    let out = derive(tr1, cs, tr2, memo);
    memo.insert(key, out.clone());
    out
}

fn prefixed(e: Event, rest: BTreeSet<Trace>) -> impl Iterator<Item = Trace> {
    rest.into_iter().map(move |mut t| {
        t.insert(0, e.clone());
        t
    })
}

fn deadlock() -> BTreeSet<Trace> {
    BTreeSet::from([vec![Event::Deadlock]])
}

fn derive(tr1: &[Event], cs: &BTreeSet<String>, tr2: &[Event], memo: &mut Memo) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    match (tr1.first(), tr2.first()) {
        // SyncEmpty3
        (None, None) => {
            out.insert(vec![]);
            return out;
        }
        (Some(Event::Deadlock), _) | (_, Some(Event::Deadlock)) => return deadlock(),
        _ => {}
    }
    // NoSyncIO on either side.
    for (mine, other, left) in [(tr1, tr2, true), (tr2, tr1, false)] {
        if let Some(Event::Comm { ch, .. }) = mine.first() {
            if !cs.contains(ch) {
                let rest = if left { go(&mine[1..], cs, other, memo) } else { go(other, cs, &mine[1..], memo) };
                out.extend(prefixed(mine[0].clone(), rest));
            }
        }
    }
    // SyncEmpty1 and SyncEmpty2 on either side.
    for (mine, other) in [(tr1, tr2), (tr2, tr1)] {
        if !other.is_empty() {
            continue;
        }
        match mine.first() {
            Some(Event::Comm { ch, .. }) if cs.contains(ch) => out.extend(deadlock()),
            Some(Event::Cont { .. }) => {
                if !go(&mine[1..], cs, &[], memo).is_empty() {
                    out.extend(deadlock());
                }
            }
            _ => {}
        }
    }
    match (tr1.first(), tr2.first()) {
        // SyncIO in both orientations.
        (Some(Event::Comm { ch: c1, kind: k1, value: v1 }), Some(Event::Comm { ch: c2, kind: k2, value: v2 }))
            if c1 == c2 && cs.contains(c1) && v1 == v2 =>
        {
            let paired = matches!((k1, k2), (CommKind::Out, CommKind::In) | (CommKind::In, CommKind::Out));
            if paired {
                let e = Event::Comm { ch: c1.clone(), kind: CommKind::Sync, value: v1.clone() };
                out.extend(prefixed(e, go(&tr1[1..], cs, &tr2[1..], memo)));
            }
        }
        (Some(Event::Cont { d: d1, path: p1, rdy: r1 }), Some(Event::Cont { d: d2, path: p2, rdy: r2 }))
            if compat(r1, r2, cs) =>
        {
            let rdy = merge_rdy(r1, r2, cs);
            let Some(path) = p1.merge(p2) else { return out };
            if d1 == d2 {
                // SyncWait1
                let e = Event::Cont { d: d1.clone(), path, rdy };
                out.extend(prefixed(e, go(&tr1[1..], cs, &tr2[1..], memo)));
            } else if d1 > d2 {
                // SyncWait2
                let mut rest1 = vec![Event::Cont { d: d1 - d2, path: p1.shifted(d2), rdy: r1.clone() }];
                rest1.extend_from_slice(&tr1[1..]);
                let e = Event::Cont { d: d2.clone(), path, rdy };
                out.extend(prefixed(e, go(&rest1, cs, &tr2[1..], memo)));
            } else {
                // SyncWait2, mirrored
                let mut rest2 = vec![Event::Cont { d: d2 - d1, path: p2.shifted(d1), rdy: r2.clone() }];
                rest2.extend_from_slice(&tr2[1..]);
                let e = Event::Cont { d: d1.clone(), path, rdy };
                out.extend(prefixed(e, go(&tr1[1..], cs, &rest2, memo)));
            }
        }
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chan::{Dir, Rdy};
    use crate::expr::{rat, State};
    use crate::semantics::Path;

    fn out(ch: &str, v: i64) -> Event {
        Event::Comm { ch: ch.into(), kind: CommKind::Out, value: rat(v) }
    }
    fn inp(ch: &str, v: i64) -> Event {
        Event::Comm { ch: ch.into(), kind: CommKind::In, value: rat(v) }
    }
    fn wait(d: i64, var: &str, rdy: Rdy) -> Event {
        Event::Cont { d: rat(d), path: Path::constant(&State::from_pairs([(var, rat(0))])), rdy }
    }

    fn cs(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn handshake() {
        let r = sync_traces(&[out("ch", 3)], &cs(&["ch"]), &[inp("ch", 3)]);
        assert_eq!(r, BTreeSet::from([vec![Event::Comm { ch: "ch".into(), kind: CommKind::Sync, value: rat(3) }]]));
        assert!(sync_traces(&[out("ch", 3)], &cs(&["ch"]), &[inp("ch", 4)]).is_empty());
        assert_eq!(sync_traces(&[], &cs(&[]), &[]), BTreeSet::from([vec![]]));
    }

    #[test]
    fn waiting_then_deadlock() {
        let r = sync_traces(&[wait(2, "x", Rdy::from([("ch".to_string(), Dir::Out)]))], &cs(&["ch"]), &[]);
        assert_eq!(r, BTreeSet::from([vec![Event::Deadlock]]));
    }

    #[test]
    fn split_waits() {
        let a = vec![wait(3, "x", Rdy::new())];
        let b = vec![wait(1, "y", Rdy::new()), wait(2, "y", Rdy::new())];
        let r = sync_traces(&a, &cs(&[]), &b);
        assert_eq!(r.len(), 1);
        let t = r.into_iter().next().unwrap();
        assert_eq!(t.len(), 2);
        assert!(matches!(&t[1], Event::Cont { d, .. } if *d == rat(2)));
    }

    #[test]
    fn incompatible_waits_block_and_unshared_interleave() {
        let a = vec![wait(1, "x", Rdy::from([("ch".to_string(), Dir::Out)]))];
        let b = vec![wait(1, "y", Rdy::from([("ch".to_string(), Dir::In)]))];
        assert!(sync_traces(&a, &cs(&["ch"]), &b).is_empty());
        let r = sync_traces(&[out("a", 1)], &cs(&[]), &[out("b", 2)]);
        assert_eq!(r.len(), 2);
    }
}
