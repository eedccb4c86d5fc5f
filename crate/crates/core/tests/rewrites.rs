mod common;

#[test]
fn rewrites_preserve_satisfaction() {
    let c = common::rewrite::campaign(17, 2000, true);
    assert!(c.disagreements.is_empty(), "{}", c.disagreements[0]);
    assert!(c.held > 200, "{c:?}");
    for rule in ["normalize", "push_subst", "delay0", "delay"] {
        assert!(c.by_rule.get(rule).copied().unwrap_or(0) > 50, "{rule}: {c:?}");
    }
}

#[test]
fn unshifted_delay_is_caught() {
    let c = common::rewrite::campaign(17, 2000, false);
    assert!(c.disagreements.iter().any(|d| d.starts_with("delay:")), "{c:?}");
}
