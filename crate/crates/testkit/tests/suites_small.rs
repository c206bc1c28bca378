use spacerace_testkit::suites;

#[test]
fn grading_enumeration_passes() {
    let s = suites::grading_enumeration().unwrap();
    assert_eq!(s.ordering_permutations, 24);
    assert_eq!(s.classification_assignments, 16);
    assert_eq!(s.choice_correct_sets, 3 + 7 + 15 + 31 + 63);
}

#[test]
fn engine_properties_small_budget() {
    let s = suites::engine_properties(400).unwrap();
    println!("{s:?}");
    assert_eq!(s.cases, 400);
    assert!(s.started > 100, "{s:?}");
    assert!(s.natural_ends > 10, "{s:?}");
    assert!(s.cooldown_hits > 0 && s.already_completed > 0 && s.admin_ends > 0, "{s:?}");
}

#[test]
fn codec_properties_small_budget() {
    let s = suites::codec_properties(500, 8).unwrap();
    assert_eq!(s.types_checked, 27);
    assert!(s.missing_field_checks > 0 && s.mistyped_field_checks > 0);
}

#[test]
fn answer_hiding_small_budget() {
    let s = suites::answer_hiding_audit(8, 20).unwrap();
    assert_eq!(s.server_types, 15);
    assert_eq!(s.games, 20);
}
