use serde_json::Value;
use slicesync_wasm::{evaluate_json, example_json, parse_interest_json, slice_json};

fn example() -> Value {
    serde_json::from_str(&example_json()).unwrap()
}

fn field<'a>(v: &'a Value, k: &str) -> &'a str {
    v[k].as_str().unwrap()
}

#[test]
fn running_example_counts() {
    let ex = example();
    let out = evaluate_json(field(&ex, "interest"), field(&ex, "target"), "", field(&ex, "removed"), field(&ex, "added")).unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    let c = &v["counts"];
    let counts: Vec<u64> = ["removed_interesting", "added_interesting", "pi_removed", "pi_added"]
        .iter()
        .map(|k| c[*k].as_u64().unwrap())
        .collect();
    assert_eq!(counts, [5, 5, 0, 3]);
    let expected = include_str!("../../core/tests/fixtures/running_example/expected_target_t1.nt");
    let mut got: Vec<&str> = field(&v, "new_target").lines().collect();
    let mut want: Vec<&str> = expected.lines().filter(|l| !l.trim().is_empty()).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn slice_of_initial_target_is_itself() {
    let ex = example();
    let v: Value = serde_json::from_str(&slice_json(field(&ex, "interest"), field(&ex, "target")).unwrap()).unwrap();
    assert_eq!(v["target_size"], 5);
    assert_eq!(v["pi_size"], 0);
}

#[test]
fn interest_errors_are_messages() {
    let v: Value = serde_json::from_str(&parse_interest_json(field(&example(), "interest")).unwrap()).unwrap();
    assert!(v["bgp_patterns"].as_u64().unwrap() >= 2);
    let err = parse_interest_json("SELECT * WHERE { ?a <http://x/p> ?b . ?c <http://x/q> ?d }").unwrap_err();
    assert!(err.contains("?a"), "{err}");
    assert!(evaluate_json("SELECT * WHERE { ?a <http://x/p> ?b }", "not n-triples", "", "", "").is_err());
}
