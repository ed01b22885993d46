//! Browser bindings for slicesync-core.
//!
//! Each exported function takes plain text (interest source, N-Triples) and
//! returns a JSON document; errors come back as a JS string. The `*_json`
//! functions do the work and are what native tests call.

use serde::Serialize;
use slicesync_core::evaluator::evaluate_interest;
use slicesync_core::index::IndexedGraph;
use slicesync_core::match_engine::MatchLimits;
use slicesync_core::pattern::{parse_interest, InterestExpression};
use slicesync_core::rdf::{parse_ntriples_str, serialize_ntriples, Changeset, Graph};
use slicesync_core::store::{init_pi, init_slice};
use wasm_bindgen::prelude::*;

const EXAMPLE_INTEREST: &str = include_str!("../../core/tests/fixtures/running_example/interest.rq");
const EXAMPLE_TARGET: &str = include_str!("../../core/tests/fixtures/running_example/target_t0.nt");
const EXAMPLE_REMOVED: &str = include_str!("../../core/tests/fixtures/running_example/000001.removed.nt");
const EXAMPLE_ADDED: &str = include_str!("../../core/tests/fixtures/running_example/000001.added.nt");

fn graph(label: &str, text: &str) -> Result<Graph, String> {
    parse_ntriples_str(text).map_err(|e| format!("{label}: {e}"))
}

fn interest(text: &str) -> Result<InterestExpression, String> {
    parse_interest(text).map_err(|e| format!("interest: {e}"))
}

fn json(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// N-Triples, one triple per line, sorted.
fn nt(g: &Graph) -> String {
    serialize_ntriples(g)
}

#[derive(Serialize)]
struct Example {
    interest: &'static str,
    target: &'static str,
    removed: &'static str,
    added: &'static str,
}

#[derive(Serialize)]
struct ParsedInterest {
    id: String,
    canonical: String,
    bgp_patterns: usize,
    ogp_patterns: usize,
    variables: Vec<String>,
}

#[derive(Serialize)]
struct SliceResult {
    target: String,
    pi: String,
    target_size: usize,
    pi_size: usize,
}

#[derive(Serialize)]
struct EvalResult {
    r: String,
    r_i: String,
    r_prime: String,
    a: String,
    a_i: String,
    a_prime: String,
    interesting_removed: String,
    interesting_added: String,
    pi_removed: String,
    pi_added: String,
    new_target: String,
    new_pi: String,
    counts: Counts,
}

#[derive(Serialize)]
struct Counts {
    removed_interesting: usize,
    added_interesting: usize,
    pi_removed: usize,
    pi_added: usize,
}

pub fn example_json() -> String {
    json(&Example { interest: EXAMPLE_INTEREST, target: EXAMPLE_TARGET, removed: EXAMPLE_REMOVED, added: EXAMPLE_ADDED })
}

pub fn parse_interest_json(source: &str) -> Result<String, String> {
    let i = interest(source)?;
    let mut variables: Vec<String> = i.bgp.variables().iter().map(|v| v.to_string()).collect();
    for v in i.ogp.variables() {
        let name = v.to_string();
        if !variables.contains(&name) {
            variables.push(name);
        }
    }
    Ok(json(&ParsedInterest {
        id: i.id.clone(),
        canonical: i.to_string(),
        bgp_patterns: i.bgp.len(),
        ogp_patterns: i.ogp.len(),
        variables,
    }))
}

pub fn slice_json(interest_src: &str, dump_nt: &str) -> Result<String, String> {
    let i = interest(interest_src)?;
    let dump = graph("dump", dump_nt)?;
    let target = init_slice(&i, &dump, &MatchLimits::default()).map_err(|e| e.to_string())?;
    let pi = init_pi(&i, &dump, &target);
    Ok(json(&SliceResult { target_size: target.len(), pi_size: pi.len(), target: nt(&target), pi: nt(&pi) }))
}

pub fn evaluate_json(
    interest_src: &str,
    target_nt: &str,
    pi_nt: &str,
    removed_nt: &str,
    added_nt: &str,
) -> Result<String, String> {
    let i = interest(interest_src)?;
    let target = graph("target", target_nt)?;
    let pi = graph("parked", pi_nt)?;
    let cs = Changeset::new(graph("removed", removed_nt)?, graph("added", added_nt)?);
    let indexed = IndexedGraph::from_graph(&target);
    let ev = evaluate_interest(&i, &cs, &indexed, &pi, &MatchLimits::default()).map_err(|e| e.to_string())?;

    let mut new_target = target.clone();
    let removed_interesting = ev.interesting.removed.iter().filter(|t| new_target.remove(t)).count();
    let added_interesting = ev.interesting.added.iter().filter(|t| new_target.insert((*t).clone())).count();
    let mut new_pi = pi.clone();
    let pi_removed = ev.pi.removed.iter().filter(|t| new_pi.remove(t)).count();
    let pi_added = ev.pi.added.iter().filter(|t| new_pi.insert((*t).clone())).count();

    Ok(json(&EvalResult {
        r: nt(&ev.deletions.r),
        r_i: nt(&ev.deletions.r_i),
        r_prime: nt(&ev.deletions.r_prime),
        a: nt(&ev.additions.a),
        a_i: nt(&ev.additions.a_i),
        a_prime: nt(&ev.additions.a_prime),
        interesting_removed: nt(&ev.interesting.removed),
        interesting_added: nt(&ev.interesting.added),
        pi_removed: nt(&ev.pi.removed),
        pi_added: nt(&ev.pi.added),
        new_target: nt(&new_target),
        new_pi: nt(&new_pi),
        counts: Counts { removed_interesting, added_interesting, pi_removed, pi_added },
    }))
}

/// The running example: interest, initial target and one changeset.
#[wasm_bindgen]
pub fn example() -> String {
    example_json()
}

/// Parses and validates an interest expression.
#[wasm_bindgen(js_name = parseInterest)]
pub fn parse_interest_js(source: &str) -> Result<String, JsValue> {
    parse_interest_json(source).map_err(JsValue::from)
}

/// Initial target and parked set for an interest over a dump.
#[wasm_bindgen]
pub fn slice(interest_src: &str, dump_nt: &str) -> Result<String, JsValue> {
    slice_json(interest_src, dump_nt).map_err(JsValue::from)
}

/// Evaluates one changeset against a target and parked set.
#[wasm_bindgen]
pub fn evaluate(interest_src: &str, target_nt: &str, pi_nt: &str, removed_nt: &str, added_nt: &str) -> Result<String, JsValue> {
    evaluate_json(interest_src, target_nt, pi_nt, removed_nt, added_nt).map_err(JsValue::from)
}
