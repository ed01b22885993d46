//! Matching interest patterns against triple sets.
//!
//! Two kinds of search live here. Partial-match enumeration grows matches
//! inside a single triple set (a changeset side) to classify its triples by how
//! much of the basic graph pattern they can cover. Full-match search joins all
//! patterns over a context (candidates plus target) and is what decides whether
//! a triple is part of the replica.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::index::{IndexedGraph, Overlay, TripleSource};
use crate::pattern::{Bgp, Binding, InterestExpression, Ogp, PatternTerm, TriplePattern};
use crate::rdf::{Graph, Term, Triple};

pub const DEFAULT_MAX_PARTIAL_MATCHES: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchLimits {
    /// Upper bound on search states per operation.
    pub max_partial_matches: usize,
}

impl Default for MatchLimits {
    fn default() -> Self {
        MatchLimits { max_partial_matches: DEFAULT_MAX_PARTIAL_MATCHES }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("more than {0} partial matches; the interest is too unselective for this input")]
    ResourceLimit(usize),
    #[error("interest has {0} basic graph patterns; at most 64 are supported")]
    TooManyPatterns(usize),
}

struct Budget {
    used: usize,
    cap: usize,
}

impl Budget {
    fn new(limits: &MatchLimits) -> Self {
        Budget { used: 0, cap: limits.max_partial_matches }
    }

    fn tick(&mut self) -> Result<(), MatchError> {
        self.used += 1;
        if self.used > self.cap {
            Err(MatchError::ResourceLimit(self.cap))
        } else {
            Ok(())
        }
    }
}

/// Partial matches grow along joins: a shared variable, or a shared constant
/// in subject or object position. A shared predicate constant alone does not
/// join two patterns.
pub fn joinable(a: &TriplePattern, b: &TriplePattern) -> bool {
    if a.shares_variable_with(b) {
        return true;
    }
    let nodes = |p: &TriplePattern| -> Vec<Term> {
        [&p.subject, &p.object]
            .into_iter()
            .filter_map(|pt| match pt {
                PatternTerm::Term(t) => Some(t.clone()),
                PatternTerm::Var(_) => None,
            })
            .collect()
    };
    let nb = nodes(b);
    nodes(a).iter().any(|t| nb.contains(t))
}

/// The triple `tp` denotes once all its variables are bound.
fn ground(tp: &TriplePattern, mu: &Binding) -> Option<Triple> {
    let [s, p, o] = tp.positions().map(|pt| pt.resolve(mu).cloned());
    Some(Triple::new_unchecked(s?, p?, o?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialMatch {
    pub binding: Binding,
    /// Indices into the basic graph pattern.
    pub matched: BTreeSet<usize>,
    /// Indices into the optional pattern.
    pub matched_op: BTreeSet<usize>,
    /// Triples that produced the match.
    pub support: Graph,
}

impl PartialMatch {
    pub fn is_full(&self, n: usize) -> bool {
        self.matched.len() == n
    }
}

fn mask_indices(mask: u64) -> BTreeSet<usize> {
    (0..64).filter(|j| mask & (1 << j) != 0).collect()
}

/// Maximal partial matches of `b` inside `m`, each as (pattern mask, binding).
fn grow_partial(b: &Bgp, m: &dyn TripleSource, budget: &mut Budget) -> Result<Vec<(u64, Binding)>, MatchError> {
    let n = b.len();
    if n > 64 {
        return Err(MatchError::TooManyPatterns(n));
    }
    let adjacent: Vec<u64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && joinable(&b.patterns[i], &b.patterns[j]))
                .fold(0, |acc, j| acc | 1 << j)
        })
        .collect();
    let mut seen: HashSet<(u64, Binding)> = HashSet::new();
    let mut stack = Vec::new();
    for (j, tp) in b.patterns.iter().enumerate() {
        for (_, mu) in m.match_pattern(tp, &Binding::new()) {
            let state = (1u64 << j, mu);
            if seen.insert(state.clone()) {
                budget.tick()?;
                stack.push(state);
            }
        }
    }
    let mut maximal = Vec::new();
    while let Some((mask, mu)) = stack.pop() {
        let mut extended = false;
        for j in (0..n).filter(|&j| mask & (1 << j) == 0 && adjacent[j] & mask != 0) {
            for (_, next) in m.match_pattern(&b.patterns[j], &mu) {
                extended = true;
                let state = (mask | 1 << j, next);
                if seen.insert(state.clone()) {
                    budget.tick()?;
                    stack.push(state);
                }
            }
        }
        if !extended {
            maximal.push((mask, mu));
        }
    }
    Ok(maximal)
}

fn enumerate_in(
    b: &Bgp,
    op: &Ogp,
    m: &dyn TripleSource,
    budget: &mut Budget,
) -> Result<Vec<PartialMatch>, MatchError> {
    let mut out = Vec::new();
    for (mask, mu) in grow_partial(b, m, budget)? {
        let matched = mask_indices(mask);
        let mut support: Graph = matched.iter().filter_map(|&j| ground(&b.patterns[j], &mu)).collect();
        let mut matched_op = BTreeSet::new();
        for (j, q) in op.patterns.iter().enumerate() {
            for (t, _) in m.match_pattern(q, &mu) {
                matched_op.insert(j);
                support.insert(t);
            }
        }
        out.push(PartialMatch { binding: mu, matched, matched_op, support });
    }
    // Triples matching only the optional part stand alone.
    for (j, q) in op.patterns.iter().enumerate() {
        for (t, mu) in m.match_pattern(q, &Binding::new()) {
            if !b.patterns.iter().any(|p| p.matches(&t)) {
                budget.tick()?;
                out.push(PartialMatch {
                    binding: mu,
                    matched: BTreeSet::new(),
                    matched_op: [j].into_iter().collect(),
                    support: [t].into_iter().collect(),
                });
            }
        }
    }
    Ok(out)
}

/// All maximal partial matches of the pattern inside `m`. Full matches are
/// included (they are maximal partial matches covering every pattern); filters
/// are not applied. Matches of optional patterns alone have `matched` empty.
pub fn enumerate_partial_matches(
    b: &Bgp,
    op: &Ogp,
    m: &Graph,
    limits: &MatchLimits,
) -> Result<Vec<PartialMatch>, MatchError> {
    let ig = IndexedGraph::from_graph(m);
    enumerate_in(b, op, &ig, &mut Budget::new(limits))
}

/// Changeset triples sorted by how much of the pattern they can match.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidateTuple {
    /// `c[k]` holds triples whose best partial match covers `n - k` patterns.
    pub c: Vec<Graph>,
    /// Triples matching optional patterns only.
    pub c_op: Graph,
    pub witnesses: Vec<PartialMatch>,
}

impl CandidateTuple {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Every classified triple.
    pub fn all(&self) -> Graph {
        let mut g = self.c_op.clone();
        for ck in &self.c {
            g.extend_from(ck);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.c.iter().map(Graph::len).sum::<usize>() + self.c_op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Some(k)` for triples in `c[k]`, `None` for optional-only or unclassified triples.
    pub fn level(&self, t: &Triple) -> Option<usize> {
        self.c.iter().position(|g| g.contains(t))
    }
}

pub fn generate_candidates(
    i: &InterestExpression,
    m: &Graph,
    limits: &MatchLimits,
) -> Result<CandidateTuple, MatchError> {
    let ig = IndexedGraph::from_graph(m);
    generate_candidates_in(i, &ig, &mut Budget::new(limits))
}

fn generate_candidates_in(
    i: &InterestExpression,
    m: &dyn TripleSource,
    budget: &mut Budget,
) -> Result<CandidateTuple, MatchError> {
    let n = i.bgp.len();
    let witnesses = enumerate_in(&i.bgp, &i.ogp, m, budget)?;
    let mut best: HashMap<Triple, usize> = HashMap::new();
    for w in &witnesses {
        for &j in &w.matched {
            if let Some(t) = ground(&i.bgp.patterns[j], &w.binding) {
                let e = best.entry(t).or_insert(0);
                *e = (*e).max(w.matched.len());
            }
        }
    }
    let mut c = vec![Graph::new(); n];
    let mut c_op = Graph::new();
    for (t, cover) in best {
        c[n - cover].insert(t);
    }
    for w in witnesses.iter().filter(|w| w.matched.is_empty()) {
        c_op.extend_from(&w.support);
    }
    Ok(CandidateTuple { c, c_op, witnesses })
}

/// One solution of the interest over some context: a basic-pattern match that
/// passes the filters, optionally extended by a full match of the optional group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FullMatch {
    pub binding: Binding,
    pub extended: bool,
    pub triples: Vec<Triple>,
}

impl FullMatch {
    fn new(i: &InterestExpression, binding: Binding, extended: bool) -> Self {
        let pats: Vec<&TriplePattern> = if extended { i.all_patterns().collect() } else { i.bgp.patterns.iter().collect() };
        let mut triples: Vec<Triple> = pats.into_iter().filter_map(|p| ground(p, &binding)).collect();
        triples.sort();
        triples.dedup();
        FullMatch { binding, extended, triples }
    }
}

/// Where a seed triple sits in the interest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Bgp(usize),
    Opt(usize),
}

struct Search<'a> {
    i: &'a InterestExpression,
    ctx: &'a dyn TripleSource,
    budget: &'a mut Budget,
    /// Every context triple bound during the search.
    touched: Vec<Triple>,
}

impl Search<'_> {
    /// All extensions of `mu` matching every pattern in `pats`.
    fn join(&mut self, pats: &[&TriplePattern], mu: Binding, out: &mut Vec<Binding>) -> Result<(), MatchError> {
        if pats.is_empty() {
            out.push(mu);
            return Ok(());
        }
        // Most constrained pattern first.
        let bound = |p: &TriplePattern| p.positions().iter().filter(|pt| pt.resolve(&mu).is_some()).count();
        let (next, _) = pats.iter().enumerate().max_by_key(|(k, p)| (bound(p), usize::MAX - k)).unwrap();
        let rest: Vec<&TriplePattern> = pats.iter().enumerate().filter(|(k, _)| *k != next).map(|(_, p)| *p).collect();
        for (t, ext) in self.ctx.match_pattern(pats[next], &mu) {
            self.budget.tick()?;
            self.touched.push(t);
            self.join(&rest, ext, out)?;
        }
        Ok(())
    }

    /// Full matches containing `t` at `slot`, or all full matches when `seed` is `None`.
    fn full_matches(&mut self, seed: Option<(Slot, &Triple)>) -> Result<Vec<FullMatch>, MatchError> {
        let i = self.i;
        let bgp_vars = i.bgp.variables();
        let (start, bgp_rest, opt_rest): (Binding, Vec<&TriplePattern>, Vec<&TriplePattern>) = match seed {
            None => (Binding::new(), i.bgp.patterns.iter().collect(), i.ogp.patterns.iter().collect()),
            Some((Slot::Bgp(j), t)) => match i.bgp.patterns[j].unify(t, &Binding::new()) {
                Some(mu) => (
                    mu,
                    i.bgp.patterns.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, p)| p).collect(),
                    i.ogp.patterns.iter().collect(),
                ),
                None => return Ok(Vec::new()),
            },
            Some((Slot::Opt(j), t)) => match i.ogp.patterns[j].unify(t, &Binding::new()) {
                Some(mu) => (
                    mu,
                    i.bgp.patterns.iter().collect(),
                    i.ogp.patterns.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, p)| p).collect(),
                ),
                None => return Ok(Vec::new()),
            },
        };
        let seeded_in_optional = matches!(seed, Some((Slot::Opt(_), _)));
        let mut bases = Vec::new();
        self.join(&bgp_rest, start, &mut bases)?;
        let mut out = Vec::new();
        for mu in bases {
            let base = mu.project(&bgp_vars);
            if !i.bgp.accepts(&base) {
                continue;
            }
            if !seeded_in_optional {
                out.push(FullMatch::new(i, base, false));
                if i.ogp.is_empty() {
                    continue;
                }
            }
            let mut extensions = Vec::new();
            self.join(&opt_rest, mu, &mut extensions)?;
            for ext in extensions {
                if i.ogp.accepts(&ext) {
                    out.push(FullMatch::new(i, ext, true));
                }
            }
        }
        Ok(out)
    }

    /// Full matches through `t` at any pattern it fits.
    fn full_matches_through(&mut self, t: &Triple) -> Result<Vec<FullMatch>, MatchError> {
        let i = self.i;
        let mut out = Vec::new();
        for (j, p) in i.bgp.patterns.iter().enumerate() {
            if p.matches(t) {
                out.extend(self.full_matches(Some((Slot::Bgp(j), t)))?);
            }
        }
        for (j, p) in i.ogp.patterns.iter().enumerate() {
            if p.matches(t) {
                out.extend(self.full_matches(Some((Slot::Opt(j), t)))?);
            }
        }
        Ok(out)
    }
}

/// Every full match of the interest inside `g`.
pub fn full_matches(
    i: &InterestExpression,
    g: &dyn TripleSource,
    limits: &MatchLimits,
) -> Result<Vec<FullMatch>, MatchError> {
    let mut budget = Budget::new(limits);
    Search { i, ctx: g, budget: &mut budget, touched: Vec::new() }.full_matches(None)
}

/// Every full match of the interest inside `ctx` that contains `t`.
pub fn full_matches_through(
    i: &InterestExpression,
    ctx: &dyn TripleSource,
    t: &Triple,
    limits: &MatchLimits,
) -> Result<Vec<FullMatch>, MatchError> {
    let mut budget = Budget::new(limits);
    Search { i, ctx, budget: &mut budget, touched: Vec::new() }.full_matches_through(t)
}

/// A full match found during assertion, split into its changeset part and the
/// part fetched from the target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub witness: PartialMatch,
    pub completion: Graph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssertionTuple {
    /// `c_prime[k]` completes candidates of `c[n - k]` for `0 < k < n`;
    /// `c_prime[0]` completes optional-only candidates.
    pub c_prime: Vec<Graph>,
    /// Optional-pattern completions of candidates that already match the whole BGP.
    pub c_prime_op: Graph,
    pub completed: Vec<Completion>,
    pub witnesses: Vec<PartialMatch>,
    /// Candidates that lie in at least one full match.
    pub asserted: Graph,
    /// Target triples visited while searching for candidates that found no full match.
    pub related: Graph,
    /// Completions dropped by the audit; always zero unless the engine is broken.
    pub audit_failures: usize,
}

impl AssertionTuple {
    /// All triples of all completed matches.
    pub fn matched(&self) -> Graph {
        let mut g = Graph::new();
        for c in &self.completed {
            g.extend_from(&c.witness.support);
            g.extend_from(&c.completion);
        }
        g
    }
}

/// Re-checks a completion: its support and completion must contain the whole
/// match under its binding, the filters must pass, and completions must come
/// from the target.
fn audit(i: &InterestExpression, c: &Completion, target: &dyn TripleSource) -> bool {
    let w = &c.witness;
    let has = |t: &Triple| w.support.contains(t) || c.completion.contains(t);
    let base = w.binding.project(&i.bgp.variables());
    let bgp_ok = i.bgp.patterns.iter().all(|p| ground(p, &w.binding).is_some_and(|t| has(&t))) && i.bgp.accepts(&base);
    let opt_ok = w.matched_op.is_empty()
        || (i.ogp.patterns.iter().all(|p| ground(p, &w.binding).is_some_and(|t| has(&t))) && i.ogp.accepts(&w.binding));
    bgp_ok && opt_ok && c.completion.iter().all(|t| target.contains(t))
}

/// Looks up, in the target, the triples that turn candidates into full matches.
/// A full match may combine any candidates with any target triples.
pub fn assert_candidates(
    i: &InterestExpression,
    ct: &CandidateTuple,
    target: &dyn TripleSource,
    limits: &MatchLimits,
) -> Result<AssertionTuple, MatchError> {
    let n = ct.n();
    let m = IndexedGraph::from_graph(&ct.all());
    let ctx = Overlay::new(vec![&m, target]);
    let mut budget = Budget::new(limits);
    let mut search = Search { i, ctx: &ctx, budget: &mut budget, touched: Vec::new() };
    let mut out = AssertionTuple {
        c_prime: vec![Graph::new(); n],
        witnesses: ct.witnesses.clone(),
        ..AssertionTuple::default()
    };
    let mut seen: HashSet<(bool, Binding)> = HashSet::new();
    let candidates = ct.c.iter().enumerate().flat_map(|(k, g)| g.iter().map(move |t| (Some(k), t)));
    let candidates = candidates.chain(ct.c_op.iter().map(|t| (None, t)));
    for (level, t) in candidates {
        search.touched.clear();
        let found = search.full_matches_through(t)?;
        if found.is_empty() {
            out.related.extend(search.touched.drain(..).filter(|u| !m.contains(u)));
            continue;
        }
        out.asserted.insert(t.clone());
        let slot = match level {
            Some(0) => &mut out.c_prime_op,
            Some(k) => &mut out.c_prime[n - k],
            None => &mut out.c_prime[0],
        };
        for fm in &found {
            slot.extend(fm.triples.iter().filter(|u| !m.contains(u)).cloned());
        }
        for fm in found {
            if !seen.insert((fm.extended, fm.binding.clone())) {
                continue;
            }
            let (support, completion): (Vec<Triple>, Vec<Triple>) = fm.triples.into_iter().partition(|u| m.contains(u));
            let bgp_idx = (0..i.bgp.len()).collect();
            let op_idx = if fm.extended { (0..i.ogp.len()).collect() } else { BTreeSet::new() };
            let c = Completion {
                witness: PartialMatch {
                    binding: fm.binding,
                    matched: bgp_idx,
                    matched_op: op_idx,
                    support: support.into_iter().collect(),
                },
                completion: completion.into_iter().collect(),
            };
            if audit(i, &c, target) {
                out.completed.push(c);
            } else {
                log::error!("dropping a completion that failed the post-assertion audit");
                out.audit_failures += 1;
            }
        }
    }
    Ok(out)
}

/// The slice of `g`: every triple in some full match.
pub fn slice_of(i: &InterestExpression, g: &dyn TripleSource, limits: &MatchLimits) -> Result<Graph, MatchError> {
    Ok(full_matches(i, g, limits)?.into_iter().flat_map(|fm| fm.triples).collect())
}

/// Triples of `g` matching at least one pattern of the interest.
pub fn relevant_triples(i: &InterestExpression, g: &dyn TripleSource) -> Graph {
    let mut out = Graph::new();
    for p in i.all_patterns() {
        out.extend(g.match_pattern(p, &Binding::new()).into_iter().map(|(t, _)| t));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::parse_interest;
    use crate::rdf::{parse_ntriples_str, Literal, RDF_TYPE};

    const INTEREST: &str = include_str!("../tests/fixtures/running_example/interest.rq");
    const REMOVED: &str = include_str!("../tests/fixtures/running_example/000001.removed.nt");
    const ADDED: &str = include_str!("../tests/fixtures/running_example/000001.added.nt");
    const TARGET: &str = include_str!("../tests/fixtures/running_example/target_t0.nt");

    const DBR: &str = "http://dbpedia.org/resource/";
    const ATHLETE: &str = "http://dbpedia.org/ontology/Athlete";
    const GOALS: &str = "http://dbpedia.org/property/goals";
    const HOMEPAGE: &str = "http://xmlns.com/foaf/0.1/homepage";

    fn t(s: &str, p: &str, o: Term) -> Triple {
        Triple::new(Term::iri(format!("{DBR}{s}")), Term::iri(p), o).unwrap()
    }

    fn typed(s: &str) -> Triple {
        t(s, RDF_TYPE, Term::iri(ATHLETE))
    }

    fn goals(s: &str, v: i64) -> Triple {
        t(s, GOALS, Term::literal(Literal::integer(v)))
    }

    fn g<const N: usize>(ts: [Triple; N]) -> Graph {
        ts.into_iter().collect()
    }

    fn setup() -> (InterestExpression, Graph, Graph, Graph) {
        (
            parse_interest(INTEREST).unwrap(),
            parse_ntriples_str(REMOVED).unwrap(),
            parse_ntriples_str(ADDED).unwrap(),
            parse_ntriples_str(TARGET).unwrap(),
        )
    }

    #[test]
    fn rio_is_a_full_match() {
        let (i, _, added, _) = setup();
        let pms = enumerate_partial_matches(&i.bgp, &i.ogp, &added, &MatchLimits::default()).unwrap();
        let rio = pms.iter().find(|pm| pm.is_full(2)).expect("a full match");
        assert_eq!(rio.binding.get(&"a".into()), Some(&Term::iri(format!("{DBR}Rio_Ferdinand"))));
        assert_eq!(rio.binding.get(&"goals".into()), Some(&Term::literal(Literal::integer(2))));
        assert!(enumerate_partial_matches(&i.bgp, &i.ogp, &Graph::new(), &MatchLimits::default()).unwrap().is_empty());
    }

    #[test]
    fn candidates_of_removed() {
        let (i, removed, _, _) = setup();
        let ct = generate_candidates(&i, &removed, &MatchLimits::default()).unwrap();
        assert!(ct.c[0].is_empty());
        assert_eq!(ct.c[1], g([goals("Marcel", 1), goals("Cristiano_Ronaldo", 96)]));
        assert!(ct.c_op.is_empty());
    }

    #[test]
    fn candidates_of_added() {
        let (i, _, added, _) = setup();
        let ct = generate_candidates(&i, &added, &MatchLimits::default()).unwrap();
        assert_eq!(ct.c[0], g([typed("Rio_Ferdinand"), goals("Rio_Ferdinand", 2)]));
        assert_eq!(ct.c[1], g([goals("Cristiano_Ronaldo", 216), typed("Arvid_Smit")]));
        assert_eq!(
            ct.c_op,
            g([t("Barack_Obama", HOMEPAGE, Term::literal(Literal::plain("http://www.barackobama.com/")))])
        );
    }

    #[test]
    fn empty_inputs() {
        let (i, _, _, target) = setup();
        let ct = generate_candidates(&i, &Graph::new(), &MatchLimits::default()).unwrap();
        assert!(ct.is_empty());
        let (_, removed, _, _) = setup();
        let ct = generate_candidates(&i, &removed, &MatchLimits::default()).unwrap();
        let at = assert_candidates(&i, &ct, &Graph::new(), &MatchLimits::default()).unwrap();
        assert!(at.c_prime.iter().all(Graph::is_empty) && at.c_prime_op.is_empty());
        assert!(at.completed.is_empty());
        let _ = target;
    }

    fn ronaldo_page() -> Triple {
        t("Cristiano_Ronaldo", HOMEPAGE, Term::literal(Literal::plain("http://cristianoronaldo.com")))
    }

    #[test]
    fn assertion_of_removed() {
        let (i, removed, _, target) = setup();
        let ct = generate_candidates(&i, &removed, &MatchLimits::default()).unwrap();
        let at = assert_candidates(&i, &ct, &target, &MatchLimits::default()).unwrap();
        assert_eq!(at.c_prime[1], g([typed("Marcel"), typed("Cristiano_Ronaldo"), ronaldo_page()]));
        assert!(at.c_prime[0].is_empty() && at.c_prime_op.is_empty());
        assert_eq!(at.audit_failures, 0);
    }

    #[test]
    fn assertion_of_added() {
        let (i, removed, added, target) = setup();
        let view = Overlay::new(vec![&target]).without(&removed);
        let ct = generate_candidates(&i, &added, &MatchLimits::default()).unwrap();
        let at = assert_candidates(&i, &ct, &view, &MatchLimits::default()).unwrap();
        assert_eq!(at.c_prime[1], g([typed("Cristiano_Ronaldo"), ronaldo_page()]));
        assert!(at.c_prime[0].is_empty() && at.c_prime_op.is_empty());
        assert!(at.related.is_empty());
    }

    #[test]
    fn sub_witness_completion() {
        // The largest partial match binds a team without a label; a smaller
        // one completes through the target.
        let i = parse_interest("{ ?a a <A> . ?a <team> ?t . ?t <label> ?l }").unwrap();
        let x = |s: &str| Term::iri(s);
        let m: Graph = [
            Triple::new(x("p"), x(RDF_TYPE), x("A")).unwrap(),
            Triple::new(x("p"), x("team"), x("t1")).unwrap(),
        ]
        .into_iter()
        .collect();
        let target: Graph = [
            Triple::new(x("p"), x("team"), x("t2")).unwrap(),
            Triple::new(x("t2"), x("label"), Term::literal(Literal::plain("T2"))).unwrap(),
        ]
        .into_iter()
        .collect();
        let ct = generate_candidates(&i, &m, &MatchLimits::default()).unwrap();
        let at = assert_candidates(&i, &ct, &target, &MatchLimits::default()).unwrap();
        assert!(at.asserted.contains(&Triple::new(x("p"), x(RDF_TYPE), x("A")).unwrap()));
        assert!(!at.asserted.contains(&Triple::new(x("p"), x("team"), x("t1")).unwrap()));
    }

    #[test]
    fn resource_limit() {
        let i = parse_interest("{ ?a <p> ?b . ?b <p> ?c }").unwrap();
        let m: Graph = (0..30)
            .flat_map(|k| (0..30).map(move |j| (k, j)))
            .map(|(k, j)| Triple::new(Term::iri(format!("n{k}")), Term::iri("p"), Term::iri(format!("n{j}"))).unwrap())
            .collect();
        let err = generate_candidates(&i, &m, &MatchLimits { max_partial_matches: 1000 }).unwrap_err();
        assert_eq!(err, MatchError::ResourceLimit(1000));
    }

    #[test]
    fn slice_of_target() {
        let (i, _, _, target) = setup();
        assert_eq!(slice_of(&i, &target, &MatchLimits::default()).unwrap(), target);
        assert!(slice_of(&i, &Graph::new(), &MatchLimits::default()).unwrap().is_empty());
    }
}
