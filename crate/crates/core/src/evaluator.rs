//! Evaluation of one changeset against one interest, and its propagation into
//! the interest's stores.

use std::time::{Duration, Instant};

use crate::index::{Overlay, TripleSource};
use crate::match_engine::{assert_candidates, full_matches_through, generate_candidates, MatchError, MatchLimits};
use crate::pattern::InterestExpression;
use crate::rdf::{Changeset, Graph};
use crate::store::{InterestStore, StoreError};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeletionResult {
    /// Removed triples that were part of the replica.
    pub r: Graph,
    /// Removed triples that were only ever partial matches.
    pub r_i: Graph,
    /// Target triples left without a full match once `r` is gone.
    pub r_prime: Graph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdditionResult {
    /// Triples of full matches formed with the added or parked triples.
    pub a: Graph,
    /// Added or parked triples still without a full match.
    pub a_i: Graph,
    /// Target triples related to `a_i`. Reported, never applied.
    pub a_prime: Graph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InterestingChangeset {
    pub removed: Graph,
    pub added: Graph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PIChangeset {
    pub removed: Graph,
    pub added: Graph,
}

impl InterestingChangeset {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

impl PIChangeset {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

impl From<InterestingChangeset> for Changeset {
    fn from(ic: InterestingChangeset) -> Self {
        Changeset::new(ic.removed, ic.added)
    }
}

impl From<PIChangeset> for Changeset {
    fn from(pc: PIChangeset) -> Self {
        Changeset::new(pc.removed, pc.added)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub fn evaluate_deletions(
    i: &InterestExpression,
    d: &Graph,
    target: &dyn TripleSource,
    limits: &MatchLimits,
) -> Result<DeletionResult, MatchError> {
    let ct = generate_candidates(i, d, limits)?;
    let at = assert_candidates(i, &ct, target, limits)?;
    let r = at.asserted.clone();
    let r_i = ct.all().difference(&r);
    let mut completions = at.c_prime_op.clone();
    for c in &at.c_prime {
        completions.extend_from(c);
    }
    // A completion triple stays if it still belongs to some other full match.
    let remaining = Overlay::new(vec![target]).without(&r);
    let mut r_prime = Graph::new();
    for u in completions.iter().filter(|u| !r.contains(u)) {
        if full_matches_through(i, &remaining, u, limits)?.is_empty() {
            r_prime.insert(u.clone());
        }
    }
    Ok(DeletionResult { r, r_i, r_prime })
}

pub fn evaluate_additions(
    i: &InterestExpression,
    a_in: &Graph,
    pi: &Graph,
    target: &dyn TripleSource,
    limits: &MatchLimits,
) -> Result<AdditionResult, MatchError> {
    let candidates_in = a_in.union(pi);
    let ct = generate_candidates(i, &candidates_in, limits)?;
    let at = assert_candidates(i, &ct, target, limits)?;
    let a = at.matched();
    let a_i = ct.all().difference(&a);
    Ok(AdditionResult { a, a_i, a_prime: at.related })
}

/// Everything computed for one (interest, changeset) pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evaluation {
    pub deletions: DeletionResult,
    pub additions: AdditionResult,
    pub interesting: InterestingChangeset,
    pub pi: PIChangeset,
}

/// Deletions first, against the target as it was; then additions, combined
/// with the parked triples that survive the deletions, against the target
/// minus the interesting removals.
pub fn evaluate_interest(
    i: &InterestExpression,
    cs: &Changeset,
    target: &dyn TripleSource,
    pi: &Graph,
    limits: &MatchLimits,
) -> Result<Evaluation, MatchError> {
    let deletions = evaluate_deletions(i, &cs.removed, target, limits)?;
    let parked = pi.difference(&cs.removed);
    let after_deletions = Overlay::new(vec![target]).without(&deletions.r);
    let additions = evaluate_additions(i, &cs.added, &parked, &after_deletions, limits)?;
    let interesting = InterestingChangeset {
        removed: deletions.r.union(&deletions.r_prime),
        added: additions.a.clone(),
    };
    // Removed triples leave the parked set too, including those that were
    // fully matched within the removal itself and never reached the target.
    let pi = PIChangeset {
        removed: deletions.r.union(&deletions.r_i).union(&additions.a),
        added: additions.a_i.union(&deletions.r_prime).difference(&additions.a),
    };
    Ok(Evaluation { deletions, additions, interesting, pi })
}

/// Actual effect of one propagation step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropagationReport {
    pub interest: String,
    pub changeset: String,
    pub removed_interesting: usize,
    pub added_interesting: usize,
    pub pi_removed: usize,
    pub pi_added: usize,
    pub wall_time: Duration,
    /// The changeset sent to the target.
    pub interesting: InterestingChangeset,
}

impl PropagationReport {
    /// Tab-separated: interest, changeset, four counts, milliseconds.
    pub fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.interest,
            self.changeset,
            self.removed_interesting,
            self.added_interesting,
            self.pi_removed,
            self.pi_added,
            self.wall_time.as_millis()
        )
    }
}

/// Evaluates `cs` for `i` and commits both changesets to `stores` in one transaction.
pub fn propagate(
    i: &InterestExpression,
    changeset_id: &str,
    cs: &Changeset,
    stores: &mut dyn InterestStore,
    limits: &MatchLimits,
) -> Result<PropagationReport, EvalError> {
    let started = Instant::now();
    let (target, pi) = stores.views(&i.id)?;
    let ev = evaluate_interest(i, cs, target, pi, limits)?;
    let counts = stores.commit(&i.id, &ev.interesting, &ev.pi)?;
    Ok(PropagationReport {
        interest: i.id.clone(),
        changeset: changeset_id.to_string(),
        removed_interesting: counts.target_removed,
        added_interesting: counts.target_added,
        pi_removed: counts.pi_removed,
        pi_added: counts.pi_added,
        wall_time: started.elapsed(),
        interesting: ev.interesting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::parse_interest;
    use crate::rdf::{iri_triple, parse_ntriples_str, Term, Triple};
    use crate::store::MemStores;

    const FIX: &str = "tests/fixtures/running_example";

    fn fixture(name: &str) -> Graph {
        let path = format!("{}/{FIX}/{name}", env!("CARGO_MANIFEST_DIR"));
        parse_ntriples_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn interest() -> InterestExpression {
        parse_interest(include_str!("../tests/fixtures/running_example/interest.rq")).unwrap()
    }

    fn lines(g: &Graph) -> Vec<String> {
        let mut v: Vec<String> = g.iter().map(|t| t.to_string()).collect();
        v.sort();
        v
    }

    #[test]
    fn running_example_deletions() {
        let d = evaluate_deletions(&interest(), &fixture("000001.removed.nt"), &fixture("target_t0.nt"), &MatchLimits::default())
            .unwrap();
        assert_eq!(d.r.len(), 2);
        assert!(d.r_i.is_empty());
        assert_eq!(d.r_prime.len(), 3);
        assert!(d.r_prime.is_subset(&fixture("target_t0.nt")));
    }

    #[test]
    fn running_example_full_cycle() {
        let cs = Changeset::new(fixture("000001.removed.nt"), fixture("000001.added.nt"));
        let target = fixture("target_t0.nt");
        let ev = evaluate_interest(&interest(), &cs, &target, &Graph::new(), &MatchLimits::default()).unwrap();
        assert_eq!(ev.interesting.removed.len(), 5);
        assert_eq!(ev.interesting.added.len(), 5);
        assert_eq!(ev.pi.removed, ev.deletions.r.union(&ev.additions.a));
        assert_eq!(lines(&ev.pi.added), lines(&fixture("expected_pi_t1.nt")));
        assert!(ev.additions.a_prime.is_empty());
        let new_target = Changeset::from(ev.interesting).apply(&target);
        assert_eq!(lines(&new_target), lines(&fixture("expected_target_t1.nt")));
    }

    #[test]
    fn propagate_through_store() {
        let i = interest();
        let mut stores = MemStores::default();
        stores.initialize(&i.id, fixture("target_t0.nt"), Graph::new());
        let cs = Changeset::new(fixture("000001.removed.nt"), fixture("000001.added.nt"));
        let rep = propagate(&i, "2015-02-06-17-000001", &cs, &mut stores, &MatchLimits::default()).unwrap();
        assert_eq!((rep.removed_interesting, rep.added_interesting, rep.pi_removed, rep.pi_added), (5, 5, 0, 3));
        let (t, p) = stores.views(&i.id).unwrap();
        assert_eq!(lines(&t.to_graph()), lines(&fixture("expected_target_t1.nt")));
        assert_eq!(lines(p), lines(&fixture("expected_pi_t1.nt")));
    }

    #[test]
    fn empty_changeset_is_a_no_op() {
        let i = interest();
        let ev = evaluate_interest(&i, &Changeset::default(), &fixture("target_t0.nt"), &Graph::new(), &MatchLimits::default())
            .unwrap();
        assert_eq!(ev, Evaluation::default());
    }

    #[test]
    fn uninteresting_deletions() {
        let d: Graph = [iri_triple("http://x", "http://noise", Term::iri("http://y"))].into_iter().collect();
        let res = evaluate_deletions(&interest(), &d, &fixture("target_t0.nt"), &MatchLimits::default()).unwrap();
        assert_eq!(res, DeletionResult::default());
    }

    #[test]
    fn residue_guard_keeps_shared_support() {
        // Two goals values: deleting one leaves the athlete in the slice.
        let i = parse_interest("{ ?a a <A> . ?a <goals> ?g }").unwrap();
        let ty = iri_triple("p", crate::rdf::RDF_TYPE, Term::iri("A"));
        let g1 = iri_triple("p", "goals", Term::iri("1"));
        let g2 = iri_triple("p", "goals", Term::iri("2"));
        let target: Graph = [ty.clone(), g1.clone(), g2].into_iter().collect();
        let d: Graph = [g1.clone()].into_iter().collect();
        let res = evaluate_deletions(&i, &d, &target, &MatchLimits::default()).unwrap();
        assert_eq!(res.r, d);
        assert!(res.r_prime.is_empty());
    }

    #[test]
    fn parked_partial_match_is_promoted() {
        let i = parse_interest("{ ?a a <A> . ?a <goals> ?g }").unwrap();
        let ty = iri_triple("p", crate::rdf::RDF_TYPE, Term::iri("A"));
        let goals = iri_triple("p", "goals", Term::iri("1"));
        let mut stores = MemStores::default();
        stores.initialize(&i.id, Graph::new(), Graph::new());
        let step = |stores: &mut MemStores, t: &Triple| {
            let cs = Changeset::new(Graph::new(), [t.clone()].into_iter().collect());
            propagate(&i, "k", &cs, stores, &MatchLimits::default()).unwrap()
        };
        step(&mut stores, &goals);
        assert_eq!(stores.views(&i.id).unwrap().1.len(), 1);
        step(&mut stores, &ty);
        let (t, p) = stores.views(&i.id).unwrap();
        assert_eq!(t.len(), 2);
        assert!(p.is_empty());
    }

    #[test]
    fn parked_triple_removed_inside_a_full_match_leaves_the_parked_set() {
        // The type triple is parked; the goals triple sits outside the slice.
        let i = parse_interest("{ ?a a <A> . ?a <goals> ?g }").unwrap();
        let ty = iri_triple("p", crate::rdf::RDF_TYPE, Term::iri("A"));
        let goals = iri_triple("p", "goals", Term::iri("1"));
        let mut stores = MemStores::default();
        stores.initialize(&i.id, Graph::new(), [ty.clone()].into_iter().collect());
        let both: Graph = [ty, goals.clone()].into_iter().collect();
        propagate(&i, "k", &Changeset::new(both, Graph::new()), &mut stores, &MatchLimits::default()).unwrap();
        assert!(stores.views(&i.id).unwrap().1.is_empty());
        // A later goals triple must not revive the deleted type triple.
        let cs = Changeset::new(Graph::new(), [iri_triple("p", "goals", Term::iri("2"))].into_iter().collect());
        let rep = propagate(&i, "k2", &cs, &mut stores, &MatchLimits::default()).unwrap();
        assert_eq!(rep.added_interesting, 0);
    }

    #[test]
    fn delete_then_add_same_triple_survives() {
        let i = interest();
        let target = fixture("target_t0.nt");
        let t = target.iter().next().unwrap().clone();
        let one: Graph = [t.clone()].into_iter().collect();
        let ev = evaluate_interest(&i, &Changeset::new(one.clone(), one), &target, &Graph::new(), &MatchLimits::default())
            .unwrap();
        let after = Changeset::from(ev.interesting).apply(&target);
        assert!(after.contains(&t));
        assert_eq!(after, target);
    }
}
