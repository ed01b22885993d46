//! Reference machinery for checking the replica: a full mirror, a naive slice,
//! set comparison, and a seeded generator of entity-centric workloads.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::changeset_io::{publish_changeset, ChangesetRef, SequenceKey};
use crate::pattern::{
    Bgp, Binding, CompareOp, FilterExpr, InterestExpression, Operand, PatternTerm, TriplePattern, Variable,
};
use crate::rdf::{serialize_ntriples, Changeset, Graph, Literal, Term, Triple, RDF_TYPE};
use crate::store::write_atomically;

/// Folds each changeset over `dump`: removals first, then additions.
pub fn mirror_apply<'a>(dump: &Graph, changesets: impl IntoIterator<Item = &'a Changeset>) -> Graph {
    let mut v = dump.clone();
    for cs in changesets {
        v = v.difference(&cs.removed).union(&cs.added);
    }
    v
}

type Assignment = HashMap<Variable, Term>;

fn bind(tp: &TriplePattern, t: &Triple, mu: &Assignment) -> Option<Assignment> {
    let mut out = mu.clone();
    for (pt, term) in [&tp.subject, &tp.predicate, &tp.object].into_iter().zip([t.subject(), t.predicate(), t.object()]) {
        match pt {
            PatternTerm::Term(c) if c != term => return None,
            PatternTerm::Term(_) => {}
            PatternTerm::Var(v) => match out.get(v) {
                Some(b) if b != term => return None,
                Some(_) => {}
                None => {
                    out.insert(v.clone(), term.clone());
                }
            },
        }
    }
    Some(out)
}

/// Nested loops over `g`, one level per pattern in declared order.
fn solutions(pats: &[TriplePattern], g: &Graph, start: Assignment, out: &mut Vec<(Assignment, Vec<Triple>)>) {
    fn go(pats: &[TriplePattern], g: &Graph, mu: Assignment, used: Vec<Triple>, out: &mut Vec<(Assignment, Vec<Triple>)>) {
        let Some((first, rest)) = pats.split_first() else {
            out.push((mu, used));
            return;
        };
        for t in g {
            if let Some(next) = bind(first, t, &mu) {
                let mut u = used.clone();
                u.push(t.clone());
                go(rest, g, next, u, out);
            }
        }
    }
    go(pats, g, start, Vec::new(), out);
}

fn to_binding(mu: &Assignment) -> Binding {
    let mut b = Binding::new();
    for (v, t) in mu {
        b.insert(v.clone(), t.clone());
    }
    b
}

/// Every triple in some full match of `i` over `v`, by exhaustive search.
pub fn slice(i: &InterestExpression, v: &Graph) -> Graph {
    let mut out = Graph::new();
    let mut bgp_solutions = Vec::new();
    solutions(&i.bgp.patterns, v, Assignment::new(), &mut bgp_solutions);
    for (mu, used) in bgp_solutions {
        if !i.bgp.filters.iter().all(|f| crate::pattern::eval_filter(f, &to_binding(&mu))) {
            continue;
        }
        out.extend(used);
        if i.ogp.patterns.is_empty() {
            continue;
        }
        let mut ext = Vec::new();
        solutions(&i.ogp.patterns, v, mu, &mut ext);
        for (nu, used) in ext {
            if i.ogp.filters.iter().all(|f| crate::pattern::eval_filter(f, &to_binding(&nu))) {
                out.extend(used);
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Comparison {
    pub missing: Graph,
    pub extra: Graph,
}

impl Comparison {
    pub fn equal(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

pub fn compare(target: &Graph, expected: &Graph) -> Comparison {
    Comparison { missing: expected.difference(target), extra: target.difference(expected) }
}

pub const NS: &str = "http://example.org/";
const NOISE_NS: &str = "http://example.org/noise/";

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadParams {
    pub athletes: usize,
    pub teams: usize,
    pub cities: usize,
    pub changesets: usize,
    /// Upper bound on removed plus added triples per changeset.
    pub max_changeset_triples: usize,
    /// Share of changeset traffic that never touches the interest vocabulary.
    pub noise_fraction: f64,
    /// Distinct values per numeric attribute.
    pub value_range: i64,
    pub interests: usize,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            athletes: 40,
            teams: 8,
            cities: 6,
            changesets: 20,
            max_changeset_triples: 200,
            noise_fraction: 0.3,
            value_range: 40,
            interests: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub seed: u64,
    pub params: WorkloadParams,
    pub dump: Graph,
    pub changesets: Vec<Changeset>,
    pub interests: Vec<InterestExpression>,
}

fn iri(local: &str) -> Term {
    Term::iri(format!("{NS}{local}"))
}

fn triple(s: &Term, p: &str, o: Term) -> Triple {
    let p = if p == "a" { Term::iri(RDF_TYPE) } else { iri(p) };
    Triple::new(s.clone(), p, o).expect("generator emits IRI subjects and predicates")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Athlete,
    Team,
    City,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Athlete => "Athlete",
            Kind::Team => "Team",
            Kind::City => "City",
        }
    }
}

/// (predicate, range) per kind; `None` marks a literal attribute.
fn schema(kind: Kind) -> &'static [(&'static str, Option<Kind>)] {
    match kind {
        Kind::Athlete => &[("name", None), ("goals", None), ("team", Some(Kind::Team)), ("birthPlace", Some(Kind::City)), ("homepage", None)],
        Kind::Team => &[("name", None), ("city", Some(Kind::City)), ("founded", None)],
        Kind::City => &[("name", None), ("population", None)],
    }
}

struct Generator<'a> {
    rng: ChaCha8Rng,
    p: &'a WorkloadParams,
    next_entity: usize,
    next_noise: usize,
}

impl Generator<'_> {
    fn entity(&self, kind: Kind, k: usize) -> Term {
        iri(&format!("{}{k}", kind.name().to_lowercase()))
    }

    fn count(&self, kind: Kind) -> usize {
        match kind {
            Kind::Athlete => self.p.athletes,
            Kind::Team => self.p.teams,
            Kind::City => self.p.cities,
        }
    }

    fn value(&mut self, kind: Kind, pred: &str, range: Option<Kind>) -> Term {
        if let Some(r) = range {
            let k = self.rng.gen_range(0..self.count(r).max(1));
            return self.entity(r, k);
        }
        let v = self.rng.gen_range(0..self.p.value_range.max(1));
        match pred {
            "name" => Term::literal(Literal::plain(format!("{}{v}", kind.name().to_lowercase()))),
            "homepage" => Term::iri(format!("http://www.example.com/{v}")),
            _ => Term::literal(Literal::integer(v)),
        }
    }

    fn describe(&mut self, kind: Kind, s: &Term) -> Vec<Triple> {
        let mut out = vec![triple(s, "a", iri(kind.name()))];
        for &(pred, range) in schema(kind) {
            // Some attributes are absent; a few are multi-valued.
            let n = match self.rng.gen_range(0..10) {
                0 => 0,
                9 => 2,
                _ => 1,
            };
            for _ in 0..n {
                let o = self.value(kind, pred, range);
                out.push(triple(s, pred, o));
            }
        }
        out
    }

    fn noise_triple(&mut self) -> Triple {
        self.next_noise += 1;
        let s = Term::iri(format!("{NOISE_NS}s{}", self.rng.gen_range(0..200)));
        let p = Term::iri(format!("{NOISE_NS}p{}", self.rng.gen_range(0..6)));
        let o = Term::literal(Literal::plain(format!("n{}", self.next_noise)));
        Triple::new(s, p, o).expect("IRI subject and predicate")
    }

    fn kind(&mut self) -> Kind {
        *[Kind::Athlete, Kind::Athlete, Kind::Team, Kind::City].choose(&mut self.rng).expect("non-empty")
    }

    fn fresh_entity(&mut self, kind: Kind) -> Term {
        self.next_entity += 1;
        self.entity(kind, self.count(kind) + self.next_entity)
    }
}

fn subject_kind(t: &Triple) -> Option<Kind> {
    let Term::Iri(s) = t.subject() else { return None };
    let local = s.strip_prefix(NS)?;
    [Kind::Athlete, Kind::Team, Kind::City].into_iter().find(|k| local.starts_with(&k.name().to_lowercase()))
}

/// Deterministic in `seed` and `params`.
pub fn generate_workload(seed: u64, params: &WorkloadParams) -> Workload {
    let mut g = Generator { rng: ChaCha8Rng::seed_from_u64(seed), p: params, next_entity: 0, next_noise: 0 };
    let mut dump = Graph::new();
    for kind in [Kind::Athlete, Kind::Team, Kind::City] {
        for k in 0..g.count(kind) {
            let s = g.entity(kind, k);
            dump.extend(g.describe(kind, &s));
        }
    }
    for _ in 0..(dump.len() as f64 * params.noise_fraction) as usize {
        let t = g.noise_triple();
        dump.insert(t);
    }

    let mut mirror = dump.clone();
    // Parts of entity additions and deletions still to be published.
    let mut pending_add: Vec<Vec<Triple>> = Vec::new();
    let mut pending_del: Vec<Vec<Triple>> = Vec::new();
    let mut changesets = Vec::with_capacity(params.changesets);
    let budget = params.max_changeset_triples.max(2);
    for _ in 0..params.changesets {
        let mut removed = Graph::new();
        let mut added = Graph::new();
        let size = g.rng.gen_range(1..=budget);
        let noise_share = (size as f64 * params.noise_fraction).round() as usize;
        let entity_share = size - noise_share;
        let mut spent = 0;
        if let Some(part) = pending_add.pop() {
            spent += part.len();
            added.extend(part);
        }
        if let Some(part) = pending_del.pop() {
            spent += part.len();
            removed.extend(part);
        }
        while spent < entity_share {
            let entity_triples: Vec<Triple> = mirror.iter().filter(|t| subject_kind(t).is_some()).cloned().collect();
            match g.rng.gen_range(0..10) {
                // Attribute update: old value out, new value in.
                0..=4 if !entity_triples.is_empty() => {
                    let old = entity_triples.choose(&mut g.rng).expect("non-empty").clone();
                    let kind = subject_kind(&old).expect("entity");
                    let pred = old.predicate().to_string();
                    let local = pred.trim_start_matches('<').trim_end_matches('>').strip_prefix(NS).unwrap_or("").to_string();
                    removed.insert(old.clone());
                    if let Some(&(p, range)) = schema(kind).iter().find(|(p, _)| *p == local) {
                        let o = g.value(kind, p, range);
                        added.insert(triple(old.subject(), p, o));
                    }
                    spent += 2;
                }
                // A new entity, published in up to three parts.
                5 | 6 => {
                    let kind = g.kind();
                    let s = g.fresh_entity(kind);
                    let mut ts = g.describe(kind, &s);
                    ts.shuffle(&mut g.rng);
                    spent += ts.len();
                    let parts = g.rng.gen_range(1..=3usize).min(ts.len());
                    let chunk = ts.len().div_ceil(parts);
                    let mut chunks: Vec<Vec<Triple>> = ts.chunks(chunk).map(<[Triple]>::to_vec).collect();
                    added.extend(chunks.remove(0));
                    pending_add.extend(chunks);
                }
                // An entity removed across up to two changesets.
                7 if !entity_triples.is_empty() => {
                    let s = entity_triples.choose(&mut g.rng).expect("non-empty").subject().clone();
                    let mut ts: Vec<Triple> = mirror.iter().filter(|t| t.subject() == &s).cloned().collect();
                    ts.shuffle(&mut g.rng);
                    spent += ts.len();
                    let half = ts.len().div_ceil(2);
                    pending_del.push(ts.split_off(half));
                    removed.extend(ts);
                }
                // Redundant operations the publisher is known to emit.
                8 => {
                    if let Some(t) = entity_triples.choose(&mut g.rng) {
                        added.insert(t.clone());
                    }
                    let kind = g.kind();
                    let k = g.rng.gen_range(0..g.count(kind).max(1));
                    let s = g.entity(kind, k);
                    let phantom = g.describe(kind, &s).pop().expect("type triple");
                    if !mirror.contains(&phantom) {
                        removed.insert(phantom);
                    }
                    spent += 2;
                }
                _ => {
                    let kind = g.kind();
                    let k = g.rng.gen_range(0..g.count(kind).max(1));
                    let s = g.entity(kind, k);
                    let &(p, range) = schema(kind).choose(&mut g.rng).expect("non-empty schema");
                    let o = g.value(kind, p, range);
                    added.insert(triple(&s, p, o));
                    spent += 1;
                }
            }
        }
        let noise: Vec<Triple> = mirror.iter().filter(|t| subject_kind(t).is_none()).cloned().collect();
        for _ in 0..noise_share {
            if !noise.is_empty() && g.rng.gen_bool(0.3) {
                removed.insert(noise.choose(&mut g.rng).expect("non-empty").clone());
            } else {
                let t = g.noise_triple();
                added.insert(t);
            }
        }
        let cs = Changeset::new(removed, added);
        mirror = mirror_apply(&mirror, [&cs]);
        changesets.push(cs);
    }

    let interests = (0..params.interests).map(|k| random_interest(&mut g.rng, &format!("i{k}"), params.value_range)).collect();
    Workload { seed, params: params.clone(), dump, changesets, interests }
}

/// A connected interest of 2 to 4 basic patterns rooted at a typed entity,
/// with at most one optional pattern and at most one filter.
pub fn random_interest(rng: &mut impl Rng, id: &str, value_range: i64) -> InterestExpression {
    let n = rng.gen_range(2..=4usize);
    let root = *[Kind::Athlete, Kind::Athlete, Kind::Team, Kind::City].choose(rng).expect("non-empty");
    let var = |k: usize| PatternTerm::var(&format!("v{k}"));
    let mut patterns = vec![TriplePattern::new(var(0), PatternTerm::Term(Term::iri(RDF_TYPE)), PatternTerm::Term(iri(root.name())))
        .expect("valid pattern")];
    // Entity variables that can be extended, with their kinds.
    let mut frontier = vec![(0usize, root)];
    let mut next_var = 1;
    let mut numeric_vars: Vec<(usize, bool)> = Vec::new();
    let mut string_vars: Vec<(usize, bool)> = Vec::new();
    let mut add_pattern = |rng: &mut dyn rand::RngCore, optional: bool, frontier: &mut Vec<(usize, Kind)>| {
        let &(v, kind) = frontier.choose(rng).expect("non-empty frontier");
        let &(pred, range) = schema(kind).choose(rng).expect("non-empty schema");
        let o = next_var;
        next_var += 1;
        let object = if range.is_none() && !optional && rng.gen_bool(0.15) {
            // A constant object makes the interest selective.
            PatternTerm::Term(Generator::constant(rng, kind, pred, value_range))
        } else {
            var(o)
        };
        if let (Some(r), PatternTerm::Var(_)) = (range, &object) {
            if !optional {
                frontier.push((o, r));
            }
        }
        if object.as_var().is_some() && range.is_none() {
            match pred {
                "name" => string_vars.push((o, optional)),
                "homepage" => {}
                _ => numeric_vars.push((o, optional)),
            }
        }
        TriplePattern::new(var(v), PatternTerm::Term(iri(pred)), object).expect("valid pattern")
    };
    while patterns.len() < n {
        let tp = add_pattern(rng, false, &mut frontier);
        if !patterns.contains(&tp) {
            patterns.push(tp);
        }
    }
    let mut ogp = Bgp::default();
    if rng.gen_bool(0.5) {
        let tp = add_pattern(rng, true, &mut frontier);
        if !patterns.contains(&tp) {
            ogp.patterns.push(tp);
        }
    }
    let mut bgp = Bgp::new(patterns);
    if rng.gen_bool(0.5) {
        let pick_numeric = !numeric_vars.is_empty() && (string_vars.is_empty() || rng.gen_bool(0.6));
        let candidates = if pick_numeric { &numeric_vars } else { &string_vars };
        if let Some(&(v, optional)) = candidates.choose(rng) {
            let var = Operand::Var(Variable::new(format!("v{v}")));
            let f = if pick_numeric {
                let op = *[CompareOp::Gt, CompareOp::Lt, CompareOp::Ge, CompareOp::Ne].choose(rng).expect("non-empty");
                FilterExpr::Compare(op, var, Operand::Const(Term::literal(Literal::integer(rng.gen_range(0..value_range.max(1))))))
            } else {
                let prefix = format!("{}", rng.gen_range(1..10));
                FilterExpr::Contains(var, Operand::Const(Term::literal(Literal::plain(prefix))))
            };
            if optional && ogp.patterns.iter().any(|p| p.variables().any(|w| w.name() == format!("v{v}"))) {
                ogp.filters.push(f);
            } else if !optional {
                bgp.filters.push(f);
            }
        }
    }
    InterestExpression::new(id, bgp, ogp).expect("generated interests are connected")
}

impl Generator<'_> {
    fn constant(rng: &mut dyn rand::RngCore, kind: Kind, pred: &str, value_range: i64) -> Term {
        let v = rng.gen_range(0..value_range.max(1));
        match pred {
            "name" => Term::literal(Literal::plain(format!("{}{v}", kind.name().to_lowercase()))),
            "homepage" => Term::iri(format!("http://www.example.com/{v}")),
            _ => Term::literal(Literal::integer(v)),
        }
    }
}

impl Workload {
    /// `true` if every term of `t` comes from this generator's vocabulary.
    pub fn in_vocabulary(t: &Triple) -> bool {
        let iri_ok = |term: &Term| match term {
            Term::Iri(s) => s.starts_with(NS) || s.starts_with("http://www.example.com/") || &**s == RDF_TYPE,
            Term::Literal(_) => true,
            Term::BlankNode(_) => false,
        };
        t.terms().into_iter().all(iri_ok)
    }

    pub fn mirror(&self) -> Graph {
        mirror_apply(&self.dump, &self.changesets)
    }

    /// Key of the `k`-th changeset (from zero): ten serials per hour folder.
    pub fn key(k: usize) -> SequenceKey {
        let hour = k / 10;
        SequenceKey::new(2014, 10, 2 + (hour / 24) as u8, (hour % 24) as u8, (k % 10) as u32 + 1)
    }

    /// Writes `dump.nt`, one `.rq` file per interest, and the changesets in
    /// folder layout under `root/changesets`.
    pub fn export(&self, root: &Path, gzip: bool) -> io::Result<Vec<ChangesetRef>> {
        std::fs::create_dir_all(root)?;
        write_atomically(&root.join("dump.nt"), serialize_ntriples(&self.dump).as_bytes())?;
        for i in &self.interests {
            write_atomically(&root.join(format!("{}.rq", i.id)), i.to_string().as_bytes())?;
        }
        let cs_root = root.join("changesets");
        self.changesets.iter().enumerate().map(|(k, cs)| publish_changeset(&cs_root, Self::key(k), cs, gzip)).collect()
    }
}
