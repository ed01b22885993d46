//! Interest expressions: triple patterns, filters, the textual grammar and the
//! connectivity checks that make an expression well formed.

mod filter;
mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::rdf::{Term, Triple};

pub use filter::{eval_filter, CompareOp, FilterExpr, Operand};
pub use parser::{parse_interest, ParseError};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        Variable(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Variable {
    fn from(name: &str) -> Self {
        Variable::new(name)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    Var(Variable),
    Term(Term),
}

impl PatternTerm {
    pub fn var(name: &str) -> Self {
        PatternTerm::Var(Variable::new(name))
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Term(_) => None,
        }
    }

    /// The term this position is fixed to under `mu`, if any.
    pub fn resolve<'a>(&'a self, mu: &'a Binding) -> Option<&'a Term> {
        match self {
            PatternTerm::Term(t) => Some(t),
            PatternTerm::Var(v) => mu.get(v),
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => v.fmt(f),
            PatternTerm::Term(t) => t.fmt(f),
        }
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Term(t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    /// Fails when the predicate is neither an IRI nor a variable.
    pub fn new(subject: PatternTerm, predicate: PatternTerm, object: PatternTerm) -> Result<Self, ParseError> {
        if let PatternTerm::Term(t) = &predicate {
            if !t.is_iri() {
                return Err(ParseError::Invalid("predicate must be an IRI or a variable".into()));
            }
        }
        if let PatternTerm::Term(Term::Literal(_)) = &subject {
            return Err(ParseError::Invalid("subject cannot be a literal".into()));
        }
        Ok(TriplePattern { subject, predicate, object })
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.positions().into_iter().filter_map(PatternTerm::as_var)
    }

    fn ground_terms(&self) -> impl Iterator<Item = &Term> {
        self.positions().into_iter().filter_map(|p| match p {
            PatternTerm::Term(t) => Some(t),
            PatternTerm::Var(_) => None,
        })
    }

    /// Extends `mu` so that this pattern maps onto `t`, or `None` if impossible.
    /// Repeated variables must bind to the same term.
    pub fn unify(&self, t: &Triple, mu: &Binding) -> Option<Binding> {
        let mut out: Option<Binding> = None;
        for (pt, term) in self.positions().into_iter().zip(t.terms()) {
            match pt {
                PatternTerm::Term(c) => {
                    if c != term {
                        return None;
                    }
                }
                PatternTerm::Var(v) => {
                    let current = out.as_ref().unwrap_or(mu);
                    match current.get(v) {
                        Some(bound) if bound != term => return None,
                        Some(_) => {}
                        None => {
                            out.get_or_insert_with(|| mu.clone()).insert(v.clone(), term.clone());
                        }
                    }
                }
            }
        }
        Some(out.unwrap_or_else(|| mu.clone()))
    }

    /// `true` if `t` matches this pattern on its own.
    pub fn matches(&self, t: &Triple) -> bool {
        self.unify(t, &Binding::default()).is_some()
    }

    /// Two patterns are adjacent when they share a variable or a ground term.
    pub fn shares_with(&self, other: &TriplePattern) -> bool {
        self.variables().any(|v| other.variables().any(|w| v == w))
            || self.ground_terms().any(|t| other.ground_terms().any(|u| t == u))
    }

    pub fn shares_variable_with(&self, other: &TriplePattern) -> bool {
        self.variables().any(|v| other.variables().any(|w| v == w))
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// A solution mapping from variables to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding(BTreeMap<Variable, Term>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn insert(&mut self, v: Variable, t: Term) -> Option<Term> {
        self.0.insert(v, t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    /// Restriction to the given variables.
    pub fn project<'a>(&self, vars: impl IntoIterator<Item = &'a Variable>) -> Binding {
        Binding(vars.into_iter().filter_map(|v| self.0.get(v).map(|t| (v.clone(), t.clone()))).collect())
    }

    /// `true` when the two bindings agree on every shared variable.
    pub fn compatible(&self, other: &Binding) -> bool {
        self.0.iter().all(|(v, t)| other.0.get(v).map_or(true, |u| u == t))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bgp {
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<FilterExpr>,
}

impl Bgp {
    pub fn new(patterns: Vec<TriplePattern>) -> Self {
        Bgp { patterns, filters: Vec::new() }
    }

    pub fn with_filter(mut self, f: FilterExpr) -> Self {
        self.filters.push(f);
        self
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn variables(&self) -> Vec<Variable> {
        let mut vars: Vec<Variable> = self.patterns.iter().flat_map(|p| p.variables().cloned()).collect();
        vars.sort();
        vars.dedup();
        vars
    }

    pub fn accepts(&self, mu: &Binding) -> bool {
        self.filters.iter().all(|f| eval_filter(f, mu))
    }
}

/// The optional group. Its patterns can extend a solution but never reject it.
pub type Ogp = Bgp;

/// Connected components of the pattern graph (patterns linked by a shared
/// variable or ground term), as lists of pattern indices.
pub fn components(patterns: &[TriplePattern]) -> Vec<Vec<usize>> {
    let n = patterns.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if patterns[i].shares_with(&patterns[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// `true` iff the patterns of `b` form a single connected component.
pub fn check_non_disjoint(b: &Bgp) -> bool {
    components(&b.patterns).len() <= 1
}

/// `true` iff every optional pattern reaches the BGP through shared variables,
/// possibly via other optional patterns.
pub fn optional_connected(b: &Bgp, op: &Ogp) -> bool {
    let mut reached: Vec<bool> = op
        .patterns
        .iter()
        .map(|p| b.patterns.iter().any(|q| p.shares_variable_with(q)))
        .collect();
    loop {
        let mut changed = false;
        for i in 0..op.patterns.len() {
            if !reached[i]
                && (0..op.patterns.len()).any(|j| reached[j] && op.patterns[i].shares_variable_with(&op.patterns[j]))
            {
                reached[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    reached.into_iter().all(|r| r)
}

pub const DEFAULT_SOURCE: &str = "http://live.dbpedia.org/changesets";
/// Id of an interest file without an `ID` header.
pub const DEFAULT_ID: &str = "interest";

/// A subscription: which evolving source it follows, where its replica lives,
/// and the graph pattern selecting the interesting part of each update.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterestExpression {
    pub id: String,
    pub source: String,
    /// Filesystem path or IRI of the target dataset. Empty means "use the configured store".
    pub target: String,
    pub bgp: Bgp,
    pub ogp: Ogp,
}

impl InterestExpression {
    pub fn new(id: impl Into<String>, bgp: Bgp, ogp: Ogp) -> Result<Self, ParseError> {
        let i = InterestExpression {
            id: id.into(),
            source: DEFAULT_SOURCE.to_string(),
            target: String::new(),
            bgp,
            ogp,
        };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        if self.bgp.is_empty() {
            return Err(ParseError::Invalid("the basic graph pattern needs at least one triple pattern".into()));
        }
        let comps = components(&self.bgp.patterns);
        if comps.len() > 1 {
            let rendered = comps
                .iter()
                .map(|c| {
                    let pats: Vec<String> = c.iter().map(|&i| self.bgp.patterns[i].to_string()).collect();
                    format!("{{ {} }}", pats.join(" "))
                })
                .collect();
            return Err(ParseError::Disjoint(rendered));
        }
        if !optional_connected(&self.bgp, &self.ogp) {
            return Err(ParseError::OptionalDisconnected);
        }
        Ok(())
    }

    /// BGP patterns followed by optional patterns.
    pub fn all_patterns(&self) -> impl Iterator<Item = &TriplePattern> {
        self.bgp.patterns.iter().chain(self.ogp.patterns.iter())
    }

    /// `true` if `t` matches at least one BGP or optional pattern.
    pub fn is_relevant(&self, t: &Triple) -> bool {
        self.all_patterns().any(|p| p.matches(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{iri_triple, Literal};
    use proptest::prelude::*;

    fn tp(s: &str, p: &str, o: &str) -> TriplePattern {
        let conv = |x: &str| match x.strip_prefix('?') {
            Some(v) => PatternTerm::var(v),
            None => PatternTerm::Term(Term::iri(x)),
        };
        TriplePattern::new(conv(s), conv(p), conv(o)).unwrap()
    }

    #[test]
    fn single_pattern_is_connected() {
        assert!(check_non_disjoint(&Bgp::new(vec![tp("?a", "p", "?b")])));
    }

    #[test]
    fn shared_variable_connects() {
        let b = Bgp::new(vec![tp("?a", crate::rdf::RDF_TYPE, "Athlete"), tp("?a", "goals", "?goals")]);
        assert!(check_non_disjoint(&b));
    }

    #[test]
    fn two_components() {
        let b = Bgp::new(vec![tp("?x", "p", "?y"), tp("?z", "q", "?w")]);
        assert!(!check_non_disjoint(&b));
        assert_eq!(components(&b.patterns), vec![vec![0], vec![1]]);
    }

    #[test]
    fn shared_ground_term_connects() {
        let b = Bgp::new(vec![tp("?x", "p", "?y"), tp("?z", "p", "?w")]);
        assert!(check_non_disjoint(&b));
    }

    #[test]
    fn unify_repeated_variable() {
        let p = tp("?x", "p", "?x");
        assert!(p.matches(&iri_triple("a", "p", Term::iri("a"))));
        assert!(!p.matches(&iri_triple("a", "p", Term::iri("b"))));
        let mut mu = Binding::new();
        mu.insert(Variable::new("x"), Term::iri("b"));
        assert!(p.unify(&iri_triple("a", "p", Term::iri("a")), &mu).is_none());
    }

    #[test]
    fn optional_must_touch_bgp() {
        let b = Bgp::new(vec![tp("?a", "p", "?b")]);
        assert!(optional_connected(&b, &Bgp::new(vec![tp("?a", "q", "?c"), tp("?c", "r", "?d")])));
        assert!(!optional_connected(&b, &Bgp::new(vec![tp("?x", "q", "?c")])));
        assert!(InterestExpression::new("i", b, Bgp::new(vec![tp("?x", "q", "?c")])).is_err());
    }

    #[test]
    fn literal_predicate_rejected() {
        let lit = PatternTerm::Term(Term::literal(Literal::plain("x")));
        assert!(TriplePattern::new(PatternTerm::var("s"), lit, PatternTerm::var("o")).is_err());
    }

    fn brute_components(patterns: &[TriplePattern]) -> usize {
        // Flood fill from each unvisited pattern using the adjacency relation directly.
        let n = patterns.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if !seen[j] && patterns[i].shares_with(&patterns[j]) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    fn arb_pattern() -> impl Strategy<Value = TriplePattern> {
        let pos = prop_oneof![
            (0u8..5).prop_map(|i| PatternTerm::var(&format!("v{i}"))),
            (0u8..8).prop_map(|i| PatternTerm::Term(Term::iri(format!("http://ex.org/c{i}")))),
        ];
        let pred = prop_oneof![
            (0u8..2).prop_map(|i| PatternTerm::var(&format!("v{i}"))),
            (0u8..8).prop_map(|i| PatternTerm::Term(Term::iri(format!("http://ex.org/p{i}")))),
        ];
        (pos.clone(), pred, pos).prop_map(|(s, p, o)| TriplePattern::new(s, p, o).unwrap())
    }

    proptest! {
        #[test]
        fn connectivity_matches_flood_fill(pats in prop::collection::vec(arb_pattern(), 1..=8)) {
            let b = Bgp::new(pats.clone());
            prop_assert_eq!(check_non_disjoint(&b), brute_components(&pats) == 1);
        }
    }
}
