//! Triple sources that answer pattern queries: plain graphs, a dictionary-encoded
//! graph with SPO/POS/OSP indexes, and overlays combining several sources.

use std::collections::{BTreeSet, HashMap};
use std::ops::Bound;

use crate::pattern::{Binding, TriplePattern};
use crate::rdf::{Graph, Term, Triple};

/// Read access to a set of triples.
pub trait TripleSource {
    /// Calls `f` once for every triple whose bound positions equal the given terms.
    fn scan(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>, f: &mut dyn FnMut(&Triple));

    fn contains(&self, t: &Triple) -> bool;

    /// Every triple matching `tp` under `mu`, with the extended binding.
    fn match_pattern(&self, tp: &TriplePattern, mu: &Binding) -> Vec<(Triple, Binding)> {
        let mut out = Vec::new();
        let [s, p, o] = tp.positions().map(|pt| pt.resolve(mu));
        self.scan(s, p, o, &mut |t| {
            if let Some(ext) = tp.unify(t, mu) {
                out.push((t.clone(), ext));
            }
        });
        out
    }
}

impl TripleSource for Graph {
    fn scan(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>, f: &mut dyn FnMut(&Triple)) {
        let keep = |t: &Triple| p.map_or(true, |p| t.predicate() == p) && o.map_or(true, |o| t.object() == o);
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                let t = Triple::new_unchecked(s.clone(), p.clone(), o.clone());
                if self.contains(&t) {
                    f(&t);
                }
            }
            (Some(s), _, _) => {
                // Triples sort by subject first; the empty IRI is the least term.
                let low = Triple::new_unchecked(s.clone(), p.cloned().unwrap_or_else(|| Term::iri("")), Term::iri(""));
                for t in self.range_from(&low) {
                    if t.subject() != s || p.is_some_and(|p| t.predicate() != p) {
                        break;
                    }
                    if keep(t) {
                        f(t);
                    }
                }
            }
            _ => {
                for t in self.iter().filter(|t| keep(t)) {
                    f(t);
                }
            }
        }
    }

    fn contains(&self, t: &Triple) -> bool {
        Graph::contains(self, t)
    }
}

type Key = [u32; 3];

/// A triple set stored as dictionary-encoded ids under three orderings.
#[derive(Clone, Debug, Default)]
pub struct IndexedGraph {
    ids: HashMap<Term, u32>,
    terms: Vec<Term>,
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
}

impl IndexedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut ig = Self::new();
        for t in g {
            ig.insert(t);
        }
        ig
    }

    fn intern(&mut self, t: &Term) -> u32 {
        if let Some(&id) = self.ids.get(t) {
            return id;
        }
        let id = u32::try_from(self.terms.len()).expect("term dictionary overflow");
        self.terms.push(t.clone());
        self.ids.insert(t.clone(), id);
        id
    }

    fn lookup(&self, t: &Triple) -> Option<Key> {
        Some([*self.ids.get(t.subject())?, *self.ids.get(t.predicate())?, *self.ids.get(t.object())?])
    }

    fn decode(&self, [s, p, o]: Key) -> Triple {
        Triple::new_unchecked(
            self.terms[s as usize].clone(),
            self.terms[p as usize].clone(),
            self.terms[o as usize].clone(),
        )
    }

    pub fn insert(&mut self, t: &Triple) -> bool {
        let [s, p, o] = [t.subject(), t.predicate(), t.object()].map(|x| self.intern(x));
        if !self.spo.insert([s, p, o]) {
            return false;
        }
        self.pos.insert([p, o, s]);
        self.osp.insert([o, s, p]);
        true
    }

    /// Dictionary entries are kept; only the index rows go.
    pub fn remove(&mut self, t: &Triple) -> bool {
        let Some([s, p, o]) = self.lookup(t) else { return false };
        if !self.spo.remove(&[s, p, o]) {
            return false;
        }
        self.pos.remove(&[p, o, s]);
        self.osp.remove(&[o, s, p]);
        true
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|&k| self.decode(k))
    }

    pub fn to_graph(&self) -> Graph {
        self.iter().collect()
    }

    /// Ids of the bound terms; `None` if one is unknown, so nothing can match.
    fn bound_ids(&self, terms: [Option<&Term>; 3]) -> Option<[Option<u32>; 3]> {
        let mut out = [None; 3];
        for (slot, t) in out.iter_mut().zip(terms) {
            if let Some(t) = t {
                *slot = Some(*self.ids.get(t)?);
            }
        }
        Some(out)
    }

    /// Rows of `index` whose first `prefix.len()` columns equal `prefix`.
    fn prefix_range<'a>(index: &'a BTreeSet<Key>, prefix: &[u32]) -> impl Iterator<Item = &'a Key> + 'a {
        let mut low = [0u32; 3];
        let mut high = [u32::MAX; 3];
        low[..prefix.len()].copy_from_slice(prefix);
        high[..prefix.len()].copy_from_slice(prefix);
        index.range((Bound::Included(low), Bound::Included(high)))
    }

    /// Rows matching the bound ids, in SPO column order.
    fn rows(&self, s: Option<u32>, p: Option<u32>, o: Option<u32>, f: &mut dyn FnMut(Key)) {
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => {
                if self.spo.contains(&[s, p, o]) {
                    f([s, p, o]);
                }
            }
            (Some(s), Some(p), None) => Self::prefix_range(&self.spo, &[s, p]).for_each(|k| f(*k)),
            (Some(s), None, None) => Self::prefix_range(&self.spo, &[s]).for_each(|k| f(*k)),
            (None, Some(p), Some(o)) => Self::prefix_range(&self.pos, &[p, o]).for_each(|&[p, o, s]| f([s, p, o])),
            (None, Some(p), None) => Self::prefix_range(&self.pos, &[p]).for_each(|&[p, o, s]| f([s, p, o])),
            (Some(s), None, Some(o)) => Self::prefix_range(&self.osp, &[o, s]).for_each(|&[o, s, p]| f([s, p, o])),
            (None, None, Some(o)) => Self::prefix_range(&self.osp, &[o]).for_each(|&[o, s, p]| f([s, p, o])),
            (None, None, None) => self.spo.iter().for_each(|k| f(*k)),
        }
    }

    /// Answers the query from every index that can serve it, for consistency checks.
    pub fn scan_all_orders(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> [BTreeSet<Triple>; 3] {
        let Some([s, p, o]) = self.bound_ids([s, p, o]) else {
            return Default::default();
        };
        let want = |k: &Key| s.map_or(true, |s| k[0] == s) && p.map_or(true, |p| k[1] == p) && o.map_or(true, |o| k[2] == o);
        let from_spo = self.spo.iter().filter(|k| want(k)).map(|&k| self.decode(k)).collect();
        let from_pos = self.pos.iter().map(|&[p, o, s]| [s, p, o]).filter(|k| want(k)).map(|k| self.decode(k)).collect();
        let from_osp = self.osp.iter().map(|&[o, s, p]| [s, p, o]).filter(|k| want(k)).map(|k| self.decode(k)).collect();
        [from_spo, from_pos, from_osp]
    }
}

impl TripleSource for IndexedGraph {
    fn scan(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>, f: &mut dyn FnMut(&Triple)) {
        let Some([s, p, o]) = self.bound_ids([s, p, o]) else {
            return;
        };
        self.rows(s, p, o, &mut |k| f(&self.decode(k)));
    }

    fn contains(&self, t: &Triple) -> bool {
        self.lookup(t).is_some_and(|k| self.spo.contains(&k))
    }
}

impl FromIterator<Triple> for IndexedGraph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        let mut ig = IndexedGraph::new();
        for t in iter {
            ig.insert(&t);
        }
        ig
    }
}

/// The union of `layers` minus every triple contained in one of `minus`.
/// Each triple is reported once even if several layers hold it.
pub struct Overlay<'a> {
    layers: Vec<&'a dyn TripleSource>,
    minus: Vec<&'a dyn TripleSource>,
}

impl<'a> Overlay<'a> {
    pub fn new(layers: Vec<&'a dyn TripleSource>) -> Self {
        Overlay { layers, minus: Vec::new() }
    }

    pub fn without(mut self, excluded: &'a dyn TripleSource) -> Self {
        self.minus.push(excluded);
        self
    }

    fn excluded(&self, t: &Triple) -> bool {
        self.minus.iter().any(|m| m.contains(t))
    }
}

impl TripleSource for Overlay<'_> {
    fn scan(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>, f: &mut dyn FnMut(&Triple)) {
        for (i, layer) in self.layers.iter().enumerate() {
            layer.scan(s, p, o, &mut |t| {
                if !self.excluded(t) && !self.layers[..i].iter().any(|l| l.contains(t)) {
                    f(t);
                }
            });
        }
    }

    fn contains(&self, t: &Triple) -> bool {
        !self.excluded(t) && self.layers.iter().any(|l| l.contains(t))
    }
}
