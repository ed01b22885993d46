use std::collections::btree_set;
use std::collections::BTreeSet;
use std::ops::Bound;

use super::Triple;

/// A set of ground triples (one dataset revision).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Graph {
    triples: BTreeSet<Triple>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the triple was not already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        self.triples.insert(t)
    }

    pub fn remove(&mut self, t: &Triple) -> bool {
        self.triples.remove(t)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> btree_set::Iter<'_, Triple> {
        self.triples.iter()
    }

    /// Triples ordered at or after `low`.
    pub(crate) fn range_from<'a>(&'a self, low: &Triple) -> btree_set::Range<'a, Triple> {
        self.triples.range((Bound::Included(low), Bound::Unbounded))
    }

    pub fn union(&self, other: &Graph) -> Graph {
        self.triples.union(&other.triples).cloned().collect()
    }

    pub fn difference(&self, other: &Graph) -> Graph {
        self.triples.difference(&other.triples).cloned().collect()
    }

    pub fn intersection(&self, other: &Graph) -> Graph {
        self.triples.intersection(&other.triples).cloned().collect()
    }

    pub fn is_subset(&self, other: &Graph) -> bool {
        self.triples.is_subset(&other.triples)
    }

    pub fn is_disjoint(&self, other: &Graph) -> bool {
        self.triples.is_disjoint(&other.triples)
    }

    pub fn extend_from(&mut self, other: &Graph) {
        self.triples.extend(other.iter().cloned());
    }

    pub fn remove_all(&mut self, other: &Graph) {
        if other.len() * 4 < self.len() {
            for t in other {
                self.triples.remove(t);
            }
        } else {
            self.triples.retain(|t| !other.contains(t));
        }
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Graph { triples: iter.into_iter().collect() }
    }
}

impl Extend<Triple> for Graph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        self.triples.extend(iter)
    }
}

impl IntoIterator for Graph {
    type Item = Triple;
    type IntoIter = btree_set::IntoIter<Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.into_iter()
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

/// An ordered pair of removed and added triples describing one dataset transition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Changeset {
    pub removed: Graph,
    pub added: Graph,
}

impl Changeset {
    pub fn new(removed: Graph, added: Graph) -> Self {
        Changeset { removed, added }
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    /// `(v \ removed) ∪ added`; deletions go first so re-added triples survive.
    pub fn apply(&self, v: &Graph) -> Graph {
        let mut out = v.clone();
        out.remove_all(&self.removed);
        out.extend_from(&self.added);
        out
    }
}

/// Changeset taking `old` to `new`.
pub fn graph_diff(old: &Graph, new: &Graph) -> Changeset {
    Changeset { removed: old.difference(new), added: new.difference(old) }
}

pub fn apply_changeset(v: &Graph, cs: &Changeset) -> Graph {
    cs.apply(v)
}
