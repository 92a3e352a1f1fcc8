use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::query::Query;
use crate::rdf::{SolutionMapping, Term, TriplePattern, TripleStore, Variable};

/// A set of mappings that all bind the same variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relation {
    pub vars: BTreeSet<Variable>,
    pub rows: BTreeSet<SolutionMapping>,
}

impl Relation {
    /// The relation with one empty mapping; neutral for joins.
    pub fn unit() -> Self {
        Relation {
            vars: BTreeSet::new(),
            rows: [SolutionMapping::new()].into_iter().collect(),
        }
    }

    pub fn empty(vars: BTreeSet<Variable>) -> Self {
        Relation {
            vars,
            rows: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn union_with(&mut self, other: Relation) {
        self.vars.extend(other.vars);
        self.rows.extend(other.rows);
    }
}

pub(crate) fn pattern_vars<'a>(
    patterns: impl IntoIterator<Item = &'a TriplePattern>,
) -> BTreeSet<Variable> {
    patterns
        .into_iter()
        .flat_map(|tp| tp.variables().into_iter().cloned())
        .collect()
}

/// Evaluates a conjunction of patterns against one store by index nested
/// loops. The next pattern is the one sharing a variable with those already
/// bound that has the most constants, so joins stay connected.
pub fn evaluate_bgp(store: &TripleStore, patterns: &[TriplePattern]) -> Relation {
    let vars = pattern_vars(patterns);
    let mut remaining: Vec<&TriplePattern> = patterns.iter().collect();
    let mut bound: BTreeSet<&Variable> = BTreeSet::new();
    let mut rows: Vec<SolutionMapping> = vec![SolutionMapping::new()];
    while !remaining.is_empty() {
        let idx = (0..remaining.len())
            .max_by_key(|&i| {
                let tp = remaining[i];
                let connected =
                    bound.is_empty() || tp.variables().iter().any(|v| bound.contains(v));
                let constants = tp
                    .positions()
                    .iter()
                    .filter(|pt| pt.as_variable().is_none_or(|v| bound.contains(v)))
                    .count();
                (connected, constants, std::cmp::Reverse(i))
            })
            .expect("non-empty");
        let tp = remaining.remove(idx);
        let mut next = Vec::new();
        for mu in &rows {
            if tp.binds_literal_to_node(mu) {
                continue;
            }
            let instance = tp.substitute(mu);
            for t in store.matching_triples(&instance) {
                let m = instance.match_triple(t).expect("matching triple");
                next.push(mu.merge(&m).expect("disjoint variables"));
            }
        }
        rows = next;
        bound.extend(tp.variables());
        if rows.is_empty() {
            break;
        }
    }
    Relation {
        vars,
        rows: rows.into_iter().collect(),
    }
}

/// Hash join on the variables the two relations share.
pub fn join(a: &Relation, b: &Relation) -> Relation {
    let vars: BTreeSet<Variable> = a.vars.union(&b.vars).cloned().collect();
    let shared: Vec<&Variable> = a.vars.intersection(&b.vars).collect();
    let key = |m: &SolutionMapping| -> Vec<Option<Term>> {
        shared.iter().map(|v| m.get(v).cloned()).collect()
    };
    let (build, probe) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut table: HashMap<Vec<Option<Term>>, Vec<&SolutionMapping>> = HashMap::new();
    for m in &build.rows {
        table.entry(key(m)).or_default().push(m);
    }
    let mut rows = BTreeSet::new();
    for m in &probe.rows {
        if let Some(matches) = table.get(&key(m)) {
            for other in matches {
                rows.insert(m.merge(other).expect("agree on shared variables"));
            }
        }
    }
    Relation { vars, rows }
}

/// Joins relations smallest first, preferring at each step the smallest
/// remaining relation connected to what has been joined. Ties go to the
/// earlier relation.
pub fn join_all(mut parts: Vec<Relation>) -> Relation {
    if parts.is_empty() {
        return Relation::unit();
    }
    let first = (0..parts.len())
        .min_by_key(|&i| (parts[i].len(), i))
        .expect("non-empty");
    let mut acc = parts.remove(first);
    while !parts.is_empty() {
        let next = (0..parts.len())
            .min_by_key(|&i| {
                let disconnected = parts[i].vars.is_disjoint(&acc.vars);
                (disconnected, parts[i].len(), i)
            })
            .expect("non-empty");
        let part = parts.remove(next);
        acc = join(&acc, &part);
    }
    acc
}

/// A result tuple over the query's result variables.
pub type Answer = Vec<Option<Term>>;

/// Orders terms by kind (IRI first), then by their serialized form.
pub fn term_order(a: &Term, b: &Term) -> Ordering {
    (a.is_literal(), a.to_string()).cmp(&(b.is_literal(), b.to_string()))
}

fn cell_order(a: &Option<Term>, b: &Option<Term>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => term_order(x, y),
    }
}

fn tuple_order(a: &Answer, b: &Answer) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cell_order(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Projects branch results onto the result variables, removes duplicates,
/// sorts (by ORDER BY keys, then whole tuples) and applies LIMIT.
pub fn finish(query: &Query, branches: Vec<Relation>) -> Vec<Answer> {
    let columns = query.result_variables();
    // ORDER BY may name variables that are not projected; their values ride
    // along as hidden keys and do not make tuples distinct.
    let keys: Vec<&Variable> = query.order_by.iter().collect();
    let mut seen: BTreeSet<Answer> = BTreeSet::new();
    let mut rows: Vec<(Answer, Answer)> = Vec::new();
    for branch in branches {
        for m in branch.rows {
            let tuple: Answer = columns.iter().map(|v| m.get(v).cloned()).collect();
            if seen.insert(tuple.clone()) {
                let key = keys.iter().map(|v| m.get(v).cloned()).collect();
                rows.push((tuple, key));
            }
        }
    }
    rows.sort_by(|(ta, ka), (tb, kb)| tuple_order(ka, kb).then_with(|| tuple_order(ta, tb)));
    let mut out: Vec<Answer> = rows.into_iter().map(|(t, _)| t).collect();
    if let Some(n) = query.limit {
        out.truncate(usize::try_from(n).unwrap_or(usize::MAX));
    }
    out
}
