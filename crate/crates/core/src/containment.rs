//! Triple-pattern subsumption, fragment relevance and containment between
//! fragments and endpoints.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::catalog::{FederationCatalog, FragmentDef, Visibility};
use crate::rdf::{PatternTerm, Term, TriplePattern, Variable};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("endpoint {endpoint} unreachable: {message}")]
pub struct ProbeError {
    pub endpoint: String,
    pub message: String,
}

/// Answers ASK requests against simulated or remote endpoints.
pub trait Probe {
    /// Whether `endpoint`'s copy of `fragment` has a triple matching `pattern`.
    fn ask_fragment(
        &self,
        endpoint: &str,
        fragment: &FragmentDef,
        pattern: &TriplePattern,
    ) -> Result<bool, ProbeError>;

    /// Whether any triple held by `endpoint` matches `pattern`.
    fn ask_endpoint(&self, endpoint: &str, pattern: &TriplePattern) -> Result<bool, ProbeError>;
}

/// Renames variables to `v0`, `v1`, ... in order of first occurrence.
pub fn canonical_pattern(tp: &TriplePattern) -> TriplePattern {
    let mut names: HashMap<&Variable, Variable> = HashMap::new();
    let terms = tp.positions().map(|pt| match pt {
        PatternTerm::Variable(v) => {
            let n = names.len();
            let renamed = names
                .entry(v)
                .or_insert_with(|| Variable::new(format!("v{n}")).expect("non-empty"));
            PatternTerm::Variable(renamed.clone())
        }
        ground => ground.clone(),
    });
    TriplePattern::from_positions(terms).expect("renaming keeps positions valid")
}

/// Whether some substitution of `general`'s variables turns it into
/// `specific`. Variables of `specific` are treated as opaque terms.
pub fn subsumes(general: &TriplePattern, specific: &TriplePattern) -> bool {
    let mut sigma: HashMap<&Variable, &PatternTerm> = HashMap::new();
    for (g, s) in general.positions().into_iter().zip(specific.positions()) {
        match g {
            PatternTerm::Ground(_) => {
                if g != s {
                    return false;
                }
            }
            PatternTerm::Variable(v) => match sigma.get(v) {
                Some(bound) if *bound != s => return false,
                Some(_) => {}
                None => {
                    sigma.insert(v, s);
                }
            },
        }
    }
    true
}

/// Most general common instance of `selector` and `tp`, written over
/// `tp`'s variables. The two patterns' variables are kept apart even when
/// they share names. `None` when no triple can match both.
pub fn unify(selector: &TriplePattern, tp: &TriplePattern) -> Option<TriplePattern> {
    let mut uf = Classes::default();
    for (s, t) in selector.positions().into_iter().zip(tp.positions()) {
        let ok = match (s, t) {
            (PatternTerm::Ground(a), PatternTerm::Ground(b)) => a == b,
            (PatternTerm::Variable(v), PatternTerm::Ground(g)) => {
                let n = uf.node(Side::Selector, v);
                uf.bind(n, g)
            }
            (PatternTerm::Ground(g), PatternTerm::Variable(v)) => {
                let n = uf.node(Side::Pattern, v);
                uf.bind(n, g)
            }
            (PatternTerm::Variable(a), PatternTerm::Variable(b)) => {
                let a = uf.node(Side::Selector, a);
                let b = uf.node(Side::Pattern, b);
                uf.union(a, b)
            }
        };
        if !ok {
            return None;
        }
    }
    // Representative of an unbound class: its first variable in `tp`.
    let mut names: HashMap<usize, Variable> = HashMap::new();
    for v in tp.variables() {
        let n = uf.node(Side::Pattern, v);
        let root = uf.find(n);
        names.entry(root).or_insert_with(|| v.clone());
    }
    let terms = tp.positions().map(|pt| match pt {
        PatternTerm::Ground(_) => pt.clone(),
        PatternTerm::Variable(v) => {
            let n = uf.node(Side::Pattern, v);
            let root = uf.find(n);
            match uf.value[root] {
                Some(t) => PatternTerm::Ground(t.clone()),
                None => PatternTerm::Variable(names[&root].clone()),
            }
        }
    });
    TriplePattern::from_positions(terms).ok()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Side {
    Selector,
    Pattern,
}

/// Union-find over variable occurrences; each class may carry one constant.
#[derive(Default)]
struct Classes<'a> {
    ids: HashMap<(Side, &'a Variable), usize>,
    parent: Vec<usize>,
    value: Vec<Option<&'a Term>>,
}

impl<'a> Classes<'a> {
    fn node(&mut self, side: Side, v: &'a Variable) -> usize {
        let next = self.parent.len();
        let id = *self.ids.entry((side, v)).or_insert(next);
        if id == next {
            self.parent.push(next);
            self.value.push(None);
        }
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn bind(&mut self, x: usize, t: &'a Term) -> bool {
        let r = self.find(x);
        match self.value[r] {
            Some(existing) => existing == t,
            None => {
                self.value[r] = Some(t);
                true
            }
        }
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        let merged = match (self.value[ra], self.value[rb]) {
            (Some(x), Some(y)) if x != y => return false,
            (x, y) => x.or(y),
        };
        self.parent[rb] = ra;
        self.value[ra] = merged;
        true
    }
}

/// Regarding `tp`, every triple `f1` contributes is also contributed by `f2`.
pub fn contained_wrt(tp: &TriplePattern, f1: &FragmentDef, f2: &FragmentDef) -> bool {
    f1.source == f2.source
        && unify(f1.selector.pattern(), tp)
            .is_some_and(|instance| subsumes(f2.selector.pattern(), &instance))
}

/// Whether `endpoint`'s copy of `fragment` can contribute triples to `tp`.
/// Probes only when `tp` is strictly more specific than the selector.
pub fn relevant(
    fragment: &FragmentDef,
    endpoint: &str,
    tp: &TriplePattern,
    probe: &dyn Probe,
) -> Result<bool, ProbeError> {
    let selector = fragment.selector.pattern();
    let Some(instance) = unify(selector, tp) else {
        return Ok(false);
    };
    if subsumes(tp, selector) {
        return Ok(true);
    }
    probe.ask_fragment(endpoint, fragment, &instance)
}

/// Identity of a fragment up to its id: canonical selector plus source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogicalFragment {
    pub selector: TriplePattern,
    pub source: String,
}

impl LogicalFragment {
    pub fn of(f: &FragmentDef) -> Self {
        LogicalFragment {
            selector: canonical_pattern(f.selector.pattern()),
            source: f.source.clone(),
        }
    }

    fn key(&self) -> String {
        format!("{} @ {}", self.selector, self.source)
    }
}

/// Containment knowledge available to selection after visibility masking.
#[derive(Debug, Clone)]
pub struct ContainmentRelation {
    logical: Vec<LogicalFragment>,
    of_fragment: BTreeMap<String, usize>,
    /// Unordered logical pairs whose relationship is known.
    known: BTreeSet<(usize, usize)>,
    /// Ordered logical pairs `a ⊑ b`, closed under transitivity.
    below: BTreeSet<(usize, usize)>,
    /// Endpoint equivalence class per (logical fragment, endpoint).
    class: BTreeMap<(usize, String), usize>,
}

impl ContainmentRelation {
    fn logical_index(&self, fragment: &str) -> Option<usize> {
        self.of_fragment.get(fragment).copied()
    }

    pub fn logical(&self, fragment: &str) -> Option<&LogicalFragment> {
        self.logical_index(fragment).map(|i| &self.logical[i])
    }

    pub fn same_logical(&self, a: &str, b: &str) -> bool {
        match (self.logical_index(a), self.logical_index(b)) {
            (Some(x), Some(y)) => x == y,
            _ => a == b,
        }
    }

    /// Selector-level containment `a ⊑ b` as visible to selection.
    /// Reflexive on logical fragments.
    pub fn contains(&self, a: &str, b: &str) -> bool {
        match (self.logical_index(a), self.logical_index(b)) {
            (Some(x), Some(y)) => x == y || self.below.contains(&(x, y)),
            _ => a == b,
        }
    }

    /// Whether the relationship between two distinct logical fragments
    /// may be used by selection.
    pub fn pair_known(&self, a: &str, b: &str) -> bool {
        match (self.logical_index(a), self.logical_index(b)) {
            (Some(x), Some(y)) => {
                x == y
                    || self.known.contains(&(x.min(y), x.max(y)))
                    || self.below.contains(&(x, y))
                    || self.below.contains(&(y, x))
            }
            _ => false,
        }
    }

    /// Whether two endpoints are known to hold the same copy of `fragment`.
    pub fn endpoints_equivalent(&self, fragment: &str, e1: &str, e2: &str) -> bool {
        if e1 == e2 {
            return true;
        }
        let Some(l) = self.logical_index(fragment) else {
            return false;
        };
        match (
            self.class.get(&(l, e1.to_string())),
            self.class.get(&(l, e2.to_string())),
        ) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// Whether `f1` served by `e1` provides no triple for `tp` that `f2`
    /// served by `e2` does not provide, using only visible knowledge.
    pub fn provided_by(
        &self,
        tp: &TriplePattern,
        (f1, e1): (&FragmentDef, &str),
        (f2, e2): (&FragmentDef, &str),
    ) -> bool {
        if self.same_logical(&f1.id, &f2.id) {
            self.endpoints_equivalent(&f1.id, e1, e2)
        } else {
            self.pair_known(&f1.id, &f2.id) && contained_wrt(tp, f1, f2)
        }
    }

    /// Ordered fragment-id pairs `(a, b)` with `a ⊑ b`, reflexive pairs
    /// included.
    pub fn pairs(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (a, la) in &self.of_fragment {
            for (b, lb) in &self.of_fragment {
                if la == lb || self.below.contains(&(*la, *lb)) {
                    out.insert((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// Known endpoint-equivalence classes of each logical fragment, as
    /// sorted endpoint lists keyed by the smallest fragment id.
    pub fn endpoint_classes(&self) -> BTreeMap<String, BTreeSet<BTreeSet<String>>> {
        let mut by_logical: BTreeMap<usize, BTreeMap<usize, BTreeSet<String>>> = BTreeMap::new();
        for ((l, e), c) in &self.class {
            by_logical
                .entry(*l)
                .or_default()
                .entry(*c)
                .or_default()
                .insert(e.clone());
        }
        let mut out = BTreeMap::new();
        for (l, classes) in by_logical {
            let name = self
                .of_fragment
                .iter()
                .find(|(_, x)| **x == l)
                .map(|(id, _)| id.clone())
                .expect("logical fragment has an id");
            out.insert(name, classes.into_values().collect());
        }
        out
    }

    /// Edge list: `a <= b` for strict containments between distinct
    /// logical fragments, then `f: C1 C3 P1` for each endpoint class of
    /// two or more members.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.pairs() {
            if !self.same_logical(&a, &b) {
                let _ = writeln!(out, "{a} <= {b}");
            }
        }
        for (f, classes) in self.endpoint_classes() {
            for class in classes.iter().filter(|c| c.len() > 1) {
                let members: Vec<&str> = class.iter().map(String::as_str).collect();
                let _ = writeln!(out, "{f}: {}", members.join(" "));
            }
        }
        out
    }
}

/// Computes containment between the catalog's fragments and the endpoint
/// equivalence classes, keeping only facts made visible by the catalog's
/// visibility setting.
pub fn build_containment(catalog: &FederationCatalog) -> ContainmentRelation {
    let vis = catalog.visibility;
    let mut logical: Vec<LogicalFragment> = Vec::new();
    let mut index: HashMap<LogicalFragment, usize> = HashMap::new();
    let mut of_fragment = BTreeMap::new();
    for f in catalog.fragments() {
        let lf = LogicalFragment::of(f);
        let next = logical.len();
        let i = *index.entry(lf.clone()).or_insert(next);
        if i == next {
            logical.push(lf);
        }
        of_fragment.insert(f.id.clone(), i);
    }

    let mut known = BTreeSet::new();
    let mut direct = BTreeSet::new();
    for a in 0..logical.len() {
        for b in a + 1..logical.len() {
            let (la, lb) = (&logical[a], &logical[b]);
            if la.source != lb.source || !visible(vis, &["pair", &la.key(), &lb.key()]) {
                continue;
            }
            known.insert((a, b));
            if subsumes(&lb.selector, &la.selector) {
                direct.insert((a, b));
            }
            if subsumes(&la.selector, &lb.selector) {
                direct.insert((b, a));
            }
        }
    }
    let below = transitive_closure(&direct);

    let mut holders: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    for e in catalog.endpoints() {
        for f in catalog.exposed(&e.iri) {
            holders
                .entry(of_fragment[&f.id])
                .or_default()
                .insert(&e.iri);
        }
    }
    let mut class = BTreeMap::new();
    let mut next_class = 0;
    for (l, endpoints) in holders {
        let eps: Vec<&str> = endpoints.into_iter().collect();
        let mut parent: Vec<usize> = (0..eps.len()).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let key = logical[l].key();
        for i in 0..eps.len() {
            for j in i + 1..eps.len() {
                if visible(vis, &["endpoints", &key, eps[i], eps[j]]) {
                    let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut ids: HashMap<usize, usize> = HashMap::new();
        for (i, e) in eps.iter().enumerate() {
            let r = root(&mut parent, i);
            let c = *ids.entry(r).or_insert_with(|| {
                next_class += 1;
                next_class
            });
            class.insert((l, e.to_string()), c);
        }
    }

    ContainmentRelation {
        logical,
        of_fragment,
        known,
        below,
        class,
    }
}

fn transitive_closure(edges: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut closed = edges.clone();
    loop {
        let extra: Vec<(usize, usize)> = closed
            .iter()
            .flat_map(|&(a, b)| {
                closed
                    .range((b, 0)..=(b, usize::MAX))
                    .map(move |&(_, c)| (a, c))
            })
            .filter(|&(a, c)| a != c && !closed.contains(&(a, c)))
            .collect();
        if extra.is_empty() {
            return closed;
        }
        closed.extend(extra);
    }
}

/// Deterministic per-fact visibility: a fact is visible when its hash,
/// mapped into [0, 1), falls below the visibility fraction. Raising the
/// fraction only ever adds facts.
pub fn visible(vis: Visibility, fact: &[&str]) -> bool {
    if vis.fraction >= 1.0 {
        return true;
    }
    if vis.fraction <= 0.0 {
        return false;
    }
    unit_hash(vis.seed, fact) < vis.fraction
}

fn unit_hash(seed: u64, parts: &[&str]) -> f64 {
    // FNV-1a over the parts, separated by a zero byte, then a splitmix64
    // finalizer keyed by the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.bytes().chain(std::iter::once(0)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{load_catalog, LoadOptions};
    use crate::query::parse_pattern;

    fn tp(s: &str) -> TriplePattern {
        parse_pattern(s).unwrap()
    }

    fn fig1() -> FederationCatalog {
        load_catalog(
            include_str!("../fixtures/running_example/catalog.json"),
            &LoadOptions::default(),
        )
        .unwrap()
        .0
    }

    struct NoProbe;

    impl Probe for NoProbe {
        fn ask_fragment(
            &self,
            e: &str,
            _: &FragmentDef,
            _: &TriplePattern,
        ) -> Result<bool, ProbeError> {
            Err(ProbeError {
                endpoint: e.to_string(),
                message: "unexpected probe".into(),
            })
        }

        fn ask_endpoint(&self, e: &str, _: &TriplePattern) -> Result<bool, ProbeError> {
            Err(ProbeError {
                endpoint: e.to_string(),
                message: "unexpected probe".into(),
            })
        }
    }

    struct Fixed(bool);

    impl Probe for Fixed {
        fn ask_fragment(
            &self,
            _: &str,
            _: &FragmentDef,
            _: &TriplePattern,
        ) -> Result<bool, ProbeError> {
            Ok(self.0)
        }

        fn ask_endpoint(&self, _: &str, _: &TriplePattern) -> Result<bool, ProbeError> {
            Ok(self.0)
        }
    }

    #[test]
    fn subsumption_examples() {
        assert!(subsumes(&tp("?x p1 ?y"), &tp("?x p1 c1")));
        assert!(!subsumes(&tp("?x p1 c1"), &tp("?x p1 ?y")));
        assert!(subsumes(&tp("?a ?b ?c"), &tp("?a ?b ?c")));
        assert!(!subsumes(&tp("?x p ?x"), &tp("?x p ?y")));
        assert!(subsumes(&tp("?x p ?y"), &tp("?z p ?z")));
    }

    #[test]
    fn unify_keeps_scopes_apart() {
        assert_eq!(
            unify(&tp("?x p1 ?y"), &tp("?y p1 ?x")),
            Some(tp("?y p1 ?x"))
        );
        assert_eq!(
            unify(&tp("?x p1 c1"), &tp("?x1 p1 ?x2")),
            Some(tp("?x1 p1 c1"))
        );
        assert_eq!(unify(&tp("?x p7 m"), &tp("?x p7 z")), None);
        assert_eq!(unify(&tp("?x p ?x"), &tp("?a p ?b")), Some(tp("?a p ?a")));
        assert_eq!(unify(&tp("?x p ?x"), &tp("a p ?b")), Some(tp("a p a")));
        assert_eq!(unify(&tp("?x p ?x"), &tp("a p b")), None);
    }

    #[test]
    fn literal_cannot_reach_subject() {
        assert_eq!(unify(&tp("?x p ?x"), &tp("?s p \"lit\"")), None);
    }

    #[test]
    fn canonical_form_ignores_names() {
        assert_eq!(
            canonical_pattern(&tp("?a p ?b")),
            canonical_pattern(&tp("?x p ?y"))
        );
        assert_ne!(
            canonical_pattern(&tp("?a p ?a")),
            canonical_pattern(&tp("?x p ?y"))
        );
    }

    #[test]
    fn fragment_containment_regarding_pattern() {
        let cat = fig1();
        let f = |id: &str| cat.fragment(id).unwrap().clone();
        let q = tp("?x1 p1 ?x2");
        assert!(contained_wrt(&q, &f("f9"), &f("f1")));
        assert!(!contained_wrt(&q, &f("f1"), &f("f9")));
        assert!(contained_wrt(&q, &f("f1"), &f("f1")));
        let q2 = tp("?x1 p7 ?x3");
        assert!(!contained_wrt(&q2, &f("f7"), &f("f8")));
        assert!(!contained_wrt(&q2, &f("f8"), &f("f7")));
        // Constrained to c1, both fragments hold the same triples.
        let q3 = tp("?x p1 c1");
        assert!(contained_wrt(&q3, &f("f1"), &f("f9")));
        // Different sources never contain each other.
        assert!(!contained_wrt(&tp("?s ?p ?o"), &f("f1"), &f("f3")));
    }

    #[test]
    fn relevance_is_static_unless_pattern_is_narrower() {
        let cat = fig1();
        let f1 = cat.fragment("f1").unwrap();
        let f9 = cat.fragment("f9").unwrap();
        let f7 = cat.fragment("f7").unwrap();
        let q1 = tp("?x1 p1 ?x2");
        assert!(relevant(f1, "C1", &q1, &NoProbe).unwrap());
        assert!(relevant(f9, "C5", &q1, &NoProbe).unwrap());
        for f in cat.fragments() {
            assert!(!relevant(f, "C1", &tp("?x p9 ?y"), &NoProbe).unwrap());
        }
        assert!(!relevant(f7, "C3", &tp("?x p7 z"), &NoProbe).unwrap());
        assert!(!relevant(f1, "C1", &tp("t9 p1 ?y"), &Fixed(false)).unwrap());
        assert!(relevant(f1, "C1", &tp("t1 p1 ?y"), &Fixed(true)).unwrap());
        assert!(relevant(f1, "C1", &tp("t1 p1 ?y"), &NoProbe).is_err());
    }

    #[test]
    fn fig1_relation() {
        let rel = build_containment(&fig1());
        let strict: Vec<_> = rel.pairs().into_iter().filter(|(a, b)| a != b).collect();
        assert_eq!(strict, [("f9".to_string(), "f1".to_string())]);
        assert!(rel.endpoints_equivalent("f1", "C1", "C3"));
        assert!(rel.endpoints_equivalent("f1", "C3", "P1"));
        assert!(!rel.endpoints_equivalent("f1", "C1", "C5"));
        let dump = rel.dump();
        assert!(dump.starts_with("f9 <= f1\n"), "{dump}");
        assert!(dump.contains("f1: C1 C3 P1\n"), "{dump}");
        assert!(dump.contains("f9: C5 P1\n"), "{dump}");
    }

    #[test]
    fn nothing_visible_at_zero() {
        let cat = fig1().with_visibility(Visibility {
            fraction: 0.0,
            seed: 7,
        });
        let rel = build_containment(&cat);
        assert!(rel.pairs().iter().all(|(a, b)| a == b));
        assert!(!rel.endpoints_equivalent("f1", "C1", "C3"));
        assert!(!rel.pair_known("f9", "f1"));
        assert_eq!(rel.dump(), "");
    }

    #[test]
    fn single_fragment_has_only_reflexive_pair() {
        let text = r#"{"endpoints":[{"iri":"P","role":"public","fragments":[]}],
            "fragments":[{"id":"f","selector":"CONSTRUCT WHERE { ?s p ?o }","source":"P"}]}"#;
        let cat = load_catalog(text, &LoadOptions::default()).unwrap().0;
        let rel = build_containment(&cat);
        assert_eq!(
            rel.pairs().into_iter().collect::<Vec<_>>(),
            [("f".to_string(), "f".to_string())]
        );
    }

    #[test]
    fn renamed_duplicates_share_identity() {
        let text = r#"{"endpoints":[{"iri":"P","role":"public","fragments":[]},
                {"iri":"A","role":"consumer","fragments":["a"]},
                {"iri":"B","role":"consumer","fragments":["b"]}],
            "fragments":[{"id":"a","selector":"CONSTRUCT WHERE { ?s p ?o }","source":"P"},
                {"id":"b","selector":"CONSTRUCT WHERE { ?u p ?v }","source":"P"}]}"#;
        let cat = load_catalog(text, &LoadOptions::default()).unwrap().0;
        let rel = build_containment(&cat);
        assert!(rel.same_logical("a", "b"));
        assert!(rel.endpoints_equivalent("a", "A", "B"));
        assert!(rel.contains("a", "b") && rel.contains("b", "a"));
    }

    #[test]
    fn closure_is_transitive() {
        let edges: BTreeSet<_> = [(0, 1), (1, 2), (2, 3)].into_iter().collect();
        let closed = transitive_closure(&edges);
        assert!(closed.contains(&(0, 3)) && closed.contains(&(1, 3)));
        assert_eq!(closed.len(), 6);
    }
}
