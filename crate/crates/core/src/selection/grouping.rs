use std::collections::BTreeSet;
use std::fmt;

use crate::catalog::FederationCatalog;
use crate::containment::{relevant, ContainmentRelation, Probe, ProbeError};
use crate::rdf::TriplePattern;

/// Fragment/endpoint pairs known to provide the same data for one pattern.
/// Members keep insertion order; the first one represents the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentGroup {
    pub members: Vec<(String, String)>,
}

impl FragmentGroup {
    pub fn endpoints(&self) -> BTreeSet<&str> {
        self.members.iter().map(|(_, e)| e.as_str()).collect()
    }
}

impl fmt::Display for FragmentGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .members
            .iter()
            .map(|(frag, e)| format!("({frag}, {e})"))
            .collect();
        write!(f, "{{ {} }}", parts.join(", "))
    }
}

/// What happened to the group list, labelled by the step of the grouping
/// procedure that caused it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupingStep {
    Start,
    Merged,
    Removed,
    Added,
}

impl GroupingStep {
    /// Line of the source-selection pseudocode this step corresponds to.
    pub fn line(self) -> u32 {
        match self {
            GroupingStep::Start => 4,
            GroupingStep::Merged => 11,
            GroupingStep::Removed => 15,
            GroupingStep::Added => 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub step: GroupingStep,
    pub groups: Vec<FragmentGroup>,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.step.line(), render_groups(&self.groups))
    }
}

pub fn render_groups(groups: &[FragmentGroup]) -> String {
    if groups.is_empty() {
        return "{ }".to_string();
    }
    let parts: Vec<String> = groups.iter().map(FragmentGroup::to_string).collect();
    format!("{{ {} }}", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub groups: Vec<FragmentGroup>,
    pub trace: Vec<TraceEntry>,
}

/// Groups the relevant (fragment, endpoint) pairs of `tp`. A new pair joins
/// a group it is mutually contained with, evicts groups it strictly
/// contains, and is dropped when a group already contains it.
pub fn group_fragments(
    tp: &TriplePattern,
    catalog: &FederationCatalog,
    containment: &ContainmentRelation,
    probe: &dyn Probe,
) -> Result<Grouping, ProbeError> {
    let mut groups: Vec<FragmentGroup> = Vec::new();
    let mut trace = vec![TraceEntry {
        step: GroupingStep::Start,
        groups: Vec::new(),
    }];
    for endpoint in catalog.ordered_endpoints() {
        for f in catalog.exposed(&endpoint.iri) {
            if !relevant(f, &endpoint.iri, tp, probe)? {
                continue;
            }
            let new = (f, endpoint.iri.as_str());
            let mut include = true;
            let mut i = 0;
            while i < groups.len() {
                let (rep_id, rep_e) = &groups[i].members[0];
                let rep = (
                    catalog.fragment(rep_id).expect("grouped fragment exists"),
                    rep_e.as_str(),
                );
                let new_in_old = containment.provided_by(tp, new, rep);
                let old_in_new = containment.provided_by(tp, rep, new);
                if new_in_old && old_in_new {
                    groups[i].members.push((f.id.clone(), endpoint.iri.clone()));
                    include = false;
                    trace.push(TraceEntry {
                        step: GroupingStep::Merged,
                        groups: groups.clone(),
                    });
                } else if old_in_new {
                    groups.remove(i);
                    trace.push(TraceEntry {
                        step: GroupingStep::Removed,
                        groups: groups.clone(),
                    });
                    continue;
                } else if new_in_old {
                    include = false;
                }
                i += 1;
            }
            if include {
                groups.push(FragmentGroup {
                    members: vec![(f.id.clone(), endpoint.iri.clone())],
                });
                trace.push(TraceEntry {
                    step: GroupingStep::Added,
                    groups: groups.clone(),
                });
            }
        }
    }
    Ok(Grouping { groups, trace })
}

/// Endpoint sets of the groups. Public endpoints are dropped from any group
/// that also has a consumer. Equal sets collapse; the result is sorted.
pub fn get_endpoints(
    groups: &[FragmentGroup],
    catalog: &FederationCatalog,
) -> Vec<BTreeSet<String>> {
    let sets: BTreeSet<BTreeSet<String>> = groups
        .iter()
        .map(|g| {
            let all = g.endpoints();
            let has_consumer = all.iter().any(|e| !catalog.is_public(e));
            all.into_iter()
                .filter(|e| !has_consumer || !catalog.is_public(e))
                .map(str::to_string)
                .collect()
        })
        .collect();
    sets.into_iter().collect()
}
