//! Declarative federation knowledge: which endpoints exist, which are
//! public, and which fragments each one exposes.

mod service;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::query::{parse_selector, QueryError, Selector};

pub use service::{parse_service_description, ServiceDescription};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("duplicate endpoint {0}")]
    DuplicateEndpoint(String),
    #[error("duplicate fragment id {0}")]
    DuplicateFragment(String),
    #[error("endpoint {endpoint} lists unknown fragment {fragment}")]
    UnknownFragment { endpoint: String, fragment: String },
    #[error("fragment {fragment} has undeclared authoritative source {source_iri}")]
    UnknownSource {
        fragment: String,
        source_iri: String,
    },
    #[error(
        "fragment {fragment} names consumer endpoint {source_iri} as its authoritative source"
    )]
    SourceNotPublic {
        fragment: String,
        source_iri: String,
    },
    #[error("public endpoint {endpoint} exposes fragment {fragment} of another source")]
    ForeignFragment { endpoint: String, fragment: String },
    #[error("dataset given for {0}, which is not a declared public endpoint")]
    DatasetForUnknown(String),
    #[error("fragment {fragment}: {error}")]
    Selector { fragment: String, error: QueryError },
    #[error("service description: {0}")]
    Description(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Public,
    Consumer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentDef {
    pub id: String,
    pub selector: Selector,
    /// IRI of the authoritative public endpoint.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointDescriptor {
    pub iri: String,
    pub role: Role,
    pub fragments: BTreeSet<String>,
}

impl EndpointDescriptor {
    pub fn is_public(&self) -> bool {
        self.role == Role::Public
    }
}

/// Fraction of containment facts made visible to selection, and the seed
/// that decides which ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visibility {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for Visibility {
    fn default() -> Self {
        Visibility {
            fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Downgrade fragments with an undeclared authoritative source to
    /// warnings instead of errors.
    pub lenient_sources: bool,
}

#[derive(Debug, Clone, Default)]
pub struct FederationCatalog {
    endpoints: BTreeMap<String, EndpointDescriptor>,
    fragments: BTreeMap<String, FragmentDef>,
    datasets: BTreeMap<String, String>,
    pub visibility: Visibility,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    endpoints: Vec<EndpointDoc>,
    fragments: Vec<FragmentDoc>,
    #[serde(default)]
    datasets: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointDoc {
    iri: String,
    role: Role,
    fragments: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FragmentDoc {
    id: String,
    selector: String,
    source: String,
}

/// Loads a JSON catalog. Returns the catalog and any warnings raised under
/// lenient options.
pub fn load_catalog(
    text: &str,
    opts: &LoadOptions,
) -> Result<(FederationCatalog, Vec<String>), CatalogError> {
    let doc: CatalogDoc = serde_json::from_str(text)?;
    let mut fragments = Vec::with_capacity(doc.fragments.len());
    for f in doc.fragments {
        let selector = parse_selector(&f.selector).map_err(|error| CatalogError::Selector {
            fragment: f.id.clone(),
            error,
        })?;
        fragments.push(FragmentDef {
            id: f.id,
            selector,
            source: f.source,
        });
    }
    let endpoints = doc
        .endpoints
        .into_iter()
        .map(|e| EndpointDescriptor {
            iri: e.iri,
            role: e.role,
            fragments: e.fragments.into_iter().collect(),
        })
        .collect();
    FederationCatalog::build(endpoints, fragments, doc.datasets, opts)
}

impl FederationCatalog {
    pub fn new(
        endpoints: Vec<EndpointDescriptor>,
        fragments: Vec<FragmentDef>,
        datasets: BTreeMap<String, String>,
    ) -> Result<Self, CatalogError> {
        Self::build(endpoints, fragments, datasets, &LoadOptions::default()).map(|(c, _)| c)
    }

    fn build(
        endpoints: Vec<EndpointDescriptor>,
        fragments: Vec<FragmentDef>,
        datasets: BTreeMap<String, String>,
        opts: &LoadOptions,
    ) -> Result<(Self, Vec<String>), CatalogError> {
        let mut warnings = Vec::new();
        let mut by_iri = BTreeMap::new();
        for e in endpoints {
            if by_iri.contains_key(&e.iri) {
                return Err(CatalogError::DuplicateEndpoint(e.iri));
            }
            by_iri.insert(e.iri.clone(), e);
        }
        let mut by_id = BTreeMap::new();
        for f in fragments {
            if by_id.contains_key(&f.id) {
                return Err(CatalogError::DuplicateFragment(f.id));
            }
            match by_iri.get(&f.source) {
                None if opts.lenient_sources => warnings.push(format!(
                    "fragment {} has undeclared authoritative source {}; its answers may be incomplete",
                    f.id, f.source
                )),
                None => {
                    return Err(CatalogError::UnknownSource {
                        fragment: f.id,
                        source_iri: f.source,
                    })
                }
                Some(e) if !e.is_public() => {
                    return Err(CatalogError::SourceNotPublic {
                        fragment: f.id,
                        source_iri: f.source,
                    })
                }
                Some(_) => {}
            }
            by_id.insert(f.id.clone(), f);
        }
        for e in by_iri.values() {
            for id in &e.fragments {
                let Some(f) = by_id.get(id) else {
                    return Err(CatalogError::UnknownFragment {
                        endpoint: e.iri.clone(),
                        fragment: id.clone(),
                    });
                };
                if e.is_public() && f.source != e.iri {
                    return Err(CatalogError::ForeignFragment {
                        endpoint: e.iri.clone(),
                        fragment: id.clone(),
                    });
                }
            }
        }
        for iri in datasets.keys() {
            if !by_iri.get(iri).is_some_and(EndpointDescriptor::is_public) {
                return Err(CatalogError::DatasetForUnknown(iri.clone()));
            }
        }
        Ok((
            FederationCatalog {
                endpoints: by_iri,
                fragments: by_id,
                datasets,
                visibility: Visibility::default(),
            },
            warnings,
        ))
    }

    /// Merges consumer service descriptions with a list of public endpoints.
    pub fn from_descriptions(
        publics: &[&str],
        descriptions: Vec<ServiceDescription>,
    ) -> Result<Self, CatalogError> {
        let mut endpoints: Vec<EndpointDescriptor> = publics
            .iter()
            .map(|iri| EndpointDescriptor {
                iri: iri.to_string(),
                role: Role::Public,
                fragments: BTreeSet::new(),
            })
            .collect();
        let mut fragments = Vec::new();
        for d in descriptions {
            endpoints.push(d.endpoint);
            fragments.extend(d.fragments);
        }
        Self::new(endpoints, fragments, BTreeMap::new())
    }

    pub fn with_visibility(mut self, visibility: Visibility) -> Self {
        self.visibility = visibility;
        self
    }

    pub fn to_json(&self) -> String {
        let doc = CatalogDoc {
            endpoints: self
                .endpoints
                .values()
                .map(|e| EndpointDoc {
                    iri: e.iri.clone(),
                    role: e.role,
                    fragments: e.fragments.iter().cloned().collect(),
                })
                .collect(),
            fragments: self
                .fragments
                .values()
                .map(|f| FragmentDoc {
                    id: f.id.clone(),
                    selector: f.selector.to_string(),
                    source: f.source.clone(),
                })
                .collect(),
            datasets: self.datasets.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("catalog serializes")
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &EndpointDescriptor> {
        self.endpoints.values()
    }

    pub fn endpoint(&self, iri: &str) -> Option<&EndpointDescriptor> {
        self.endpoints.get(iri)
    }

    pub fn fragments(&self) -> impl Iterator<Item = &FragmentDef> {
        self.fragments.values()
    }

    pub fn fragment(&self, id: &str) -> Option<&FragmentDef> {
        self.fragments.get(id)
    }

    pub fn datasets(&self) -> &BTreeMap<String, String> {
        &self.datasets
    }

    pub fn set_datasets(&mut self, datasets: BTreeMap<String, String>) {
        self.datasets = datasets;
    }

    pub fn is_public(&self, iri: &str) -> bool {
        self.endpoints
            .get(iri)
            .is_some_and(EndpointDescriptor::is_public)
    }

    pub fn public_endpoints(&self) -> impl Iterator<Item = &EndpointDescriptor> {
        self.endpoints.values().filter(|e| e.is_public())
    }

    /// Endpoints with consumers first, then lexicographic by IRI.
    pub fn ordered_endpoints(&self) -> Vec<&EndpointDescriptor> {
        let mut out: Vec<_> = self.endpoints.values().collect();
        out.sort_by(|a, b| endpoint_order(a.is_public(), &a.iri, b.is_public(), &b.iri));
        out
    }

    /// Fragments an endpoint can serve, sorted by id. A public endpoint
    /// serves every fragment it is the authoritative source of.
    pub fn exposed(&self, iri: &str) -> Vec<&FragmentDef> {
        let Some(e) = self.endpoints.get(iri) else {
            return Vec::new();
        };
        let mut ids: BTreeSet<&str> = e.fragments.iter().map(String::as_str).collect();
        if e.is_public() {
            ids.extend(
                self.fragments
                    .values()
                    .filter(|f| f.source == e.iri)
                    .map(|f| f.id.as_str()),
            );
        }
        ids.into_iter().map(|id| &self.fragments[id]).collect()
    }
}

/// Consumer before public, then lexicographic IRI.
pub fn endpoint_order(a_public: bool, a: &str, b_public: bool, b: &str) -> std::cmp::Ordering {
    (a_public, a).cmp(&(b_public, b))
}
