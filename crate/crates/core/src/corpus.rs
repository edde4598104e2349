//! Seeding helpers: library catalogs loaded from JSON, and a synthetic
//! portfolio generator for exercising reports at scale.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::manifest::{SbomEntry, SbomSnapshot};
use crate::model::{Coordinate, Ecosystem, ModelError, PackageKey};
use crate::store::{Store, StoreError};

/// Library domains of the Java portfolio and how many distinct libraries
/// each one holds.
pub const JAVA_DOMAIN_BREAKDOWN: &[(&str, usize)] = &[
    ("Web Frameworks", 60),
    ("Logging", 54),
    ("Database Connectivity", 52),
    ("REST framework", 43),
    ("SOAP", 30),
    ("PDF", 34),
    ("Email", 21),
    ("ORM", 21),
    ("XML Parser", 18),
    ("Encryption", 16),
    ("JSON Parser", 12),
    ("Date/Time Parser", 8),
    ("Charting", 7),
    ("Caching", 6),
];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogLibrary {
    pub ecosystem: Ecosystem,
    pub group: String,
    pub name: String,
    pub versions: Vec<String>,
}

/// One category's libraries with every version in use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub category: String,
    #[serde(default)]
    pub description: Option<String>,
    pub libraries: Vec<CatalogLibrary>,
}

impl Catalog {
    pub fn from_json(raw: &[u8]) -> Result<Self, CorpusError> {
        serde_json::from_slice(raw).map_err(|e| CorpusError::Catalog(e.to_string()))
    }

    pub fn version_count(&self) -> usize {
        self.libraries.iter().map(|l| l.versions.len()).sum()
    }

    /// The catalog spread over `apps` synthetic applications named
    /// `{prefix}-NN`; version k of the flattened list goes to app k mod apps.
    pub fn sboms(&self, prefix: &str, apps: usize, captured_at: DateTime<Utc>) -> Result<Vec<SbomSnapshot>, CorpusError> {
        let apps = apps.max(1);
        let mut buckets: Vec<Vec<SbomEntry>> = vec![Vec::new(); apps];
        let mut k = 0;
        for lib in &self.libraries {
            for v in &lib.versions {
                let c = Coordinate::new(lib.ecosystem, &lib.group, &lib.name, v)?;
                buckets[k % apps].push(SbomEntry::new(c));
                k += 1;
            }
        }
        Ok(buckets
            .into_iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty())
            .map(|(i, b)| SbomSnapshot::new(format!("{prefix}-{:02}", i + 1), "seed", captured_at, b))
            .collect())
    }
}

/// Observes every catalog version, creates the category if needed and
/// assigns it to each library.
pub fn seed_catalog(store: &Store, catalog: &Catalog, apps: usize, now: DateTime<Utc>) -> Result<(), CorpusError> {
    let prefix: String = catalog
        .category
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    for sbom in catalog.sboms(&prefix, apps, now)? {
        store.upsert_observation(&sbom, now)?;
    }
    let category = match store.category_by_name(&catalog.category)? {
        Some(c) => c,
        None => store.create_category(&catalog.category, catalog.description.as_deref())?,
    };
    for lib in &catalog.libraries {
        let key = PackageKey {
            ecosystem: lib.ecosystem,
            group: lib.group.clone(),
            name: lib.name.clone(),
        };
        let dep = store
            .find_dependency(&key)?
            .ok_or_else(|| CorpusError::Catalog(format!("{key} was not observed")))?;
        store.assign_category(dep.id, category.id, "seed", now)?;
    }
    Ok(())
}

/// Shape of a synthetic portfolio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub seed: u64,
    /// Repositories per ecosystem.
    pub repositories: Vec<(Ecosystem, usize)>,
    /// Categorized Maven libraries: (category, distinct libraries).
    pub categories: Vec<(String, usize)>,
    /// Uncategorized libraries per non-Maven ecosystem.
    pub other_libraries: usize,
    pub max_versions_per_library: usize,
    pub deps_per_repository: (usize, usize),
}

impl CorpusSpec {
    /// 527 Maven, 211 NuGet and 42 npm repositories over the Java domain
    /// breakdown. The non-Java ecosystems share a small uncategorized pool so
    /// that the breakdown's top rows are the Java domains.
    pub fn reference_portfolio(seed: u64) -> Self {
        CorpusSpec {
            seed,
            repositories: vec![(Ecosystem::Maven, 527), (Ecosystem::Nuget, 211), (Ecosystem::Npm, 42)],
            categories: JAVA_DOMAIN_BREAKDOWN.iter().map(|(c, n)| (c.to_string(), *n)).collect(),
            other_libraries: 2,
            max_versions_per_library: 3,
            deps_per_repository: (3, 8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sboms: Vec<SbomSnapshot>,
    /// Category name → its member packages.
    pub categories: BTreeMap<String, Vec<PackageKey>>,
}

struct Library {
    key: PackageKey,
    versions: Vec<String>,
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.to_lowercase().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn make_versions(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max.max(1));
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let v = format!("{}.{}.{}", rng.gen_range(0..5), rng.gen_range(0..20), rng.gen_range(0..10));
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Deterministic for a given spec. Every library is used by at least one
/// repository of its ecosystem, and every repository declares at least one
/// dependency.
pub fn generate(spec: &CorpusSpec, captured_at: DateTime<Utc>) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pools: BTreeMap<Ecosystem, Vec<Library>> = BTreeMap::new();
    let mut categories = BTreeMap::new();

    for (category, n) in &spec.categories {
        let s = slug(category);
        let mut members = Vec::new();
        for i in 1..=*n {
            let key = PackageKey {
                ecosystem: Ecosystem::Maven,
                group: format!("org.example.{s}"),
                name: format!("{s}-lib-{i:02}"),
            };
            members.push(key.clone());
            let versions = make_versions(&mut rng, spec.max_versions_per_library);
            pools.entry(Ecosystem::Maven).or_default().push(Library { key, versions });
        }
        categories.insert(category.clone(), members);
    }
    for (eco, _) in &spec.repositories {
        if *eco == Ecosystem::Maven {
            continue;
        }
        for i in 1..=spec.other_libraries {
            let group = if eco.uses_default_group() {
                crate::model::DEFAULT_GROUP.to_string()
            } else {
                format!("vendor.{}", eco.as_str())
            };
            let key = PackageKey {
                ecosystem: *eco,
                group,
                name: format!("{}-lib-{i:02}", eco.as_str()),
            };
            let versions = make_versions(&mut rng, spec.max_versions_per_library);
            pools.entry(*eco).or_default().push(Library { key, versions });
        }
    }

    let mut sboms = Vec::new();
    for (eco, count) in &spec.repositories {
        let pool = pools.get(eco).map(Vec::as_slice).unwrap_or(&[]);
        let mut repos: Vec<Vec<SbomEntry>> = vec![Vec::new(); *count];
        if *count == 0 {
            continue;
        }
        let pick = |lib: &Library, rng: &mut ChaCha8Rng| {
            let version = lib.versions.choose(rng).expect("libraries have versions").clone();
            SbomEntry::new(Coordinate {
                ecosystem: lib.key.ecosystem,
                group: lib.key.group.clone(),
                name: lib.key.name.clone(),
                version,
                scope: None,
            })
        };
        // coverage pass: every library lands somewhere
        for (j, lib) in pool.iter().enumerate() {
            let entry = pick(lib, &mut rng);
            repos[j % count].push(entry);
        }
        if !pool.is_empty() {
            let (lo, hi) = spec.deps_per_repository;
            for repo in repos.iter_mut() {
                let target = rng.gen_range(lo.max(1)..=hi.max(lo.max(1)));
                while repo.len() < target {
                    let lib = pool.choose(&mut rng).expect("non-empty pool");
                    let entry = pick(lib, &mut rng);
                    repo.push(entry);
                }
            }
        }
        for (i, deps) in repos.into_iter().enumerate() {
            sboms.push(SbomSnapshot::new(format!("{}-repo-{:04}", eco.as_str(), i + 1), "synthetic", captured_at, deps));
        }
    }
    Corpus { sboms, categories }
}

/// Observes every corpus SBOM and assigns categories.
pub fn seed_corpus(store: &Store, corpus: &Corpus, now: DateTime<Utc>) -> Result<(), CorpusError> {
    for sbom in &corpus.sboms {
        store.upsert_observation(sbom, now)?;
    }
    for (category, members) in &corpus.categories {
        let cat = match store.category_by_name(category)? {
            Some(c) => c,
            None => store.create_category(category, None)?,
        };
        for key in members {
            if let Some(dep) = store.find_dependency(key)? {
                store.assign_category(dep.id, cat.id, "seed", now)?;
            }
        }
    }
    Ok(())
}
