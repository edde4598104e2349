use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_manifest, DeclaredDependency, DependencyFlag, ManifestFile, ManifestWarning};
use crate::model::{Coordinate, Ecosystem};

/// One SBOM line: a coordinate plus the annotations it was declared with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbomEntry {
    #[serde(flatten)]
    pub coordinate: Coordinate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<DependencyFlag>,
}

impl SbomEntry {
    pub fn new(coordinate: Coordinate) -> Self {
        SbomEntry {
            coordinate,
            spec: None,
            flags: BTreeSet::new(),
        }
    }
}

/// The direct-dependency bill of materials of one application at one commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbomSnapshot {
    pub application: String,
    pub commit: String,
    pub captured_at: DateTime<Utc>,
    /// Unique by canonical coordinate, sorted by it.
    pub dependencies: Vec<SbomEntry>,
}

impl SbomSnapshot {
    /// Builds a snapshot from arbitrary entries, enforcing set semantics.
    /// The first entry for a canonical coordinate wins; flags are merged.
    pub fn new(
        application: impl Into<String>,
        commit: impl Into<String>,
        captured_at: DateTime<Utc>,
        entries: impl IntoIterator<Item = SbomEntry>,
    ) -> Self {
        let mut by_key: BTreeMap<String, SbomEntry> = BTreeMap::new();
        for entry in entries {
            by_key
                .entry(entry.coordinate.canonical())
                .and_modify(|existing| existing.flags.extend(entry.flags.iter().copied()))
                .or_insert(entry);
        }
        SbomSnapshot {
            application: application.into(),
            commit: commit.into(),
            captured_at,
            dependencies: by_key.into_values().collect(),
        }
    }

    pub fn coordinates(&self) -> impl Iterator<Item = &Coordinate> {
        self.dependencies.iter().map(|e| &e.coordinate)
    }

    pub fn is_empty(&self) -> bool {
        self.dependencies.is_empty()
    }

    pub fn len(&self) -> usize {
        self.dependencies.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbomOptions {
    /// Group prefixes (for npm/PyPI: name prefixes) that mark a dependency as
    /// internally developed.
    #[serde(default)]
    pub internal_prefixes: Vec<String>,
}

impl SbomOptions {
    pub fn with_internal_prefixes<I, S>(prefixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SbomOptions {
            internal_prefixes: prefixes.into_iter().map(Into::into).collect(),
        }
    }

    fn is_internal(&self, c: &Coordinate) -> bool {
        let key = if c.ecosystem.uses_default_group() { &c.name } else { &c.group };
        self.internal_prefixes.iter().any(|p| !p.is_empty() && key.starts_with(p.as_str()))
    }

    fn classify(&self, mut c: Coordinate) -> Coordinate {
        // internal coordinates keep a real group; default-group packages
        // carry their ecosystem's placeholder through unchanged
        if self.is_internal(&c) && !c.ecosystem.uses_default_group() {
            c.ecosystem = Ecosystem::Internal;
        }
        c
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SbomError {
    #[error("application name is empty")]
    EmptyApplication,
}

/// A snapshot plus everything that went wrong while producing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbomBuild {
    pub snapshot: SbomSnapshot,
    /// Per-line and per-dependency problems, tagged with their manifest path.
    pub warnings: Vec<ManifestWarning>,
    /// Paths of manifests that could not be parsed at all.
    pub malformed: Vec<String>,
    /// Dependencies declared per manifest before dedupe.
    pub declared_counts: Vec<(String, usize)>,
}

impl SbomBuild {
    pub fn all_malformed(&self) -> bool {
        !self.declared_counts.is_empty() && self.declared_counts.len() == self.malformed.len()
    }
}

/// Parses every manifest, unions and dedupes the coordinates. A malformed
/// manifest becomes a warning; the others are still parsed.
pub fn build_sbom(
    application: &str,
    commit: &str,
    manifests: &[ManifestFile],
    options: &SbomOptions,
    captured_at: DateTime<Utc>,
) -> Result<SbomBuild, SbomError> {
    if application.trim().is_empty() {
        return Err(SbomError::EmptyApplication);
    }
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut malformed = Vec::new();
    let mut declared_counts = Vec::new();

    for manifest in manifests {
        match parse_manifest(manifest.kind, &manifest.content) {
            Ok(parsed) => {
                declared_counts.push((manifest.path.clone(), parsed.dependencies.len()));
                warnings.extend(parsed.warnings.into_iter().map(|mut w| {
                    w.path = Some(manifest.path.clone());
                    w
                }));
                entries.extend(parsed.dependencies.into_iter().map(|d| entry(d, options)));
            }
            Err(e) => {
                declared_counts.push((manifest.path.clone(), 0));
                malformed.push(manifest.path.clone());
                warnings.push(ManifestWarning {
                    path: Some(manifest.path.clone()),
                    line: None,
                    message: e.to_string(),
                });
            }
        }
    }

    Ok(SbomBuild {
        snapshot: SbomSnapshot::new(application, commit, captured_at, entries),
        warnings,
        malformed,
        declared_counts,
    })
}

fn entry(dep: DeclaredDependency, options: &SbomOptions) -> SbomEntry {
    SbomEntry {
        coordinate: options.classify(dep.coordinate),
        spec: dep.spec,
        flags: dep.flags,
    }
}
