//! The dependency reference service: one sync run refreshes latest versions
//! and advisories for everything in the store and emits notifications.

mod feed;
mod registry;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use feed::*;
pub use registry::*;

use crate::model::{Coordinate, Ecosystem, PackageKey, SeverityBand, Status};
use crate::store::{
    AuditAction, DependencyId, DependencyRow, NotificationEvent, NotificationKind, RecordOutcome, Store, StoreError,
    VersionId,
};
use crate::version::{compare_versions, max_version};

pub const SYNC_LEASE: &str = "sync";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryFailure {
    pub dependency: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatestVersions {
    pub latest: BTreeMap<DependencyId, String>,
    pub errors: Vec<RegistryFailure>,
}

/// Newest version per dependency, from the first adapter that handles its
/// ecosystem. Internal packages are not published to public registries and
/// are skipped.
pub fn find_latest_versions(deps: &[DependencyRow], registries: &[&dyn RegistryAdapter]) -> LatestVersions {
    let mut out = LatestVersions::default();
    for dep in deps.iter().filter(|d| d.ecosystem != Ecosystem::Internal) {
        let label = dep.package().to_string();
        let Some(adapter) = registries.iter().find(|r| r.handles(dep.ecosystem)) else {
            out.errors.push(RegistryFailure {
                dependency: label,
                message: format!("no registry adapter for {}", dep.ecosystem),
            });
            continue;
        };
        match adapter.list_versions(dep.ecosystem, &dep.group, &dep.name) {
            Ok(versions) => match max_version(versions.iter().map(String::as_str)) {
                Some(v) => {
                    out.latest.insert(dep.id, v.to_string());
                }
                None => out.errors.push(RegistryFailure {
                    dependency: label,
                    message: "registry returned no versions".into(),
                }),
            },
            Err(e) => out.errors.push(RegistryFailure {
                dependency: label,
                message: e.to_string(),
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReport {
    pub versions_checked: usize,
    pub advisories_ingested: usize,
    pub advisories_created: usize,
    pub advisories_updated: usize,
    pub unmatched_advisories: usize,
    pub new_vulns_linked: usize,
    pub links_withdrawn: usize,
    pub new_versions_found: usize,
    pub events_emitted: usize,
    pub registry_errors: Vec<RegistryFailure>,
    pub feed_errors: Vec<FeedRecordError>,
}

impl SyncReport {
    /// Nothing succeeded although something was attempted.
    pub fn is_total_failure(&self, feeds_attempted: usize) -> bool {
        let lookups_attempted = self.versions_checked + self.registry_errors.len();
        let feeds_ok = feeds_attempted > 0 && self.advisories_ingested + self.unmatched_advisories > 0;
        let lookups_ok = self.versions_checked > 0;
        (feeds_attempted > 0 || lookups_attempted > 0) && !feeds_ok && !lookups_ok
    }
}

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("another sync run holds the lease")]
    Busy,
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub struct SyncInputs<'a> {
    pub registries: &'a [&'a dyn RegistryAdapter],
    pub feeds: &'a [FeedDocument],
    pub aliases: &'a AliasMap,
}

/// One sync run under the store's sync lease.
pub fn run_sync(store: &Store, inputs: &SyncInputs<'_>, now: DateTime<Utc>, holder: &str) -> Result<SyncReport, SyncError> {
    match store.acquire_lease(SYNC_LEASE, holder, now, Duration::hours(1)) {
        Ok(()) => {}
        Err(StoreError::LeaseHeld { .. }) => return Err(SyncError::Busy),
        Err(e) => return Err(e.into()),
    }
    let result = sync_locked(store, inputs, now);
    store.release_lease(SYNC_LEASE, holder)?;
    result
}

fn sync_locked(store: &Store, inputs: &SyncInputs<'_>, now: DateTime<Utc>) -> Result<SyncReport, SyncError> {
    let mut report = SyncReport::default();

    // advisories; an id repeated within a run keeps its last record, so a
    // rerun over the same feeds stays a no-op
    let mut latest: Vec<_> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for doc in inputs.feeds {
        match ingest_feed(doc, inputs.aliases) {
            Ok(ingest) => {
                report.advisories_ingested += ingest.vulnerabilities.len();
                report.unmatched_advisories += ingest.unmatched.len();
                report.feed_errors.extend(ingest.malformed);
                for v in ingest.vulnerabilities {
                    match slot.get(&v.id) {
                        Some(&i) => latest[i] = v,
                        None => {
                            slot.insert(v.id.clone(), latest.len());
                            latest.push(v);
                        }
                    }
                }
                for u in &ingest.unmatched {
                    store.record_unmatched(u, now)?;
                }
            }
            Err(FeedError::MalformedFeed { position, message }) => report.feed_errors.push(FeedRecordError {
                origin: doc.origin.clone(),
                position,
                message,
            }),
        }
    }
    for v in &latest {
        match store.record_vulnerability(v, now)? {
            RecordOutcome::Created => report.advisories_created += 1,
            RecordOutcome::Updated => report.advisories_updated += 1,
            RecordOutcome::Unchanged => {}
        }
    }

    // links: recomputed for every stored advisory against every stored version
    let deps: HashMap<DependencyId, DependencyRow> = store.dependencies()?.into_iter().map(|d| (d.id, d)).collect();
    let versions = store.versions()?;
    let mut by_package: HashMap<PackageKey, Vec<(VersionId, Coordinate, Status)>> = HashMap::new();
    for v in &versions {
        let dep = &deps[&v.dependency_id];
        let c = Coordinate {
            ecosystem: dep.ecosystem,
            group: dep.group.clone(),
            name: dep.name.clone(),
            version: v.version.clone(),
            scope: None,
        };
        by_package.entry(dep.package()).or_default().push((v.id, c, v.status));
    }

    let advisories = store.vulnerabilities()?;
    let mut wanted: BTreeSet<(VersionId, String)> = BTreeSet::new();
    let mut info: HashMap<VersionId, (Coordinate, Status)> = HashMap::new();
    for a in &advisories {
        for m in &a.matches {
            for (vid, c, status) in by_package.get(&m.package()).into_iter().flatten() {
                if m.applies_to(c) {
                    wanted.insert((*vid, a.id.clone()));
                    info.insert(*vid, (c.clone(), *status));
                }
            }
        }
    }
    let existing: BTreeSet<(VersionId, String)> = store.vulnerability_links()?.into_iter().collect();
    let severity: HashMap<&str, _> = advisories.iter().map(|a| (a.id.as_str(), a.severity)).collect();

    for (vid, advisory) in wanted.difference(&existing) {
        store.link_vulnerability(*vid, advisory, now)?;
        report.new_vulns_linked += 1;
        let (c, status) = &info[vid];
        let sev = severity[advisory.as_str()];
        store.append_notification(&NotificationEvent {
            kind: NotificationKind::NewVulnerability,
            subject: c.canonical(),
            detail: format!("{advisory} (severity {:.1}, {}) affects this version", sev.score(), sev.band().as_str()),
            at: now,
        })?;
        report.events_emitted += 1;
        if *status == Status::Approved && sev.band() == SeverityBand::Critical {
            // a suggestion for the committee; status is never changed here
            store.append_notification(&NotificationEvent {
                kind: NotificationKind::StatusAutoFlag,
                subject: c.canonical(),
                detail: format!("approved version has critical advisory {advisory}; consider rejecting"),
                at: now,
            })?;
            report.events_emitted += 1;
        }
    }
    for (vid, advisory) in existing.difference(&wanted) {
        if store.withdraw_link(*vid, advisory, now)? {
            report.links_withdrawn += 1;
        }
    }

    // latest versions
    let dep_list: Vec<DependencyRow> = {
        let mut d: Vec<DependencyRow> = deps.values().cloned().collect();
        d.sort_by_key(|d| d.id);
        d
    };
    let latest = find_latest_versions(&dep_list, inputs.registries);
    report.versions_checked = latest.latest.len();
    report.registry_errors = latest.errors;
    for (dep_id, newest) in &latest.latest {
        let dep = &deps[dep_id];
        let stored = versions.iter().filter(|v| v.dependency_id == *dep_id).map(|v| v.version.as_str());
        let Some(highest) = max_version(stored) else { continue };
        if compare_versions(newest, highest).is_gt() && store.latest_notified(*dep_id)?.as_deref() != Some(newest.as_str()) {
            store.append_notification(&NotificationEvent {
                kind: NotificationKind::NewVersionAvailable,
                subject: dep.package().to_string(),
                detail: format!("{newest} is available; highest version in use is {highest}"),
                at: now,
            })?;
            store.set_latest_notified(*dep_id, newest)?;
            report.new_versions_found += 1;
            report.events_emitted += 1;
        }
    }

    store.append_audit(
        AuditAction::SyncCompleted,
        "sync",
        "sync",
        &format!(
            "{} advisories ({} new, {} updated, {} unmatched), {} links added, {} withdrawn, {} newer versions, {} registry errors, {} feed errors",
            report.advisories_ingested,
            report.advisories_created,
            report.advisories_updated,
            report.unmatched_advisories,
            report.new_vulns_linked,
            report.links_withdrawn,
            report.new_versions_found,
            report.registry_errors.len(),
            report.feed_errors.len()
        ),
        now,
    )?;
    Ok(report)
}

/// Every feed under `dir`, recursively: `*.jsonl` files are native feeds,
/// `*.nvd.json` files are NVD documents, and any `aliases.json` files are
/// merged into one alias map. Files are read in path order.
pub fn load_feed_directory(dir: &std::path::Path) -> std::io::Result<(Vec<FeedDocument>, AliasMap)> {
    fn walk(dir: &std::path::Path, out: &mut Vec<std::path::PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                walk(&entry.path(), out)?;
            } else {
                out.push(entry.path());
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    paths.sort();

    let mut docs = Vec::new();
    let mut aliases = AliasMap::default();
    for path in paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let origin = path.strip_prefix(dir).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        if name == "aliases.json" {
            let map = AliasMap::from_json(&std::fs::read(&path)?)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{origin}: {e}")))?;
            aliases.entries.extend(map.entries);
        } else if name.ends_with(".jsonl") {
            docs.push(FeedDocument::new(FeedFormat::Native, origin, std::fs::read(&path)?));
        } else if name.ends_with(".nvd.json") {
            docs.push(FeedDocument::new(FeedFormat::Nvd, origin, std::fs::read(&path)?));
        }
    }
    Ok((docs, aliases))
}

/// Which registries a sync run consults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrySettings {
    /// Maven repository base URL, e.g. `https://repo1.maven.org/maven2`.
    pub maven: Option<String>,
    /// npm registry base URL, e.g. `https://registry.npmjs.org`.
    pub npm: Option<String>,
    /// Directory-backed fixture registry, consulted after the live ones.
    pub fixture_dir: Option<std::path::PathBuf>,
}

impl RegistrySettings {
    pub fn adapters(&self) -> Vec<Box<dyn RegistryAdapter>> {
        let mut out: Vec<Box<dyn RegistryAdapter>> = Vec::new();
        if let Some(url) = &self.maven {
            out.push(Box::new(MavenCentralRegistry::new(url.clone())));
        }
        if let Some(url) = &self.npm {
            out.push(Box::new(NpmRegistry::new(url.clone())));
        }
        if let Some(dir) = &self.fixture_dir {
            out.push(Box::new(FixtureRegistry::new(dir.clone())));
        }
        out
    }
}
