//! Read-only aggregate reports over the store.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Ecosystem, Status};
use crate::store::{CategoryId, DependencyId, DependencyRow, Store, StoreError};
use crate::version::compare_versions;

/// Bucket for libraries nobody has categorized yet.
pub const UNCATEGORIZED: &str = "(uncategorized)";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryBreakdownRow {
    pub category: String,
    pub distinct_libraries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryVulnSummaryRow {
    pub library: String,
    pub group: String,
    pub ecosystem: Ecosystem,
    pub vuln_count: usize,
    pub version_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcosystemStats {
    pub repositories_total: usize,
    pub repositories_by_ecosystem: BTreeMap<Ecosystem, usize>,
    pub distinct_library_versions: usize,
    pub total_open_vulnerabilities: usize,
    pub window_days: u32,
    pub new_vulns_per_day: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionStatus {
    pub version: String,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicationMember {
    pub library: String,
    pub group: String,
    pub ecosystem: Ecosystem,
    pub latest_version: Option<String>,
    pub vuln_count: usize,
    pub versions: Vec<VersionStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicationCategory {
    pub category: String,
    pub distinct_libraries: usize,
    pub members: Vec<DuplicationMember>,
}

/// Everything the reports need, read once.
struct Snapshot {
    deps: Vec<DependencyRow>,
    categories: HashMap<CategoryId, String>,
    /// dependency id -> its versions
    versions: HashMap<DependencyId, Vec<(String, Status)>>,
    /// dependency id -> distinct advisory ids linked to any of its versions
    advisories: HashMap<DependencyId, BTreeSet<String>>,
}

impl Snapshot {
    fn load(store: &Store) -> Result<Self, StoreError> {
        let versions_rows = store.versions()?;
        let owner: HashMap<i64, DependencyId> = versions_rows.iter().map(|v| (v.id, v.dependency_id)).collect();
        let mut versions: HashMap<DependencyId, Vec<(String, Status)>> = HashMap::new();
        for v in versions_rows {
            versions.entry(v.dependency_id).or_default().push((v.version, v.status));
        }
        let mut advisories: HashMap<DependencyId, BTreeSet<String>> = HashMap::new();
        for (vid, advisory) in store.vulnerability_links()? {
            advisories.entry(owner[&vid]).or_default().insert(advisory);
        }
        Ok(Snapshot {
            deps: store.dependencies()?,
            categories: store.categories()?.into_iter().map(|c| (c.id, c.name)).collect(),
            versions,
            advisories,
        })
    }

    fn category_of(&self, d: &DependencyRow) -> &str {
        d.category_id
            .and_then(|id| self.categories.get(&id))
            .map_or(UNCATEGORIZED, String::as_str)
    }

    fn observed(&self, d: &DependencyRow) -> bool {
        self.versions.get(&d.id).is_some_and(|v| !v.is_empty())
    }

    fn vuln_count(&self, d: &DependencyRow) -> usize {
        self.advisories.get(&d.id).map_or(0, BTreeSet::len)
    }

    fn version_count(&self, d: &DependencyRow) -> usize {
        self.versions.get(&d.id).map_or(0, Vec::len)
    }

    fn breakdown(&self) -> BTreeMap<&str, Vec<&DependencyRow>> {
        let mut by_cat: BTreeMap<&str, Vec<&DependencyRow>> = BTreeMap::new();
        for d in self.deps.iter().filter(|d| self.observed(d)) {
            by_cat.entry(self.category_of(d)).or_default().push(d);
        }
        by_cat
    }
}

/// Distinct observed libraries per category, largest first.
pub fn category_breakdown(store: &Store) -> Result<Vec<CategoryBreakdownRow>, ReportError> {
    let snap = Snapshot::load(store)?;
    let mut rows: Vec<CategoryBreakdownRow> = snap
        .breakdown()
        .into_iter()
        .map(|(category, libs)| CategoryBreakdownRow {
            category: category.to_string(),
            distinct_libraries: libs.len(),
        })
        .collect();
    rows.sort_by(|a, b| b.distinct_libraries.cmp(&a.distinct_libraries).then_with(|| a.category.cmp(&b.category)));
    Ok(rows)
}

/// Per-library advisory and version counts for one category, most
/// vulnerable first.
pub fn vuln_summary(store: &Store, category: &str) -> Result<Vec<LibraryVulnSummaryRow>, ReportError> {
    let snap = Snapshot::load(store)?;
    if category != UNCATEGORIZED && !snap.categories.values().any(|c| c == category) {
        return Err(ReportError::UnknownCategory(category.to_string()));
    }
    let mut rows: Vec<LibraryVulnSummaryRow> = snap
        .deps
        .iter()
        .filter(|d| snap.category_of(d) == category)
        .map(|d| LibraryVulnSummaryRow {
            library: d.name.clone(),
            group: d.group.clone(),
            ecosystem: d.ecosystem,
            vuln_count: snap.vuln_count(d),
            version_count: snap.version_count(d),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.vuln_count
            .cmp(&a.vuln_count)
            .then_with(|| a.library.cmp(&b.library))
            .then_with(|| a.group.cmp(&b.group))
            .then_with(|| a.ecosystem.as_str().cmp(b.ecosystem.as_str()))
    });
    Ok(rows)
}

/// Portfolio-wide counts. `new_vulns_per_day` is the number of advisories
/// first recorded in `(now - window_days, now]`, divided by `window_days`.
pub fn ecosystem_stats(store: &Store, window_days: u32, now: DateTime<Utc>) -> Result<EcosystemStats, ReportError> {
    if window_days == 0 {
        return Err(ReportError::InvalidArgument("window must be at least one day".into()));
    }
    let apps = store.applications()?;
    let deps: HashMap<DependencyId, Ecosystem> = store.dependencies()?.into_iter().map(|d| (d.id, d.ecosystem)).collect();
    let versions = store.versions()?;
    let eco_of_version: HashMap<i64, Ecosystem> = versions.iter().map(|v| (v.id, deps[&v.dependency_id])).collect();

    let mut app_ecosystems: BTreeSet<(Ecosystem, i64)> = BTreeSet::new();
    for link in store.application_dependencies()? {
        app_ecosystems.insert((eco_of_version[&link.dependency_version_id], link.application_id));
    }
    let mut repositories_by_ecosystem = BTreeMap::new();
    for (eco, _) in &app_ecosystems {
        *repositories_by_ecosystem.entry(*eco).or_insert(0) += 1;
    }

    let open: BTreeSet<String> = store.vulnerability_links()?.into_iter().map(|(_, a)| a).collect();
    let start = now - Duration::days(i64::from(window_days));
    let recent = store
        .vulnerabilities_with_recorded()?
        .into_iter()
        .filter(|(_, at)| *at > start && *at <= now)
        .count();

    Ok(EcosystemStats {
        repositories_total: apps.len(),
        repositories_by_ecosystem,
        distinct_library_versions: versions.len(),
        total_open_vulnerabilities: open.len(),
        window_days,
        new_vulns_per_day: recent as f64 / f64::from(window_days),
    })
}

/// Categories with more than `threshold` libraries, members ordered least
/// vulnerable first, then by newest latest version.
pub fn duplication_report(store: &Store, threshold: usize) -> Result<Vec<DuplicationCategory>, ReportError> {
    if threshold == 0 {
        return Err(ReportError::InvalidArgument("threshold must be at least 1".into()));
    }
    let snap = Snapshot::load(store)?;
    let mut out = Vec::new();
    for (category, libs) in snap.breakdown() {
        if libs.len() <= threshold {
            continue;
        }
        let mut members: Vec<DuplicationMember> = libs
            .iter()
            .map(|d| {
                let mut versions: Vec<VersionStatus> = snap
                    .versions
                    .get(&d.id)
                    .into_iter()
                    .flatten()
                    .map(|(version, status)| VersionStatus {
                        version: version.clone(),
                        status: *status,
                    })
                    .collect();
                versions.sort_by(|a, b| compare_versions(&a.version, &b.version).then_with(|| a.version.cmp(&b.version)));
                DuplicationMember {
                    library: d.name.clone(),
                    group: d.group.clone(),
                    ecosystem: d.ecosystem,
                    latest_version: versions.last().map(|v| v.version.clone()),
                    vuln_count: snap.vuln_count(d),
                    versions,
                }
            })
            .collect();
        members.sort_by(|a, b| {
            a.vuln_count
                .cmp(&b.vuln_count)
                .then_with(|| match (&a.latest_version, &b.latest_version) {
                    (Some(x), Some(y)) => compare_versions(y, x),
                    (x, y) => y.is_some().cmp(&x.is_some()),
                })
                .then_with(|| a.library.cmp(&b.library))
                .then_with(|| a.group.cmp(&b.group))
        });
        out.push(DuplicationCategory {
            category: category.to_string(),
            distinct_libraries: libs.len(),
            members,
        });
    }
    out.sort_by(|a, b| b.distinct_libraries.cmp(&a.distinct_libraries).then_with(|| a.category.cmp(&b.category)));
    Ok(out)
}

/// Plain-text table with a header rule; `right` marks right-aligned columns.
pub fn render_table(headers: &[&str], right: &[bool], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = widths[i] - cell.chars().count();
            if right.get(i).copied().unwrap_or(false) {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            } else {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            }
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    let head: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    out.push_str(&line(&head));
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(&rule));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn breakdown_table(rows: &[CategoryBreakdownRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.category.clone(), r.distinct_libraries.to_string()])
        .collect();
    render_table(&["Library Domain", "# of Different Libraries"], &[false, true], &body)
}

pub fn vuln_summary_table(rows: &[LibraryVulnSummaryRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.library.clone(), r.vuln_count.to_string(), r.version_count.to_string()])
        .collect();
    render_table(&["Library", "# Vulns", "# Versions"], &[false, true, true], &body)
}

pub fn stats_table(s: &EcosystemStats) -> String {
    let mut body = vec![vec!["repositories_total".to_string(), s.repositories_total.to_string()]];
    for (eco, n) in &s.repositories_by_ecosystem {
        body.push(vec![format!("repositories[{eco}]"), n.to_string()]);
    }
    body.push(vec!["distinct_library_versions".into(), s.distinct_library_versions.to_string()]);
    body.push(vec!["total_open_vulnerabilities".into(), s.total_open_vulnerabilities.to_string()]);
    body.push(vec![format!("new_vulns_per_day ({}d window)", s.window_days), format!("{:.2}", s.new_vulns_per_day)]);
    render_table(&["Statistic", "Value"], &[false, true], &body)
}

pub fn duplication_table(cats: &[DuplicationCategory]) -> String {
    let mut out = String::new();
    for (i, c) in cats.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{} ({} libraries)", c.category, c.distinct_libraries);
        let body: Vec<Vec<String>> = c
            .members
            .iter()
            .map(|m| {
                let statuses: BTreeMap<Status, usize> = m.versions.iter().fold(BTreeMap::new(), |mut acc, v| {
                    *acc.entry(v.status).or_insert(0) += 1;
                    acc
                });
                let statuses = statuses
                    .iter()
                    .map(|(s, n)| format!("{s}={n}"))
                    .collect::<Vec<_>>()
                    .join(",");
                vec![
                    m.library.clone(),
                    m.group.clone(),
                    m.latest_version.clone().unwrap_or_default(),
                    m.vuln_count.to_string(),
                    statuses,
                ]
            })
            .collect();
        out.push_str(&render_table(
            &["Library", "Group", "Latest", "# Vulns", "Statuses"],
            &[false, false, false, true, false],
            &body,
        ));
    }
    out
}
