//! Advisory feed parsing: the native JSON-lines format and a subset of the
//! NVD CVE JSON schema.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Ecosystem, Severity, DEFAULT_GROUP};
use crate::range::{Comparator, Constraint, VersionRange};
use crate::store::{AdvisoryMatch, AdvisorySource, UnmatchedAdvisory, VulnerabilityRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedFormat {
    Native,
    Nvd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedDocument {
    pub format: FeedFormat,
    /// Where the document came from, for error messages.
    pub origin: String,
    pub raw: Vec<u8>,
}

impl FeedDocument {
    pub fn new(format: FeedFormat, origin: impl Into<String>, raw: impl Into<Vec<u8>>) -> Self {
        FeedDocument {
            format,
            origin: origin.into(),
            raw: raw.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AliasTarget {
    pub ecosystem: Ecosystem,
    pub group: String,
    pub name: String,
}

/// External product keys (`vendor:product`) mapped to package coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasMap {
    pub entries: BTreeMap<String, AliasTarget>,
}

impl AliasMap {
    pub fn from_json(raw: &[u8]) -> Result<Self, FeedError> {
        serde_json::from_slice(raw).map_err(|e| FeedError::MalformedFeed {
            position: format!("line {}", e.line()),
            message: format!("alias map: {e}"),
        })
    }

    pub fn get(&self, key: &str) -> Option<&AliasTarget> {
        self.entries.get(key)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeedError {
    #[error("malformed feed at {position}: {message}")]
    MalformedFeed { position: String, message: String },
}

/// One advisory record that could not be read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedRecordError {
    pub origin: String,
    pub position: String,
    pub message: String,
}

impl std::fmt::Display for FeedRecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.origin, self.position, self.message)
    }
}

/// The outcome of reading one document. Every advisory in the document ends
/// up in exactly one of the three lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeedIngest {
    pub vulnerabilities: Vec<VulnerabilityRow>,
    pub unmatched: Vec<UnmatchedAdvisory>,
    pub malformed: Vec<FeedRecordError>,
}

impl FeedIngest {
    pub fn total(&self) -> usize {
        self.vulnerabilities.len() + self.unmatched.len() + self.malformed.len()
    }
}

/// Reads a feed document. Record-level problems are collected in
/// `malformed`; only a document that cannot be read at all is an error.
pub fn ingest_feed(doc: &FeedDocument, aliases: &AliasMap) -> Result<FeedIngest, FeedError> {
    match doc.format {
        FeedFormat::Native => ingest_native(doc, aliases),
        FeedFormat::Nvd => ingest_nvd(doc, aliases),
    }
}

#[derive(Deserialize)]
struct NativeAdvisory {
    id: String,
    severity: f64,
    #[serde(default)]
    summary: String,
    published: String,
    matches: Vec<NativeMatch>,
}

#[derive(Deserialize)]
struct NativeMatch {
    ecosystem: Option<Ecosystem>,
    group: Option<String>,
    name: Option<String>,
    /// Alternative to ecosystem/group/name, resolved through the alias map.
    product: Option<String>,
    range: VersionRange,
}

enum Mapped {
    Row(VulnerabilityRow),
    Unmatched(UnmatchedAdvisory),
}

fn ingest_native(doc: &FeedDocument, aliases: &AliasMap) -> Result<FeedIngest, FeedError> {
    let text = std::str::from_utf8(&doc.raw).map_err(|e| FeedError::MalformedFeed {
        position: doc.origin.clone(),
        message: format!("not UTF-8: {e}"),
    })?;
    let mut out = FeedIngest::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let position = format!("line {}", idx + 1);
        let record = serde_json::from_str::<NativeAdvisory>(line)
            .map_err(|e| e.to_string())
            .and_then(|a| map_native(a, aliases));
        match record {
            Ok(Mapped::Row(v)) => out.vulnerabilities.push(v),
            Ok(Mapped::Unmatched(u)) => out.unmatched.push(u),
            Err(message) => out.malformed.push(FeedRecordError {
                origin: doc.origin.clone(),
                position,
                message,
            }),
        }
    }
    Ok(out)
}

fn map_native(a: NativeAdvisory, aliases: &AliasMap) -> Result<Mapped, String> {
    if a.id.trim().is_empty() {
        return Err("empty advisory id".into());
    }
    let severity = Severity::from_score(a.severity).map_err(|e| e.to_string())?;
    let published = parse_published(&a.published)?;
    if a.matches.is_empty() {
        return Err(format!("advisory {} has no match entries", a.id));
    }
    let mut matches = Vec::new();
    let mut missing = Vec::new();
    for m in a.matches {
        let target = match (m.ecosystem, m.name, m.product) {
            (Some(ecosystem), Some(name), _) => {
                let group = match m.group {
                    Some(g) => g,
                    None if ecosystem.uses_default_group() => DEFAULT_GROUP.to_string(),
                    None => return Err(format!("advisory {}: match for {name} has no group", a.id)),
                };
                AliasTarget { ecosystem, group, name }
            }
            (_, _, Some(product)) => match aliases.get(&product) {
                Some(t) => t.clone(),
                None => {
                    missing.push(product);
                    continue;
                }
            },
            _ => return Err(format!("advisory {}: match needs ecosystem+name or product", a.id)),
        };
        matches.push(AdvisoryMatch {
            ecosystem: target.ecosystem,
            group: target.group,
            name: target.name,
            range: m.range,
        });
    }
    Ok(finish(a.id, AdvisorySource::NativeFeed, severity, a.summary, published, matches, missing))
}

fn finish(
    id: String,
    source: AdvisorySource,
    severity: Severity,
    summary: String,
    published: DateTime<Utc>,
    matches: Vec<AdvisoryMatch>,
    missing: Vec<String>,
) -> Mapped {
    if matches.is_empty() {
        Mapped::Unmatched(UnmatchedAdvisory {
            id,
            source,
            product_key: missing.join(","),
            summary,
        })
    } else {
        Mapped::Row(VulnerabilityRow {
            id,
            source,
            severity,
            summary,
            published,
            matches,
        })
    }
}

fn ingest_nvd(doc: &FeedDocument, aliases: &AliasMap) -> Result<FeedIngest, FeedError> {
    let root: Value = serde_json::from_slice(&doc.raw).map_err(|e| FeedError::MalformedFeed {
        position: format!("{} line {}", doc.origin, e.line()),
        message: e.to_string(),
    })?;
    let items = root
        .get("vulnerabilities")
        .and_then(Value::as_array)
        .ok_or_else(|| FeedError::MalformedFeed {
            position: doc.origin.clone(),
            message: "missing `vulnerabilities` array".into(),
        })?;

    let mut out = FeedIngest::default();
    for (idx, item) in items.iter().enumerate() {
        match map_nvd(item, aliases) {
            Ok(Mapped::Row(v)) => out.vulnerabilities.push(v),
            Ok(Mapped::Unmatched(u)) => out.unmatched.push(u),
            Err(message) => out.malformed.push(FeedRecordError {
                origin: doc.origin.clone(),
                position: format!("vulnerabilities[{idx}]"),
                message,
            }),
        }
    }
    Ok(out)
}

fn map_nvd(item: &Value, aliases: &AliasMap) -> Result<Mapped, String> {
    let cve = item.get("cve").ok_or("missing `cve`")?;
    let id = cve.get("id").and_then(Value::as_str).ok_or("missing `cve.id`")?.to_string();
    let published = parse_published(cve.get("published").and_then(Value::as_str).ok_or("missing `published`")?)?;
    let summary = cve
        .get("descriptions")
        .and_then(Value::as_array)
        .and_then(|ds| {
            ds.iter()
                .find(|d| d.get("lang").and_then(Value::as_str) == Some("en"))
                .or_else(|| ds.first())
        })
        .and_then(|d| d.get("value"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();

    let score = ["cvssMetricV31", "cvssMetricV30"]
        .iter()
        .find_map(|k| cve.pointer(&format!("/metrics/{k}/0/cvssData/baseScore")))
        .map(|s| s.as_f64().ok_or("baseScore is not a number"))
        .transpose()?
        .unwrap_or(0.0);
    let severity = Severity::from_score(score).map_err(|e| e.to_string())?;

    let mut matches = Vec::new();
    let mut missing = Vec::new();
    let cpe_matches = cve
        .get("configurations")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|c| c.get("nodes").and_then(Value::as_array))
        .flatten()
        .filter_map(|n| n.get("cpeMatch").and_then(Value::as_array))
        .flatten();
    for m in cpe_matches {
        if m.get("vulnerable").and_then(Value::as_bool) == Some(false) {
            continue;
        }
        let criteria = m.get("criteria").and_then(Value::as_str).ok_or("cpeMatch without `criteria`")?;
        let (key, version) = cpe_product(criteria)?;
        let range = cpe_range(m, version)?;
        match aliases.get(&key) {
            Some(t) => {
                let entry = AdvisoryMatch {
                    ecosystem: t.ecosystem,
                    group: t.group.clone(),
                    name: t.name.clone(),
                    range,
                };
                if !matches.contains(&entry) {
                    matches.push(entry);
                }
            }
            None => {
                if !missing.contains(&key) {
                    missing.push(key);
                }
            }
        }
    }
    if matches.is_empty() && missing.is_empty() {
        return Err(format!("{id}: no cpeMatch entries"));
    }
    Ok(finish(id, AdvisorySource::Nvd, severity, summary, published, matches, missing))
}

/// `cpe:2.3:a:vendor:product:version:...` → (`vendor:product`, version).
fn cpe_product(criteria: &str) -> Result<(String, &str), String> {
    let parts: Vec<&str> = criteria.split(':').collect();
    if parts.len() < 6 || parts[0] != "cpe" {
        return Err(format!("unsupported CPE `{criteria}`"));
    }
    Ok((format!("{}:{}", parts[3], parts[4]), parts[5]))
}

fn cpe_range(m: &Value, cpe_version: &str) -> Result<VersionRange, String> {
    let bounds = [
        ("versionStartIncluding", Comparator::Ge),
        ("versionStartExcluding", Comparator::Gt),
        ("versionEndIncluding", Comparator::Le),
        ("versionEndExcluding", Comparator::Lt),
    ];
    let constraints: Vec<Constraint> = bounds
        .iter()
        .filter_map(|(k, op)| m.get(*k).and_then(Value::as_str).map(|v| Constraint::new(*op, v)))
        .collect();
    if !constraints.is_empty() {
        return VersionRange::new(constraints).map_err(|e| e.to_string());
    }
    Ok(match cpe_version {
        "*" | "-" | "" => VersionRange::any(),
        v => VersionRange::exact(v.replace('\\', "")),
    })
}

/// RFC 3339, NVD's zone-less `YYYY-MM-DDTHH:MM:SS[.fff]` (taken as UTC), or a
/// bare date.
pub fn parse_published(s: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Ok(t.and_utc());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    Err(format!("unrecognized timestamp `{s}`"))
}
