use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{Coordinate, Ecosystem, PackageKey, Severity, Status};
use crate::range::VersionRange;

pub type GroupId = i64;
pub type CategoryId = i64;
pub type DependencyId = i64;
pub type VersionId = i64;
pub type ApplicationId = i64;
pub type WaiverId = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGroupRow {
    pub id: GroupId,
    pub ecosystem: Ecosystem,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub id: CategoryId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRow {
    pub id: DependencyId,
    pub ecosystem: Ecosystem,
    pub group_id: GroupId,
    /// Denormalized group name, for display.
    pub group: String,
    pub name: String,
    pub category_id: Option<CategoryId>,
}

impl DependencyRow {
    pub fn package(&self) -> PackageKey {
        PackageKey {
            ecosystem: self.ecosystem,
            group: self.group.clone(),
            name: self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyVersionRow {
    pub id: VersionId,
    pub dependency_id: DependencyId,
    pub version: String,
    pub introduced_date: DateTime<Utc>,
    pub status: Status,
    pub effective_date: DateTime<Utc>,
    pub end_date: Option<DateTime<Utc>>,
    pub justification: Option<String>,
    /// Set only while the version is Rejected and blacklisted.
    pub blacklist_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationRow {
    pub id: ApplicationId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationDependencyRow {
    pub application_id: ApplicationId,
    pub dependency_version_id: VersionId,
    pub first_seen: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
    pub first_seen_commit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvisorySource {
    Nvd,
    NativeFeed,
    Manual,
}

impl AdvisorySource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nvd => "nvd",
            Self::NativeFeed => "native_feed",
            Self::Manual => "manual",
        }
    }
}

impl FromStr for AdvisorySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nvd" => Ok(Self::Nvd),
            "native_feed" => Ok(Self::NativeFeed),
            "manual" => Ok(Self::Manual),
            other => Err(format!("unknown advisory source `{other}`")),
        }
    }
}

/// Which package versions an advisory affects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdvisoryMatch {
    pub ecosystem: Ecosystem,
    pub group: String,
    pub name: String,
    pub range: VersionRange,
}

impl AdvisoryMatch {
    pub fn applies_to(&self, c: &Coordinate) -> bool {
        self.ecosystem == c.ecosystem && self.group == c.group && self.name == c.name && self.range.matches(&c.version)
    }

    pub fn package(&self) -> PackageKey {
        PackageKey {
            ecosystem: self.ecosystem,
            group: self.group.clone(),
            name: self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityRow {
    pub id: String,
    pub source: AdvisorySource,
    pub severity: Severity,
    pub summary: String,
    pub published: DateTime<Utc>,
    pub matches: Vec<AdvisoryMatch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordOutcome {
    Created,
    Updated,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedAdvisory {
    pub id: String,
    pub source: AdvisorySource,
    /// The product key that had no alias (e.g. `vendor:product`).
    pub product_key: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaiverRow {
    pub id: WaiverId,
    pub application_id: ApplicationId,
    pub dependency_version_id: VersionId,
    pub expires: DateTime<Utc>,
    pub justification: String,
    pub approver: String,
}

impl WaiverRow {
    pub fn is_active(&self, now: DateTime<Utc>) -> bool {
        now < self.expires
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    Observed,
    StatusChanged,
    Categorized,
    VulnRecorded,
    WaiverGranted,
    SyncCompleted,
    Blacklisted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    NewVulnerability,
    NewVersionAvailable,
    StatusAutoFlag,
}

/// Stream and kind of one log entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "stream", content = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Audit(AuditAction),
    Notification(NotificationKind),
}

impl EventKind {
    pub(crate) fn stream(self) -> &'static str {
        match self {
            Self::Audit(_) => "audit",
            Self::Notification(_) => "notification",
        }
    }

    pub(crate) fn kind_str(self) -> String {
        let v = match self {
            Self::Audit(a) => serde_json::to_value(a),
            Self::Notification(n) => serde_json::to_value(n),
        };
        v.ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }

    pub(crate) fn parse(stream: &str, kind: &str) -> Option<Self> {
        let quoted = serde_json::Value::String(kind.to_string());
        match stream {
            "audit" => serde_json::from_value(quoted).ok().map(Self::Audit),
            "notification" => serde_json::from_value(quoted).ok().map(Self::Notification),
            _ => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.stream(), self.kind_str())
    }
}

/// One entry of the append-only event log shared by audit and notification
/// events. `seq` is gapless.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: i64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    pub subject: String,
    pub detail: String,
}

/// A notification produced by a sync run, before it is given a sequence
/// number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationEvent {
    pub kind: NotificationKind,
    pub subject: String,
    pub detail: String,
    pub at: DateTime<Utc>,
}

/// Input to [`super::Store::set_status`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusChange {
    pub version_id: VersionId,
    pub status: Status,
    pub justification: Option<String>,
    pub end_date: Option<DateTime<Utc>>,
    pub actor: String,
}

/// Input to [`super::Store::grant_waiver`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewWaiver {
    pub application: String,
    pub dependency_version_id: VersionId,
    pub expires: DateTime<Utc>,
    pub justification: String,
    pub approver: String,
}

/// Filters for [`super::Store::query`]; all present filters must hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFilter {
    pub status: Option<Status>,
    pub category: Option<String>,
    pub application: Option<String>,
    pub has_vulns: Option<bool>,
}

/// One dependency version as seen by the console and the query API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyVersionView {
    pub coordinate: String,
    pub dependency_id: DependencyId,
    pub version_id: VersionId,
    pub ecosystem: Ecosystem,
    pub group: String,
    pub name: String,
    pub version: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub introduced_date: DateTime<Utc>,
    pub effective_date: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_date: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blacklist_reason: Option<String>,
    pub vulnerabilities: Vec<String>,
    pub applications: Vec<String>,
}

/// Stored gate decision with its owning application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredDecision {
    pub application: String,
    pub commit: String,
    pub evaluated_at: DateTime<Utc>,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryStatus {
    Delivered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebhookDelivery {
    pub event_seq: i64,
    pub url: String,
    pub status: DeliveryStatus,
    pub attempts: u32,
    pub last_error: Option<String>,
    pub at: DateTime<Utc>,
}
