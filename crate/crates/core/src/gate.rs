//! Build-gate policy evaluation. Everything here is pure: the caller supplies
//! the DRD view, waivers and the evaluation time.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::manifest::SbomSnapshot;
use crate::model::{Coordinate, Severity, SeverityBand, Status, Verdict};
use crate::store::{ApplicationId, VersionId, WaiverRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Warn, never fail.
    Notify,
    /// Warn until a deadline, then fail.
    Reprieve,
    /// Fail right away.
    Fail,
}

impl std::str::FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "notify" => Ok(Self::Notify),
            "reprieve" => Ok(Self::Reprieve),
            "fail" => Ok(Self::Fail),
            other => Err(format!("unknown policy mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub not_reviewed_mode: PolicyMode,
    pub not_reviewed_reprieve_days: u32,
    pub rejected_mode: PolicyMode,
    pub rejected_reprieve_days: u32,
    pub blacklist_fails_immediately: bool,
    pub deprecated_warn_before_end_date: bool,
    pub vuln_warn_threshold: SeverityBand,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            not_reviewed_mode: PolicyMode::Reprieve,
            not_reviewed_reprieve_days: 30,
            rejected_mode: PolicyMode::Reprieve,
            rejected_reprieve_days: 14,
            blacklist_fails_immediately: true,
            deprecated_warn_before_end_date: true,
            vuln_warn_threshold: SeverityBand::High,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), GateError> {
        if self.not_reviewed_reprieve_days == 0 {
            return Err(GateError::InvalidPolicy("not_reviewed_reprieve_days must be at least 1".into()));
        }
        if self.rejected_reprieve_days == 0 {
            return Err(GateError::InvalidPolicy("rejected_reprieve_days must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ApprovedOk,
    VulnerableApproved,
    NotReviewedNew,
    NotReviewedPending,
    NotReviewedNotify,
    NotReviewedExpired,
    RejectedInReprieve,
    RejectedNotify,
    RejectedExpired,
    RejectedBlacklisted,
    DeprecatedActive,
    DeprecatedExpired,
    Waived,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ApprovedOk => "approved_ok",
            Self::VulnerableApproved => "vulnerable_approved",
            Self::NotReviewedNew => "not_reviewed_new",
            Self::NotReviewedPending => "not_reviewed_pending",
            Self::NotReviewedNotify => "not_reviewed_notify",
            Self::NotReviewedExpired => "not_reviewed_expired",
            Self::RejectedInReprieve => "rejected_in_reprieve",
            Self::RejectedNotify => "rejected_notify",
            Self::RejectedExpired => "rejected_expired",
            Self::RejectedBlacklisted => "rejected_blacklisted",
            Self::DeprecatedActive => "deprecated_active",
            Self::DeprecatedExpired => "deprecated_expired",
            Self::Waived => "waived",
        }
    }

    /// Rules that always carry a deadline, and the only ones that do.
    pub fn has_deadline(self) -> bool {
        matches!(
            self,
            Self::NotReviewedNew | Self::NotReviewedPending | Self::RejectedInReprieve | Self::DeprecatedActive
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlacklistFlag {
    pub dependency_version_id: VersionId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenVulnerability {
    pub id: String,
    pub severity: Severity,
}

/// What the DRD knows about one coordinate, as seen by one application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub dependency_version_id: VersionId,
    pub status: Status,
    pub introduced_date: DateTime<Utc>,
    pub effective_date: DateTime<Utc>,
    pub end_date: Option<DateTime<Utc>>,
    pub blacklist: Option<BlacklistFlag>,
    /// When this application first declared the version.
    pub first_seen: Option<DateTime<Utc>>,
    pub vulnerabilities: Vec<OpenVulnerability>,
}

/// Per-coordinate DRD state keyed by canonical coordinate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrdView {
    pub application_id: Option<ApplicationId>,
    pub entries: BTreeMap<String, ViewEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    #[serde(serialize_with = "ser_canonical", deserialize_with = "de_canonical")]
    pub coordinate: Coordinate,
    pub status: Status,
    pub rule: Rule,
    #[serde(rename = "verdict")]
    pub verdict_contribution: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<DateTime<Utc>>,
    pub vulnerabilities: Vec<String>,
    pub message: String,
}

fn ser_canonical<S: Serializer>(c: &Coordinate, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&c.canonical())
}

fn de_canonical<'de, D: Deserializer<'de>>(d: D) -> Result<Coordinate, D::Error> {
    let s = String::deserialize(d)?;
    Coordinate::parse_canonical(&s).map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateDecision {
    pub application: String,
    pub commit: String,
    pub evaluated_at: DateTime<Utc>,
    pub verdict: Verdict,
    pub findings: Vec<Finding>,
}

impl GateDecision {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decision serializes")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GateError {
    #[error("no DRD entry for {0}; observations must be recorded before evaluation")]
    MissingDrdEntry(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

pub fn evaluate(
    sbom: &SbomSnapshot,
    view: &DrdView,
    waivers: &[WaiverRow],
    policy: &PolicyConfig,
    now: DateTime<Utc>,
) -> Result<GateDecision, GateError> {
    let mut findings = Vec::with_capacity(sbom.len());
    for coordinate in sbom.coordinates() {
        let key = coordinate.canonical();
        let entry = view.entries.get(&key).ok_or(GateError::MissingDrdEntry(key))?;
        let mut finding = judge(coordinate, entry, policy, now);

        if finding.verdict_contribution == Verdict::Fail {
            let waiver = waivers
                .iter()
                .filter(|w| {
                    Some(w.application_id) == view.application_id
                        && w.dependency_version_id == entry.dependency_version_id
                        && w.is_active(now)
                })
                .max_by_key(|w| w.expires);
            if let Some(w) = waiver {
                finding.message = format!(
                    "{} (waived until {} by {}: {})",
                    finding.message,
                    w.expires.to_rfc3339(),
                    w.approver,
                    w.justification
                );
                finding.rule = Rule::Waived;
                finding.verdict_contribution = Verdict::Warn;
                finding.deadline = None;
            }
        }
        findings.push(finding);
    }

    findings.sort_by(|a, b| {
        b.verdict_contribution
            .cmp(&a.verdict_contribution)
            .then_with(|| a.coordinate.canonical().cmp(&b.coordinate.canonical()))
    });
    Ok(GateDecision {
        application: sbom.application.clone(),
        commit: sbom.commit.clone(),
        evaluated_at: now,
        verdict: Verdict::combine(findings.iter().map(|f| f.verdict_contribution)),
        findings,
    })
}

fn judge(coordinate: &Coordinate, entry: &ViewEntry, policy: &PolicyConfig, now: DateTime<Utc>) -> Finding {
    use Verdict::{Fail, Pass, Warn};

    let at = |d: DateTime<Utc>| d.format("%Y-%m-%dT%H:%M:%SZ").to_string();
    let (rule, verdict, deadline, message) = match entry.status {
        Status::Approved => {
            let serious: Vec<&OpenVulnerability> = entry
                .vulnerabilities
                .iter()
                .filter(|v| v.severity.band() >= policy.vuln_warn_threshold)
                .collect();
            if serious.is_empty() {
                (Rule::ApprovedOk, Pass, None, "approved".to_string())
            } else {
                let worst = serious.iter().map(|v| v.severity).max().map(Severity::score).unwrap_or(0.0);
                (
                    Rule::VulnerableApproved,
                    Warn,
                    None,
                    format!("approved, but {} open advisories at or above {} (worst {worst:.1})", serious.len(), policy.vuln_warn_threshold.as_str()),
                )
            }
        }
        Status::NotReviewed => match policy.not_reviewed_mode {
            PolicyMode::Notify => (Rule::NotReviewedNotify, Warn, None, "awaiting review".to_string()),
            PolicyMode::Fail => (Rule::NotReviewedExpired, Fail, None, "not reviewed; unreviewed versions are not allowed".to_string()),
            PolicyMode::Reprieve => {
                let deadline = entry.introduced_date + days(policy.not_reviewed_reprieve_days);
                if now >= deadline {
                    (Rule::NotReviewedExpired, Fail, None, format!("review deadline {} has passed", at(deadline)))
                } else if entry.introduced_date == now {
                    (Rule::NotReviewedNew, Warn, Some(deadline), format!("new dependency; must be reviewed by {}", at(deadline)))
                } else {
                    (Rule::NotReviewedPending, Warn, Some(deadline), format!("awaiting review; build fails from {}", at(deadline)))
                }
            }
        },
        Status::Rejected => {
            let blacklisted = entry.blacklist.as_ref().filter(|_| policy.blacklist_fails_immediately);
            if let Some(flag) = blacklisted {
                (Rule::RejectedBlacklisted, Fail, None, format!("blacklisted: {}", flag.reason))
            } else {
                match policy.rejected_mode {
                    PolicyMode::Notify => (Rule::RejectedNotify, Warn, None, "rejected; replace this dependency".to_string()),
                    PolicyMode::Fail => (Rule::RejectedExpired, Fail, None, "rejected".to_string()),
                    PolicyMode::Reprieve => {
                        let anchor = entry.first_seen.map_or(entry.effective_date, |f| f.max(entry.effective_date));
                        let deadline = anchor + days(policy.rejected_reprieve_days);
                        if now >= deadline {
                            (Rule::RejectedExpired, Fail, None, format!("rejected; migration deadline {} has passed", at(deadline)))
                        } else {
                            (Rule::RejectedInReprieve, Warn, Some(deadline), format!("rejected; replace before {}", at(deadline)))
                        }
                    }
                }
            }
        }
        Status::Deprecated => match entry.end_date {
            Some(end) if now < end => {
                let verdict = if policy.deprecated_warn_before_end_date { Warn } else { Pass };
                (Rule::DeprecatedActive, verdict, Some(end), format!("deprecated; support ends {}", at(end)))
            }
            Some(end) => (Rule::DeprecatedExpired, Fail, None, format!("deprecated; support ended {}", at(end))),
            None => (Rule::DeprecatedExpired, Fail, None, "deprecated without an end date".to_string()),
        },
    };

    Finding {
        coordinate: coordinate.clone(),
        status: entry.status,
        rule,
        verdict_contribution: verdict,
        deadline,
        vulnerabilities: entry.vulnerabilities.iter().map(|v| v.id.clone()).collect(),
        message,
    }
}

fn days(n: u32) -> Duration {
    Duration::days(i64::from(n))
}

/// CI exit code: 0 to proceed, 2 to stop the build.
pub fn decide_exit_code(decision: &GateDecision, warn_as_error: bool) -> i32 {
    match decision.verdict {
        Verdict::Pass => 0,
        Verdict::Warn if warn_as_error => 2,
        Verdict::Warn => 0,
        Verdict::Fail => 2,
    }
}
