//! The dependency reference database.
//!
//! SQLite-backed, file or in-memory. Every mutation runs in one transaction
//! behind a single connection mutex, so writers are serialized and readers
//! never see half-applied changes. Timestamps are always passed in by the
//! caller; nothing here reads the clock.

mod rows;
mod schema;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use rusqlite::types::Value as SqlValue;
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gate::{BlacklistFlag, DrdView, OpenVulnerability, ViewEntry};
use crate::manifest::SbomSnapshot;
use crate::model::{Coordinate, Ecosystem, PackageKey, Severity, Status};

pub use rows::*;
pub use schema::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: Status, to: Status },
    #[error("a justification is required to reject a version")]
    MissingJustification,
    #[error("an end date is required to deprecate a version")]
    MissingEndDate,
    #[error("end date {end} precedes effective date {effective}")]
    InvalidEndDate { end: DateTime<Utc>, effective: DateTime<Utc> },
    #[error("timestamp {0} precedes the version's introduction")]
    InvalidTimestamp(DateTime<Utc>),
    #[error("only Rejected versions can be blacklisted (version is {0})")]
    NotRejected(Status),
    #[error("category `{0}` already exists")]
    DuplicateCategory(String),
    #[error("invalid waiver: {0}")]
    InvalidWaiver(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lease `{name}` is held by {holder} until {expires}")]
    LeaseHeld {
        name: String,
        holder: String,
        expires: DateTime<Utc>,
    },
    #[error("database schema version {found} is newer than supported version {supported}")]
    SchemaTooNew { found: i64, supported: i64 },
    #[error("corrupt row: {0}")]
    Corrupt(String),
    #[error("storage failure: {0}")]
    StorageFailure(#[from] rusqlite::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

pub(crate) fn ts(t: DateTime<Utc>) -> String {
    // fixed width, so lexicographic order is chronological
    t.to_rfc3339_opts(SecondsFormat::Nanos, true)
}

fn parse_ts(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("timestamp `{s}`: {e}")))
}

fn parse_opt_ts(s: Option<String>) -> Result<Option<DateTime<Utc>>> {
    s.as_deref().map(parse_ts).transpose()
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| StoreError::Corrupt(format!("{what} `{s}`: {e}")))
}

pub struct Store {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        let has_meta: bool = conn.query_row(
            "SELECT EXISTS(SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = 'schema_meta')",
            [],
            |r| r.get(0),
        )?;
        if has_meta {
            let found: Option<String> = conn
                .query_row("SELECT value FROM schema_meta WHERE key = 'schema_version'", [], |r| r.get(0))
                .optional()?;
            if let Some(found) = found {
                let found: i64 = parse_field(&found, "schema_version")?;
                if found > SCHEMA_VERSION {
                    return Err(StoreError::SchemaTooNew {
                        found,
                        supported: SCHEMA_VERSION,
                    });
                }
            }
        }
        conn.execute_batch(schema::DDL)?;
        conn.execute(
            "INSERT INTO schema_meta (key, value) VALUES ('schema_version', ?1)
             ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            params![SCHEMA_VERSION.to_string()],
        )?;
        Ok(Store { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        // a panic while holding the lock leaves no open transaction behind
        // (rusqlite rolls back on drop), so the connection is still usable
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn write<T>(&self, f: impl FnOnce(&Transaction<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&Connection) -> Result<T>) -> Result<T> {
        let conn = self.lock();
        f(&conn)
    }

    // ------------------------------------------------------------------
    // observation
    // ------------------------------------------------------------------

    /// Records every coordinate of `sbom`: creates missing group, dependency
    /// and version rows (new versions start NotReviewed), links the
    /// application, and advances `last_seen`. Returns only the version rows
    /// created by this call.
    pub fn upsert_observation(&self, sbom: &SbomSnapshot, now: DateTime<Utc>) -> Result<Vec<DependencyVersionRow>> {
        if sbom.application.trim().is_empty() {
            return Err(StoreError::InvalidInput("application name is empty".into()));
        }
        self.write(|tx| {
            let app_id = ensure_application(tx, &sbom.application)?;
            let actor = format!("build:{}", sbom.application);
            let mut created = Vec::new();
            for c in sbom.coordinates() {
                let group_id = ensure_group(tx, c.ecosystem, &c.group)?;
                let dep_id = ensure_dependency(tx, c.ecosystem, group_id, &c.name)?;
                let existing: Option<i64> = tx
                    .query_row(
                        "SELECT id FROM dependency_versions WHERE dependency_id = ?1 AND version = ?2",
                        params![dep_id, c.version],
                        |r| r.get(0),
                    )
                    .optional()?;
                let version_id = match existing {
                    Some(id) => id,
                    None => {
                        tx.execute(
                            "INSERT INTO dependency_versions
                                (dependency_id, version, introduced_date, status, effective_date)
                             VALUES (?1, ?2, ?3, ?4, ?3)",
                            params![dep_id, c.version, ts(now), Status::NotReviewed.as_str()],
                        )?;
                        let id = tx.last_insert_rowid();
                        append_event(
                            tx,
                            now,
                            EventKind::Audit(AuditAction::Observed),
                            Some(&actor),
                            &c.canonical(),
                            &format!("first seen in {} at {}", sbom.application, sbom.commit),
                        )?;
                        created.push(version_row(tx, id)?);
                        id
                    }
                };
                tx.execute(
                    "INSERT INTO application_dependencies
                        (application_id, dependency_version_id, first_seen, last_seen, first_seen_commit)
                     VALUES (?1, ?2, ?3, ?3, ?4)
                     ON CONFLICT(application_id, dependency_version_id)
                     DO UPDATE SET last_seen = max(last_seen, excluded.last_seen)",
                    params![app_id, version_id, ts(now), sbom.commit],
                )?;
            }
            Ok(created)
        })
    }

    pub fn record_sbom(&self, sbom: &SbomSnapshot) -> Result<()> {
        let body = serde_json::to_string(sbom).map_err(|e| StoreError::InvalidInput(e.to_string()))?;
        self.write(|tx| {
            let app_id = ensure_application(tx, &sbom.application)?;
            tx.execute(
                "INSERT INTO sbom_snapshots (application_id, commit_id, captured_at, body) VALUES (?1, ?2, ?3, ?4)",
                params![app_id, sbom.commit, ts(sbom.captured_at), body],
            )?;
            Ok(())
        })
    }

    /// Most recent snapshot by `captured_at` (later insert wins ties).
    pub fn latest_sbom(&self, application: &str) -> Result<Option<SbomSnapshot>> {
        self.read(|conn| {
            let body: Option<String> = conn
                .query_row(
                    "SELECT s.body FROM sbom_snapshots s JOIN applications a ON a.id = s.application_id
                     WHERE a.name = ?1 ORDER BY s.captured_at DESC, s.id DESC LIMIT 1",
                    params![application],
                    |r| r.get(0),
                )
                .optional()?;
            body.map(|b| serde_json::from_str(&b).map_err(|e| StoreError::Corrupt(e.to_string())))
                .transpose()
        })
    }

    pub fn record_decision(
        &self,
        application: &str,
        commit: &str,
        evaluated_at: DateTime<Utc>,
        verdict: &str,
        body: &str,
    ) -> Result<()> {
        self.write(|tx| {
            let app_id = ensure_application(tx, application)?;
            tx.execute(
                "INSERT INTO gate_decisions (application_id, commit_id, evaluated_at, verdict, body)
                 VALUES (?1, ?2, ?3, ?4, ?5)",
                params![app_id, commit, ts(evaluated_at), verdict, body],
            )?;
            Ok(())
        })
    }

    pub fn decisions(&self, application: &str) -> Result<Vec<StoredDecision>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(
                "SELECT a.name, d.commit_id, d.evaluated_at, d.body FROM gate_decisions d
                 JOIN applications a ON a.id = d.application_id WHERE a.name = ?1 ORDER BY d.id",
            )?;
            let rows = stmt.query_map(params![application], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, String>(3)?))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (application, commit, at, body) = row?;
                out.push(StoredDecision {
                    application,
                    commit,
                    evaluated_at: parse_ts(&at)?,
                    body,
                });
            }
            Ok(out)
        })
    }

    // ------------------------------------------------------------------
    // vetting
    // ------------------------------------------------------------------

    pub fn set_status(&self, change: &StatusChange, now: DateTime<Utc>) -> Result<DependencyVersionRow> {
        self.write(|tx| {
            let row = version_row(tx, change.version_id)?;
            if !row.status.can_transition_to(change.status) {
                return Err(StoreError::IllegalTransition {
                    from: row.status,
                    to: change.status,
                });
            }
            let justification = change
                .justification
                .as_deref()
                .map(str::trim)
                .filter(|j| !j.is_empty())
                .map(str::to_string);
            if change.status == Status::Rejected && justification.is_none() {
                return Err(StoreError::MissingJustification);
            }
            let end_date = match change.status {
                Status::Deprecated => {
                    let end = change.end_date.ok_or(StoreError::MissingEndDate)?;
                    if end < now {
                        return Err(StoreError::InvalidEndDate { end, effective: now });
                    }
                    Some(end)
                }
                _ => None,
            };
            if now < row.introduced_date {
                return Err(StoreError::InvalidTimestamp(now));
            }

            tx.execute(
                "UPDATE dependency_versions
                 SET status = ?2, effective_date = ?3, end_date = ?4, justification = ?5, blacklist_reason = NULL
                 WHERE id = ?1",
                params![
                    change.version_id,
                    change.status.as_str(),
                    ts(now),
                    end_date.map(ts),
                    justification
                ],
            )?;
            let mut detail = format!("{} -> {}", row.status, change.status);
            if let Some(j) = &justification {
                detail.push_str(": ");
                detail.push_str(j);
            }
            append_event(
                tx,
                now,
                EventKind::Audit(AuditAction::StatusChanged),
                Some(&change.actor),
                &version_coordinate(tx, change.version_id)?.canonical(),
                &detail,
            )?;
            version_row(tx, change.version_id)
        })
    }

    /// Marks a Rejected version for immediate blocking.
    pub fn blacklist(
        &self,
        version_id: VersionId,
        reason: &str,
        actor: &str,
        now: DateTime<Utc>,
    ) -> Result<DependencyVersionRow> {
        let reason = reason.trim();
        if reason.is_empty() {
            return Err(StoreError::InvalidInput("blacklist reason is empty".into()));
        }
        self.write(|tx| {
            let row = version_row(tx, version_id)?;
            if row.status != Status::Rejected {
                return Err(StoreError::NotRejected(row.status));
            }
            tx.execute(
                "UPDATE dependency_versions SET blacklist_reason = ?2 WHERE id = ?1",
                params![version_id, reason],
            )?;
            append_event(
                tx,
                now,
                EventKind::Audit(AuditAction::Blacklisted),
                Some(actor),
                &version_coordinate(tx, version_id)?.canonical(),
                reason,
            )?;
            version_row(tx, version_id)
        })
    }

    pub fn create_category(&self, name: &str, description: Option<&str>) -> Result<CategoryRow> {
        let name = name.trim();
        if name.is_empty() {
            return Err(StoreError::InvalidInput("category name is empty".into()));
        }
        self.write(|tx| {
            let exists: bool =
                tx.query_row("SELECT EXISTS(SELECT 1 FROM categories WHERE name = ?1)", params![name], |r| r.get(0))?;
            if exists {
                return Err(StoreError::DuplicateCategory(name.to_string()));
            }
            tx.execute(
                "INSERT INTO categories (name, description) VALUES (?1, ?2)",
                params![name, description],
            )?;
            Ok(CategoryRow {
                id: tx.last_insert_rowid(),
                name: name.to_string(),
                description: description.map(str::to_string),
            })
        })
    }

    /// Sets a dependency's category. Re-assigning the current category is a
    /// no-op without an audit event.
    pub fn assign_category(
        &self,
        dependency_id: DependencyId,
        category_id: CategoryId,
        actor: &str,
        now: DateTime<Utc>,
    ) -> Result<DependencyRow> {
        self.write(|tx| {
            let dep = dependency_row(tx, dependency_id)?;
            let category = category_row(tx, category_id)?;
            if dep.category_id == Some(category_id) {
                return Ok(dep);
            }
            tx.execute(
                "UPDATE dependencies SET category_id = ?2 WHERE id = ?1",
                params![dependency_id, category_id],
            )?;
            append_event(
                tx,
                now,
                EventKind::Audit(AuditAction::Categorized),
                Some(actor),
                &dep.package().to_string(),
                &category.name,
            )?;
            dependency_row(tx, dependency_id)
        })
    }

    pub fn grant_waiver(&self, waiver: &NewWaiver, now: DateTime<Utc>) -> Result<WaiverRow> {
        let justification = waiver.justification.trim();
        if justification.is_empty() {
            return Err(StoreError::InvalidWaiver("justification is required".into()));
        }
        if waiver.expires <= now {
            return Err(StoreError::InvalidWaiver("expiry must be in the future".into()));
        }
        if waiver.approver.trim().is_empty() {
            return Err(StoreError::InvalidWaiver("approver is required".into()));
        }
        self.write(|tx| {
            let app_id: i64 = tx
                .query_row("SELECT id FROM applications WHERE name = ?1", params![waiver.application], |r| r.get(0))
                .optional()?
                .ok_or_else(|| StoreError::NotFound(format!("application `{}`", waiver.application)))?;
            let coordinate = version_coordinate(tx, waiver.dependency_version_id)?;
            tx.execute(
                "INSERT INTO waivers (application_id, dependency_version_id, expires, justification, approver, granted_at)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![app_id, waiver.dependency_version_id, ts(waiver.expires), justification, waiver.approver, ts(now)],
            )?;
            let id = tx.last_insert_rowid();
            append_event(
                tx,
                now,
                EventKind::Audit(AuditAction::WaiverGranted),
                Some(&waiver.approver),
                &coordinate.canonical(),
                &format!("{} until {}: {}", waiver.application, ts(waiver.expires), justification),
            )?;
            Ok(WaiverRow {
                id,
                application_id: app_id,
                dependency_version_id: waiver.dependency_version_id,
                expires: waiver.expires,
                justification: justification.to_string(),
                approver: waiver.approver.clone(),
            })
        })
    }

    // ------------------------------------------------------------------
    // vulnerabilities
    // ------------------------------------------------------------------

    /// Idempotent by advisory id. A changed payload replaces the stored one.
    pub fn record_vulnerability(&self, v: &VulnerabilityRow, now: DateTime<Utc>) -> Result<RecordOutcome> {
        if v.id.trim().is_empty() {
            return Err(StoreError::InvalidInput("advisory id is empty".into()));
        }
        if v.matches.is_empty() {
            return Err(StoreError::InvalidInput(format!("advisory {} has no match entries", v.id)));
        }
        let matches_json = serde_json::to_string(&v.matches).map_err(|e| StoreError::InvalidInput(e.to_string()))?;
        self.write(|tx| {
            let existing = tx
                .query_row(
                    "SELECT source, severity_tenths, summary, published, matches_json FROM vulnerabilities WHERE id = ?1",
                    params![v.id],
                    |r| {
                        Ok((
                            r.get::<_, String>(0)?,
                            r.get::<_, i64>(1)?,
                            r.get::<_, String>(2)?,
                            r.get::<_, String>(3)?,
                            r.get::<_, String>(4)?,
                        ))
                    },
                )
                .optional()?;
            let fresh = (
                v.source.as_str().to_string(),
                i64::from(v.severity.tenths()),
                v.summary.clone(),
                ts(v.published),
                matches_json.clone(),
            );
            let outcome = match existing {
                Some(old) if old == fresh => return Ok(RecordOutcome::Unchanged),
                Some(_) => {
                    tx.execute(
                        "UPDATE vulnerabilities SET source = ?2, severity_tenths = ?3, summary = ?4, published = ?5,
                         matches_json = ?6 WHERE id = ?1",
                        params![v.id, fresh.0, fresh.1, fresh.2, fresh.3, fresh.4],
                    )?;
                    RecordOutcome::Updated
                }
                None => {
                    tx.execute(
                        "INSERT INTO vulnerabilities (id, source, severity_tenths, summary, published, matches_json, recorded_at)
                         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
                        params![v.id, fresh.0, fresh.1, fresh.2, fresh.3, fresh.4, ts(now)],
                    )?;
                    RecordOutcome::Created
                }
            };
            let verb = if outcome == RecordOutcome::Created { "created" } else { "updated" };
            append_event(
                tx,
                now,
                EventKind::Audit(AuditAction::VulnRecorded),
                Some("sync"),
                &v.id,
                &format!("{verb}; severity {:.1} ({})", v.severity.score(), v.severity.band().as_str()),
            )?;
            Ok(outcome)
        })
    }

    /// Returns false when an active link already existed. A withdrawn link
    /// is reactivated.
    pub fn link_vulnerability(&self, version_id: VersionId, advisory_id: &str, now: DateTime<Utc>) -> Result<bool> {
        self.write(|tx| {
            let n = tx.execute(
                "INSERT INTO vulnerability_links (dependency_version_id, advisory_id, linked_at) VALUES (?1, ?2, ?3)
                 ON CONFLICT(dependency_version_id, advisory_id)
                 DO UPDATE SET withdrawn_at = NULL, linked_at = excluded.linked_at WHERE withdrawn_at IS NOT NULL",
                params![version_id, advisory_id, ts(now)],
            )?;
            Ok(n > 0)
        })
    }

    /// Withdraws a link whose advisory no longer covers the version. The row
    /// is kept for history.
    pub fn withdraw_link(&self, version_id: VersionId, advisory_id: &str, now: DateTime<Utc>) -> Result<bool> {
        self.write(|tx| {
            let n = tx.execute(
                "UPDATE vulnerability_links SET withdrawn_at = ?3
                 WHERE dependency_version_id = ?1 AND advisory_id = ?2 AND withdrawn_at IS NULL",
                params![version_id, advisory_id, ts(now)],
            )?;
            Ok(n > 0)
        })
    }

    pub fn record_unmatched(&self, u: &UnmatchedAdvisory, now: DateTime<Utc>) -> Result<bool> {
        self.write(|tx| {
            let n = tx.execute(
                "INSERT INTO unmatched_advisories (id, source, product_key, summary, recorded_at) VALUES (?1, ?2, ?3, ?4, ?5)
                 ON CONFLICT(id) DO UPDATE SET source = excluded.source, product_key = excluded.product_key,
                    summary = excluded.summary
                 WHERE source != excluded.source OR product_key != excluded.product_key OR summary != excluded.summary",
                params![u.id, u.source.as_str(), u.product_key, u.summary, ts(now)],
            )?;
            Ok(n > 0)
        })
    }

    pub fn set_latest_notified(&self, dependency_id: DependencyId, version: &str) -> Result<()> {
        self.write(|tx| {
            tx.execute(
                "UPDATE dependencies SET latest_notified_version = ?2 WHERE id = ?1",
                params![dependency_id, version],
            )?;
            Ok(())
        })
    }

    pub fn latest_notified(&self, dependency_id: DependencyId) -> Result<Option<String>> {
        self.read(|conn| {
            Ok(conn
                .query_row(
                    "SELECT latest_notified_version FROM dependencies WHERE id = ?1",
                    params![dependency_id],
                    |r| r.get(0),
                )
                .optional()?
                .flatten())
        })
    }

    // ------------------------------------------------------------------
    // events
    // ------------------------------------------------------------------

    pub fn append_audit(
        &self,
        action: AuditAction,
        actor: &str,
        subject: &str,
        detail: &str,
        at: DateTime<Utc>,
    ) -> Result<Event> {
        self.write(|tx| {
            let seq = append_event(tx, at, EventKind::Audit(action), Some(actor), subject, detail)?;
            event_by_seq(tx, seq)
        })
    }

    pub fn append_notification(&self, n: &NotificationEvent) -> Result<Event> {
        self.write(|tx| {
            let seq = append_event(tx, n.at, EventKind::Notification(n.kind), None, &n.subject, &n.detail)?;
            event_by_seq(tx, seq)
        })
    }

    /// Events with `seq > since`, ascending.
    pub fn events_since(&self, since: i64) -> Result<Vec<Event>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(
                "SELECT seq, at, stream, kind, actor, subject, detail FROM events WHERE seq > ?1 ORDER BY seq",
            )?;
            let rows = stmt.query_map(params![since], raw_event)?;
            rows.map(|r| r.map_err(StoreError::from).and_then(decode_event)).collect()
        })
    }

    /// Highest assigned seq, 0 for an empty log.
    pub fn last_event_seq(&self) -> Result<i64> {
        self.read(|conn| Ok(conn.query_row("SELECT COALESCE(MAX(seq), 0) FROM events", [], |r| r.get(0))?))
    }

    pub fn record_delivery(&self, d: &WebhookDelivery) -> Result<()> {
        self.write(|tx| {
            let status = match d.status {
                DeliveryStatus::Delivered => "delivered",
                DeliveryStatus::Failed => "failed",
            };
            tx.execute(
                "INSERT INTO webhook_deliveries (event_seq, url, status, attempts, last_error, at) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![d.event_seq, d.url, status, d.attempts, d.last_error, ts(d.at)],
            )?;
            Ok(())
        })
    }

    pub fn deliveries(&self) -> Result<Vec<WebhookDelivery>> {
        self.read(|conn| {
            let mut stmt =
                conn.prepare("SELECT event_seq, url, status, attempts, last_error, at FROM webhook_deliveries ORDER BY id")?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, u32>(3)?,
                    r.get::<_, Option<String>>(4)?,
                    r.get::<_, String>(5)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (event_seq, url, status, attempts, last_error, at) = row?;
                out.push(WebhookDelivery {
                    event_seq,
                    url,
                    status: if status == "delivered" { DeliveryStatus::Delivered } else { DeliveryStatus::Failed },
                    attempts,
                    last_error,
                    at: parse_ts(&at)?,
                });
            }
            Ok(out)
        })
    }

    // ------------------------------------------------------------------
    // leases
    // ------------------------------------------------------------------

    /// Takes the named lease unless another holder has an unexpired one.
    pub fn acquire_lease(&self, name: &str, holder: &str, now: DateTime<Utc>, ttl: Duration) -> Result<()> {
        self.write(|tx| {
            let current = tx
                .query_row("SELECT holder, expires_at FROM leases WHERE name = ?1", params![name], |r| {
                    Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?))
                })
                .optional()?;
            if let Some((current_holder, expires)) = current {
                let expires = parse_ts(&expires)?;
                if now < expires {
                    return Err(StoreError::LeaseHeld {
                        name: name.to_string(),
                        holder: current_holder,
                        expires,
                    });
                }
            }
            tx.execute(
                "INSERT INTO leases (name, holder, acquired_at, expires_at) VALUES (?1, ?2, ?3, ?4)
                 ON CONFLICT(name) DO UPDATE SET holder = excluded.holder, acquired_at = excluded.acquired_at,
                    expires_at = excluded.expires_at",
                params![name, holder, ts(now), ts(now + ttl)],
            )?;
            Ok(())
        })
    }

    pub fn release_lease(&self, name: &str, holder: &str) -> Result<()> {
        self.write(|tx| {
            tx.execute("DELETE FROM leases WHERE name = ?1 AND holder = ?2", params![name, holder])?;
            Ok(())
        })
    }

    // ------------------------------------------------------------------
    // reads
    // ------------------------------------------------------------------

    pub fn applications(&self) -> Result<Vec<ApplicationRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare("SELECT id, name FROM applications ORDER BY id")?;
            let rows = stmt.query_map([], |r| Ok(ApplicationRow { id: r.get(0)?, name: r.get(1)? }))?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    pub fn application_id(&self, name: &str) -> Result<Option<ApplicationId>> {
        self.read(|conn| {
            Ok(conn
                .query_row("SELECT id FROM applications WHERE name = ?1", params![name], |r| r.get(0))
                .optional()?)
        })
    }

    pub fn groups(&self) -> Result<Vec<DependencyGroupRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare("SELECT id, ecosystem, name FROM dependency_groups ORDER BY id")?;
            let rows = stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?)))?;
            let mut out = Vec::new();
            for row in rows {
                let (id, eco, name) = row?;
                out.push(DependencyGroupRow {
                    id,
                    ecosystem: parse_field(&eco, "ecosystem")?,
                    name,
                });
            }
            Ok(out)
        })
    }

    pub fn categories(&self) -> Result<Vec<CategoryRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare("SELECT id, name, description FROM categories ORDER BY id")?;
            let rows = stmt.query_map([], |r| {
                Ok(CategoryRow {
                    id: r.get(0)?,
                    name: r.get(1)?,
                    description: r.get(2)?,
                })
            })?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    pub fn category_by_name(&self, name: &str) -> Result<Option<CategoryRow>> {
        Ok(self.categories()?.into_iter().find(|c| c.name == name))
    }

    pub fn dependencies(&self) -> Result<Vec<DependencyRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(&format!("{DEPENDENCY_SELECT} ORDER BY d.id"))?;
            let rows = stmt.query_map([], raw_dependency)?;
            rows.map(|r| r.map_err(StoreError::from).and_then(decode_dependency)).collect()
        })
    }

    pub fn dependency(&self, id: DependencyId) -> Result<DependencyRow> {
        self.read(|conn| dependency_row(conn, id))
    }

    pub fn find_dependency(&self, key: &PackageKey) -> Result<Option<DependencyRow>> {
        self.read(|conn| {
            let id: Option<i64> = conn
                .query_row(
                    "SELECT d.id FROM dependencies d JOIN dependency_groups g ON g.id = d.group_id
                     WHERE d.ecosystem = ?1 AND g.name = ?2 AND d.name = ?3",
                    params![key.ecosystem.as_str(), key.group, key.name],
                    |r| r.get(0),
                )
                .optional()?;
            id.map(|id| dependency_row(conn, id)).transpose()
        })
    }

    pub fn versions(&self) -> Result<Vec<DependencyVersionRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(&format!("{VERSION_SELECT} ORDER BY id"))?;
            let rows = stmt.query_map([], raw_version)?;
            rows.map(|r| r.map_err(StoreError::from).and_then(decode_version)).collect()
        })
    }

    pub fn version(&self, id: VersionId) -> Result<DependencyVersionRow> {
        self.read(|conn| version_row(conn, id))
    }

    pub fn find_version(&self, dependency_id: DependencyId, version: &str) -> Result<Option<DependencyVersionRow>> {
        self.read(|conn| {
            let id: Option<i64> = conn
                .query_row(
                    "SELECT id FROM dependency_versions WHERE dependency_id = ?1 AND version = ?2",
                    params![dependency_id, version],
                    |r| r.get(0),
                )
                .optional()?;
            id.map(|id| version_row(conn, id)).transpose()
        })
    }

    pub fn find_coordinate(&self, c: &Coordinate) -> Result<Option<DependencyVersionRow>> {
        match self.find_dependency(&c.package())? {
            Some(dep) => self.find_version(dep.id, &c.version),
            None => Ok(None),
        }
    }

    pub fn coordinate_of(&self, version_id: VersionId) -> Result<Coordinate> {
        self.read(|conn| version_coordinate(conn, version_id))
    }

    pub fn application_dependencies(&self) -> Result<Vec<ApplicationDependencyRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(
                "SELECT application_id, dependency_version_id, first_seen, last_seen, first_seen_commit
                 FROM application_dependencies ORDER BY application_id, dependency_version_id",
            )?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, i64>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (application_id, dependency_version_id, first, last, commit) = row?;
                out.push(ApplicationDependencyRow {
                    application_id,
                    dependency_version_id,
                    first_seen: parse_ts(&first)?,
                    last_seen: parse_ts(&last)?,
                    first_seen_commit: commit,
                });
            }
            Ok(out)
        })
    }

    pub fn vulnerabilities(&self) -> Result<Vec<VulnerabilityRow>> {
        Ok(self.vulnerabilities_with_recorded()?.into_iter().map(|(v, _)| v).collect())
    }

    /// Every advisory with the time it was first stored.
    pub fn vulnerabilities_with_recorded(&self) -> Result<Vec<(VulnerabilityRow, DateTime<Utc>)>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(
                "SELECT id, source, severity_tenths, summary, published, matches_json, recorded_at
                 FROM vulnerabilities ORDER BY id",
            )?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, i64>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                    r.get::<_, String>(6)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (id, source, tenths, summary, published, matches, recorded) = row?;
                let severity = u8::try_from(tenths)
                    .ok()
                    .and_then(|t| Severity::from_tenths(t).ok())
                    .ok_or_else(|| StoreError::Corrupt(format!("severity {tenths} on {id}")))?;
                let row = VulnerabilityRow {
                    source: parse_field(&source, "source")?,
                    severity,
                    summary,
                    published: parse_ts(&published)?,
                    matches: serde_json::from_str(&matches).map_err(|e| StoreError::Corrupt(e.to_string()))?,
                    id,
                };
                out.push((row, parse_ts(&recorded)?));
            }
            Ok(out)
        })
    }

    /// Active `(version id, advisory id)` pairs.
    pub fn vulnerability_links(&self) -> Result<Vec<(VersionId, String)>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(
                "SELECT dependency_version_id, advisory_id FROM vulnerability_links WHERE withdrawn_at IS NULL
                 ORDER BY dependency_version_id, advisory_id",
            )?;
            let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
            Ok(rows.collect::<rusqlite::Result<Vec<_>>>()?)
        })
    }

    pub fn unmatched_advisories(&self) -> Result<Vec<UnmatchedAdvisory>> {
        self.read(|conn| {
            let mut stmt =
                conn.prepare("SELECT id, source, product_key, summary FROM unmatched_advisories ORDER BY id")?;
            let rows = stmt.query_map([], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, String>(3)?))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (id, source, product_key, summary) = row?;
                out.push(UnmatchedAdvisory {
                    id,
                    source: parse_field(&source, "source")?,
                    product_key,
                    summary,
                });
            }
            Ok(out)
        })
    }

    pub fn waivers(&self) -> Result<Vec<WaiverRow>> {
        self.read(|conn| {
            let mut stmt = conn.prepare(
                "SELECT id, application_id, dependency_version_id, expires, justification, approver FROM waivers ORDER BY id",
            )?;
            let rows = stmt.query_map([], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, i64>(1)?,
                    r.get::<_, i64>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                ))
            })?;
            let mut out = Vec::new();
            for row in rows {
                let (id, application_id, dependency_version_id, expires, justification, approver) = row?;
                out.push(WaiverRow {
                    id,
                    application_id,
                    dependency_version_id,
                    expires: parse_ts(&expires)?,
                    justification,
                    approver,
                });
            }
            Ok(out)
        })
    }

    pub fn waivers_for(&self, application: &str) -> Result<Vec<WaiverRow>> {
        let Some(app_id) = self.application_id(application)? else {
            return Ok(Vec::new());
        };
        Ok(self.waivers()?.into_iter().filter(|w| w.application_id == app_id).collect())
    }

    /// Dependency versions joined with their category, vulnerabilities and
    /// applications, filtered and sorted by canonical coordinate.
    pub fn query(&self, filter: &QueryFilter) -> Result<Vec<DependencyVersionView>> {
        let deps: HashMap<DependencyId, DependencyRow> = self.dependencies()?.into_iter().map(|d| (d.id, d)).collect();
        let categories: HashMap<CategoryId, String> = self.categories()?.into_iter().map(|c| (c.id, c.name)).collect();
        let apps: HashMap<ApplicationId, String> = self.applications()?.into_iter().map(|a| (a.id, a.name)).collect();

        let mut vulns: HashMap<VersionId, Vec<String>> = HashMap::new();
        for (vid, advisory) in self.vulnerability_links()? {
            vulns.entry(vid).or_default().push(advisory);
        }
        let mut users: HashMap<VersionId, Vec<String>> = HashMap::new();
        for link in self.application_dependencies()? {
            if let Some(name) = apps.get(&link.application_id) {
                users.entry(link.dependency_version_id).or_default().push(name.clone());
            }
        }

        let mut out = Vec::new();
        for v in self.versions()? {
            let dep = deps
                .get(&v.dependency_id)
                .ok_or_else(|| StoreError::Corrupt(format!("version {} without dependency", v.id)))?;
            let category = dep.category_id.and_then(|id| categories.get(&id).cloned());
            let mut vulnerabilities = vulns.remove(&v.id).unwrap_or_default();
            vulnerabilities.sort();
            let mut applications = users.remove(&v.id).unwrap_or_default();
            applications.sort();

            if filter.status.is_some_and(|s| s != v.status)
                || filter.category.as_ref().is_some_and(|c| category.as_ref() != Some(c))
                || filter.application.as_ref().is_some_and(|a| !applications.contains(a))
                || filter.has_vulns.is_some_and(|h| h == vulnerabilities.is_empty())
            {
                continue;
            }

            out.push(DependencyVersionView {
                coordinate: format!("{}:{}:{}:{}", dep.ecosystem, dep.group, dep.name, v.version),
                dependency_id: dep.id,
                version_id: v.id,
                ecosystem: dep.ecosystem,
                group: dep.group.clone(),
                name: dep.name.clone(),
                version: v.version,
                status: v.status,
                category,
                introduced_date: v.introduced_date,
                effective_date: v.effective_date,
                end_date: v.end_date,
                justification: v.justification,
                blacklist_reason: v.blacklist_reason,
                vulnerabilities,
                applications,
            });
        }
        out.sort_by(|a, b| a.coordinate.cmp(&b.coordinate));
        Ok(out)
    }

    /// Everything the gate needs to know about `coordinates` for one
    /// application. Coordinates absent from the store are left out.
    pub fn drd_view<'a, I>(&self, application: &str, coordinates: I) -> Result<DrdView>
    where
        I: IntoIterator<Item = &'a Coordinate>,
    {
        let application_id = self.application_id(application)?;
        let severities: HashMap<String, Severity> =
            self.vulnerabilities()?.into_iter().map(|v| (v.id, v.severity)).collect();
        let mut links: HashMap<VersionId, Vec<OpenVulnerability>> = HashMap::new();
        for (vid, advisory) in self.vulnerability_links()? {
            if let Some(sev) = severities.get(&advisory) {
                links.entry(vid).or_default().push(OpenVulnerability {
                    id: advisory,
                    severity: *sev,
                });
            }
        }
        let first_seen: HashMap<VersionId, DateTime<Utc>> = match application_id {
            Some(app) => self
                .application_dependencies()?
                .into_iter()
                .filter(|l| l.application_id == app)
                .map(|l| (l.dependency_version_id, l.first_seen))
                .collect(),
            None => HashMap::new(),
        };

        let mut entries = BTreeMap::new();
        for c in coordinates {
            let Some(row) = self.find_coordinate(c)? else { continue };
            let mut vulnerabilities = links.remove(&row.id).unwrap_or_default();
            vulnerabilities.sort_by(|a, b| a.id.cmp(&b.id));
            entries.insert(
                c.canonical(),
                ViewEntry {
                    dependency_version_id: row.id,
                    status: row.status,
                    introduced_date: row.introduced_date,
                    effective_date: row.effective_date,
                    end_date: row.end_date,
                    blacklist: row.blacklist_reason.map(|reason| BlacklistFlag {
                        dependency_version_id: row.id,
                        reason,
                    }),
                    first_seen: first_seen.get(&row.id).copied(),
                    vulnerabilities,
                },
            );
        }
        Ok(DrdView {
            application_id,
            entries,
        })
    }

    /// SHA-256 over every table's rows in primary-key order. With
    /// `skip_sync_completed`, `sync_completed` audit events are left out and
    /// the remaining events are hashed without their sequence numbers.
    pub fn state_digest(&self, skip_sync_completed: bool) -> Result<String> {
        const TABLES: &[(&str, &str)] = &[
            ("schema_meta", "key"),
            ("dependency_groups", "id"),
            ("categories", "id"),
            ("dependencies", "id"),
            ("dependency_versions", "id"),
            ("applications", "id"),
            ("application_dependencies", "application_id, dependency_version_id"),
            ("vulnerabilities", "id"),
            ("vulnerability_links", "dependency_version_id, advisory_id"),
            ("unmatched_advisories", "id"),
            ("waivers", "id"),
            ("sbom_snapshots", "id"),
            ("gate_decisions", "id"),
            ("leases", "name"),
            ("webhook_deliveries", "id"),
        ];
        self.read(|conn| {
            let mut hasher = Sha256::new();
            for (table, order) in TABLES {
                hasher.update(table.as_bytes());
                dump_rows(conn, &format!("SELECT * FROM {table} ORDER BY {order}"), &mut hasher)?;
            }
            hasher.update(b"events");
            if skip_sync_completed {
                dump_rows(
                    conn,
                    "SELECT at, stream, kind, actor, subject, detail FROM events
                     WHERE NOT (stream = 'audit' AND kind = 'sync_completed') ORDER BY seq",
                    &mut hasher,
                )?;
            } else {
                dump_rows(conn, "SELECT * FROM events ORDER BY seq", &mut hasher)?;
            }
            Ok(hex::encode(hasher.finalize()))
        })
    }
}

fn dump_rows(conn: &Connection, sql: &str, hasher: &mut Sha256) -> Result<()> {
    let mut stmt = conn.prepare(sql)?;
    let cols = stmt.column_count();
    let mut rows = stmt.query([])?;
    while let Some(row) = rows.next()? {
        for i in 0..cols {
            let v: SqlValue = row.get(i)?;
            hasher.update(format!("{v:?}\u{1f}").as_bytes());
        }
        hasher.update(b"\x1e");
    }
    Ok(())
}

fn ensure_application(tx: &Transaction<'_>, name: &str) -> Result<ApplicationId> {
    tx.execute("INSERT OR IGNORE INTO applications (name) VALUES (?1)", params![name])?;
    Ok(tx.query_row("SELECT id FROM applications WHERE name = ?1", params![name], |r| r.get(0))?)
}

fn ensure_group(tx: &Transaction<'_>, ecosystem: Ecosystem, name: &str) -> Result<GroupId> {
    tx.execute(
        "INSERT OR IGNORE INTO dependency_groups (ecosystem, name) VALUES (?1, ?2)",
        params![ecosystem.as_str(), name],
    )?;
    Ok(tx.query_row(
        "SELECT id FROM dependency_groups WHERE ecosystem = ?1 AND name = ?2",
        params![ecosystem.as_str(), name],
        |r| r.get(0),
    )?)
}

fn ensure_dependency(tx: &Transaction<'_>, ecosystem: Ecosystem, group_id: GroupId, name: &str) -> Result<DependencyId> {
    tx.execute(
        "INSERT OR IGNORE INTO dependencies (ecosystem, group_id, name) VALUES (?1, ?2, ?3)",
        params![ecosystem.as_str(), group_id, name],
    )?;
    Ok(tx.query_row(
        "SELECT id FROM dependencies WHERE ecosystem = ?1 AND group_id = ?2 AND name = ?3",
        params![ecosystem.as_str(), group_id, name],
        |r| r.get(0),
    )?)
}

fn append_event(
    tx: &Transaction<'_>,
    at: DateTime<Utc>,
    kind: EventKind,
    actor: Option<&str>,
    subject: &str,
    detail: &str,
) -> Result<i64> {
    let seq: i64 = tx.query_row("SELECT COALESCE(MAX(seq), 0) + 1 FROM events", [], |r| r.get(0))?;
    tx.execute(
        "INSERT INTO events (seq, at, stream, kind, actor, subject, detail) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        params![seq, ts(at), kind.stream(), kind.kind_str(), actor, subject, detail],
    )?;
    Ok(seq)
}

type RawEvent = (i64, String, String, String, Option<String>, String, String);

fn raw_event(r: &Row<'_>) -> rusqlite::Result<RawEvent> {
    Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?, r.get(6)?))
}

fn decode_event(raw: RawEvent) -> Result<Event> {
    let (seq, at, stream, kind, actor, subject, detail) = raw;
    Ok(Event {
        seq,
        at: parse_ts(&at)?,
        kind: EventKind::parse(&stream, &kind).ok_or_else(|| StoreError::Corrupt(format!("event kind {stream}:{kind}")))?,
        actor,
        subject,
        detail,
    })
}

fn event_by_seq(conn: &Connection, seq: i64) -> Result<Event> {
    let raw = conn.query_row(
        "SELECT seq, at, stream, kind, actor, subject, detail FROM events WHERE seq = ?1",
        params![seq],
        raw_event,
    )?;
    decode_event(raw)
}

const DEPENDENCY_SELECT: &str =
    "SELECT d.id, d.ecosystem, d.group_id, g.name, d.name, d.category_id FROM dependencies d
     JOIN dependency_groups g ON g.id = d.group_id";

type RawDependency = (i64, String, i64, String, String, Option<i64>);

fn raw_dependency(r: &Row<'_>) -> rusqlite::Result<RawDependency> {
    Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?))
}

fn decode_dependency(raw: RawDependency) -> Result<DependencyRow> {
    let (id, eco, group_id, group, name, category_id) = raw;
    Ok(DependencyRow {
        id,
        ecosystem: parse_field(&eco, "ecosystem")?,
        group_id,
        group,
        name,
        category_id,
    })
}

fn dependency_row(conn: &Connection, id: DependencyId) -> Result<DependencyRow> {
    let raw = conn
        .query_row(&format!("{DEPENDENCY_SELECT} WHERE d.id = ?1"), params![id], raw_dependency)
        .optional()?
        .ok_or_else(|| StoreError::NotFound(format!("dependency {id}")))?;
    decode_dependency(raw)
}

fn category_row(conn: &Connection, id: CategoryId) -> Result<CategoryRow> {
    conn.query_row("SELECT id, name, description FROM categories WHERE id = ?1", params![id], |r| {
        Ok(CategoryRow {
            id: r.get(0)?,
            name: r.get(1)?,
            description: r.get(2)?,
        })
    })
    .optional()?
    .ok_or_else(|| StoreError::NotFound(format!("category {id}")))
}

const VERSION_SELECT: &str = "SELECT id, dependency_id, version, introduced_date, status, effective_date, end_date,
     justification, blacklist_reason FROM dependency_versions";

type RawVersion = (i64, i64, String, String, String, String, Option<String>, Option<String>, Option<String>);

fn raw_version(r: &Row<'_>) -> rusqlite::Result<RawVersion> {
    Ok((
        r.get(0)?,
        r.get(1)?,
        r.get(2)?,
        r.get(3)?,
        r.get(4)?,
        r.get(5)?,
        r.get(6)?,
        r.get(7)?,
        r.get(8)?,
    ))
}

fn decode_version(raw: RawVersion) -> Result<DependencyVersionRow> {
    let (id, dependency_id, version, introduced, status, effective, end, justification, blacklist_reason) = raw;
    Ok(DependencyVersionRow {
        id,
        dependency_id,
        version,
        introduced_date: parse_ts(&introduced)?,
        status: parse_field(&status, "status")?,
        effective_date: parse_ts(&effective)?,
        end_date: parse_opt_ts(end)?,
        justification,
        blacklist_reason,
    })
}

fn version_row(conn: &Connection, id: VersionId) -> Result<DependencyVersionRow> {
    let raw = conn
        .query_row(&format!("{VERSION_SELECT} WHERE id = ?1"), params![id], raw_version)
        .optional()?
        .ok_or_else(|| StoreError::NotFound(format!("dependency version {id}")))?;
    decode_version(raw)
}

fn version_coordinate(conn: &Connection, version_id: VersionId) -> Result<Coordinate> {
    let v = version_row(conn, version_id)?;
    let d = dependency_row(conn, v.dependency_id)?;
    Ok(Coordinate {
        ecosystem: d.ecosystem,
        group: d.group,
        name: d.name,
        version: v.version,
        scope: None,
    })
}
