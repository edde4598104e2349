//! Store lifecycle checks: the transition matrix, audit completeness and
//! observation idempotence.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, Utc};
use depgate_core::manifest::{SbomEntry, SbomSnapshot};
use depgate_core::model::{Coordinate, Ecosystem, Status};
use depgate_core::store::{AuditAction, EventKind, StatusChange, Store, StoreError, VersionId};
use proptest::prelude::*;

use super::gate::t0;
use super::{fail, run, CASES};

/// Legal transitions, written out from the vetting flow.
pub const LEGAL: &[(Status, Status)] = &[
    (Status::NotReviewed, Status::Approved),
    (Status::NotReviewed, Status::Rejected),
    (Status::Approved, Status::Deprecated),
    (Status::Approved, Status::Rejected),
    (Status::Deprecated, Status::Rejected),
    (Status::Deprecated, Status::Approved),
    (Status::Rejected, Status::Approved),
];

pub fn change(vid: VersionId, to: Status, now: DateTime<Utc>) -> StatusChange {
    StatusChange {
        version_id: vid,
        status: to,
        justification: Some("committee review".into()),
        end_date: (to == Status::Deprecated).then(|| now + Duration::days(90)),
        actor: "committee".into(),
    }
}

fn observe(store: &Store, name: &str, at: DateTime<Utc>) -> VersionId {
    let c = Coordinate::new(Ecosystem::Maven, "org.example", name, "1.0").unwrap();
    let sbom = SbomSnapshot::new("app", "c1", at, [SbomEntry::new(c)]);
    store.upsert_observation(&sbom, at).unwrap()[0].id
}

/// Drives a fresh NotReviewed row to `target` along legal edges.
fn reach(store: &Store, vid: VersionId, target: Status, at: DateTime<Utc>) {
    let path: &[Status] = match target {
        Status::NotReviewed => &[],
        Status::Approved => &[Status::Approved],
        Status::Deprecated => &[Status::Approved, Status::Deprecated],
        Status::Rejected => &[Status::Rejected],
    };
    for s in path {
        store.set_status(&change(vid, *s, at), at).unwrap();
    }
}

/// All 16 ordered pairs against the written-out matrix.
pub fn transition_matrix() -> Result<(), String> {
    let store = Store::open_in_memory().map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    let mut checked = 0;
    for (i, from) in Status::ALL.iter().enumerate() {
        for (j, to) in Status::ALL.iter().enumerate() {
            let at = t0() + Duration::hours((i * 4 + j) as i64);
            let vid = observe(&store, &format!("m{i}{j}"), at);
            reach(&store, vid, *from, at);
            let legal = LEGAL.contains(&(*from, *to));
            let result = store.set_status(&change(vid, *to, at), at);
            checked += 1;
            match (legal, result) {
                (true, Ok(row)) if row.status == *to => {}
                (false, Err(StoreError::IllegalTransition { .. })) => {
                    if store.version(vid).unwrap().status != *from {
                        errors.push(format!("{from:?} -> {to:?}: rejected but row changed"));
                    }
                }
                (legal, r) => errors.push(format!("{from:?} -> {to:?}: legal={legal}, got {r:?}")),
            }
        }
    }
    if checked != 16 {
        return Err(format!("checked {checked} pairs"));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

#[derive(Debug, Clone)]
enum Op {
    Observe { app: u8, lib: u8, version: u8 },
    SetStatus { pick: u8, to: Status, justified: bool, with_end: bool },
    Categorize { pick: u8, cat: u8 },
}

fn op() -> impl Strategy<Value = Op> {
    let status = prop_oneof![Just(Status::Approved), Just(Status::NotReviewed), Just(Status::Deprecated), Just(Status::Rejected)];
    prop_oneof![
        (0u8..3, 0u8..4, 0u8..3).prop_map(|(app, lib, version)| Op::Observe { app, lib, version }),
        (any::<u8>(), status, any::<bool>(), any::<bool>()).prop_map(|(pick, to, justified, with_end)| Op::SetStatus {
            pick,
            to,
            justified,
            with_end
        }),
        (any::<u8>(), 0u8..2).prop_map(|(pick, cat)| Op::Categorize { pick, cat }),
    ]
}

fn integrity(store: &Store) -> Result<(), String> {
    let deps: BTreeSet<i64> = store.dependencies().map_err(|e| e.to_string())?.iter().map(|d| d.id).collect();
    let versions = store.versions().map_err(|e| e.to_string())?;
    let vids: BTreeSet<i64> = versions.iter().map(|v| v.id).collect();
    let apps: BTreeSet<i64> = store.applications().map_err(|e| e.to_string())?.iter().map(|a| a.id).collect();
    for v in &versions {
        if !deps.contains(&v.dependency_id) {
            return Err(format!("version {} without dependency", v.id));
        }
        if v.effective_date < v.introduced_date {
            return Err(format!("version {} effective before introduced", v.id));
        }
        if v.status == Status::Rejected && v.justification.as_deref().is_none_or(str::is_empty) {
            return Err(format!("rejected version {} without justification", v.id));
        }
        if v.status == Status::Deprecated && v.end_date.is_none_or(|e| e < v.effective_date) {
            return Err(format!("deprecated version {} without a valid end date", v.id));
        }
    }
    for l in store.application_dependencies().map_err(|e| e.to_string())? {
        if !vids.contains(&l.dependency_version_id) || !apps.contains(&l.application_id) {
            return Err("dangling application link".into());
        }
        if l.last_seen < l.first_seen {
            return Err("last_seen before first_seen".into());
        }
    }
    Ok(())
}

/// Random operation sequences: one status_changed event per successful
/// set_status, one categorized event per effective assignment, one observed
/// event per new version, gapless seq, and integrity after every step.
pub fn audit_completeness() -> Result<(), String> {
    run(CASES, proptest::collection::vec(op(), 1..25), |ops| {
        let store = Store::open_in_memory().unwrap();
        let a = store.create_category("A", None).unwrap();
        let b = store.create_category("B", None).unwrap();
        let (mut status_ok, mut categorized, mut observed) = (0usize, 0usize, 0usize);
        for (step, op) in ops.iter().enumerate() {
            let now = t0() + Duration::hours(step as i64);
            match *op {
                Op::Observe { app, lib, version } => {
                    let c = Coordinate::new(Ecosystem::Maven, "org.example", format!("lib{lib}"), format!("1.{version}")).unwrap();
                    let sbom = SbomSnapshot::new(format!("app{app}"), format!("c{step}"), now, [SbomEntry::new(c)]);
                    observed += store.upsert_observation(&sbom, now).unwrap().len();
                }
                Op::SetStatus { pick, to, justified, with_end } => {
                    let versions = store.versions().unwrap();
                    if versions.is_empty() {
                        continue;
                    }
                    let v = &versions[pick as usize % versions.len()];
                    let ch = StatusChange {
                        version_id: v.id,
                        status: to,
                        justification: justified.then(|| "reviewed".to_string()),
                        end_date: with_end.then(|| now + Duration::days(30)),
                        actor: "tester".into(),
                    };
                    if store.set_status(&ch, now).is_ok() {
                        status_ok += 1;
                    }
                }
                Op::Categorize { pick, cat } => {
                    let deps = store.dependencies().unwrap();
                    if deps.is_empty() {
                        continue;
                    }
                    let d = &deps[pick as usize % deps.len()];
                    let target = if cat == 0 { a.id } else { b.id };
                    if d.category_id != Some(target) {
                        categorized += 1;
                    }
                    store.assign_category(d.id, target, "tester", now).unwrap();
                }
            }
            integrity(&store).map_err(fail)?;
        }
        let events = store.events_since(0).unwrap();
        let count = |action: AuditAction| events.iter().filter(|e| e.kind == EventKind::Audit(action)).count();
        prop_assert_eq!(count(AuditAction::StatusChanged), status_ok);
        prop_assert_eq!(count(AuditAction::Categorized), categorized);
        prop_assert_eq!(count(AuditAction::Observed), observed);
        for (i, e) in events.iter().enumerate() {
            prop_assert_eq!(e.seq, i as i64 + 1);
        }
        Ok(())
    })
}

/// Observing the same SBOM n times leaves the same rows as once, apart from
/// last_seen.
pub fn observation_idempotence() -> Result<(), String> {
    let entries = proptest::collection::vec((0u8..6, 0u8..4), 1..8);
    run(CASES, (entries, 2usize..5), |(entries, n)| {
        let coords: Vec<SbomEntry> = entries
            .iter()
            .map(|(l, v)| SbomEntry::new(Coordinate::new(Ecosystem::Npm, "(default)", format!("pkg{l}"), format!("0.{v}.0")).unwrap()))
            .collect();
        let once = Store::open_in_memory().unwrap();
        let many = Store::open_in_memory().unwrap();
        let sbom = SbomSnapshot::new("app", "c", t0(), coords);
        once.upsert_observation(&sbom, t0()).unwrap();
        for k in 0..n {
            let created = many.upsert_observation(&sbom, t0() + Duration::hours(k as i64)).unwrap();
            if k > 0 {
                prop_assert!(created.is_empty());
            }
        }
        prop_assert_eq!(once.versions().unwrap(), many.versions().unwrap());
        prop_assert_eq!(once.dependencies().unwrap(), many.dependencies().unwrap());
        prop_assert_eq!(once.events_since(0).unwrap(), many.events_since(0).unwrap());
        let strip = |s: &Store| {
            s.application_dependencies()
                .unwrap()
                .into_iter()
                .map(|l| (l.application_id, l.dependency_version_id, l.first_seen, l.first_seen_commit))
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(strip(&once), strip(&many));
        for l in many.application_dependencies().unwrap() {
            prop_assert_eq!(l.last_seen, t0() + Duration::hours(n as i64 - 1));
        }
        Ok(())
    })
}
