//! Evaluation properties over generated DRD views.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use depgate_core::gate::{evaluate, BlacklistFlag, DrdView, OpenVulnerability, PolicyConfig, PolicyMode, ViewEntry};
use depgate_core::manifest::{SbomEntry, SbomSnapshot};
use depgate_core::model::{Coordinate, Ecosystem, Severity, SeverityBand, Status, Verdict};
use depgate_core::store::WaiverRow;
use proptest::prelude::*;

use super::{fail, run, CASES};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

fn hours(h: i64) -> DateTime<Utc> {
    t0() + Duration::hours(h)
}

const APP_ID: i64 = 1;

#[derive(Debug, Clone)]
pub struct Case {
    pub sbom: SbomSnapshot,
    pub view: DrdView,
    pub waivers: Vec<WaiverRow>,
    pub policy: PolicyConfig,
    pub now: DateTime<Utc>,
}

fn status() -> impl Strategy<Value = Status> {
    prop_oneof![Just(Status::Approved), Just(Status::NotReviewed), Just(Status::Deprecated), Just(Status::Rejected)]
}

fn mode() -> impl Strategy<Value = PolicyMode> {
    prop_oneof![Just(PolicyMode::Notify), Just(PolicyMode::Reprieve), Just(PolicyMode::Fail)]
}

fn band() -> impl Strategy<Value = SeverityBand> {
    prop_oneof![
        Just(SeverityBand::None),
        Just(SeverityBand::Low),
        Just(SeverityBand::Medium),
        Just(SeverityBand::High),
        Just(SeverityBand::Critical)
    ]
}

pub fn policy() -> impl Strategy<Value = PolicyConfig> {
    (mode(), 1u32..60, mode(), 1u32..30, any::<bool>(), any::<bool>(), band()).prop_map(
        |(nr, nrd, rj, rjd, bl, dw, th)| PolicyConfig {
            not_reviewed_mode: nr,
            not_reviewed_reprieve_days: nrd,
            rejected_mode: rj,
            rejected_reprieve_days: rjd,
            blacklist_fails_immediately: bl,
            deprecated_warn_before_end_date: dw,
            vuln_warn_threshold: th,
        },
    )
}

/// Offsets in hours from t0; the evaluation time is drawn from the same
/// span so every rule is reachable.
fn entry(vid: i64) -> impl Strategy<Value = ViewEntry> {
    (
        status(),
        0i64..2400,
        0i64..1200,
        proptest::option::of(0i64..2400),
        any::<bool>(),
        proptest::option::of(0i64..1200),
        proptest::collection::vec(0u8..=100, 0..3),
    )
        .prop_map(move |(status, intro, eff_delta, end_delta, blacklisted, seen_delta, sevs)| {
            let introduced = hours(intro);
            let effective = introduced + Duration::hours(eff_delta);
            ViewEntry {
                dependency_version_id: vid,
                status,
                introduced_date: introduced,
                effective_date: effective,
                end_date: end_delta.map(|d| effective + Duration::hours(d)),
                blacklist: (blacklisted && status == Status::Rejected).then(|| BlacklistFlag {
                    dependency_version_id: vid,
                    reason: "high threat".into(),
                }),
                first_seen: seen_delta.map(|d| introduced + Duration::hours(d)),
                vulnerabilities: sevs
                    .into_iter()
                    .enumerate()
                    .map(|(i, t)| OpenVulnerability {
                        id: format!("ADV-{vid}-{i}"),
                        severity: Severity::from_tenths(t).unwrap(),
                    })
                    .collect(),
            }
        })
}

fn waiver(n: usize) -> impl Strategy<Value = WaiverRow> {
    (1..=n as i64, 0i64..4800, prop_oneof![Just(APP_ID), Just(APP_ID + 1)]).prop_map(|(vid, exp, app)| WaiverRow {
        id: 0,
        application_id: app,
        dependency_version_id: vid,
        expires: hours(exp),
        justification: "migration scheduled".into(),
        approver: "committee".into(),
    })
}

pub fn case() -> impl Strategy<Value = Case> {
    (1usize..6)
        .prop_flat_map(|n| {
            let entries: Vec<_> = (1..=n as i64).map(entry).collect();
            (entries, proptest::collection::vec(waiver(n), 0..4), policy(), 0i64..4800)
        })
        .prop_map(|(entries, mut waivers, policy, now)| {
            let mut deps = Vec::new();
            let mut map = BTreeMap::new();
            for (i, e) in entries.into_iter().enumerate() {
                let c = Coordinate::new(Ecosystem::Maven, "org.example", format!("lib{i}"), "1.0").unwrap();
                map.insert(c.canonical(), e);
                deps.push(SbomEntry::new(c));
            }
            for (i, w) in waivers.iter_mut().enumerate() {
                w.id = i as i64 + 1;
            }
            Case {
                sbom: SbomSnapshot::new("app", "c0", t0(), deps),
                view: DrdView {
                    application_id: Some(APP_ID),
                    entries: map,
                },
                waivers,
                policy,
                now: hours(now),
            }
        })
}

fn verdict(c: &Case) -> Verdict {
    evaluate(&c.sbom, &c.view, &c.waivers, &c.policy, c.now).expect("view covers sbom").verdict
}

pub fn determinism() -> Result<(), String> {
    run(CASES, case(), |c| {
        let a = evaluate(&c.sbom, &c.view, &c.waivers, &c.policy, c.now).unwrap();
        let b = evaluate(&c.sbom, &c.view, &c.waivers, &c.policy, c.now).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.to_json(), b.to_json());
        Ok(())
    })
}

/// Raising one coordinate's status in Approved < NotReviewed < Deprecated
/// < Rejected, all else fixed, must not lower the verdict.
pub fn status_monotonicity() -> Result<(), String> {
    let strategy = case().prop_flat_map(|c| {
        let n = c.view.entries.len();
        (Just(c), 0..n, status(), status())
    });
    run(CASES, strategy, |(c, idx, s1, s2)| {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        if lo == hi {
            return Ok(());
        }
        let key = c.view.entries.keys().nth(idx).unwrap().clone();
        let mut low = c.clone();
        let mut high = c.clone();
        low.view.entries.get_mut(&key).unwrap().status = lo;
        high.view.entries.get_mut(&key).unwrap().status = hi;
        // a blacklist flag only exists on rejected rows
        if lo != Status::Rejected {
            low.view.entries.get_mut(&key).unwrap().blacklist = None;
        }
        let (vl, vh) = (verdict(&low), verdict(&high));
        if vh < vl {
            let e = &high.view.entries[&key];
            return Err(fail(format!(
                "{key}: {lo:?} gives {vl:?} but {hi:?} gives {vh:?} (introduced {}, effective {}, end {:?}, now {}, policy {:?})",
                e.introduced_date, e.effective_date, e.end_date, c.now, c.policy
            )));
        }
        Ok(())
    })
}

/// For fixed inputs, a later evaluation time never lowers the verdict.
pub fn time_monotonicity() -> Result<(), String> {
    run(CASES, (case(), 0i64..4800), |(c, later)| {
        let mut c2 = c.clone();
        c2.now = c.now + Duration::hours(later);
        let (v1, v2) = (verdict(&c), verdict(&c2));
        prop_assert!(v2 >= v1, "at {} {:?}, at {} {:?}", c.now, v1, c2.now, v2);
        Ok(())
    })
}

/// Adding an unexpired waiver never raises the verdict; removing one never
/// lowers it.
pub fn waiver_soundness() -> Result<(), String> {
    let strategy = case().prop_flat_map(|c| {
        let n = c.view.entries.len();
        (Just(c), waiver(n), 1i64..4800)
    });
    run(CASES, strategy, |(c, mut w, ahead)| {
        w.id = 1000;
        w.expires = c.now + Duration::hours(ahead);
        let without = verdict(&c);
        let mut with = c.clone();
        with.waivers.push(w);
        let with_v = verdict(&with);
        prop_assert!(with_v <= without, "adding a waiver raised {:?} to {:?}", without, with_v);
        if !c.waivers.is_empty() {
            let mut fewer = c.clone();
            fewer.waivers.pop();
            prop_assert!(verdict(&fewer) >= without, "removing a waiver lowered the verdict");
        }
        Ok(())
    })
}
