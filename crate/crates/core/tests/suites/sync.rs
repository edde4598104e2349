//! Sync runs over generated inventories, feeds and registries.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::Duration;
use depgate_core::manifest::{SbomEntry, SbomSnapshot};
use depgate_core::model::{Coordinate, Ecosystem};
use depgate_core::range::match_range;
use depgate_core::store::Store;
use depgate_core::sync::{run_sync, AliasMap, FeedDocument, FeedFormat, RegistryAdapter, RegistryError, SyncInputs, SyncReport};
use proptest::prelude::*;

use super::gate::t0;
use super::{fail, run, CASES};

/// In-memory registry keyed by (ecosystem, group, name).
#[derive(Debug, Clone, Default)]
pub struct MapRegistry(pub BTreeMap<(Ecosystem, String, String), Vec<String>>);

impl RegistryAdapter for MapRegistry {
    fn handles(&self, ecosystem: Ecosystem) -> bool {
        ecosystem != Ecosystem::Internal
    }

    fn list_versions(&self, ecosystem: Ecosystem, group: &str, name: &str) -> Result<Vec<String>, RegistryError> {
        self.0
            .get(&(ecosystem, group.to_string(), name.to_string()))
            .cloned()
            .ok_or_else(|| RegistryError::RegistryUnavailable {
                package: format!("{ecosystem}:{group}:{name}"),
                message: "not listed".into(),
            })
    }
}

fn pkg(lib: u8) -> (Ecosystem, &'static str, String) {
    if lib.is_multiple_of(2) {
        (Ecosystem::Maven, "org.example", format!("lib{lib}"))
    } else {
        (Ecosystem::Npm, "(default)", format!("lib{lib}"))
    }
}

#[derive(Debug, Clone)]
pub enum Line {
    Advisory { n: u8, sev: u8, targets: Vec<(u8, u8, u8)> },
    Product { n: u8 },
    Garbage,
}

#[derive(Debug, Clone)]
pub struct World {
    observed: Vec<(u8, u8, u8)>,
    lines: Vec<Line>,
    listings: Vec<(u8, Vec<u8>)>,
}

const OPS: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];

fn line() -> impl Strategy<Value = Line> {
    prop_oneof![
        6 => (0u8..12, 0u8..=100, proptest::collection::vec((0u8..5, 0u8..6, 0u8..8), 1..3))
            .prop_map(|(n, sev, targets)| Line::Advisory { n, sev, targets }),
        1 => (0u8..12).prop_map(|n| Line::Product { n }),
        1 => Just(Line::Garbage),
    ]
}

pub fn world() -> impl Strategy<Value = World> {
    (
        proptest::collection::vec((0u8..3, 0u8..5, 0u8..8), 1..15),
        proptest::collection::vec(line(), 0..10),
        proptest::collection::vec((0u8..5, proptest::collection::vec(0u8..12, 1..4)), 0..5),
    )
        .prop_map(|(observed, lines, listings)| World { observed, lines, listings })
}

fn render(l: &Line) -> String {
    match l {
        Line::Advisory { n, sev, targets } => {
            let matches: Vec<serde_json::Value> = targets
                .iter()
                .map(|(lib, op, v)| {
                    let (e, g, name) = pkg(*lib);
                    serde_json::json!({
                        "ecosystem": e, "group": g, "name": name,
                        "range": [{"op": OPS[*op as usize], "version": format!("1.{v}")}],
                    })
                })
                .collect();
            serde_json::json!({
                "id": format!("GEN-{n}"), "severity": f64::from(*sev) / 10.0,
                "published": "2024-01-01", "matches": matches,
            })
            .to_string()
        }
        Line::Product { n } => serde_json::json!({
            "id": format!("GEN-P{n}"), "severity": 5.0, "published": "2024-01-01",
            "matches": [{"product": format!("vendor:unknown{n}"), "range": [{"op": ">=", "version": "0"}]}],
        })
        .to_string(),
        Line::Garbage => "{\"id\": ".to_string(),
    }
}

fn build(w: &World) -> (Store, Vec<FeedDocument>, MapRegistry) {
    let store = Store::open_in_memory().unwrap();
    for (app, lib, v) in &w.observed {
        let (e, g, n) = pkg(*lib);
        let c = Coordinate::new(e, g, n, format!("1.{v}")).unwrap();
        let sbom = SbomSnapshot::new(format!("app{app}"), "c", t0(), [SbomEntry::new(c)]);
        store.upsert_observation(&sbom, t0()).unwrap();
    }
    let text: Vec<String> = w.lines.iter().map(render).collect();
    let docs = vec![FeedDocument::new(FeedFormat::Native, "gen.jsonl", text.join("\n"))];
    let mut reg = MapRegistry::default();
    for (lib, vs) in &w.listings {
        let (e, g, n) = pkg(*lib);
        reg.0.insert((e, g.to_string(), n), vs.iter().map(|v| format!("1.{v}")).collect());
    }
    (store, docs, reg)
}

fn sync(store: &Store, docs: &[FeedDocument], reg: &MapRegistry, hours: i64) -> SyncReport {
    let regs: [&dyn RegistryAdapter; 1] = [reg];
    let aliases = AliasMap::default();
    let inputs = SyncInputs {
        registries: &regs,
        feeds: docs,
        aliases: &aliases,
    };
    run_sync(store, &inputs, t0() + Duration::hours(hours), "test").unwrap()
}

fn zero_delta(r: &SyncReport) -> bool {
    r.advisories_created == 0
        && r.advisories_updated == 0
        && r.new_vulns_linked == 0
        && r.links_withdrawn == 0
        && r.new_versions_found == 0
        && r.events_emitted == 0
}

/// A second run over unchanged inputs changes nothing but the
/// sync_completed audit entry.
pub fn idempotence() -> Result<(), String> {
    run(CASES, world(), |w| {
        let (store, docs, reg) = build(&w);
        let first = sync(&store, &docs, &reg, 1);
        let digest = store.state_digest(true).unwrap();
        let second = sync(&store, &docs, &reg, 5);
        prop_assert!(zero_delta(&second), "second run: {:?}", second);
        prop_assert_eq!(store.state_digest(true).unwrap(), digest);
        // every feed record is accounted for exactly once
        let records = w.lines.len();
        prop_assert_eq!(first.advisories_ingested + first.unmatched_advisories + first.feed_errors.len(), records);
        Ok(())
    })
}

/// Links equal exactly the (version, advisory) pairs some match admits.
pub fn linkage_soundness() -> Result<(), String> {
    run(CASES, world(), |w| {
        let (store, docs, reg) = build(&w);
        sync(&store, &docs, &reg, 1);
        let deps: HashMap<i64, (Ecosystem, String, String)> = store
            .dependencies()
            .unwrap()
            .into_iter()
            .map(|d| (d.id, (d.ecosystem, d.group, d.name)))
            .collect();
        let mut expected = BTreeSet::new();
        let versions = store.versions().unwrap();
        for a in store.vulnerabilities().unwrap() {
            for v in &versions {
                let (e, g, n) = &deps[&v.dependency_id];
                if a.matches
                    .iter()
                    .any(|m| m.ecosystem == *e && &m.group == g && &m.name == n && match_range(&v.version, &m.range))
                {
                    expected.insert((v.id, a.id.clone()));
                }
            }
        }
        let got: BTreeSet<(i64, String)> = store.vulnerability_links().unwrap().into_iter().collect();
        if got != expected {
            return Err(fail(format!(
                "extra {:?}, missing {:?}",
                got.difference(&expected).collect::<Vec<_>>(),
                expected.difference(&got).collect::<Vec<_>>()
            )));
        }
        Ok(())
    })
}
