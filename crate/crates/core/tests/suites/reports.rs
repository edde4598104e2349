//! Report operations against recounts written directly over store rows.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::Duration;
use depgate_core::manifest::{SbomEntry, SbomSnapshot};
use depgate_core::model::{Coordinate, Ecosystem, Severity};
use depgate_core::range::VersionRange;
use depgate_core::reports::{category_breakdown, duplication_report, ecosystem_stats, vuln_summary, UNCATEGORIZED};
use depgate_core::store::{AdvisoryMatch, AdvisorySource, Store, VulnerabilityRow};
use depgate_core::version::compare_versions;
use proptest::prelude::*;

use super::gate::t0;
use super::{fail, run, CASES};

const ECOS: [Ecosystem; 3] = [Ecosystem::Maven, Ecosystem::Npm, Ecosystem::Nuget];

/// (severity tenths, published hour, targets as (library, op, version)).
type Advisory = (u8, i64, Vec<(usize, u8, u8)>);

#[derive(Debug, Clone)]
pub struct World {
    /// (app, ecosystem idx, lib, version, hour)
    observations: Vec<(u8, usize, u8, u8, i64)>,
    /// lib key -> category idx (None = uncategorized)
    categories: Vec<Option<u8>>,
    /// (advisory number, hour recorded, versions linked as (eco, lib, version))
    advisories: Vec<Advisory>,
    window: u32,
    now_hour: i64,
    threshold: usize,
}

fn lib_name(eco: usize, lib: u8) -> (Ecosystem, String, String) {
    let e = ECOS[eco];
    let group = if e.uses_default_group() { "(default)".to_string() } else { format!("org.g{}", lib % 2) };
    (e, group, format!("lib{lib}"))
}

fn coord(eco: usize, lib: u8, version: u8) -> Coordinate {
    let (e, g, n) = lib_name(eco, lib);
    Coordinate::new(e, g, n, format!("1.{version}")).unwrap()
}

pub fn world() -> impl Strategy<Value = World> {
    (
        proptest::collection::vec((0u8..5, 0usize..3, 0u8..6, 0u8..4, 0i64..96), 0..30),
        proptest::collection::vec(proptest::option::of(0u8..3), 18),
        proptest::collection::vec((0u8..10, 0i64..96, proptest::collection::vec((0usize..3, 0u8..6, 0u8..4), 1..4)), 0..8),
        1u32..5,
        0i64..120,
        1usize..5,
    )
        .prop_map(|(observations, categories, advisories, window, now_hour, threshold)| World {
            observations,
            categories,
            advisories,
            window,
            now_hour,
            threshold,
        })
}

fn build(w: &World) -> Store {
    let store = Store::open_in_memory().unwrap();
    let cats: Vec<i64> = (0..3).map(|i| store.create_category(&format!("Cat {i}"), None).unwrap().id).collect();
    let mut obs = w.observations.clone();
    obs.sort_by_key(|o| o.4);
    for (app, eco, lib, version, hour) in obs {
        let at = t0() + Duration::hours(hour);
        let sbom = SbomSnapshot::new(format!("app{app}"), "c", at, [SbomEntry::new(coord(eco, lib, version))]);
        store.upsert_observation(&sbom, at).unwrap();
    }
    for d in store.dependencies().unwrap() {
        let eco = ECOS.iter().position(|e| *e == d.ecosystem).unwrap();
        let lib: usize = d.name.trim_start_matches("lib").parse().unwrap();
        if let Some(c) = w.categories[eco * 6 + lib] {
            store.assign_category(d.id, cats[c as usize], "t", t0()).unwrap();
        }
    }
    for (n, hour, targets) in &w.advisories {
        let at = t0() + Duration::hours(*hour);
        let id = format!("ADV-{n}");
        let matches: Vec<AdvisoryMatch> = targets
            .iter()
            .map(|(e, l, v)| {
                let c = coord(*e, *l, *v);
                AdvisoryMatch {
                    ecosystem: c.ecosystem,
                    group: c.group.clone(),
                    name: c.name.clone(),
                    range: VersionRange::exact(c.version.clone()),
                }
            })
            .collect();
        let row = VulnerabilityRow {
            id: id.clone(),
            source: AdvisorySource::Manual,
            severity: Severity::from_tenths(70).unwrap(),
            summary: String::new(),
            published: at,
            matches,
        };
        store.record_vulnerability(&row, at).unwrap();
        for (e, l, v) in targets {
            if let Some(vr) = store.find_coordinate(&coord(*e, *l, *v)).unwrap() {
                store.link_vulnerability(vr.id, &id, at).unwrap();
            }
        }
    }
    store
}

struct Raw {
    /// dep id -> (ecosystem, group, name, category name)
    deps: HashMap<i64, (Ecosystem, String, String, String)>,
    /// dep id -> versions
    versions: HashMap<i64, Vec<String>>,
    /// dep id -> advisory ids
    advisories: HashMap<i64, BTreeSet<String>>,
}

fn raw(store: &Store) -> Raw {
    let cat_names: HashMap<i64, String> = store.categories().unwrap().into_iter().map(|c| (c.id, c.name)).collect();
    let mut deps = HashMap::new();
    for d in store.dependencies().unwrap() {
        let cat = d.category_id.map(|c| cat_names[&c].clone()).unwrap_or_else(|| UNCATEGORIZED.to_string());
        deps.insert(d.id, (d.ecosystem, d.group, d.name, cat));
    }
    let mut versions: HashMap<i64, Vec<String>> = HashMap::new();
    let mut owner = HashMap::new();
    for v in store.versions().unwrap() {
        owner.insert(v.id, v.dependency_id);
        versions.entry(v.dependency_id).or_default().push(v.version);
    }
    let mut advisories: HashMap<i64, BTreeSet<String>> = HashMap::new();
    for (vid, adv) in store.vulnerability_links().unwrap() {
        advisories.entry(owner[&vid]).or_default().insert(adv);
    }
    Raw { deps, versions, advisories }
}

pub fn recount_oracles() -> Result<(), String> {
    run(CASES, world(), |w| {
        let store = build(&w);
        let r = raw(&store);

        // breakdown: observed libraries per category, count desc then name
        let mut per_cat: BTreeMap<String, usize> = BTreeMap::new();
        for (id, (_, _, _, cat)) in &r.deps {
            if r.versions.get(id).is_some_and(|v| !v.is_empty()) {
                *per_cat.entry(cat.clone()).or_default() += 1;
            }
        }
        let got: Vec<(String, usize)> =
            category_breakdown(&store).unwrap().into_iter().map(|x| (x.category, x.distinct_libraries)).collect();
        let got_set: BTreeMap<String, usize> = got.iter().cloned().collect();
        prop_assert_eq!(&got_set, &per_cat);
        for pair in got.windows(2) {
            prop_assert!(pair[0].1 > pair[1].1 || (pair[0].1 == pair[1].1 && pair[0].0 < pair[1].0));
        }

        // vulnerability summary for every category
        let mut names: Vec<String> = (0..3).map(|i| format!("Cat {i}")).collect();
        names.push(UNCATEGORIZED.to_string());
        for cat in &names {
            let mut want: Vec<(String, String, &str, usize, usize)> = r
                .deps
                .iter()
                .filter(|(_, d)| &d.3 == cat)
                .map(|(id, d)| {
                    (
                        d.2.clone(),
                        d.1.clone(),
                        d.0.as_str(),
                        r.advisories.get(id).map_or(0, BTreeSet::len),
                        r.versions.get(id).map_or(0, Vec::len),
                    )
                })
                .collect();
            want.sort_by(|a, b| b.3.cmp(&a.3).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
            let got: Vec<(String, String, &str, usize, usize)> = vuln_summary(&store, cat)
                .unwrap()
                .into_iter()
                .map(|x| (x.library, x.group, x.ecosystem.as_str(), x.vuln_count, x.version_count))
                .collect();
            prop_assert_eq!(got, want, "category {}", cat);
        }

        // stats
        let now = t0() + Duration::hours(w.now_hour);
        let stats = ecosystem_stats(&store, w.window, now).unwrap();
        let apps = store.applications().unwrap();
        prop_assert_eq!(stats.repositories_total, apps.len());
        let version_eco: HashMap<i64, Ecosystem> = store
            .versions()
            .unwrap()
            .into_iter()
            .map(|v| (v.id, r.deps[&v.dependency_id].0))
            .collect();
        let mut eco_apps: BTreeMap<Ecosystem, BTreeSet<i64>> = BTreeMap::new();
        for l in store.application_dependencies().unwrap() {
            eco_apps.entry(version_eco[&l.dependency_version_id]).or_default().insert(l.application_id);
        }
        let want_eco: BTreeMap<Ecosystem, usize> = eco_apps.into_iter().map(|(e, s)| (e, s.len())).collect();
        prop_assert_eq!(&stats.repositories_by_ecosystem, &want_eco);
        prop_assert_eq!(stats.distinct_library_versions, r.versions.values().map(Vec::len).sum::<usize>());
        let open: BTreeSet<String> = r.advisories.values().flatten().cloned().collect();
        prop_assert_eq!(stats.total_open_vulnerabilities, open.len());
        let start = now - Duration::days(i64::from(w.window));
        let mut first_hour: BTreeMap<u8, i64> = BTreeMap::new();
        for (n, hour, _) in &w.advisories {
            first_hour.entry(*n).or_insert(*hour);
        }
        let recent = first_hour
            .values()
            .filter(|h| {
                let at = t0() + Duration::hours(**h);
                at > start && at <= now
            })
            .count();
        let want_rate = recent as f64 / f64::from(w.window);
        prop_assert!((stats.new_vulns_per_day - want_rate).abs() < 1e-12, "rate {} vs {}", stats.new_vulns_per_day, want_rate);

        // duplication
        let dup = duplication_report(&store, w.threshold).unwrap();
        let flagged: BTreeSet<String> = per_cat.iter().filter(|(_, n)| **n > w.threshold).map(|(c, _)| c.clone()).collect();
        let got_cats: BTreeSet<String> = dup.iter().map(|d| d.category.clone()).collect();
        prop_assert_eq!(&got_cats, &flagged);
        for d in &dup {
            prop_assert_eq!(d.distinct_libraries, per_cat[&d.category]);
            prop_assert_eq!(d.members.len(), d.distinct_libraries);
            for pair in d.members.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                let ord = a.vuln_count.cmp(&b.vuln_count).then_with(|| {
                    let la = a.latest_version.as_deref().unwrap();
                    let lb = b.latest_version.as_deref().unwrap();
                    compare_versions(lb, la)
                });
                if ord == Ordering::Greater {
                    return Err(fail(format!("{}: {} before {}", d.category, a.library, b.library)));
                }
            }
            for m in &d.members {
                let want_latest = r
                    .deps
                    .iter()
                    .find(|(_, x)| x.2 == m.library && x.1 == m.group && x.0 == m.ecosystem)
                    .and_then(|(id, _)| r.versions[id].iter().max_by(|a, b| compare_versions(a, b)))
                    .cloned();
                prop_assert_eq!(&m.latest_version, &want_latest);
            }
        }
        Ok(())
    })
}
