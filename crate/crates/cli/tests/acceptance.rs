//! Release gate. Runs every primary acceptance criterion, prints one
//! PASS/FAIL line per criterion and exits non-zero if any failed.

#[path = "../../core/tests/suites/mod.rs"]
mod suites;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, Output};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine as _;
use chrono::{DateTime, Duration, TimeZone, Utc};
use depgate_api::{router, AppState, Clock};
use depgate_core::corpus::{generate, seed_catalog, seed_corpus, Catalog, CorpusSpec};
use depgate_core::gate::PolicyConfig;
use depgate_core::manifest::{build_sbom, ManifestFile, ManifestKind, SbomEntry, SbomOptions, SbomSnapshot};
use depgate_core::model::{Coordinate, Ecosystem, Status};
use depgate_core::pipeline::gate_sbom;
use depgate_core::store::{StatusChange, Store};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(rel: &str) -> PathBuf {
    root().join("fixtures").join(rel)
}

fn depgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depgate"))
        .args(args)
        .env_remove("DEPGATE_DB")
        .env_remove("DEPGATE_API_TOKEN")
        .output()
        .expect("run depgate")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
}

fn stamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

// ----------------------------------------------------------------------
// 1: direct dependencies of the bundled Maven project
// ----------------------------------------------------------------------

fn scan_golden() -> Outcome {
    let out = depgate(&[
        "scan",
        fixture("pipeline-web").to_str().unwrap(),
        "--app",
        "pipeline-web",
        "--commit",
        "a1b2c3d",
        "--now",
        "2024-03-01T00:00:00Z",
        "--internal-prefix",
        "com.acme.",
    ]);
    ensure(out.status.success(), || format!("scan exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
    let golden = std::fs::read(fixture("golden/pipeline-web-sbom.json")).unwrap();
    ensure(out.stdout == golden, || "scan output differs from golden SBOM".into())?;

    let sbom: SbomSnapshot = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let names: Vec<String> = sbom.coordinates().map(|c| format!("{}:{}", c.group, c.name)).collect();
    ensure(names.len() == 8, || format!("{} coordinates", names.len()))?;
    let tree = std::fs::read_to_string(fixture("pipeline-web/dependency-tree.txt")).unwrap();
    for line in tree.lines().filter(|l| l.starts_with("[INFO] | ") || l.starts_with("[INFO]    ")) {
        let coord = line.trim_start_matches("[INFO]").trim_start_matches([' ', '|', '+', '\\', '-']);
        let ga: Vec<&str> = coord.split(':').take(2).collect();
        let key = ga.join(":");
        ensure(!names.contains(&key), || format!("transitive {key} leaked into the SBOM"))?;
    }
    Ok("8 direct coordinates, byte-identical to golden".into())
}

// ----------------------------------------------------------------------
// 2, 3: parser tables
// ----------------------------------------------------------------------

fn summary_after_sync(catalog: &str, feeds: &str, category: &str) -> Result<Vec<serde_json::Value>, String> {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("drd.db");
    {
        let store = Store::open(&db).map_err(|e| e.to_string())?;
        let raw = std::fs::read(fixture(catalog)).unwrap();
        let cat = Catalog::from_json(&raw).map_err(|e| e.to_string())?;
        seed_catalog(&store, &cat, 4, at(2024, 1, 1)).map_err(|e| e.to_string())?;
    }
    let db = db.to_str().unwrap();
    let sync = depgate(&[
        "sync",
        "--db",
        db,
        "--feeds",
        fixture(feeds).to_str().unwrap(),
        "--fixture-registries",
        fixture("registry").to_str().unwrap(),
        "--now",
        "2024-02-01T00:00:00Z",
    ]);
    ensure(sync.status.success(), || format!("sync exited {:?}", sync.status.code()))?;
    let out = depgate(&["report", "vulns", "--db", db, "--category", category, "--format", "json"]);
    ensure(out.status.success(), || format!("report exited {:?}", out.status.code()))?;
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

/// Compares report rows to (library, vulns, versions) expectations as
/// multisets and checks the report's own ordering rule.
fn check_rows(rows: &[serde_json::Value], want: &[(&str, u64, u64)]) -> Outcome {
    let got: Vec<(String, u64, u64)> = rows
        .iter()
        .map(|r| {
            (
                r["library"].as_str().unwrap_or_default().to_string(),
                r["vuln_count"].as_u64().unwrap_or(u64::MAX),
                r["version_count"].as_u64().unwrap_or(u64::MAX),
            )
        })
        .collect();
    let mut a = got.clone();
    let mut b: Vec<(String, u64, u64)> = want.iter().map(|(n, v, c)| (n.to_string(), *v, *c)).collect();
    a.sort();
    b.sort();
    ensure(a == b, || format!("rows {got:?}"))?;
    for w in got.windows(2) {
        ensure(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 <= w[1].0), || format!("order {:?} before {:?}", w[0], w[1]))?;
    }
    Ok(format!("{} rows exact", got.len()))
}

// Expected (library, advisories, versions) rows.
const XML_TABLE: &[(&str, u64, u64)] = &[
    ("xstream", 6, 4),
    ("xmlsec", 6, 3),
    ("jackson-dataformat-xml", 3, 13),
    ("dom4j", 1, 2),
    ("jdom", 1, 1),
    ("xom", 1, 1),
    ("xmlbeans", 1, 3),
    ("xalan", 1, 2),
    ("xmlschema", 0, 1),
    ("xerces", 0, 1),
    ("sax", 0, 1),
    ("xml-aps", 0, 2),
    ("xmlpublic", 0, 1),
    ("aalto-xml", 0, 1),
    ("javax.xml.stream", 0, 1),
    ("xmlpull", 0, 1),
    ("xpp3_min", 0, 1),
    ("xmlsec", 0, 1),
];

const JSON_TABLE: &[(&str, u64, u64)] = &[
    ("json-smart", 2, 4),
    ("gson", 1, 7),
    ("json", 0, 10),
    ("json-lib", 0, 3),
    ("json-simple", 0, 2),
    ("json-path", 0, 1),
    ("javax.json-api", 0, 1),
    ("tapestry-json", 0, 1),
    ("wink-json4j", 0, 1),
    ("jakarta.json", 0, 1),
    ("json4s-core", 0, 1),
    ("jsonschema2pojo-core", 0, 1),
];

fn xml_table() -> Outcome {
    let rows = summary_after_sync("catalogs/xml-parsers.json", "feeds/xml", "XML Parser")?;
    check_rows(&rows, XML_TABLE)
}

fn json_table() -> Outcome {
    let rows = summary_after_sync("catalogs/json-parsers.json", "feeds/json", "JSON Parser")?;
    check_rows(&rows, JSON_TABLE)
}

// ----------------------------------------------------------------------
// 4: portfolio shape and advisory rate
// ----------------------------------------------------------------------

fn stats(db: &str, window: &str, now: &str) -> Result<serde_json::Value, String> {
    let out = depgate(&["report", "stats", "--db", db, "--window", window, "--now", now]);
    ensure(out.status.success(), || format!("stats exited {:?}", out.status.code()))?;
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn advisory_line(i: usize) -> String {
    serde_json::json!({
        "id": format!("REPLAY-{i:02}"),
        "severity": 5.0 + i as f64 / 2.0,
        "published": "2024-05-01",
        "matches": [{
            "ecosystem": "maven",
            "group": "org.example.logging",
            "name": format!("logging-lib-{:02}", i + 1),
            "range": [{"op": "<", "version": "9"}],
        }],
    })
    .to_string()
}

fn portfolio_stats() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("drd.db");
    {
        let store = Store::open(&db).map_err(|e| e.to_string())?;
        let corpus = generate(&CorpusSpec::reference_portfolio(42), at(2024, 4, 1));
        seed_corpus(&store, &corpus, at(2024, 4, 1)).map_err(|e| e.to_string())?;
    }
    let db = db.to_str().unwrap();
    let s = stats(db, "30", "2024-04-02T00:00:00Z")?;
    let by_eco = &s["repositories_by_ecosystem"];
    let counts = (
        s["repositories_total"].as_u64(),
        by_eco["maven"].as_u64(),
        by_eco["nuget"].as_u64(),
        by_eco["npm"].as_u64(),
    );
    ensure(counts == (Some(780), Some(527), Some(211), Some(42)), || format!("repositories {counts:?}"))?;

    // a feed that grows by four advisories on each of two days
    for (day, upto) in [(1u32, 4usize), (2, 8)] {
        let feeds = dir.path().join(format!("feeds-{day}"));
        std::fs::create_dir_all(&feeds).unwrap();
        let body: Vec<String> = (0..upto).map(advisory_line).collect();
        std::fs::write(feeds.join("replay.jsonl"), body.join("\n")).unwrap();
        let now = stamp(at(2024, 5, day));
        let out = depgate(&["sync", "--db", db, "--feeds", feeds.to_str().unwrap(), "--now", &now]);
        ensure(out.status.success(), || format!("sync day {day} exited {:?}", out.status.code()))?;
    }
    let s = stats(db, "2", "2024-05-02T00:00:00Z")?;
    let rate = s["new_vulns_per_day"].as_f64();
    ensure(rate == Some(4.0), || format!("new_vulns_per_day {rate:?}"))?;
    Ok("780 = 527 + 211 + 42 repositories, 4.0 new advisories/day".into())
}

// ----------------------------------------------------------------------
// 5: one dependency through review
// ----------------------------------------------------------------------

const COMMONS_TEXT: &str = "maven:org.apache.commons:commons-text:1.9";

fn gate_step(db: &str, commit: &str, now: DateTime<Utc>, golden: &str, code: i32) -> Result<(), String> {
    let out = depgate(&[
        "gate",
        fixture("lifecycle/app").to_str().unwrap(),
        "--db",
        db,
        "--app",
        "billing-service",
        "--commit",
        commit,
        "--now",
        &stamp(now),
    ]);
    let want = std::fs::read_to_string(fixture(&format!("lifecycle/{golden}"))).unwrap();
    ensure(stdout(&out) == want, || format!("{golden}: got\n{}", stdout(&out)))?;
    ensure(out.status.code() == Some(code), || format!("{golden}: exit {:?}, want {code}", out.status.code()))
}

fn change(db: &str, status: Status, justification: Option<&str>, now: DateTime<Utc>) -> Result<(), String> {
    let store = Store::open(db).map_err(|e| e.to_string())?;
    let c = Coordinate::parse_canonical(COMMONS_TEXT).map_err(|e| e.to_string())?;
    let v = store.find_coordinate(&c).map_err(|e| e.to_string())?.ok_or("version not observed")?;
    let change = StatusChange {
        version_id: v.id,
        status,
        justification: justification.map(str::to_string),
        end_date: None,
        actor: "arch-board".into(),
    };
    store.set_status(&change, now).map(|_| ()).map_err(|e| e.to_string())
}

fn up_to_rejection(db: &str) -> Result<(), String> {
    gate_step(db, "c1", at(2024, 3, 1), "1-new.json", 0)?;
    change(db, Status::Approved, None, at(2024, 3, 3))?;
    gate_step(db, "c2", at(2024, 3, 3), "2-approved.json", 0)?;
    change(db, Status::Rejected, Some("unmaintained; move to the in-house formatter"), at(2024, 3, 6))?;
    gate_step(db, "c3", at(2024, 3, 7), "3-rejected-in-reprieve.json", 0)
}

fn lifecycle() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let main = dir.path().join("main.db");
    let main = main.to_str().unwrap();
    up_to_rejection(main)?;
    gate_step(main, "c4", at(2024, 3, 21), "4-rejected-expired.json", 2)?;

    let branch = dir.path().join("branch.db");
    let branch = branch.to_str().unwrap();
    up_to_rejection(branch)?;
    {
        let store = Store::open(branch).map_err(|e| e.to_string())?;
        let c = Coordinate::parse_canonical(COMMONS_TEXT).map_err(|e| e.to_string())?;
        let v = store.find_coordinate(&c).map_err(|e| e.to_string())?.ok_or("version not observed")?;
        store
            .blacklist(v.id, "string interpolation runs arbitrary lookups", "security", at(2024, 3, 7))
            .map_err(|e| e.to_string())?;
    }
    gate_step(branch, "c5", at(2024, 3, 7), "5-blacklisted.json", 2)?;
    Ok("5 golden decisions, exit codes 0 0 0 2 2".into())
}

// ----------------------------------------------------------------------
// 6: property suites
// ----------------------------------------------------------------------

fn properties() -> Outcome {
    use suites::{gate, ranges, reports, store, sync, versions};
    let checks: Vec<(&str, suites::Check)> = vec![
        ("version pool ranking", versions::pool_agreement),
        ("version total order", versions::total_order_laws),
        ("newest version", versions::newest_matches_oracle),
        ("match_range pool oracle", ranges::pool_oracle),
        ("evaluate determinism", gate::determinism),
        ("status monotonicity", gate::status_monotonicity),
        ("time monotonicity", gate::time_monotonicity),
        ("waiver soundness", gate::waiver_soundness),
        ("report recounts", reports::recount_oracles),
        ("transition matrix", store::transition_matrix),
        ("audit completeness", store::audit_completeness),
        ("observation idempotence", store::observation_idempotence),
        ("sync idempotence", sync::idempotence),
        ("link soundness", sync::linkage_soundness),
    ];
    let total = checks.len();
    let mut failed = Vec::new();
    for (name, check) in checks {
        match catch_unwind(check) {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                let first = e.lines().next().unwrap_or_default().to_string();
                failed.push(format!("{name} ({first})"));
            }
            Err(_) => failed.push(format!("{name} (panicked)")),
        }
    }
    if failed.is_empty() {
        Ok(format!("{total}/{total} suites, {} cases each", suites::CASES))
    } else {
        Err(format!("{}/{total} failed: {}", failed.len(), failed.join("; ")))
    }
}

// ----------------------------------------------------------------------
// 7: HTTP gate equals the library composition
// ----------------------------------------------------------------------

const POOL: &[(&str, &str, &[&str])] = &[
    ("org.apache.commons", "commons-lang3", &["3.9", "3.12.0", "3.14.0"]),
    ("com.google.guava", "guava", &["31.1-jre", "32.0.0-jre"]),
    ("org.slf4j", "slf4j-api", &["1.7.30", "2.0.9"]),
    ("com.acme.platform", "platform-auth", &["4.2.0"]),
    ("junit", "junit", &["4.12", "4.13.2"]),
];
const NPM: &[(&str, &[&str])] = &[("lodash", &["4.17.20", "4.17.21"]), ("express", &["4.18.2"]), ("acme-ui", &["1.0.0"])];
const PYPI: &[(&str, &[&str])] = &[("requests", &["2.31.0", "2.28.1"]), ("flask", &["2.3.3"])];

enum Payload {
    Manifests(Vec<ManifestFile>),
    Sbom(SbomSnapshot),
}

fn pom(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=4);
    let mut deps = String::new();
    for (g, a, vs) in POOL.choose_multiple(rng, n) {
        let v = vs.choose(rng).unwrap();
        let scope = if *a == "junit" { "\n      <scope>test</scope>" } else { "" };
        deps.push_str(&format!(
            "    <dependency>\n      <groupId>{g}</groupId>\n      <artifactId>{a}</artifactId>\n      <version>{v}</version>{scope}\n    </dependency>\n"
        ));
    }
    format!(
        "<project xmlns=\"http://maven.apache.org/POM/4.0.0\">\n  <modelVersion>4.0.0</modelVersion>\n  <groupId>com.acme</groupId>\n  <artifactId>svc</artifactId>\n  <version>1</version>\n  <dependencies>\n{deps}  </dependencies>\n</project>\n"
    )
}

fn package_json(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=NPM.len());
    let deps: serde_json::Map<String, serde_json::Value> = NPM
        .choose_multiple(rng, n)
        .map(|(name, vs)| {
            let prefix = ["", "^", "~"].choose(rng).unwrap();
            (name.to_string(), serde_json::Value::String(format!("{prefix}{}", vs.choose(rng).unwrap())))
        })
        .collect();
    serde_json::json!({"name": "web", "version": "1.0.0", "dependencies": deps}).to_string()
}

fn requirements(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for (name, vs) in PYPI {
        if rng.gen_bool(0.7) {
            out.push_str(&format!("{name}=={}\n", vs.choose(rng).unwrap()));
        }
    }
    out
}

fn payload(rng: &mut ChaCha8Rng, app: &str, commit: &str, now: DateTime<Utc>) -> Payload {
    if rng.gen_bool(0.25) {
        let entries: Vec<SbomEntry> = POOL
            .choose_multiple(rng, 3)
            .map(|(g, a, vs)| SbomEntry::new(Coordinate::new(Ecosystem::Maven, *g, *a, *vs.choose(rng).unwrap()).unwrap()))
            .collect();
        return Payload::Sbom(SbomSnapshot::new(app, commit, now - Duration::hours(1), entries));
    }
    let mut files = vec![ManifestFile::new("pom.xml", ManifestKind::MavenPom, pom(rng))];
    if rng.gen_bool(0.5) {
        files.push(ManifestFile::new("web/package.json", ManifestKind::NpmPackage, package_json(rng)));
    }
    if rng.gen_bool(0.4) {
        files.push(ManifestFile::new("tools/requirements.txt", ManifestKind::PythonRequirements, requirements(rng)));
    }
    if rng.gen_bool(0.15) {
        files.push(ManifestFile::new("broken/pom.xml", ManifestKind::MavenPom, "<project><dependencies>"));
    }
    Payload::Manifests(files)
}

fn request_body(app: &str, commit: &str, p: &Payload) -> String {
    let engine = base64::engine::general_purpose::STANDARD;
    match p {
        Payload::Sbom(s) => serde_json::json!({"application": app, "commit": commit, "sbom": s}).to_string(),
        Payload::Manifests(files) => {
            let manifests: Vec<serde_json::Value> = files
                .iter()
                .map(|f| {
                    serde_json::json!({
                        "path": f.path,
                        "kind": f.kind,
                        "content_base64": engine.encode(&f.content),
                    })
                })
                .collect();
            serde_json::json!({"application": app, "commit": commit, "manifests": manifests}).to_string()
        }
    }
}

/// One random review decision applied identically to both stores.
fn review(rng: &mut ChaCha8Rng, stores: [&Store; 2], now: DateTime<Utc>) -> Result<(), String> {
    let versions = stores[0].versions().map_err(|e| e.to_string())?;
    let Some(v) = versions.choose(rng) else { return Ok(()) };
    let next = match v.status {
        Status::NotReviewed => [Status::Approved, Status::Rejected],
        Status::Approved => [Status::Deprecated, Status::Rejected],
        Status::Deprecated => [Status::Approved, Status::Rejected],
        Status::Rejected => [Status::Approved, Status::Approved],
    };
    let status = *next.choose(rng).unwrap();
    let end_date = (status == Status::Deprecated).then(|| now + Duration::days(rng.gen_range(1..20)));
    let coordinate = stores[0].coordinate_of(v.id).map_err(|e| e.to_string())?;
    for s in stores {
        let id = s.find_coordinate(&coordinate).map_err(|e| e.to_string())?.ok_or("missing version")?.id;
        let change = StatusChange {
            version_id: id,
            status,
            justification: Some("board review".into()),
            end_date,
            actor: "board".into(),
        };
        s.set_status(&change, now).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn api_equivalence() -> Outcome {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let policy = PolicyConfig::default();
    let prefixes = vec!["com.acme.".to_string(), "acme-".to_string()];
    let mut now = at(2024, 6, 1);
    let clock = Clock::fixed(now);
    let mut state = AppState::new(Store::open_in_memory().unwrap(), policy.clone()).with_clock(clock.clone());
    state.internal_prefixes = prefixes.clone();
    let served = state.store.clone();
    let app = router(state);
    let direct = Store::open_in_memory().unwrap();
    let options = SbomOptions::with_internal_prefixes(prefixes.iter().cloned());

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut verdicts: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..20 {
        now += Duration::hours(rng.gen_range(1..96));
        clock.set(now);
        for _ in 0..rng.gen_range(0..=4) {
            review(&mut rng, [&served, &direct], now)?;
        }
        let name = *["web", "batch", "mobile-api"].choose(&mut rng).unwrap();
        let commit = format!("{:07x}", rng.gen_range(0..0x0fff_ffffu32));
        let p = payload(&mut rng, name, &commit, now);
        let body = request_body(name, &commit, &p);

        let response = rt.block_on(async {
            let req = Request::post("/v1/gate")
                .header("content-type", "application/json")
                .body(Body::from(body))
                .unwrap();
            let resp = app.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
            (status, bytes)
        });
        ensure(response.0 == StatusCode::OK, || format!("payload {i}: HTTP {}", response.0))?;
        let got: serde_json::Value = serde_json::from_slice(&response.1).map_err(|e| e.to_string())?;

        let sbom = match p {
            Payload::Sbom(s) => s,
            Payload::Manifests(files) => build_sbom(name, &commit, &files, &options, now).map_err(|e| e.to_string())?.snapshot,
        };
        let decision = gate_sbom(&direct, &sbom, &policy, now).map_err(|e| e.to_string())?;
        let want = serde_json::to_value(&decision).unwrap();
        ensure(got == want, || format!("payload {i}: API {got}\nlibrary {want}"))?;
        *verdicts.entry(decision.verdict.as_str().to_string()).or_default() += 1;
    }
    let digests = (served.state_digest(false), direct.state_digest(false));
    ensure(matches!(&digests, (Ok(a), Ok(b)) if a == b), || "store states diverged".into())?;
    Ok(format!("20 payloads identical, verdicts {verdicts:?}"))
}

fn main() {
    let criteria: [(&str, Criterion); 7] = [
        ("scan reproduces the direct-dependency table", scan_golden),
        ("XML parser vulnerability table", xml_table),
        ("JSON parser vulnerability table", json_table),
        ("portfolio stats shape", portfolio_stats),
        ("gate lifecycle goldens", lifecycle),
        ("property suites", properties),
        ("API gate equals library composition", api_equivalence),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
