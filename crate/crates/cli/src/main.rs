//! `depgate`: scan manifests into an SBOM, gate a build, run a sync, print
//! reports, or serve the HTTP API.
//!
//! Exit codes: 0 success, 1 operational error, 2 policy failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use base64::Engine;
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use depgate_core::gate::{decide_exit_code, GateDecision, PolicyConfig};
use depgate_core::manifest::{build_sbom, collect_manifests, ManifestFile, SbomBuild, SbomOptions, SbomSnapshot};
use depgate_core::pipeline::gate_sbom;
use depgate_core::reports;
use depgate_core::store::Store;
use depgate_core::sync::{load_feed_directory, parse_published, run_sync, AliasMap, RegistryAdapter, RegistrySettings, SyncInputs};

const DEFAULT_DB: &str = "depgate.db";

#[derive(Debug, Parser)]
#[command(name = "depgate", version, about = "Direct-dependency governance: inventory, build gate, sync, reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the direct-dependency SBOM of a source tree.
    Scan(ScanArgs),
    /// Evaluate a build against the dependency reference database.
    Gate(GateArgs),
    /// Refresh advisories and latest versions.
    Sync(SyncArgs),
    /// Print a report.
    Report(ReportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ScanArgs {
    path: PathBuf,
    /// Application name; defaults to the directory name.
    #[arg(long)]
    app: Option<String>,
    #[arg(long, default_value = "unknown")]
    commit: String,
    /// Write the SBOM here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Group (npm/PyPI: name) prefix marking internal libraries; repeatable.
    #[arg(long = "internal-prefix")]
    internal_prefix: Vec<String>,
    /// Capture time, RFC 3339 or YYYY-MM-DD.
    #[arg(long, value_parser = parse_now)]
    now: Option<DateTime<Utc>>,
}

#[derive(Debug, Args)]
struct GateArgs {
    /// Source tree to scan; omit when --sbom is given.
    #[arg(conflicts_with = "sbom", required_unless_present = "sbom")]
    path: Option<PathBuf>,
    #[arg(long)]
    sbom: Option<PathBuf>,
    #[arg(long)]
    app: Option<String>,
    #[arg(long, default_value = "unknown")]
    commit: String,
    /// Database file; DEPGATE_DB takes precedence.
    #[arg(long, conflicts_with = "server")]
    db: Option<PathBuf>,
    /// Base URL of a running depgate service.
    #[arg(long)]
    server: Option<String>,
    /// Bearer token for --server; defaults to DEPGATE_API_TOKEN.
    #[arg(long)]
    token: Option<String>,
    /// TOML policy file.
    #[arg(long, conflicts_with = "server")]
    policy: Option<PathBuf>,
    #[arg(long = "warn-as-error")]
    warn_as_error: bool,
    #[arg(long, value_parser = parse_now)]
    now: Option<DateTime<Utc>>,
    #[arg(long = "internal-prefix")]
    internal_prefix: Vec<String>,
}

#[derive(Debug, Args)]
struct SyncArgs {
    #[arg(long)]
    db: Option<PathBuf>,
    /// Advisory feed directory (*.jsonl, *.nvd.json, aliases.json).
    #[arg(long)]
    feeds: Option<PathBuf>,
    /// TOML registry settings (maven, npm, fixture_dir).
    #[arg(long, conflicts_with = "fixture_registries")]
    registries: Option<PathBuf>,
    /// Directory-backed registry listings.
    #[arg(long = "fixture-registries")]
    fixture_registries: Option<PathBuf>,
    #[arg(long, value_parser = parse_now)]
    now: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    Categories,
    Vulns,
    Stats,
    Duplication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
struct ReportArgs {
    kind: ReportKind,
    #[arg(long)]
    db: Option<PathBuf>,
    /// Category for `vulns`.
    #[arg(long)]
    category: Option<String>,
    /// Window in days for `stats`.
    #[arg(long, default_value_t = 30)]
    window: u32,
    /// Distinct-library threshold for `duplication`.
    #[arg(long, default_value_t = 5)]
    threshold: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, value_parser = parse_now)]
    now: Option<DateTime<Utc>>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_now(s: &str) -> Result<DateTime<Utc>, String> {
    parse_published(s)
}

/// An operational failure; always exit 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("DEPGATE_LOG").unwrap_or_else(|_| "warn".into()))
        .try_init();

    let result = match cli.command {
        Command::Scan(a) => scan(a),
        Command::Gate(a) => gate(a),
        Command::Sync(a) => sync(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("depgate: {msg}");
            ExitCode::from(1)
        }
    }
}

/// DEPGATE_DB beats --db beats the default.
fn resolve_db(flag: Option<PathBuf>) -> PathBuf {
    match std::env::var_os("DEPGATE_DB").filter(|v| !v.is_empty()) {
        Some(v) => PathBuf::from(v),
        None => flag.unwrap_or_else(|| PathBuf::from(DEFAULT_DB)),
    }
}

fn emit(payload: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(payload.as_bytes())?;
    if !payload.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("payload serializes")
}

fn app_name(flag: Option<String>, path: &Path) -> Result<String, Failure> {
    if let Some(a) = flag {
        return Ok(a);
    }
    let canonical = path.canonicalize().map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    canonical
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Failure(format!("cannot derive an application name from {}; pass --app", path.display())))
}

fn scan_tree(path: &Path, app: &str, commit: &str, prefixes: &[String], now: DateTime<Utc>) -> Result<SbomBuild, Failure> {
    let meta = std::fs::metadata(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    let manifests: Vec<ManifestFile> = if meta.is_dir() {
        collect_manifests(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?
    } else {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let kind = depgate_core::manifest::ManifestKind::from_file_name(&name)
            .ok_or_else(|| Failure(format!("{}: not a recognized manifest", path.display())))?;
        vec![ManifestFile::new(name, kind, std::fs::read(path)?)]
    };
    let options = SbomOptions::with_internal_prefixes(prefixes.iter().cloned());
    let build = build_sbom(app, commit, &manifests, &options, now)?;
    for w in &build.warnings {
        eprintln!("warning: {w}");
    }
    if build.all_malformed() {
        return Err(Failure(format!("no manifest could be parsed: {}", build.malformed.join(", "))));
    }
    Ok(build)
}

fn scan(a: ScanArgs) -> Outcome {
    let now = a.now.unwrap_or_else(Utc::now);
    let app = app_name(a.app, &a.path)?;
    let build = scan_tree(&a.path, &app, &a.commit, &a.internal_prefix, now)?;
    let json = pretty(&build.snapshot) + "\n";
    match a.out {
        Some(out) => std::fs::write(&out, json).map_err(|e| Failure(format!("{}: {e}", out.display())))?,
        None => emit(&json)?,
    }
    Ok(0)
}

fn read_sbom(path: &Path) -> Result<SbomSnapshot, Failure> {
    let raw = std::fs::read(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    let sbom: SbomSnapshot =
        serde_json::from_slice(&raw).map_err(|e| Failure(format!("{}: not an SBOM: {e}", path.display())))?;
    for c in sbom.coordinates() {
        c.validate()?;
    }
    Ok(SbomSnapshot::new(sbom.application, sbom.commit, sbom.captured_at, sbom.dependencies))
}

fn load_policy(path: Option<&Path>) -> Result<PolicyConfig, Failure> {
    match path {
        Some(p) => Ok(depgate_api::load_policy(p)?),
        None => Ok(PolicyConfig::default()),
    }
}

fn gate(a: GateArgs) -> Outcome {
    let now = a.now.unwrap_or_else(Utc::now);
    let decision = match &a.server {
        Some(server) => gate_remote(&a, server, now)?,
        None => {
            let sbom = match (&a.sbom, &a.path) {
                (Some(file), _) => {
                    let mut s = read_sbom(file)?;
                    if let Some(app) = &a.app {
                        s.application = app.clone();
                    }
                    s
                }
                (None, Some(path)) => {
                    let app = app_name(a.app.clone(), path)?;
                    scan_tree(path, &app, &a.commit, &a.internal_prefix, now)?.snapshot
                }
                (None, None) => return Err(Failure("give a path or --sbom".into())),
            };
            let policy = load_policy(a.policy.as_deref())?;
            let store = Store::open(resolve_db(a.db.clone()))?;
            gate_sbom(&store, &sbom, &policy, now)?
        }
    };
    emit(&decision.to_json())?;
    Ok(decide_exit_code(&decision, a.warn_as_error) as u8)
}

/// Sends the request to a running service; the server's clock and policy
/// apply there.
fn gate_remote(a: &GateArgs, server: &str, now: DateTime<Utc>) -> Result<GateDecision, Failure> {
    let body = match (&a.sbom, &a.path) {
        (Some(file), _) => {
            let mut s = read_sbom(file)?;
            if let Some(app) = &a.app {
                s.application = app.clone();
            }
            serde_json::json!({ "application": s.application, "commit": s.commit, "sbom": s })
        }
        (None, Some(path)) => {
            let app = app_name(a.app.clone(), path)?;
            let files = collect_manifests(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            let engine = base64::engine::general_purpose::STANDARD;
            let manifests: Vec<serde_json::Value> = files
                .iter()
                .map(|f| {
                    serde_json::json!({
                        "path": f.path,
                        "kind": f.kind.as_str(),
                        "content_base64": engine.encode(&f.content),
                    })
                })
                .collect();
            serde_json::json!({ "application": app, "commit": a.commit, "manifests": manifests })
        }
        (None, None) => return Err(Failure("give a path or --sbom".into())),
    };
    if a.now.is_some() {
        eprintln!("warning: --now {now} is ignored with --server; the service clock applies");
    }
    let token = a.token.clone().or_else(|| std::env::var("DEPGATE_API_TOKEN").ok()).filter(|t| !t.is_empty());
    let url = format!("{}/v1/gate", server.trim_end_matches('/'));
    let mut req = reqwest::blocking::Client::new().post(&url).json(&body);
    if let Some(t) = token {
        req = req.bearer_auth(t);
    }
    let resp = req.send()?;
    let status = resp.status();
    let text = resp.text()?;
    if !status.is_success() {
        return Err(Failure(format!("{url}: HTTP {status}: {text}")));
    }
    Ok(serde_json::from_str(&text)?)
}

fn sync(a: SyncArgs) -> Outcome {
    let now = a.now.unwrap_or_else(Utc::now);
    let store = Store::open(resolve_db(a.db))?;
    let (feeds, aliases) = match &a.feeds {
        Some(dir) => load_feed_directory(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?,
        None => (Vec::new(), AliasMap::default()),
    };
    let settings = match (&a.registries, &a.fixture_registries) {
        (Some(file), _) => {
            let text = std::fs::read_to_string(file).map_err(|e| Failure(format!("{}: {e}", file.display())))?;
            toml::from_str::<RegistrySettings>(&text).map_err(|e| Failure(format!("{}: {e}", file.display())))?
        }
        (None, Some(dir)) => RegistrySettings {
            fixture_dir: Some(dir.clone()),
            ..Default::default()
        },
        (None, None) => RegistrySettings::default(),
    };
    let adapters = settings.adapters();
    let registries: Vec<&dyn RegistryAdapter> = adapters.iter().map(|a| a.as_ref()).collect();
    let inputs = SyncInputs {
        registries: &registries,
        feeds: &feeds,
        aliases: &aliases,
    };
    let holder = format!("cli:{}", std::process::id());
    let report = run_sync(&store, &inputs, now, &holder)?;
    for e in &report.registry_errors {
        eprintln!("registry: {}: {}", e.dependency, e.message);
    }
    for e in &report.feed_errors {
        eprintln!("feed: {e}");
    }
    emit(&pretty(&report))?;
    Ok(if report.is_total_failure(feeds.len()) { 1 } else { 0 })
}

fn report(a: ReportArgs) -> Outcome {
    let store = Store::open(resolve_db(a.db))?;
    let table = a.format == Format::Table;
    let out = match a.kind {
        ReportKind::Categories => {
            let rows = reports::category_breakdown(&store)?;
            if table { reports::breakdown_table(&rows) } else { pretty(&rows) }
        }
        ReportKind::Vulns => {
            let category = a.category.ok_or_else(|| Failure("vulns needs --category".into()))?;
            let rows = reports::vuln_summary(&store, &category)?;
            if table { reports::vuln_summary_table(&rows) } else { pretty(&rows) }
        }
        ReportKind::Stats => {
            let now = a.now.unwrap_or_else(Utc::now);
            let stats = reports::ecosystem_stats(&store, a.window, now)?;
            if table { reports::stats_table(&stats) } else { pretty(&stats) }
        }
        ReportKind::Duplication => {
            let cats = reports::duplication_report(&store, a.threshold)?;
            if table { reports::duplication_table(&cats) } else { pretty(&cats) }
        }
    };
    if !out.is_empty() {
        emit(&out)?;
    }
    Ok(0)
}

fn serve(a: ServeArgs) -> Outcome {
    let cfg = depgate_api::load_config(a.config.as_deref(), |k| std::env::var(k).ok())?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(depgate_api::serve(cfg))?;
    Ok(0)
}
