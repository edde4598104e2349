//! Registry adapters: where the newest published version of a package comes
//! from.

use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::model::Ecosystem;
use crate::version::compare_versions;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("registry unavailable for {package}: {message}")]
    RegistryUnavailable { package: String, message: String },
}

impl RegistryError {
    fn new(package: impl Into<String>, message: impl Into<String>) -> Self {
        RegistryError::RegistryUnavailable {
            package: package.into(),
            message: message.into(),
        }
    }
}

/// Lists the published versions of a package, ascending and deduplicated.
/// A failure is an error, never an empty list.
pub trait RegistryAdapter: Send + Sync {
    fn handles(&self, ecosystem: Ecosystem) -> bool;
    fn list_versions(&self, ecosystem: Ecosystem, group: &str, name: &str) -> Result<Vec<String>, RegistryError>;
}

fn package_label(ecosystem: Ecosystem, group: &str, name: &str) -> String {
    format!("{ecosystem}:{group}:{name}")
}

/// Sorts ascending and drops duplicates (by ordering, so "1.0" and "1.0.0"
/// collapse to the first seen).
pub fn normalize_listing(mut versions: Vec<String>) -> Vec<String> {
    versions.retain(|v| !v.trim().is_empty());
    versions.sort_by(|a, b| compare_versions(a, b).then_with(|| a.cmp(b)));
    versions.dedup_by(|a, b| compare_versions(a, b).is_eq());
    versions
}

#[derive(Deserialize)]
struct FixtureListing {
    versions: Vec<String>,
}

/// Directory of `ecosystem_group_name.json` files holding
/// `{"versions": [...]}`. A `/` in group or name is written `%2F`.
#[derive(Debug, Clone)]
pub struct FixtureRegistry {
    dir: PathBuf,
}

impl FixtureRegistry {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureRegistry { dir: dir.into() }
    }

    pub fn file_name(ecosystem: Ecosystem, group: &str, name: &str) -> String {
        let esc = |s: &str| s.replace('/', "%2F");
        format!("{}_{}_{}.json", ecosystem.as_str(), esc(group), esc(name))
    }
}

impl RegistryAdapter for FixtureRegistry {
    fn handles(&self, _ecosystem: Ecosystem) -> bool {
        true
    }

    fn list_versions(&self, ecosystem: Ecosystem, group: &str, name: &str) -> Result<Vec<String>, RegistryError> {
        let label = package_label(ecosystem, group, name);
        let path = self.dir.join(Self::file_name(ecosystem, group, name));
        let raw = std::fs::read(&path).map_err(|e| RegistryError::new(&label, format!("{}: {e}", path.display())))?;
        let listing: FixtureListing =
            serde_json::from_slice(&raw).map_err(|e| RegistryError::new(&label, format!("{}: {e}", path.display())))?;
        let versions = normalize_listing(listing.versions);
        if versions.is_empty() {
            return Err(RegistryError::new(label, "no versions listed"));
        }
        Ok(versions)
    }
}

fn http_client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .user_agent(concat!("depgate/", env!("CARGO_PKG_VERSION")))
        .build()
        .expect("HTTP client builds with static settings")
}

/// Maven repository layout: `{base}/{group as path}/{artifact}/maven-metadata.xml`.
#[derive(Debug, Clone)]
pub struct MavenCentralRegistry {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl MavenCentralRegistry {
    pub const DEFAULT_BASE: &'static str = "https://repo1.maven.org/maven2";

    pub fn new(base_url: impl Into<String>) -> Self {
        MavenCentralRegistry {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client: http_client(),
        }
    }
}

/// Versions listed in a `maven-metadata.xml` document.
pub fn parse_maven_metadata(xml: &str) -> Result<Vec<String>, String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| e.to_string())?;
    Ok(doc
        .descendants()
        .filter(|n| n.has_tag_name("version") && n.parent().is_some_and(|p| p.has_tag_name("versions")))
        .filter_map(|n| n.text())
        .map(|t| t.trim().to_string())
        .collect())
}

impl RegistryAdapter for MavenCentralRegistry {
    fn handles(&self, ecosystem: Ecosystem) -> bool {
        ecosystem == Ecosystem::Maven
    }

    fn list_versions(&self, ecosystem: Ecosystem, group: &str, name: &str) -> Result<Vec<String>, RegistryError> {
        let label = package_label(ecosystem, group, name);
        let url = format!("{}/{}/{}/maven-metadata.xml", self.base_url, group.replace('.', "/"), name);
        let body = self
            .client
            .get(&url)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.text())
            .map_err(|e| RegistryError::new(&label, e.to_string()))?;
        let versions = normalize_listing(parse_maven_metadata(&body).map_err(|e| RegistryError::new(&label, e))?);
        if versions.is_empty() {
            return Err(RegistryError::new(label, "metadata lists no versions"));
        }
        Ok(versions)
    }
}

/// npm registry document: `{base}/{name}` with a `versions` object.
#[derive(Debug, Clone)]
pub struct NpmRegistry {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl NpmRegistry {
    pub const DEFAULT_BASE: &'static str = "https://registry.npmjs.org";

    pub fn new(base_url: impl Into<String>) -> Self {
        NpmRegistry {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client: http_client(),
        }
    }
}

/// Version keys of an npm packument.
pub fn parse_npm_packument(body: &serde_json::Value) -> Result<Vec<String>, String> {
    let versions = body
        .get("versions")
        .and_then(serde_json::Value::as_object)
        .ok_or("packument has no `versions` object")?;
    Ok(versions.keys().cloned().collect())
}

impl RegistryAdapter for NpmRegistry {
    fn handles(&self, ecosystem: Ecosystem) -> bool {
        ecosystem == Ecosystem::Npm
    }

    fn list_versions(&self, ecosystem: Ecosystem, group: &str, name: &str) -> Result<Vec<String>, RegistryError> {
        let label = package_label(ecosystem, group, name);
        let url = format!("{}/{}", self.base_url, name.replace('/', "%2F"));
        let body: serde_json::Value = self
            .client
            .get(&url)
            .header("Accept", "application/vnd.npm.install-v1+json")
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| RegistryError::new(&label, e.to_string()))?;
        let versions = normalize_listing(parse_npm_packument(&body).map_err(|e| RegistryError::new(&label, e))?);
        if versions.is_empty() {
            return Err(RegistryError::new(label, "packument lists no versions"));
        }
        Ok(versions)
    }
}
