//! Build-type detection and direct-dependency extraction from build
//! configuration files.

mod maven;
mod npm;
mod python;
mod sbom;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Coordinate;

pub use maven::parse_maven_pom;
pub use npm::parse_npm_manifest;
pub use python::parse_python_requirements;
pub use sbom::{build_sbom, SbomBuild, SbomEntry, SbomError, SbomOptions, SbomSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestKind {
    MavenPom,
    NpmPackage,
    PythonRequirements,
}

impl ManifestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MavenPom => "maven_pom",
            Self::NpmPackage => "npm_package",
            Self::PythonRequirements => "python_requirements",
        }
    }

    /// Kind by file name alone.
    pub fn from_file_name(file_name: &str) -> Option<Self> {
        match file_name {
            "pom.xml" => Some(Self::MavenPom),
            "package.json" => Some(Self::NpmPackage),
            "requirements.txt" => Some(Self::PythonRequirements),
            n if n.starts_with("requirements-") && n.ends_with(".txt") => Some(Self::PythonRequirements),
            _ => None,
        }
    }
}

impl fmt::Display for ManifestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManifestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maven_pom" => Ok(Self::MavenPom),
            "npm_package" => Ok(Self::NpmPackage),
            "python_requirements" => Ok(Self::PythonRequirements),
            other => Err(format!("unknown manifest kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestFile {
    pub path: String,
    pub kind: ManifestKind,
    pub content: Vec<u8>,
}

impl ManifestFile {
    pub fn new(path: impl Into<String>, kind: ManifestKind, content: impl Into<Vec<u8>>) -> Self {
        ManifestFile {
            path: path.into(),
            kind,
            content: content.into(),
        }
    }
}

/// Annotations attached to a parsed dependency that route it to manual
/// review instead of silently dropping it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyFlag {
    /// A `${...}` reference with no definition in the same file.
    UnresolvedProperty,
    /// No `<version>`; it would come from a parent or dependencyManagement.
    ManagedVersion,
    /// A range spec with no computable lower bound.
    UnresolvedRange,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
}

/// A non-fatal problem found while parsing one manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestWarning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

impl ManifestWarning {
    pub(crate) fn new(message: impl Into<String>) -> Self {
        ManifestWarning {
            path: None,
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_line(line: usize, message: impl Into<String>) -> Self {
        ManifestWarning {
            path: None,
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for ManifestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.path, self.line) {
            (Some(p), Some(l)) => write!(f, "{p}:{l}: {}", self.message),
            (Some(p), None) => write!(f, "{p}: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

/// One dependency as declared, before SBOM-level dedupe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclaredDependency {
    pub coordinate: Coordinate,
    /// The manifest's version spec when it differs from `coordinate.version`.
    pub spec: Option<String>,
    /// Maven `<type>`; not part of identity.
    pub packaging: Option<String>,
    pub flags: BTreeSet<DependencyFlag>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedManifest {
    pub dependencies: Vec<DeclaredDependency>,
    pub warnings: Vec<ManifestWarning>,
}

/// Kinds and paths of every build configuration file in a repository tree.
///
/// Paths under `node_modules/` are installed packages, not the repository's
/// own manifests, and are skipped.
pub fn detect_build_types<S: AsRef<str>>(file_tree: &[S]) -> BTreeSet<(ManifestKind, String)> {
    file_tree
        .iter()
        .map(AsRef::as_ref)
        .filter(|path| !path.split('/').any(|c| c == "node_modules"))
        .filter_map(|path| {
            let file_name = path.rsplit('/').next().unwrap_or(path);
            ManifestKind::from_file_name(file_name).map(|k| (k, path.to_string()))
        })
        .collect()
}

/// Reads every manifest under `root`, paths relative to it with `/`
/// separators. Hidden directories and `node_modules` are not entered.
pub fn collect_manifests(root: &Path) -> std::io::Result<Vec<ManifestFile>> {
    fn walk(dir: &Path, prefix: &str, out: &mut Vec<String>) -> std::io::Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let name = entry.file_name().to_string_lossy().into_owned();
            let rel = if prefix.is_empty() { name.clone() } else { format!("{prefix}/{name}") };
            let ty = entry.file_type()?;
            if ty.is_dir() {
                if !name.starts_with('.') && name != "node_modules" {
                    walk(&entry.path(), &rel, out)?;
                }
            } else {
                out.push(rel);
            }
        }
        Ok(())
    }

    let mut files = Vec::new();
    walk(root, "", &mut files)?;
    detect_build_types(&files)
        .into_iter()
        .map(|(kind, rel)| Ok(ManifestFile::new(rel.clone(), kind, std::fs::read(root.join(&rel))?)))
        .collect()
}

/// Dispatches on `kind`.
pub fn parse_manifest(kind: ManifestKind, content: &[u8]) -> Result<ParsedManifest, ManifestError> {
    match kind {
        ManifestKind::MavenPom => parse_maven_pom(content),
        ManifestKind::NpmPackage => parse_npm_manifest(content),
        ManifestKind::PythonRequirements => parse_python_requirements(content),
    }
}
