use std::collections::BTreeSet;

use serde_json::Value;

use super::{DeclaredDependency, DependencyFlag, ManifestError, ManifestWarning, ParsedManifest};
use crate::model::{Coordinate, Ecosystem, DEFAULT_GROUP};
use crate::range::parse_npm_spec;

/// `dependencies` and `devDependencies` of a `package.json`. The coordinate
/// version is the spec's floor; the verbatim spec is kept alongside when it
/// differs.
pub fn parse_npm_manifest(content: &[u8]) -> Result<ParsedManifest, ManifestError> {
    let value: Value =
        serde_json::from_slice(content).map_err(|e| ManifestError::MalformedManifest(format!("invalid JSON: {e}")))?;
    let Value::Object(root) = value else {
        return Err(ManifestError::MalformedManifest("package.json is not a JSON object".to_string()));
    };

    let mut parsed = ParsedManifest::default();
    for (section, scope) in [("dependencies", None), ("devDependencies", Some("dev"))] {
        let Some(deps) = root.get(section) else { continue };
        let Value::Object(deps) = deps else {
            return Err(ManifestError::MalformedManifest(format!("`{section}` is not an object")));
        };
        for (name, spec) in deps {
            let Value::String(spec) = spec else {
                return Err(ManifestError::MalformedManifest(format!("`{section}.{name}` is not a string")));
            };
            match declared(name, spec, scope) {
                Ok(dep) => parsed.dependencies.push(dep),
                Err(msg) => parsed.warnings.push(ManifestWarning::new(format!("{section}.{name}: {msg}; skipped"))),
            }
        }
    }
    Ok(parsed)
}

pub(super) fn version_and_spec(spec: &str, floor: Option<String>) -> (String, Option<String>, BTreeSet<DependencyFlag>) {
    let mut flags = BTreeSet::new();
    let compact: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let version = match floor {
        Some(f) => f,
        None => {
            flags.insert(DependencyFlag::UnresolvedRange);
            if compact.is_empty() {
                "*".to_string()
            } else {
                compact
            }
        }
    };
    let spec = (spec != version).then(|| spec.to_string());
    (version, spec, flags)
}

fn declared(name: &str, spec: &str, scope: Option<&str>) -> Result<DeclaredDependency, String> {
    let floor = parse_npm_spec(spec).and_then(|r| r.floor());
    let (version, spec, flags) = version_and_spec(spec, floor);
    let coordinate = Coordinate::new(Ecosystem::Npm, DEFAULT_GROUP, name, version).map_err(|e| e.to_string())?;
    Ok(DeclaredDependency {
        coordinate: coordinate.with_scope(scope.map(str::to_string)),
        spec,
        packaging: None,
        flags,
    })
}
