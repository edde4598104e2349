use std::collections::{BTreeSet, HashMap};

use roxmltree::{Document, Node};

use super::{DeclaredDependency, DependencyFlag, ManifestError, ManifestWarning, ParsedManifest};
use crate::model::{Coordinate, Ecosystem};

/// Version placeholder for dependencies whose version is inherited.
pub const MANAGED_VERSION: &str = "(managed)";

const MAX_PROPERTY_DEPTH: usize = 16;

/// Direct dependencies of a POM: the `<dependency>` children of the
/// project's own top-level `<dependencies>`. `<dependencyManagement>`,
/// profiles, plugins and parent POMs are not consulted.
pub fn parse_maven_pom(content: &[u8]) -> Result<ParsedManifest, ManifestError> {
    let text = std::str::from_utf8(content).map_err(|e| ManifestError::MalformedManifest(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| ManifestError::MalformedManifest(format!("invalid XML: {e}")))?;
    let project = doc.root_element();
    if project.tag_name().name() != "project" {
        return Err(ManifestError::MalformedManifest(format!(
            "root element is <{}>, expected <project>",
            project.tag_name().name()
        )));
    }

    let properties = collect_properties(project);
    let mut parsed = ParsedManifest::default();

    let Some(deps) = child(project, "dependencies") else {
        return Ok(parsed);
    };
    for (index, dep) in deps.children().filter(|n| n.has_tag_name_local("dependency")).enumerate() {
        let ordinal = index + 1;
        let mut flags = BTreeSet::new();
        let mut field = |name: &str| -> Option<String> {
            let raw = child_text(dep, name)?;
            let (value, unresolved) = resolve(&raw, &properties);
            if !unresolved.is_empty() {
                flags.insert(DependencyFlag::UnresolvedProperty);
                parsed.warnings.push(ManifestWarning::new(format!(
                    "dependency #{ordinal}: unresolved property {} in <{name}>",
                    unresolved.join(", ")
                )));
            }
            Some(value)
        };

        let group = field("groupId");
        let artifact = field("artifactId");
        let version = field("version");
        let scope = field("scope");
        let packaging = field("type");

        let (Some(group), Some(artifact)) = (group, artifact) else {
            parsed
                .warnings
                .push(ManifestWarning::new(format!("dependency #{ordinal}: missing groupId or artifactId; skipped")));
            continue;
        };
        let version = match version {
            Some(v) => v,
            None => {
                flags.insert(DependencyFlag::ManagedVersion);
                MANAGED_VERSION.to_string()
            }
        };

        match Coordinate::new(Ecosystem::Maven, group, artifact, version) {
            Ok(c) => parsed.dependencies.push(DeclaredDependency {
                coordinate: c.with_scope(scope),
                spec: None,
                packaging,
                flags,
            }),
            Err(e) => parsed
                .warnings
                .push(ManifestWarning::new(format!("dependency #{ordinal}: {e}; skipped"))),
        }
    }
    Ok(parsed)
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|n| n.has_tag_name_local(name))
}

fn child_text(node: Node<'_, '_>, name: &str) -> Option<String> {
    let text: String = child(node, name)?
        .descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();
    let text = text.trim();
    (!text.is_empty()).then(|| text.to_string())
}

/// `<properties>` plus the in-file `project.*` / `project.parent.*` values.
fn collect_properties(project: Node<'_, '_>) -> HashMap<String, String> {
    let mut props = HashMap::new();
    if let Some(block) = child(project, "properties") {
        for p in block.children().filter(Node::is_element) {
            let value: String = p.children().filter_map(|n| n.text()).collect();
            props.insert(p.tag_name().name().to_string(), value.trim().to_string());
        }
    }
    let parent = child(project, "parent");
    for key in ["groupId", "artifactId", "version"] {
        if let Some(v) = parent.and_then(|p| child_text(p, key)) {
            props.insert(format!("project.parent.{key}"), v);
        }
        let own = child_text(project, key).or_else(|| {
            // groupId and version default to the parent's
            (key != "artifactId").then(|| parent.and_then(|p| child_text(p, key))).flatten()
        });
        if let Some(v) = own {
            props.insert(format!("project.{key}"), v);
        }
    }
    props
}

/// Substitutes `${name}` references. Returns the substituted string and the
/// names that could not be resolved (left verbatim).
fn resolve(raw: &str, props: &HashMap<String, String>) -> (String, Vec<String>) {
    let mut value = raw.to_string();
    let mut unresolved = Vec::new();
    for _ in 0..MAX_PROPERTY_DEPTH {
        let mut out = String::with_capacity(value.len());
        let mut rest = value.as_str();
        let mut changed = false;
        while let Some(start) = rest.find("${") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let Some(end) = after.find('}') else {
                out.push_str(&rest[start..]);
                rest = "";
                break;
            };
            let name = &after[..end];
            match props.get(name) {
                Some(v) => {
                    out.push_str(v);
                    changed = true;
                }
                None => {
                    if !unresolved.iter().any(|u| u == name) {
                        unresolved.push(name.to_string());
                    }
                    out.push_str(&rest[start..start + 2 + end + 1]);
                }
            }
            rest = &after[end + 1..];
        }
        out.push_str(rest);
        value = out;
        if !changed {
            return (value, unresolved);
        }
        unresolved.clear();
    }
    // still expanding after the depth limit: a reference cycle
    let mut leftover = Vec::new();
    let mut rest = value.as_str();
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else { break };
        leftover.push(after[..end].to_string());
        rest = &after[end + 1..];
    }
    (value, leftover)
}
