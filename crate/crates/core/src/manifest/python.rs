use super::npm::version_and_spec;
use super::{DeclaredDependency, ManifestError, ManifestWarning, ParsedManifest};
use crate::model::{Coordinate, Ecosystem, DEFAULT_GROUP};
use crate::range::parse_python_spec;

/// Requirements-file lines. Comments, blank lines and pip options (`-r`,
/// `-e`, `--index-url`) are skipped; environment markers are ignored.
/// Lines without a parseable project name become warnings.
pub fn parse_python_requirements(content: &[u8]) -> Result<ParsedManifest, ManifestError> {
    let text = std::str::from_utf8(content).map_err(|e| ManifestError::MalformedManifest(format!("not UTF-8: {e}")))?;
    let mut parsed = ParsedManifest::default();

    let mut logical = String::new();
    let mut start_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        if logical.is_empty() {
            start_line = idx + 1;
        }
        // backslash continuation
        if let Some(head) = raw.strip_suffix('\\') {
            logical.push_str(head);
            continue;
        }
        logical.push_str(raw);
        let line = std::mem::take(&mut logical);
        parse_line(&line, start_line, &mut parsed);
    }
    if !logical.is_empty() {
        parse_line(&logical, start_line, &mut parsed);
    }
    Ok(parsed)
}

fn parse_line(line: &str, line_no: usize, parsed: &mut ParsedManifest) {
    let line = match line.find(" #").or_else(|| line.starts_with('#').then_some(0)) {
        Some(i) => &line[..i],
        None => line,
    };
    let line = line.split(';').next().unwrap_or("").trim();
    if line.is_empty() || line.starts_with('-') {
        return;
    }

    let name_end = line
        .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
        .unwrap_or(line.len());
    let name = &line[..name_end];
    if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_alphanumeric()) {
        parsed
            .warnings
            .push(ManifestWarning::at_line(line_no, format!("no requirement name in `{line}`; skipped")));
        return;
    }

    let mut rest = line[name_end..].trim_start();
    if let Some(after) = rest.strip_prefix('[') {
        let Some(close) = after.find(']') else {
            parsed
                .warnings
                .push(ManifestWarning::at_line(line_no, format!("unterminated extras in `{line}`; skipped")));
            return;
        };
        rest = after[close + 1..].trim_start();
    }
    let spec: String = rest.chars().filter(|c| !c.is_whitespace()).collect();

    let pinned = spec
        .strip_prefix("==")
        .filter(|v| !v.is_empty() && !v.contains([',', '*']) && !v.starts_with('='));
    let (version, spec, flags) = match pinned {
        Some(v) => (v.to_string(), None, Default::default()),
        None if spec.starts_with('@') => version_and_spec(&spec, None),
        None => {
            let floor = parse_python_spec(&spec).and_then(|r| r.floor());
            version_and_spec(&spec, floor)
        }
    };

    match Coordinate::new(Ecosystem::Pypi, DEFAULT_GROUP, normalize_name(name), version) {
        Ok(coordinate) => parsed.dependencies.push(DeclaredDependency {
            coordinate,
            spec,
            packaging: None,
            flags,
        }),
        Err(e) => parsed
            .warnings
            .push(ManifestWarning::at_line(line_no, format!("{e}; skipped"))),
    }
}

/// PEP 503 name normalization.
fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_sep = false;
    for c in name.chars() {
        if matches!(c, '-' | '_' | '.') {
            if !last_sep {
                out.push('-');
            }
            last_sep = true;
        } else {
            out.push(c.to_ascii_lowercase());
            last_sep = false;
        }
    }
    out
}
