//! Conjunctive version constraints and conversion of manifest range specs
//! (npm, PEP 440 style) into them.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::version::compare_versions;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RangeError {
    #[error("unknown comparator `{0}`")]
    UnknownComparator(String),
    #[error("range has no constraints")]
    Empty,
    #[error("empty version in constraint")]
    EmptyVersion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [Self::Lt, Self::Le, Self::Gt, Self::Ge, Self::Eq, Self::Ne];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
            Self::Eq => "==",
            Self::Ne => "!=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Self::Lt => ord == Ordering::Less,
            Self::Le => ord != Ordering::Greater,
            Self::Gt => ord == Ordering::Greater,
            Self::Ge => ord != Ordering::Less,
            Self::Eq => ord == Ordering::Equal,
            Self::Ne => ord != Ordering::Equal,
        }
    }
}

impl FromStr for Comparator {
    type Err = RangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| RangeError::UnknownComparator(s.to_string()))
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub op: Comparator,
    pub version: String,
}

impl Constraint {
    pub fn new(op: Comparator, version: impl Into<String>) -> Self {
        Constraint { op, version: version.into() }
    }

    pub fn holds(&self, version: &str) -> bool {
        self.op.holds(compare_versions(version, &self.version))
    }
}

/// All constraints must hold. A contradictory range is valid and matches
/// nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Constraint>", into = "Vec<Constraint>")]
pub struct VersionRange {
    constraints: Vec<Constraint>,
}

impl VersionRange {
    pub fn new(constraints: Vec<Constraint>) -> Result<Self, RangeError> {
        if constraints.is_empty() {
            return Err(RangeError::Empty);
        }
        if constraints.iter().any(|c| c.version.is_empty()) {
            return Err(RangeError::EmptyVersion);
        }
        Ok(VersionRange { constraints })
    }

    pub fn exact(version: impl Into<String>) -> Self {
        VersionRange {
            constraints: vec![Constraint::new(Comparator::Eq, version)],
        }
    }

    /// Matches every version at or above the lowest normalizable version.
    pub fn any() -> Self {
        VersionRange {
            constraints: vec![Constraint::new(Comparator::Ge, "0")],
        }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn matches(&self, version: &str) -> bool {
        match_range(version, self)
    }

    /// The tightest lower bound of the range, if it has one: the greatest
    /// version named by a `>=`, `>` or `==` constraint.
    pub fn lower_bound(&self) -> Option<&str> {
        self.constraints
            .iter()
            .filter(|c| matches!(c.op, Comparator::Ge | Comparator::Gt | Comparator::Eq))
            .map(|c| c.version.as_str())
            .max_by(|a, b| compare_versions(a, b))
    }
}

impl TryFrom<Vec<Constraint>> for VersionRange {
    type Error = RangeError;

    fn try_from(value: Vec<Constraint>) -> Result<Self, Self::Error> {
        VersionRange::new(value)
    }
}

impl From<VersionRange> for Vec<Constraint> {
    fn from(value: VersionRange) -> Self {
        value.constraints
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.constraints.iter().map(|c| format!("{}{}", c.op, c.version)).collect();
        f.write_str(&parts.join(","))
    }
}

/// True iff every constraint holds under [`compare_versions`].
pub fn match_range(version: &str, range: &VersionRange) -> bool {
    range.constraints.iter().all(|c| c.holds(version))
}

/// A manifest spec converted to alternatives of conjunctive ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecRanges {
    pub alternatives: Vec<VersionRange>,
}

impl SpecRanges {
    /// Lowest version satisfying a lower bound of the spec: the minimum over
    /// alternatives of each alternative's lower bound. `None` when some
    /// alternative is unbounded below.
    pub fn floor(&self) -> Option<String> {
        let mut floors = Vec::with_capacity(self.alternatives.len());
        for alt in &self.alternatives {
            floors.push(alt.lower_bound()?);
        }
        floors
            .into_iter()
            .min_by(|a, b| compare_versions(a, b))
            .map(str::to_string)
    }

    pub fn matches(&self, version: &str) -> bool {
        self.alternatives.iter().any(|r| r.matches(version))
    }
}

/// Parses an npm semver range (`^1.2.3`, `~1.2`, `1.x`, `>=1 <2`,
/// `1.0.0 - 2.0.0`, `a || b`). Returns `None` for non-registry specs such as
/// git URLs, `file:` paths, dist-tags or `*`-free garbage.
pub fn parse_npm_spec(spec: &str) -> Option<SpecRanges> {
    let spec = spec.trim();
    let mut alternatives = Vec::new();
    for alt in spec.split("||") {
        let alt = alt.trim();
        let constraints = parse_npm_alternative(alt)?;
        alternatives.push(VersionRange::new(constraints).ok()?);
    }
    if alternatives.is_empty() {
        return None;
    }
    Some(SpecRanges { alternatives })
}

fn parse_npm_alternative(alt: &str) -> Option<Vec<Constraint>> {
    if alt.is_empty() || alt == "*" || alt.eq_ignore_ascii_case("x") || alt == "latest" {
        return if alt == "latest" { None } else { Some(vec![Constraint::new(Comparator::Ge, "0.0.0")]) };
    }
    let tokens: Vec<&str> = alt.split_whitespace().collect();
    if tokens.len() == 3 && tokens[1] == "-" {
        let lo = partial(tokens[0])?;
        let hi = partial(tokens[2])?;
        let mut out = vec![Constraint::new(Comparator::Ge, lo.floor())];
        out.push(match hi.upper_exclusive() {
            Some(upper) => Constraint::new(Comparator::Lt, upper),
            None => Constraint::new(Comparator::Le, hi.floor()),
        });
        return Some(out);
    }

    // operators may be separated from their version by spaces (">= 1.2")
    let mut merged: Vec<String> = Vec::new();
    let mut pending: Option<&str> = None;
    for tok in tokens {
        if matches!(tok, ">" | ">=" | "<" | "<=" | "=" | "^" | "~") {
            pending = Some(tok);
            continue;
        }
        merged.push(match pending.take() {
            Some(op) => format!("{op}{tok}"),
            None => tok.to_string(),
        });
    }
    if pending.is_some() {
        return None;
    }

    let mut out = Vec::new();
    for tok in merged {
        out.extend(parse_npm_comparator(&tok)?);
    }
    Some(out)
}

fn parse_npm_comparator(tok: &str) -> Option<Vec<Constraint>> {
    let tok = tok.strip_prefix('v').unwrap_or(tok);
    for (prefix, op) in [(">=", Comparator::Ge), ("<=", Comparator::Le), (">", Comparator::Gt), ("<", Comparator::Lt)] {
        if let Some(rest) = tok.strip_prefix(prefix) {
            let p = partial(rest.strip_prefix('v').unwrap_or(rest))?;
            return Some(match op {
                // "<=1.2" means below 1.3.0
                Comparator::Le if p.is_partial() => vec![Constraint::new(Comparator::Lt, p.upper_exclusive()?)],
                // ">1.2" means at or above 1.3.0
                Comparator::Gt if p.is_partial() => vec![Constraint::new(Comparator::Ge, p.upper_exclusive()?)],
                _ => vec![Constraint::new(op, p.floor())],
            });
        }
    }
    if let Some(rest) = tok.strip_prefix('^') {
        let p = partial(rest)?;
        return Some(vec![Constraint::new(Comparator::Ge, p.floor()), Constraint::new(Comparator::Lt, p.caret_upper())]);
    }
    if let Some(rest) = tok.strip_prefix('~') {
        let p = partial(rest.strip_prefix('>').unwrap_or(rest))?;
        return Some(vec![Constraint::new(Comparator::Ge, p.floor()), Constraint::new(Comparator::Lt, p.tilde_upper())]);
    }
    let p = partial(tok.strip_prefix('=').unwrap_or(tok))?;
    Some(match p.upper_exclusive() {
        Some(upper) => vec![Constraint::new(Comparator::Ge, p.floor()), Constraint::new(Comparator::Lt, upper)],
        None => vec![Constraint::new(Comparator::Eq, p.floor())],
    })
}

/// A possibly partial semver like `1`, `1.2`, `1.x`, `1.2.3-beta.1`.
struct Partial {
    parts: Vec<u64>,
    pre: Option<String>,
}

fn partial(s: &str) -> Option<Partial> {
    if s.is_empty() {
        return None;
    }
    let (core, pre) = match s.split_once(['-', '+']) {
        Some((c, rest)) if s.as_bytes()[c.len()] == b'-' => (c, Some(rest.split('+').next().unwrap_or("").to_string())),
        Some((c, _)) => (c, None),
        None => (s, None),
    };
    let mut parts = Vec::new();
    for piece in core.split('.') {
        if matches!(piece, "x" | "X" | "*") {
            break;
        }
        parts.push(piece.parse::<u64>().ok()?);
    }
    if parts.len() > 3 || (parts.is_empty() && pre.is_some()) {
        return None;
    }
    Some(Partial { parts, pre })
}

impl Partial {
    fn is_partial(&self) -> bool {
        self.parts.len() < 3
    }

    fn floor(&self) -> String {
        let mut p = self.parts.clone();
        p.resize(3, 0);
        let base = format!("{}.{}.{}", p[0], p[1], p[2]);
        match &self.pre {
            Some(pre) if !pre.is_empty() && !self.is_partial() => format!("{base}-{pre}"),
            _ => base,
        }
    }

    /// Exclusive upper bound implied by a partial version (`1.2` → `1.3.0`).
    fn upper_exclusive(&self) -> Option<String> {
        match self.parts.as_slice() {
            [] => None,
            [major] => Some(format!("{}.0.0", major + 1)),
            [major, minor] => Some(format!("{major}.{}.0", minor + 1)),
            _ => None,
        }
    }

    fn caret_upper(&self) -> String {
        let p = &self.parts;
        match p.as_slice() {
            [] => "1.0.0".to_string(),
            [0] => "1.0.0".to_string(),
            [major] | [major, _] | [major, _, _] if *major > 0 => format!("{}.0.0", major + 1),
            [0, minor] | [0, minor, _] if *minor > 0 => format!("0.{}.0", minor + 1),
            [0, 0] => "0.1.0".to_string(),
            [0, 0, patch] => format!("0.0.{}", patch + 1),
            _ => unreachable!("caret bound over {p:?}"),
        }
    }

    fn tilde_upper(&self) -> String {
        match self.parts.as_slice() {
            [] => "1.0.0".to_string(),
            [major] => format!("{}.0.0", major + 1),
            [major, minor, ..] => format!("{major}.{}.0", minor + 1),
        }
    }
}

/// Parses a PEP 440 style specifier list (`>=2.0,<3.0`, `~=1.4.2`,
/// `==1.*`). Returns `None` for anything unparseable.
pub fn parse_python_spec(spec: &str) -> Option<SpecRanges> {
    let mut constraints = Vec::new();
    for clause in spec.split(',') {
        let clause = clause.trim();
        if clause.is_empty() {
            return None;
        }
        let (op, version) = ["===", "~=", "==", "!=", "<=", ">=", "<", ">"]
            .iter()
            .find_map(|op| clause.strip_prefix(op).map(|rest| (*op, rest.trim())))?;
        if version.is_empty() || version.contains(char::is_whitespace) {
            return None;
        }
        match op {
            "~=" => {
                let parts: Vec<&str> = version.split('.').collect();
                if parts.len() < 2 {
                    return None;
                }
                let mut upper: Vec<String> = parts[..parts.len() - 1].iter().map(|s| s.to_string()).collect();
                let last = upper.last_mut()?;
                *last = (last.parse::<u64>().ok()? + 1).to_string();
                constraints.push(Constraint::new(Comparator::Ge, version));
                constraints.push(Constraint::new(Comparator::Lt, upper.join(".")));
            }
            "==" | "===" if version.ends_with(".*") => {
                let prefix = version.trim_end_matches(".*");
                let mut parts: Vec<String> = prefix.split('.').map(str::to_string).collect();
                let last = parts.last_mut()?;
                *last = (last.parse::<u64>().ok()? + 1).to_string();
                constraints.push(Constraint::new(Comparator::Ge, prefix));
                constraints.push(Constraint::new(Comparator::Lt, parts.join(".")));
            }
            "!=" if version.ends_with(".*") => {
                // excluding a whole release series is not expressible as one
                // conjunction; it never affects the floor, so drop it
            }
            _ => {
                let op = match op {
                    "==" | "===" => Comparator::Eq,
                    other => other.parse().ok()?,
                };
                constraints.push(Constraint::new(op, version));
            }
        }
    }
    if constraints.is_empty() {
        return None;
    }
    Some(SpecRanges {
        alternatives: vec![VersionRange::new(constraints).ok()?],
    })
}
