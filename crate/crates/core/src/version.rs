//! Version normalization and ordering.
//!
//! One scheme covers Maven and semver-style strings well enough for
//! "which is newer" questions:
//!
//! - the string is split on `.`, `-` and `_`, and every piece is further split
//!   into maximal digit and non-digit runs;
//! - the leading run of numeric tokens is the *base*; missing trailing base
//!   segments compare as zero, so `1.0 == 1.0.0`;
//! - everything after the base is the *qualifier*. A qualifier whose first
//!   token is one of `snapshot`, `alpha`, `beta`, `rc`, `m`, `pre` sorts below
//!   the bare base; any other qualifier sorts above it.
//! - alphabetic tokens compare case-insensitively, numeric tokens by value.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

const PRE_RELEASE_TAGS: &[&str] = &["snapshot", "alpha", "beta", "rc", "m", "pre"];

/// One token of a normalized version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    /// Decimal digits with leading zeros removed ("0" for all-zero runs).
    Numeric(String),
    /// Lower-cased non-digit run.
    Alpha(String),
}

impl Segment {
    fn numeric(digits: &str) -> Self {
        let trimmed = digits.trim_start_matches('0');
        Segment::Numeric(if trimmed.is_empty() { "0".to_string() } else { trimmed.to_string() })
    }

    fn is_zero(&self) -> bool {
        matches!(self, Segment::Numeric(n) if n == "0")
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            // arbitrary-length numbers: longer digit string is larger
            (Segment::Numeric(a), Segment::Numeric(b)) => a.len().cmp(&b.len()).then_with(|| a.cmp(b)),
            (Segment::Alpha(a), Segment::Alpha(b)) => a.cmp(b),
            (Segment::Numeric(_), Segment::Alpha(_)) => Ordering::Less,
            (Segment::Alpha(_), Segment::Numeric(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum QualifierClass {
    PreRelease,
    Release,
    PostRelease,
}

/// A version string in canonical comparable form.
///
/// Equality is equality of the normalized form: `"1.0"` and `"1.0.0"` are
/// equal, as are `"2.0-SNAPSHOT"` and `"2.0.snapshot"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedVersion {
    /// Numeric base with trailing zero segments stripped.
    pub segments: Vec<Segment>,
    /// Tokens following the numeric base, if any.
    pub qualifier: Vec<Segment>,
}

impl NormalizedVersion {
    pub fn parse(raw: &str) -> Self {
        let mut tokens = Vec::new();
        for piece in raw.split(['.', '-', '_']) {
            tokenize_piece(piece, &mut tokens);
        }

        let base_len = tokens.iter().take_while(|t| matches!(t, Segment::Numeric(_))).count();
        let qualifier = tokens.split_off(base_len);
        let mut segments = tokens;
        while segments.last().is_some_and(Segment::is_zero) {
            segments.pop();
        }
        NormalizedVersion { segments, qualifier }
    }

    fn qualifier_class(&self) -> QualifierClass {
        match self.qualifier.first() {
            None => QualifierClass::Release,
            Some(Segment::Alpha(tag)) if PRE_RELEASE_TAGS.contains(&tag.as_str()) => QualifierClass::PreRelease,
            Some(_) => QualifierClass::PostRelease,
        }
    }

    pub fn is_pre_release(&self) -> bool {
        self.qualifier_class() == QualifierClass::PreRelease
    }
}

fn tokenize_piece(piece: &str, out: &mut Vec<Segment>) {
    let mut chars = piece.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        let digit = c.is_ascii_digit();
        let mut end = start;
        while let Some(&(i, ch)) = chars.peek() {
            if ch.is_ascii_digit() != digit {
                break;
            }
            end = i + ch.len_utf8();
            chars.next();
        }
        let run = &piece[start..end];
        out.push(if digit { Segment::numeric(run) } else { Segment::Alpha(run.to_lowercase()) });
    }
}

fn cmp_padded(a: &[Segment], b: &[Segment]) -> Ordering {
    let zero = Segment::Numeric("0".to_string());
    let len = a.len().max(b.len());
    for i in 0..len {
        let x = a.get(i).unwrap_or(&zero);
        let y = b.get(i).unwrap_or(&zero);
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl Ord for NormalizedVersion {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_padded(&self.segments, &other.segments)
            .then_with(|| self.qualifier_class().cmp(&other.qualifier_class()))
            .then_with(|| self.qualifier.cmp(&other.qualifier))
    }
}

impl PartialOrd for NormalizedVersion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NormalizedVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let render = |s: &Segment| match s {
            Segment::Numeric(n) | Segment::Alpha(n) => n.clone(),
        };
        let base: Vec<String> = if self.segments.is_empty() {
            vec!["0".to_string()]
        } else {
            self.segments.iter().map(render).collect()
        };
        f.write_str(&base.join("."))?;
        if !self.qualifier.is_empty() {
            let q: Vec<String> = self.qualifier.iter().map(render).collect();
            write!(f, "-{}", q.join("."))?;
        }
        Ok(())
    }
}

/// Total order over version strings. Every string normalizes, so this never
/// fails; unusual strings simply land in the post-release class.
pub fn compare_versions(a: &str, b: &str) -> Ordering {
    NormalizedVersion::parse(a).cmp(&NormalizedVersion::parse(b))
}

/// Highest version in `versions` under [`compare_versions`]. Ties keep the
/// first occurrence.
pub fn max_version<'a, I>(versions: I) -> Option<&'a str>
where
    I: IntoIterator<Item = &'a str>,
{
    versions.into_iter().fold(None, |best, v| match best {
        Some(b) if compare_versions(v, b) != Ordering::Greater => Some(b),
        _ => Some(v),
    })
}
