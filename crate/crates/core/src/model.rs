//! Domain values shared by every module: ecosystems, coordinates, statuses,
//! severities and verdicts.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Group placeholder for ecosystems without a group concept (npm, PyPI).
pub const DEFAULT_GROUP: &str = "(default)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown ecosystem `{0}`")]
    UnknownEcosystem(String),
    #[error("unknown status `{0}`")]
    UnknownStatus(String),
    #[error("unknown verdict `{0}`")]
    UnknownVerdict(String),
    #[error("invalid coordinate `{input}`: {reason}")]
    InvalidCoordinate { input: String, reason: String },
    #[error("unknown severity band `{0}`")]
    UnknownSeverityBand(String),
    #[error("severity score {0} outside 0.0..=10.0")]
    SeverityOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ecosystem {
    Maven,
    Npm,
    Pypi,
    Nuget,
    Internal,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 5] = [Self::Maven, Self::Npm, Self::Pypi, Self::Nuget, Self::Internal];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Maven => "maven",
            Self::Npm => "npm",
            Self::Pypi => "pypi",
            Self::Nuget => "nuget",
            Self::Internal => "internal",
        }
    }

    /// npm and PyPI have no group namespace; their group is always
    /// [`DEFAULT_GROUP`].
    pub fn uses_default_group(self) -> bool {
        matches!(self, Self::Npm | Self::Pypi)
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ecosystem {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| ModelError::UnknownEcosystem(s.to_string()))
    }
}

/// One direct dependency occurrence.
///
/// Identity (equality, hashing, ordering) is the canonical string
/// `ecosystem:group:name:version`; `scope` is carried along but does not
/// participate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coordinate {
    pub ecosystem: Ecosystem,
    pub group: String,
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
}

impl Coordinate {
    pub fn new(
        ecosystem: Ecosystem,
        group: impl Into<String>,
        name: impl Into<String>,
        version: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let c = Coordinate {
            ecosystem,
            group: group.into(),
            name: name.into(),
            version: version.into(),
            scope: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_scope(mut self, scope: Option<String>) -> Self {
        self.scope = scope;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidCoordinate {
            input: self.canonical(),
            reason: reason.to_string(),
        };
        for (label, value) in [("group", &self.group), ("name", &self.name), ("version", &self.version)] {
            if value.is_empty() {
                return Err(bad(&format!("{label} is empty")));
            }
            if value.chars().any(char::is_whitespace) {
                return Err(bad(&format!("{label} contains whitespace")));
            }
        }
        if self.group.contains(':') || self.name.contains(':') {
            return Err(bad("group and name may not contain ':'"));
        }
        if self.ecosystem.uses_default_group() && self.group != DEFAULT_GROUP {
            return Err(bad("npm and pypi coordinates use the (default) group"));
        }
        Ok(())
    }

    /// `ecosystem:group:name:version`
    pub fn canonical(&self) -> String {
        format!("{}:{}:{}:{}", self.ecosystem, self.group, self.name, self.version)
    }

    /// Parses a canonical string. The version may itself contain `:`.
    pub fn parse_canonical(input: &str) -> Result<Self, ModelError> {
        let mut parts = input.splitn(4, ':');
        let (Some(eco), Some(group), Some(name), Some(version)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(ModelError::InvalidCoordinate {
                input: input.to_string(),
                reason: "expected ecosystem:group:name:version".to_string(),
            });
        };
        Coordinate::new(eco.parse()?, group, name, version)
    }

    /// The version-independent part: ecosystem, group and name.
    pub fn package(&self) -> PackageKey {
        PackageKey {
            ecosystem: self.ecosystem,
            group: self.group.clone(),
            name: self.name.clone(),
        }
    }

    fn identity(&self) -> (Ecosystem, &str, &str, &str) {
        (self.ecosystem, &self.group, &self.name, &self.version)
    }
}

impl PartialEq for Coordinate {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for Coordinate {}

impl Hash for Coordinate {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.identity().hash(state);
    }
}

impl Ord for Coordinate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical().cmp(&other.canonical())
    }
}

impl PartialOrd for Coordinate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl FromStr for Coordinate {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_canonical(s)
    }
}

/// Ecosystem + group + name, used to match advisories and registry lookups.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackageKey {
    pub ecosystem: Ecosystem,
    pub group: String,
    pub name: String,
}

impl fmt::Display for PackageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.ecosystem, self.group, self.name)
    }
}

/// Lifecycle status of one dependency version.
///
/// The derived `Ord` is the gate-severity order
/// `Approved < NotReviewed < Deprecated < Rejected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Approved,
    NotReviewed,
    Deprecated,
    Rejected,
}

impl Status {
    pub const ALL: [Status; 4] = [Self::NotReviewed, Self::Approved, Self::Deprecated, Self::Rejected];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NotReviewed => "NotReviewed",
            Self::Approved => "Approved",
            Self::Deprecated => "Deprecated",
            Self::Rejected => "Rejected",
        }
    }

    /// Transition matrix enforced by the store.
    pub fn can_transition_to(self, next: Status) -> bool {
        use Status::*;
        matches!(
            (self, next),
            (NotReviewed, Approved)
                | (NotReviewed, Rejected)
                | (Approved, Deprecated)
                | (Approved, Rejected)
                | (Deprecated, Rejected)
                | (Deprecated, Approved)
                | (Rejected, Approved)
        )
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = ModelError;

    /// Accepts `NotReviewed`, `not_reviewed` and `Not Reviewed` spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        match folded.as_str() {
            "notreviewed" => Ok(Self::NotReviewed),
            "approved" => Ok(Self::Approved),
            "deprecated" => Ok(Self::Deprecated),
            "rejected" => Ok(Self::Rejected),
            _ => Err(ModelError::UnknownStatus(s.to_string())),
        }
    }
}

impl Serialize for Status {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Status {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityBand {
    None,
    Low,
    Medium,
    High,
    Critical,
}

impl SeverityBand {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
            Self::Critical => "critical",
        }
    }
}

impl FromStr for SeverityBand {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            "critical" => Ok(Self::Critical),
            _ => Err(ModelError::UnknownSeverityBand(s.to_string())),
        }
    }
}

/// CVSS base score, held in tenths so band cutoffs are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Severity {
    tenths: u8,
}

impl Severity {
    pub fn from_score(score: f64) -> Result<Self, ModelError> {
        if !score.is_finite() || !(0.0..=10.0).contains(&score) {
            return Err(ModelError::SeverityOutOfRange(score));
        }
        Ok(Severity {
            tenths: (score * 10.0).round() as u8,
        })
    }

    pub fn from_tenths(tenths: u8) -> Result<Self, ModelError> {
        if tenths > 100 {
            return Err(ModelError::SeverityOutOfRange(f64::from(tenths) / 10.0));
        }
        Ok(Severity { tenths })
    }

    pub fn score(self) -> f64 {
        f64::from(self.tenths) / 10.0
    }

    pub fn tenths(self) -> u8 {
        self.tenths
    }

    /// CVSS v3 qualitative rating.
    pub fn band(self) -> SeverityBand {
        match self.tenths {
            0 => SeverityBand::None,
            1..=39 => SeverityBand::Low,
            40..=69 => SeverityBand::Medium,
            70..=89 => SeverityBand::High,
            _ => SeverityBand::Critical,
        }
    }
}

impl Serialize for Severity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.score())
    }
}

impl<'de> Deserialize<'de> for Severity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let score = f64::deserialize(deserializer)?;
        Severity::from_score(score).map_err(serde::de::Error::custom)
    }
}

/// Build verdict. `Pass < Warn < Fail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Warn => "warn",
            Self::Fail => "fail",
        }
    }

    /// Maximum over a collection; `Pass` when empty.
    pub fn combine<I: IntoIterator<Item = Verdict>>(verdicts: I) -> Verdict {
        verdicts.into_iter().max().unwrap_or(Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pass" => Ok(Self::Pass),
            "warn" => Ok(Self::Warn),
            "fail" => Ok(Self::Fail),
            _ => Err(ModelError::UnknownVerdict(s.to_string())),
        }
    }
}
