//! Language registry: per-source raw token counts, resource classes and the
//! evaluation language groups shared by every other module.
//!
//! The registry file is a CSV with the header
//! `code,fineweb2,wura,madlad400,synthetic,class_hint`. Empty cells and `-`
//! are read as zero. `class_hint` is `hrl` for high-resource non-African
//! languages and `african` otherwise; whether an African language is
//! [`ResourceClass::Excluded`] is decided by the selection threshold at load
//! time, not by the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum raw token count for an African language to be trained on.
pub const DEFAULT_SELECTION_THRESHOLD: u64 = 90_000_000;

const REGISTRY_HEADER: [&str; 6] = ["code", "fineweb2", "wura", "madlad400", "synthetic", "class_hint"];

/// Script subtags that appear mistyped in transcribed tables.
const SCRIPT_TYPOS: &[(&str, &str)] = &[("Tatn", "Latn")];

/// Individual-language codes used in corpora that benchmarks report under
/// the macrolanguage code.
const BENCHMARK_ALIASES: &[(&str, &str)] = &[("swh", "swa"), ("gaz", "orm")];

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("malformed registry (line {line}): {reason}")]
    MalformedRegistry { line: usize, reason: String },
    #[error("invalid language code {0:?}: expected xxx_Xxxx")]
    InvalidCode(String),
    #[error("language groups overlap on {code:?} ({first} and {second})")]
    OverlappingGroups { code: String, first: GroupName, second: GroupName },
    #[error("registry io error: {0}")]
    Io(#[from] std::io::Error),
}

fn malformed(line: usize, reason: impl Into<String>) -> RegistryError {
    RegistryError::MalformedRegistry { line, reason: reason.into() }
}

/// ISO-639-3 language tag plus ISO-15924 script, e.g. `swh_Latn`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    /// Parses a code that already has canonical casing.
    pub fn new(code: &str) -> Result<Self, RegistryError> {
        if is_canonical(code) {
            Ok(Self(code.to_owned()))
        } else {
            Err(RegistryError::InvalidCode(code.to_owned()))
        }
    }

    /// Normalizes casing (and known script typos) before validating.
    /// Returns the code and whether anything had to change.
    pub fn normalize(raw: &str) -> Result<(Self, bool), RegistryError> {
        let trimmed = raw.trim();
        let (lang, script) = trimmed.split_once('_').ok_or_else(|| RegistryError::InvalidCode(raw.to_owned()))?;
        let lang = lang.to_ascii_lowercase();
        let mut script: String =
            script.chars().enumerate().map(|(i, c)| if i == 0 { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() }).collect();
        if let Some((_, fixed)) = SCRIPT_TYPOS.iter().find(|(typo, _)| *typo == script) {
            script = (*fixed).to_owned();
        }
        let code = Self::new(&format!("{lang}_{script}")).map_err(|_| RegistryError::InvalidCode(raw.to_owned()))?;
        let changed = code.0 != trimmed;
        Ok((code, changed))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The three-letter language part, e.g. `swh` for `swh_Latn`.
    pub fn base(&self) -> &str {
        &self.0[..3]
    }

    pub fn script(&self) -> &str {
        &self.0[4..]
    }
}

fn is_canonical(code: &str) -> bool {
    let b = code.as_bytes();
    b.len() == 8
        && b[..3].iter().all(u8::is_ascii_lowercase)
        && b[3] == b'_'
        && b[4].is_ascii_uppercase()
        && b[5..].iter().all(u8::is_ascii_lowercase)
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageCode {
    type Err = RegistryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = RegistryError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(&s)
    }
}

impl From<LanguageCode> for String {
    fn from(code: LanguageCode) -> Self {
        code.0
    }
}

/// Corpus source a token count or document comes from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SourceId {
    FineWeb2,
    Wura,
    Madlad400,
    CornStack,
    FineMath,
    Nllb,
    Synthetic,
    Other(String),
}

impl SourceId {
    pub fn name(&self) -> &str {
        match self {
            SourceId::FineWeb2 => "fineweb2",
            SourceId::Wura => "wura",
            SourceId::Madlad400 => "madlad400",
            SourceId::CornStack => "cornstack",
            SourceId::FineMath => "finemath",
            SourceId::Nllb => "nllb",
            SourceId::Synthetic => "synthetic",
            SourceId::Other(label) => label,
        }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceId::Other(label) => write!(f, "other:{label}"),
            known => f.write_str(known.name()),
        }
    }
}

impl FromStr for SourceId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fineweb2" => SourceId::FineWeb2,
            "wura" => SourceId::Wura,
            "madlad400" => SourceId::Madlad400,
            "cornstack" => SourceId::CornStack,
            "finemath" => SourceId::FineMath,
            "nllb" => SourceId::Nllb,
            "synthetic" => SourceId::Synthetic,
            other => match other.strip_prefix("other:") {
                Some(label) if !label.is_empty() => SourceId::Other(label.to_owned()),
                _ => return Err(format!("unknown source {other:?} (use other:<label> for custom sources)")),
            },
        })
    }
}

impl TryFrom<String> for SourceId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SourceId> for String {
    fn from(id: SourceId) -> Self {
        id.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResourceClass {
    HighResourceNonAfrican,
    African,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageRecord {
    pub code: LanguageCode,
    pub per_source_tokens: BTreeMap<SourceId, u64>,
    pub resource_class: ResourceClass,
    pub synthetic_tokens: u64,
}

impl LanguageRecord {
    pub fn raw_total(&self) -> u64 {
        self.per_source_tokens.values().sum()
    }

    pub fn is_included(&self) -> bool {
        self.resource_class != ResourceClass::Excluded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupName {
    #[serde(rename = "HRL_PT")]
    HrlPt,
    #[serde(rename = "AFR_PT")]
    AfrPt,
    #[serde(rename = "AFR_NPT")]
    AfrNpt,
}

impl GroupName {
    pub const ALL: [GroupName; 3] = [GroupName::HrlPt, GroupName::AfrPt, GroupName::AfrNpt];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupName::HrlPt => "HRL_PT",
            GroupName::AfrPt => "AFR_PT",
            GroupName::AfrNpt => "AFR_NPT",
        }
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupName::ALL.into_iter().find(|g| g.as_str().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown language group {s:?}"))
    }
}

/// Evaluation language group. Members are bare three-letter codes as used
/// by benchmark tables (`eng`, `swa`, `ewe`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageGroup {
    pub name: GroupName,
    pub members: BTreeSet<String>,
}

impl LanguageGroup {
    pub fn new<'a>(name: GroupName, members: impl IntoIterator<Item = &'a str>) -> Self {
        Self { name, members: members.into_iter().map(str::to_owned).collect() }
    }
}

/// The default evaluation groups: 4 high-resource pretrained languages, the
/// 20 CPT-covered African languages and the benchmark-only African languages.
pub fn default_groups() -> Vec<LanguageGroup> {
    vec![
        LanguageGroup::new(GroupName::HrlPt, ["eng", "fra", "por", "arb"]),
        LanguageGroup::new(
            GroupName::AfrPt,
            [
                "aeb", "afr", "amh", "ary", "arz", "hau", "ibo", "kin", "nya", "orm", "plt", "sna", "som", "sot", "swa", "tir", "tsn",
                "xho", "yor", "zul",
            ],
        ),
        LanguageGroup::new(GroupName::AfrNpt, ["ewe", "lin", "lug", "twi", "wol", "vai"]),
    ]
}

/// Checks that no code belongs to two groups.
pub fn validate_groups(groups: &[LanguageGroup]) -> Result<(), RegistryError> {
    let mut seen: BTreeMap<&str, GroupName> = BTreeMap::new();
    for group in groups {
        for code in &group.members {
            if let Some(first) = seen.insert(code, group.name) {
                if first != group.name {
                    return Err(RegistryError::OverlappingGroups { code: code.clone(), first, second: group.name });
                }
            }
        }
    }
    Ok(())
}

/// Returns the group containing `code`, or `None` when it is not listed.
/// Accepts both bare (`yor`) and scripted (`yor_Latn`) codes.
pub fn group_of(code: &str, groups: &[LanguageGroup]) -> Option<GroupName> {
    let base = code.split('_').next().unwrap_or(code);
    let base = BENCHMARK_ALIASES.iter().find(|(from, _)| *from == base).map_or(base, |(_, to)| to);
    groups.iter().find(|g| g.members.contains(base)).map(|g| g.name)
}

/// A loaded registry with its groups and any normalization warnings.
#[derive(Debug, Clone)]
pub struct Registry {
    pub records: Vec<LanguageRecord>,
    pub groups: Vec<LanguageGroup>,
    pub warnings: Vec<String>,
}

impl Registry {
    pub fn get(&self, code: &str) -> Option<&LanguageRecord> {
        self.records.iter().find(|r| r.code.as_str() == code)
    }

    pub fn included(&self) -> impl Iterator<Item = &LanguageRecord> {
        self.records.iter().filter(|r| r.is_included())
    }

    /// Raw totals of every language in file order.
    pub fn raw_totals(&self) -> Vec<(LanguageCode, u64)> {
        self.records.iter().map(|r| (r.code.clone(), r.raw_total())).collect()
    }

    /// Raw totals of the included languages.
    pub fn included_raw_totals(&self) -> BTreeMap<LanguageCode, u64> {
        self.included().map(|r| (r.code.clone(), r.raw_total())).collect()
    }

    /// Position of `code` in file order, used for registry-ordered output.
    pub fn position(&self, code: &LanguageCode) -> Option<usize> {
        self.records.iter().position(|r| &r.code == code)
    }
}

/// Loads a registry file with the default 90M selection threshold.
pub fn load_registry(path: impl AsRef<Path>) -> Result<Registry, RegistryError> {
    load_registry_with_threshold(path, DEFAULT_SELECTION_THRESHOLD)
}

pub fn load_registry_with_threshold(path: impl AsRef<Path>, threshold: u64) -> Result<Registry, RegistryError> {
    let text = std::fs::read_to_string(path)?;
    parse_registry(&text, threshold)
}

pub fn parse_registry(text: &str, threshold: u64) -> Result<Registry, RegistryError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = reader.records();

    let header = rows.next().ok_or_else(|| malformed(1, "missing header line"))?.map_err(|e| malformed(1, e.to_string()))?;
    let header: Vec<&str> = header.iter().collect();
    if header != REGISTRY_HEADER {
        return Err(malformed(1, format!("header must be `{}`, found `{}`", REGISTRY_HEADER.join(","), header.join(","))));
    }

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, row) in rows.enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| malformed(line, e.to_string()))?;
        if row.len() != REGISTRY_HEADER.len() {
            return Err(malformed(line, format!("expected {} fields, found {}", REGISTRY_HEADER.len(), row.len())));
        }
        let (code, changed) = LanguageCode::normalize(&row[0]).map_err(|e| malformed(line, e.to_string()))?;
        if changed {
            warnings.push(format!("line {line}: language code {:?} normalized to {code}", &row[0]));
        }
        if !seen.insert(code.clone()) {
            return Err(malformed(line, format!("duplicate language code {code}")));
        }
        let count = |field: usize| parse_count(&row[field], line, REGISTRY_HEADER[field]);
        let mut per_source = BTreeMap::new();
        per_source.insert(SourceId::FineWeb2, count(1)?);
        per_source.insert(SourceId::Wura, count(2)?);
        per_source.insert(SourceId::Madlad400, count(3)?);
        let synthetic_tokens = count(4)?;

        let raw_total: u64 = per_source.values().sum();
        let resource_class = match row[5].to_ascii_lowercase().as_str() {
            "hrl" | "high_resource" => ResourceClass::HighResourceNonAfrican,
            "african" | "" if raw_total < threshold => ResourceClass::Excluded,
            "african" | "" => ResourceClass::African,
            other => return Err(malformed(line, format!("unknown class_hint {other:?}"))),
        };
        records.push(LanguageRecord { code, per_source_tokens: per_source, resource_class, synthetic_tokens });
    }
    for warning in &warnings {
        log::warn!("{warning}");
    }
    let groups = default_groups();
    validate_groups(&groups)?;
    Ok(Registry { records, groups, warnings })
}

fn parse_count(field: &str, line: usize, column: &str) -> Result<u64, RegistryError> {
    if field.is_empty() || field == "-" {
        return Ok(0);
    }
    match field.parse::<i128>() {
        Ok(v) if v < 0 => Err(malformed(line, format!("negative count {v} in column {column}"))),
        Ok(v) => u64::try_from(v).map_err(|_| malformed(line, format!("count {v} in column {column} overflows"))),
        Err(_) => Err(malformed(line, format!("non-integer count {field:?} in column {column}"))),
    }
}

/// English display names for the registry languages, keyed by code.
pub fn display_names() -> &'static BTreeMap<String, String> {
    static NAMES: OnceLock<BTreeMap<String, String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(crate::fixtures::LANGUAGE_NAMES_CSV.as_bytes());
        for row in reader.records().flatten() {
            let Ok((code, _)) = LanguageCode::normalize(&row[0]) else { continue };
            names.insert(code.to_string(), row[1].to_owned());
        }
        names
    })
}

/// Display name for `code`, falling back to the code itself.
pub fn display_name(code: &str) -> String {
    display_names().get(code).cloned().unwrap_or_else(|| code.to_owned())
}
