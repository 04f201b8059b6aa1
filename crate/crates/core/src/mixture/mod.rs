//! Recipe assembly and the data-preparation side jobs that feed it:
//! quality-gated parallel data, synthetic quotas and translation jobs.

mod filter;
mod interleave;
mod prompts;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::LanguageCode;
use crate::sampling::{SamplerConfig, SamplingPlan};

pub use filter::{
    filter_parallel, filter_parallel_stream, read_pairs, ConstantScorer, FilterStats, ParallelPair, PrecomputedScorer, QeScorer,
    DEFAULT_TAU,
};
pub use interleave::Interleaver;
pub use prompts::{build_translation_jobs, render_translation_prompt, synthetic_eligible, PromptKind, TranslationJob};
pub use synth::{allocate_synth_quota, quota_languages, SynthQuota, EXCLUDED_DIALECTS};

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("recipe {recipe} enables {component} but sets no budget for it")]
    MissingBudget { recipe: String, component: Component },
    #[error("unknown component {0:?}")]
    UnknownComponent(String),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidTau(f64),
    #[error("scorer failed on pair {id:?}: {reason}")]
    ScorerFailure { id: String, reason: String },
    #[error("invalid parallel pair {id:?}: {reason}")]
    InvalidPair { id: String, reason: String },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unknown prompt kind {0:?} (expected general or math)")]
    UnknownKind(String),
    #[error("prompt language names must be non-empty")]
    EmptyLanguageName,
    #[error("{0} is not an eligible translation target")]
    IneligibleTarget(String),
    #[error("synthetic languages sum to {by_lang} but the synth budget is {budget}")]
    SynthMismatch { by_lang: u64, budget: u64 },
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

/// Non-monolingual token streams a recipe can add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Code,
    Math,
    Synth,
    Parallel,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::Code, Component::Math, Component::Synth, Component::Parallel];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Code => "code",
            Component::Math => "math",
            Component::Synth => "synth",
            Component::Parallel => "parallel",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = MixtureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Component::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| MixtureError::UnknownComponent(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub include_code: bool,
    pub include_math: bool,
    pub include_synth: bool,
    pub include_parallel: bool,
    pub component_budgets: BTreeMap<Component, u64>,
    /// Published grand total in billions, if any; used only for warnings.
    #[serde(default)]
    pub reported_total_b: Option<f64>,
}

impl Recipe {
    pub fn new(name: impl Into<String>, components: &[Component], budgets: BTreeMap<Component, u64>) -> Self {
        Self {
            name: name.into(),
            include_code: components.contains(&Component::Code),
            include_math: components.contains(&Component::Math),
            include_synth: components.contains(&Component::Synth),
            include_parallel: components.contains(&Component::Parallel),
            component_budgets: budgets,
            reported_total_b: None,
        }
    }

    pub fn includes(&self, component: Component) -> bool {
        match component {
            Component::Code => self.include_code,
            Component::Math => self.include_math,
            Component::Synth => self.include_synth,
            Component::Parallel => self.include_parallel,
        }
    }

    pub fn enabled(&self) -> Vec<Component> {
        Component::ALL.into_iter().filter(|c| self.includes(*c)).collect()
    }

    /// Canonical name from the enabled components (C, M, S, P prefix on M).
    pub fn canonical_name(&self) -> String {
        let mut name: String =
            [(Component::Code, 'C'), (Component::Math, 'M')].into_iter().filter(|(c, _)| self.includes(*c)).map(|(_, l)| l).collect();
        if !self.include_code && !self.include_math {
            name.push('M');
        }
        if self.include_parallel && !self.include_synth {
            name.push('P');
        }
        if self.include_synth {
            name.push('S');
            if self.include_parallel {
                name.push('P');
            }
        }
        name
    }
}

#[derive(Deserialize)]
struct RecipeTable {
    budgets: BTreeMap<Component, u64>,
    recipe: Vec<RecipeRow>,
}

#[derive(Deserialize)]
struct RecipeRow {
    name: String,
    components: Vec<Component>,
    reported_total_b: Option<f64>,
}

/// The five reference recipes with their component budgets.
pub fn reference_recipes() -> Vec<Recipe> {
    parse_recipe_table(crate::fixtures::REFERENCE_RECIPES_TOML).expect("bundled recipe table parses")
}

/// Parses a TOML table with `[budgets]` and `[[recipe]]` entries.
pub fn parse_recipe_table(text: &str) -> Result<Vec<Recipe>, MixtureError> {
    let table: RecipeTable = toml::from_str(text).map_err(|e| MixtureError::InvalidRecipe(e.to_string()))?;
    Ok(table
        .recipe
        .into_iter()
        .map(|row| {
            let mut recipe = Recipe::new(row.name, &row.components, table.budgets.clone());
            recipe.reported_total_b = row.reported_total_b;
            recipe
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComponentFlags {
    #[serde(default)]
    pub code: bool,
    #[serde(default)]
    pub math: bool,
    #[serde(default)]
    pub synth: bool,
    #[serde(default)]
    pub parallel: bool,
}

/// Recipe configuration file (TOML or JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeConfig {
    pub name: String,
    #[serde(rename = "budget_N")]
    pub budget_n: u64,
    pub epoch_cap: u64,
    #[serde(default)]
    pub components: ComponentFlags,
    #[serde(default)]
    pub budgets: BTreeMap<Component, u64>,
    pub tau: f64,
    pub seed: u64,
    pub context_len: usize,
    pub batch_tokens: u64,
}

impl RecipeConfig {
    pub fn from_path(path: &Path) -> Result<Self, MixtureError> {
        let read_err = |reason: String| MixtureError::Read { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))
        } else {
            Self::from_toml(&text).map_err(|e| read_err(e.to_string()))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, MixtureError> {
        toml::from_str(text).map_err(|e| MixtureError::InvalidRecipe(e.to_string()))
    }

    pub fn reference_cms() -> Self {
        Self::from_toml(crate::fixtures::RECIPE_CMS_TOML).expect("bundled recipe config parses")
    }

    pub fn recipe(&self) -> Recipe {
        let flags = self.components;
        let enabled: Vec<Component> = [
            (Component::Code, flags.code),
            (Component::Math, flags.math),
            (Component::Synth, flags.synth),
            (Component::Parallel, flags.parallel),
        ]
        .into_iter()
        .filter(|(_, on)| *on)
        .map(|(c, _)| c)
        .collect();
        Recipe::new(self.name.clone(), &enabled, self.budgets.clone())
    }

    pub fn sampler_config(&self, selection_threshold: u64) -> SamplerConfig {
        SamplerConfig { budget_n: self.budget_n, epoch_cap: self.epoch_cap, selection_threshold, seed: self.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Monolingual,
    Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub name: String,
    pub kind: StreamKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lang: Option<LanguageCode>,
    pub budget: u64,
    /// budget / grand_total
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleaveSpec {
    pub method: String,
    /// Streams are cut into chunks of this many tokens before interleaving.
    pub chunk_tokens: u64,
    pub chunks: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureManifest {
    pub recipe: String,
    pub seed: u64,
    pub monolingual_total: u64,
    pub component_budgets: BTreeMap<Component, u64>,
    pub grand_total: u64,
    pub streams: Vec<Stream>,
    pub interleave: InterleaveSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MixtureManifest {
    pub fn stream(&self, name: &str) -> Option<&Stream> {
        self.streams.iter().find(|s| s.name == name)
    }

    /// Stream indices in interleaved order, one per chunk.
    pub fn interleaver(&self) -> Interleaver {
        Interleaver::new(self.interleave.chunks.clone())
    }
}

/// Default interleaving granularity: one context window.
pub const DEFAULT_CHUNK_TOKENS: u64 = 16_384;

/// Builds the manifest for `recipe` over `plan`'s monolingual budgets.
pub fn compile_recipe(plan: &SamplingPlan, recipe: &Recipe, seed: u64) -> Result<MixtureManifest, MixtureError> {
    compile_recipe_with(plan, recipe, seed, DEFAULT_CHUNK_TOKENS, None)
}

/// Like [`compile_recipe`], optionally splitting the synthetic component
/// into one language-tagged stream per entry of `synth_by_lang`, and with an
/// explicit interleaving chunk size.
pub fn compile_recipe_with(
    plan: &SamplingPlan,
    recipe: &Recipe,
    seed: u64,
    chunk_tokens: u64,
    synth_by_lang: Option<&BTreeMap<LanguageCode, u64>>,
) -> Result<MixtureManifest, MixtureError> {
    if chunk_tokens == 0 {
        return Err(MixtureError::InvalidRecipe("chunk size must be positive".into()));
    }
    let mut component_budgets = BTreeMap::new();
    for component in recipe.enabled() {
        let budget = recipe
            .component_budgets
            .get(&component)
            .copied()
            .ok_or(MixtureError::MissingBudget { recipe: recipe.name.clone(), component })?;
        component_budgets.insert(component, budget);
    }
    let monolingual_total = plan.total_allocated();
    let grand_total = monolingual_total + component_budgets.values().sum::<u64>();

    let mut raw: Vec<(String, StreamKind, Option<LanguageCode>, u64)> =
        plan.entries.iter().map(|e| (format!("mono:{}", e.code), StreamKind::Monolingual, Some(e.code.clone()), e.allocated)).collect();
    for (&component, &budget) in &component_budgets {
        match (component, synth_by_lang) {
            (Component::Synth, Some(by_lang)) => {
                let by_lang_total: u64 = by_lang.values().sum();
                if by_lang_total != budget {
                    return Err(MixtureError::SynthMismatch { by_lang: by_lang_total, budget });
                }
                for (lang, &tokens) in by_lang.iter().filter(|(_, t)| **t > 0) {
                    raw.push((format!("synth:{lang}"), StreamKind::Component, Some(lang.clone()), tokens));
                }
            }
            _ => raw.push((component.as_str().to_owned(), StreamKind::Component, None, budget)),
        }
    }

    let chunks = raw.iter().map(|(_, _, _, budget)| budget.div_ceil(chunk_tokens)).collect();
    let streams = raw
        .into_iter()
        .map(|(name, kind, lang, budget)| Stream {
            name,
            kind,
            lang,
            budget,
            weight: if grand_total == 0 { 0.0 } else { budget as f64 / grand_total as f64 },
        })
        .collect();

    let mut warnings = Vec::new();
    if let Some(reported) = recipe.reported_total_b {
        let exact_b = grand_total as f64 / 1e9;
        if ((exact_b * 10.0).round() / 10.0 - reported).abs() > 1e-9 {
            let warning =
                format!("recipe {}: exact total {} ({:.2}B) does not round to the reported {reported}B", recipe.name, grand_total, exact_b);
            log::warn!("{warning}");
            warnings.push(warning);
        }
    }

    Ok(MixtureManifest {
        recipe: recipe.name.clone(),
        seed,
        monolingual_total,
        component_budgets,
        grand_total,
        streams,
        interleave: InterleaveSpec { method: "weighted-round-robin".into(), chunk_tokens, chunks },
        warnings,
    })
}
