//! Reference data shipped with the crate.
//!
//! The files live under `crates/core/fixtures/` and are embedded so the
//! reference recipe works without a checkout. They are data, not code:
//! corrections go into the CSV files.

use std::path::PathBuf;

/// Per-language raw token counts and synthetic counts for 61 languages.
pub const REFERENCE_REGISTRY_CSV: &str = include_str!("../fixtures/reference_registry.csv");
/// Reference UniMax allocations for the 24 training languages.
pub const UNIMAX_REFERENCE_CSV: &str = include_str!("../fixtures/unimax_reference.csv");
/// English display names keyed by language code.
pub const LANGUAGE_NAMES_CSV: &str = include_str!("../fixtures/language_names.csv");
/// Per-domain synthetic token totals.
pub const SYNTHETIC_DOMAINS_CSV: &str = include_str!("../fixtures/synthetic_domains.csv");
/// Component budgets and reported totals of the reference recipes.
pub const REFERENCE_RECIPES_TOML: &str = include_str!("../fixtures/reference_recipes.toml");
/// Recipe configuration for the reference CMS run.
pub const RECIPE_CMS_TOML: &str = include_str!("../fixtures/recipe_cms.toml");
/// Translation prompt templates.
pub const GENERAL_PROMPT_TEMPLATE: &str = include_str!("../fixtures/prompts/general.txt");
pub const MATH_PROMPT_TEMPLATE: &str = include_str!("../fixtures/prompts/math.txt");

/// Reference mixture budget (sum of the reference UniMax allocations).
pub const REFERENCE_BUDGET_N: u64 = 22_803_696_252;
/// Epoch cap that reproduces the reference allocations.
pub const REFERENCE_EPOCH_CAP: u64 = 4;

/// On-disk location of a fixture file, for tools that want a path.
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Parses the reference UniMax column into `(code, allocated)` pairs.
pub fn unimax_reference() -> Vec<(String, u64)> {
    parse_code_value_csv(UNIMAX_REFERENCE_CSV)
}

/// Parses the synthetic domain table into `(domain, tokens)` pairs.
pub fn synthetic_domains() -> Vec<(String, u64)> {
    parse_code_value_csv(SYNTHETIC_DOMAINS_CSV)
}

/// Reads a two-column `key,integer` CSV with a header, skipping bad rows.
pub fn parse_code_value_csv(text: &str) -> Vec<(String, u64)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .records()
        .filter_map(|row| {
            let row = row.ok()?;
            Some((row.get(0)?.to_owned(), row.get(1)?.parse().ok()?))
        })
        .collect()
}
