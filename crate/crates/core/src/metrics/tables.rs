use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::parallel;
use crate::registry::{group_of, GroupName, LanguageGroup};

/// Rounds to `decimals` places, ties to even. Values within 1e-9 of a tie
/// in the scaled domain count as ties, absorbing binary representation
/// error such as 0.125 vs 0.12499999.
pub fn round_half_even(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let scaled = x * scale;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        if floor.rem_euclid(2.0) == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / scale
}

/// Arithmetic mean reported to two decimals.
pub fn overall_average(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyRow);
    }
    Ok(round_half_even(values.iter().sum::<f64>() / values.len() as f64, 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub base: f64,
    pub adapted: f64,
    pub delta_abs: f64,
    pub delta_rel_pct: f64,
}

impl fmt::Display for DeltaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.1} / {:+.1}%", self.delta_abs, self.delta_rel_pct)
    }
}

pub fn delta(base: f64, adapted: f64) -> Result<DeltaReport, MetricsError> {
    if base == 0.0 {
        return Err(MetricsError::ZeroBase);
    }
    let delta_abs = adapted - base;
    Ok(DeltaReport { base, adapted, delta_abs, delta_rel_pct: 100.0 * delta_abs / base })
}

/// Mean of the per-pair relative deltas of `(base, adapted)` pairs.
pub fn mean_relative_delta(pairs: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyRow);
    }
    let mut sum = 0.0;
    for &(base, adapted) in pairs {
        sum += delta(base, adapted)?.delta_rel_pct;
    }
    Ok(sum / pairs.len() as f64)
}

/// Scores keyed by (model, task, lang).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    rows: BTreeMap<(String, String, String), f64>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, task: &str, lang: &str, score: f64) -> Result<(), MetricsError> {
        if !score.is_finite() {
            return Err(MetricsError::MalformedTable(format!("non-finite score for ({model}, {task}, {lang})")));
        }
        let key = (model.to_owned(), task.to_owned(), lang.to_owned());
        if self.rows.contains_key(&key) {
            return Err(MetricsError::DuplicateKey { model: key.0, task: key.1, lang: key.2 });
        }
        self.rows.insert(key, score);
        Ok(())
    }

    pub fn get(&self, model: &str, task: &str, lang: &str) -> Option<f64> {
        self.rows.get(&(model.to_owned(), task.to_owned(), lang.to_owned())).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str, f64)> {
        self.rows.iter().map(|((m, t, l), s)| (m.as_str(), t.as_str(), l.as_str(), *s))
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.rows.keys().map(|(m, _, _)| m.as_str()).collect()
    }

    pub fn tasks(&self) -> BTreeSet<&str> {
        self.rows.keys().map(|(_, t, _)| t.as_str()).collect()
    }

    /// `task -> score` for one model and language.
    pub fn row(&self, model: &str, lang: &str) -> BTreeMap<&str, f64> {
        self.iter().filter(|(m, _, l, _)| *m == model && *l == lang).map(|(_, t, _, s)| (t, s)).collect()
    }

    /// CSV with header `model,task,lang,score`.
    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let mut table = Self::new();
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| MetricsError::MalformedTable(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["model", "task", "lang", "score"] {
            return Err(MetricsError::MalformedTable(format!("header must be model,task,lang,score, found {headers:?}")));
        }
        for row in reader.records() {
            let row = row.map_err(|e| MetricsError::MalformedTable(e.to_string()))?;
            let score: f64 = row[3].parse().map_err(|_| MetricsError::MalformedTable(format!("bad score in {row:?}")))?;
            table.insert(&row[0], &row[1], &row[2], score)?;
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["model", "task", "lang", "score"]).expect("in-memory write");
        for (m, t, l, s) in self.iter() {
            writer.write_record([m, t, l, &s.to_string()]).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// How cells are combined into a group mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupMode {
    /// Mean over every covered (task, lang) cell.
    #[default]
    Pooled,
    /// Mean over tasks per language, then mean over languages.
    ByLanguage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub mean: f64,
    /// Cells that contributed.
    pub cells: usize,
    pub languages: usize,
}

/// Per (model, group) means over cells whose language belongs to the group
/// and whose task is not excluded. Every model must cover every group.
pub fn group_average(
    table: &ScoreTable,
    groups: &[LanguageGroup],
    exclude_tasks: &BTreeSet<String>,
    mode: GroupMode,
    workers: usize,
) -> Result<BTreeMap<(String, GroupName), GroupScore>, MetricsError> {
    let models: Vec<&str> = table.models().into_iter().collect();
    let per_model = parallel::map(&models, workers, |model| {
        let mut cells: BTreeMap<GroupName, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
        for (m, task, lang, score) in table.iter() {
            if m != *model || exclude_tasks.contains(task) {
                continue;
            }
            if let Some(group) = group_of(lang, groups) {
                cells.entry(group).or_default().entry(lang).or_default().push(score);
            }
        }
        let mut out = Vec::new();
        for group in groups.iter().map(|g| g.name) {
            let Some(by_lang) = cells.get(&group) else {
                return Err(MetricsError::EmptyGroup { model: model.to_string(), group: group.to_string() });
            };
            let n_cells = by_lang.values().map(Vec::len).sum();
            let mean = match mode {
                GroupMode::Pooled => by_lang.values().flatten().sum::<f64>() / n_cells as f64,
                GroupMode::ByLanguage => {
                    by_lang.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).sum::<f64>() / by_lang.len() as f64
                }
            };
            out.push(((model.to_string(), group), GroupScore { mean, cells: n_cells, languages: by_lang.len() }));
        }
        Ok(out)
    });
    let mut result = BTreeMap::new();
    for entries in per_model {
        result.extend(entries?);
    }
    Ok(result)
}

/// Mean score per language for one model over `tasks`, with the number of
/// tasks found.
pub fn language_averages(table: &ScoreTable, model: &str, tasks: &[&str]) -> BTreeMap<String, (f64, usize)> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (m, task, lang, score) in table.iter() {
        if m == model && tasks.contains(&task) {
            let entry = sums.entry(lang.to_owned()).or_default();
            entry.0 += score;
            entry.1 += 1;
        }
    }
    sums.into_iter().map(|(lang, (sum, n))| (lang, (sum / n as f64, n))).collect()
}

impl GroupScore {
    pub fn render_table(scores: &BTreeMap<(String, GroupName), GroupScore>) -> String {
        let mut out = format!("{:<24} {:<8} {:>8} {:>6} {:>6}\n", "model", "group", "mean", "cells", "langs");
        for ((model, group), s) in scores {
            let _ = writeln!(out, "{model:<24} {:<8} {:>8.2} {:>6} {:>6}", group.as_str(), s.mean, s.cells, s.languages);
        }
        out
    }
}
