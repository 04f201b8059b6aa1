use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{SamplerConfig, SamplingError};
use crate::registry::LanguageCode;

/// Allocation for one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub code: LanguageCode,
    pub raw_total: u64,
    pub capacity: u64,
    pub allocated: u64,
    /// True when the language received its full capacity.
    pub capped: bool,
}

impl PlanEntry {
    /// allocated / raw_total as a float.
    pub fn repetition_factor(&self) -> f64 {
        self.allocated as f64 / self.raw_total as f64
    }

    /// Whole passes over the raw data.
    pub fn epochs_floor(&self) -> u64 {
        self.allocated / self.raw_total
    }

    /// Passes started, counting a partial final pass.
    pub fn epochs_ceil(&self) -> u64 {
        self.allocated.div_ceil(self.raw_total)
    }

    /// Fraction of the final partial pass, in [0, 1).
    pub fn fractional_epoch(&self) -> f64 {
        (self.allocated % self.raw_total) as f64 / self.raw_total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub budget_n: u64,
    pub epoch_cap: u64,
    pub uniform_share: u64,
    /// Sorted by language code.
    pub entries: Vec<PlanEntry>,
}

impl SamplingPlan {
    pub fn get(&self, code: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.code.as_str() == code)
    }

    pub fn total_allocated(&self) -> u64 {
        self.entries.iter().map(|e| e.allocated).sum()
    }

    pub fn allocations(&self) -> BTreeMap<LanguageCode, u64> {
        self.entries.iter().map(|e| (e.code.clone(), e.allocated)).collect()
    }

    /// CSV report: `language,raw,capacity,allocated,repetition,epochs,fraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language,raw,capacity,allocated,repetition,epochs,fraction\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{},{:.6}",
                e.code,
                e.raw_total,
                e.capacity,
                e.allocated,
                e.repetition_factor(),
                e.epochs_floor(),
                e.fractional_epoch()
            );
        }
        out
    }

    /// Aligned text table followed by totals.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "budget {}  epoch cap {}  uniform share {}\n{:<10} {:>14} {:>14} {:>14} {:>7}\n",
            self.budget_n, self.epoch_cap, self.uniform_share, "language", "raw", "capacity", "allocated", "rep"
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<10} {:>14} {:>14} {:>14} {:>6.2}x{}",
                e.code.as_str(),
                e.raw_total,
                e.capacity,
                e.allocated,
                e.repetition_factor(),
                if e.capped { " (capped)" } else { "" }
            );
        }
        let _ = writeln!(out, "total allocated {} across {} languages", self.total_allocated(), self.entries.len());
        out
    }

    /// Compares allocations with `(code, tokens)` reference values.
    pub fn compare(&self, reference: &[(String, u64)], tolerance: u64) -> PlanComparison {
        let mut deviations = Vec::new();
        let mut matched = 0;
        for (code, expected) in reference {
            let actual = LanguageCode::normalize(code).ok().and_then(|(c, _)| self.get(c.as_str())).map(|e| e.allocated);
            match actual {
                Some(actual) if actual.abs_diff(*expected) <= tolerance => matched += 1,
                actual => deviations.push((code.clone(), *expected, actual)),
            }
        }
        PlanComparison { matched, total: reference.len(), tolerance, deviations }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanComparison {
    pub matched: usize,
    pub total: usize,
    pub tolerance: u64,
    /// `(code, expected, actual)` for every language outside tolerance.
    pub deviations: Vec<(String, u64, Option<u64>)>,
}

impl PlanComparison {
    pub fn all_match(&self) -> bool {
        self.deviations.is_empty()
    }
}

/// UniMax water-filling.
///
/// Repeatedly computes the share `remaining / |remaining languages|`; every
/// language whose capacity (raw × cap) fits within the share takes its
/// capacity. Once none fits, the rest split the remainder evenly, the
/// indivisible leftover going one token each to the lowest codes.
/// Comparisons are exact integer arithmetic on the rational share.
pub fn unimax_allocate(raw_counts: &BTreeMap<LanguageCode, u64>, config: &SamplerConfig) -> Result<SamplingPlan, SamplingError> {
    config.validate()?;
    if raw_counts.is_empty() {
        return Err(SamplingError::EmptyInput);
    }
    if let Some((code, _)) = raw_counts.iter().find(|(_, raw)| **raw == 0) {
        return Err(SamplingError::ZeroCount(code.clone()));
    }
    let cap = u128::from(config.epoch_cap);
    let total_capacity: u128 = raw_counts.values().map(|&raw| u128::from(raw) * cap).sum();
    if u128::from(config.budget_n) > total_capacity {
        return Err(SamplingError::Infeasible { budget: config.budget_n, capacity: total_capacity });
    }

    let mut allocated: BTreeMap<&LanguageCode, (u64, bool)> = BTreeMap::new();
    let mut remaining: Vec<(&LanguageCode, u128)> = raw_counts.iter().map(|(c, &raw)| (c, u128::from(raw) * cap)).collect();
    let mut budget = u128::from(config.budget_n);
    let mut uniform_share = 0u128;
    while !remaining.is_empty() {
        let n = remaining.len() as u128;
        uniform_share = budget / n;
        let (fits, rest): (Vec<_>, Vec<_>) = remaining.iter().partition(|(_, capacity)| capacity * n <= budget);
        if fits.is_empty() {
            let leftover = budget - uniform_share * n;
            for (i, (code, _)) in rest.iter().enumerate() {
                let share = uniform_share + u128::from((i as u128) < leftover);
                allocated.insert(code, (to_u64(share), false));
            }
            break;
        }
        for (code, capacity) in &fits {
            budget -= capacity;
            allocated.insert(code, (to_u64(*capacity), true));
        }
        remaining = rest;
    }

    let entries = raw_counts
        .iter()
        .map(|(code, &raw)| {
            let (alloc, capped) = allocated[code];
            PlanEntry { code: code.clone(), raw_total: raw, capacity: to_u64(u128::from(raw) * cap), allocated: alloc, capped }
        })
        .collect();
    Ok(SamplingPlan { budget_n: config.budget_n, epoch_cap: config.epoch_cap, uniform_share: to_u64(uniform_share), entries })
}

fn to_u64(v: u128) -> u64 {
    u64::try_from(v).unwrap_or(u64::MAX)
}
