use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MixtureError;
use crate::registry::{LanguageCode, Registry};

/// Arabic dialects left out of synthetic translation.
pub const EXCLUDED_DIALECTS: [&str; 3] = ["ary", "arz", "aeb"];

/// Synthetic token quotas per (language, domain).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthQuota {
    pub matrix: BTreeMap<LanguageCode, BTreeMap<String, u64>>,
    pub lang_marginals: BTreeMap<LanguageCode, u64>,
    pub domain_marginals: BTreeMap<String, u64>,
}

impl SynthQuota {
    pub fn get(&self, lang: &LanguageCode, domain: &str) -> u64 {
        self.matrix.get(lang).and_then(|row| row.get(domain)).copied().unwrap_or(0)
    }

    /// Column sums of the allocated matrix.
    pub fn allocated_domain_totals(&self) -> BTreeMap<String, u64> {
        let mut out: BTreeMap<String, u64> = BTreeMap::new();
        for row in self.matrix.values() {
            for (domain, tokens) in row {
                *out.entry(domain.clone()).or_default() += tokens;
            }
        }
        out
    }

    /// CSV `lang,domain,tokens` in key order.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["lang", "domain", "tokens"]).expect("in-memory write");
        for (lang, row) in &self.matrix {
            for (domain, tokens) in row {
                writer.write_record([lang.as_str(), domain, &tokens.to_string()]).expect("in-memory write");
            }
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// Splits each language total across domains in proportion to the domain
/// totals, rounding by largest remainder inside each row so the language
/// totals are kept exactly. Remainder ties go to the alphabetically first
/// domain.
pub fn allocate_synth_quota(
    lang_totals: &BTreeMap<LanguageCode, u64>,
    domain_totals: &BTreeMap<String, u64>,
) -> Result<SynthQuota, MixtureError> {
    if lang_totals.is_empty() || domain_totals.is_empty() {
        return Err(MixtureError::EmptyInput("synthetic quota needs languages and domains".into()));
    }
    if let Some((lang, _)) = lang_totals.iter().find(|(_, t)| **t == 0) {
        return Err(MixtureError::EmptyInput(format!("language {lang} has no synthetic tokens")));
    }
    if let Some((domain, _)) = domain_totals.iter().find(|(_, t)| **t == 0) {
        return Err(MixtureError::EmptyInput(format!("domain {domain:?} has no tokens")));
    }
    let domain_sum: u128 = domain_totals.values().map(|&t| u128::from(t)).sum();

    let mut matrix = BTreeMap::new();
    for (lang, &total) in lang_totals {
        let mut cells: Vec<(&String, u64, u128)> = domain_totals
            .iter()
            .map(|(domain, &d)| {
                let exact = u128::from(total) * u128::from(d);
                (domain, (exact / domain_sum) as u64, exact % domain_sum)
            })
            .collect();
        let floor_sum: u64 = cells.iter().map(|(_, f, _)| f).sum();
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| cells[b].2.cmp(&cells[a].2).then_with(|| cells[a].0.cmp(cells[b].0)));
        for &i in order.iter().take((total - floor_sum) as usize) {
            cells[i].1 += 1;
        }
        matrix.insert(lang.clone(), cells.into_iter().map(|(d, t, _)| (d.clone(), t)).collect());
    }
    Ok(SynthQuota { matrix, lang_marginals: lang_totals.clone(), domain_marginals: domain_totals.clone() })
}

/// Per-language synthetic totals eligible for quota allocation: every
/// registry language with synthetic tokens, minus the Arabic dialects.
pub fn quota_languages(registry: &Registry) -> BTreeMap<LanguageCode, u64> {
    registry
        .records
        .iter()
        .filter(|r| r.synthetic_tokens > 0 && !EXCLUDED_DIALECTS.contains(&r.code.base()))
        .map(|r| (r.code.clone(), r.synthetic_tokens))
        .collect()
}
