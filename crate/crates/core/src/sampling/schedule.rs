//! Realizes a [`SamplingPlan`] over concrete documents.
//!
//! Each language's documents are shuffled once per epoch by a PCG-XSH-RR
//! 64/32 generator (multiplier 6364136223846793005, increment
//! `2 * stream + 1`) seeded with `state = seed` and
//! `stream = fnv1a64(seed_le, lang, epoch_le)`. Indices are drawn with
//! Lemire's unbiased bounded sampling and applied as a Fisher-Yates shuffle
//! from the last position down.

use std::collections::BTreeMap;

use rand_core::Rng;
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use super::{SamplingError, SamplingPlan};
use crate::digest::fnv1a64;
use crate::parallel;
use crate::registry::LanguageCode;

/// Per-language ordered `(doc_id, token_length)` lists.
pub type DocIndex = BTreeMap<LanguageCode, Vec<(String, u64)>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledDoc {
    pub epoch: u32,
    pub doc_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSchedule {
    pub lang: LanguageCode,
    pub allocated: u64,
    pub realized: u64,
    /// Epoch in which the first document that did not fit was drawn.
    pub stop_epoch: u32,
    /// Number of documents taken from `stop_epoch` before stopping.
    pub stop_offset: usize,
    pub docs: Vec<ScheduledDoc>,
}

impl LanguageSchedule {
    pub fn deficit(&self) -> u64 {
        self.allocated - self.realized
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub seed: u64,
    pub languages: Vec<LanguageSchedule>,
}

impl ScheduleSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Parses a CSV document index with header `lang,doc_id,tokens`. Row order
/// within a language is preserved.
pub fn parse_doc_index(text: &str) -> Result<DocIndex, SamplingError> {
    let mut index = DocIndex::new();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    for row in reader.records() {
        let row = row.map_err(|e| SamplingError::MalformedTable(e.to_string()))?;
        let bad = || SamplingError::MalformedTable(format!("bad document index row {row:?}"));
        let lang = LanguageCode::new(row.get(0).ok_or_else(bad)?).map_err(|_| bad())?;
        let id = row.get(1).ok_or_else(bad)?.to_owned();
        let tokens = row.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        index.entry(lang).or_default().push((id, tokens));
    }
    Ok(index)
}

/// Permutation of `0..n` for one (seed, language, epoch).
pub fn shuffle_order(n: usize, seed: u64, lang: &LanguageCode, epoch: u32) -> Vec<usize> {
    let stream = fnv1a64(&[&seed.to_le_bytes(), lang.as_str().as_bytes(), &epoch.to_le_bytes()]);
    let mut rng = Pcg32::new(seed, stream);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

fn bounded(rng: &mut Pcg32, range: u64) -> u64 {
    if let Ok(range) = u32::try_from(range) {
        let mut m = u64::from(rng.next_u32()) * u64::from(range);
        if (m as u32) < range {
            let threshold = range.wrapping_neg() % range;
            while (m as u32) < threshold {
                m = u64::from(rng.next_u32()) * u64::from(range);
            }
        }
        return m >> 32;
    }
    let mut m = u128::from(rng.next_u64()) * u128::from(range);
    if (m as u64) < range {
        let threshold = range.wrapping_neg() % range;
        while (m as u64) < threshold {
            m = u128::from(rng.next_u64()) * u128::from(range);
        }
    }
    (m >> 64) as u64
}

/// Emits shuffled epochs per language until the next document would exceed
/// the allocation. Languages are processed independently, so the output
/// does not depend on `workers`.
pub fn schedule_documents(plan: &SamplingPlan, index: &DocIndex, seed: u64, workers: usize) -> Result<ScheduleSpec, SamplingError> {
    let languages = parallel::map(&plan.entries, workers, |entry| {
        let docs = index.get(&entry.code).map(Vec::as_slice).unwrap_or(&[]);
        let indexed: u64 = docs.iter().map(|(_, len)| len).sum();
        if indexed != entry.raw_total {
            return Err(SamplingError::InconsistentIndex { lang: entry.code.clone(), indexed, raw_total: entry.raw_total });
        }
        Ok(schedule_language(&entry.code, entry.allocated, docs, seed))
    });
    Ok(ScheduleSpec { seed, languages: languages.into_iter().collect::<Result<_, _>>()? })
}

fn schedule_language(lang: &LanguageCode, allocated: u64, docs: &[(String, u64)], seed: u64) -> LanguageSchedule {
    let mut out = Vec::new();
    let mut realized = 0u64;
    let mut epoch = 1u32;
    loop {
        for (offset, i) in shuffle_order(docs.len(), seed, lang, epoch).into_iter().enumerate() {
            let (id, len) = &docs[i];
            if realized + len > allocated {
                return LanguageSchedule { lang: lang.clone(), allocated, realized, stop_epoch: epoch, stop_offset: offset, docs: out };
            }
            realized += len;
            out.push(ScheduledDoc { epoch, doc_id: id.clone() });
        }
        epoch += 1;
    }
}
