use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MixtureError;
use crate::digest::sha256_parts_hex;
use crate::fixtures::{GENERAL_PROMPT_TEMPLATE, MATH_PROMPT_TEMPLATE};
use crate::ingest::Document;
use crate::parallel;
use crate::registry::{display_name, LanguageCode, Registry, ResourceClass};

const SOURCE_PLACEHOLDER: &str = "{{source_lang}}";
const TARGET_PLACEHOLDER: &str = "{{target_lang}}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    General,
    Math,
}

impl PromptKind {
    pub fn template(self) -> &'static str {
        match self {
            PromptKind::General => GENERAL_PROMPT_TEMPLATE,
            PromptKind::Math => MATH_PROMPT_TEMPLATE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::General => "general",
            PromptKind::Math => "math",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = MixtureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(PromptKind::General),
            "math" => Ok(PromptKind::Math),
            other => Err(MixtureError::UnknownKind(other.to_owned())),
        }
    }
}

/// Substitutes both placeholders in one pass, so names that themselves look
/// like placeholders are inserted literally.
pub fn render_translation_prompt(kind: PromptKind, source_lang: &str, target_lang: &str) -> Result<String, MixtureError> {
    if source_lang.is_empty() || target_lang.is_empty() {
        return Err(MixtureError::EmptyLanguageName);
    }
    let mut rest = kind.template();
    let mut out = String::with_capacity(rest.len() + source_lang.len() + target_lang.len());
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        if let Some(after) = tail.strip_prefix(SOURCE_PLACEHOLDER) {
            out.push_str(source_lang);
            rest = after;
        } else if let Some(after) = tail.strip_prefix(TARGET_PLACEHOLDER) {
            out.push_str(target_lang);
            rest = after;
        } else {
            out.push_str("{{");
            rest = &tail[2..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// One translation request. Field order is the JSON-lines key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationJob {
    pub job_id: String,
    pub kind: PromptKind,
    pub target: LanguageCode,
    pub prompt: String,
    pub payload: String,
}

impl TranslationJob {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("job serializes")
    }
}

/// African languages with synthetic data, in registry order.
pub fn synthetic_eligible(registry: &Registry) -> Vec<LanguageCode> {
    registry
        .records
        .iter()
        .filter(|r| r.synthetic_tokens > 0 && r.resource_class != ResourceClass::HighResourceNonAfrican)
        .map(|r| r.code.clone())
        .collect()
}

/// One job per (document, target), document-major, targets in the order of
/// `eligible`. `job_id` is a SHA-256 over the document id and target code.
pub fn build_translation_jobs(
    docs: &[Document],
    targets: &[LanguageCode],
    kind: PromptKind,
    eligible: &[LanguageCode],
    workers: usize,
) -> Result<Vec<TranslationJob>, MixtureError> {
    if let Some(bad) = targets.iter().find(|t| !eligible.contains(t)) {
        return Err(MixtureError::IneligibleTarget(bad.to_string()));
    }
    let ordered: Vec<&LanguageCode> = eligible.iter().filter(|e| targets.contains(e)).collect();
    let target_names: Vec<String> = ordered.iter().map(|t| display_name(t.as_str())).collect();
    let per_doc = parallel::map(docs, workers, |doc| {
        let source = display_name(doc.lang.as_str());
        ordered
            .iter()
            .zip(&target_names)
            .map(|(target, target_name)| {
                Ok(TranslationJob {
                    job_id: sha256_parts_hex(&[doc.id.as_bytes(), target.as_str().as_bytes()]),
                    kind,
                    target: (*target).clone(),
                    prompt: render_translation_prompt(kind, &source, target_name)?,
                    payload: doc.text.clone(),
                })
            })
            .collect::<Result<Vec<_>, MixtureError>>()
    });
    let mut jobs = Vec::with_capacity(docs.len() * ordered.len());
    for batch in per_doc {
        jobs.extend(batch?);
    }
    Ok(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::REFERENCE_REGISTRY_CSV;
    use crate::registry::{parse_registry, DEFAULT_SELECTION_THRESHOLD};

    fn code(s: &str) -> LanguageCode {
        LanguageCode::new(s).unwrap()
    }

    #[test]
    fn general_prompt() {
        let p = render_translation_prompt(PromptKind::General, "English", "Yoruba").unwrap();
        assert!(p.contains("Translate the user text from English into Yoruba"));
        assert!(!p.contains("{{"));
        assert_eq!(p, render_translation_prompt(PromptKind::General, "English", "Yoruba").unwrap());
    }

    #[test]
    fn math_prompt() {
        let p = render_translation_prompt(PromptKind::Math, "English", "Hausa").unwrap();
        assert!(p.starts_with("You are a English-to-Hausa translator"));
        assert!(p.contains("<problem>[Translated problem]</problem>"));
    }

    #[test]
    fn same_language_and_placeholder_names() {
        assert!(render_translation_prompt(PromptKind::General, "X", "X").is_ok());
        let p = render_translation_prompt(PromptKind::General, "{{target_lang}}", "Z").unwrap();
        assert!(p.contains("from {{target_lang}} into Z"));
        assert!(render_translation_prompt(PromptKind::General, "", "Z").is_err());
        assert!(matches!("poetry".parse::<PromptKind>(), Err(MixtureError::UnknownKind(_))));
    }

    #[test]
    fn jobs_are_doc_major_in_registry_order() {
        let reg = parse_registry(REFERENCE_REGISTRY_CSV, DEFAULT_SELECTION_THRESHOLD).unwrap();
        let eligible = synthetic_eligible(&reg);
        assert_eq!(eligible.len(), 17);
        let docs = vec![
            Document::new("d1", "eng_Latn", "other:web", "Hello.").unwrap(),
            Document::new("d2", "eng_Latn", "other:web", "Bye.").unwrap(),
        ];
        let targets = vec![code("yor_Latn"), code("hau_Latn"), code("afr_Latn")];
        let jobs = build_translation_jobs(&docs, &targets, PromptKind::General, &eligible, 1).unwrap();
        assert_eq!(jobs.len(), 6);
        let order: Vec<&str> = jobs[..3].iter().map(|j| j.target.as_str()).collect();
        assert_eq!(order, vec!["afr_Latn", "hau_Latn", "yor_Latn"]);
        assert_eq!(jobs, build_translation_jobs(&docs, &targets, PromptKind::General, &eligible, 4).unwrap());
        assert_ne!(jobs[0].job_id, jobs[3].job_id);
        assert!(jobs[2].prompt.contains("from English into Yoruba"));
        let line = jobs[0].to_json_line();
        assert!(line.starts_with("{\"job_id\":"), "{line}");
        assert!(line.contains("\"kind\":\"general\",\"target\":\"afr_Latn\",\"prompt\":"));

        assert!(build_translation_jobs(&docs, &[], PromptKind::Math, &eligible, 1).unwrap().is_empty());
        let err = build_translation_jobs(&docs, &[code("fra_Latn")], PromptKind::Math, &eligible, 1).unwrap_err();
        assert!(matches!(err, MixtureError::IneligibleTarget(_)));
    }
}
