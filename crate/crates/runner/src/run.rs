//! One (split × setting × model × parse source) run.

use std::collections::BTreeMap;

use serde::Serialize;

use udprompt_core::conllu::ParseSource;
use udprompt_core::construction::verbalize_constructions_detailed;
use udprompt_core::dep::DepParams;
use udprompt_core::lexicon::LexParams;
use udprompt_core::pipeline::Components;
use udprompt_core::prompt::{Prompt, SectionKind, Setting};
use udprompt_gateway::{Gateway, Status};
use udprompt_metrics::bertscore::BertScorer;
use udprompt_metrics::score_report;

use crate::corpus::{Corpus, Split};
use crate::record::{
    Manifest, RunOutput, SentenceScores, TranslationRecord, WARN_CONTEXT_BUDGET, WARN_EMPTY_COMPLETION, WARN_REQUEST_FAILED,
};
use crate::{sha256_hex, Result, RunnerError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSpec {
    pub split: Split,
    pub setting: Setting,
    /// Name of the model entry in the config.
    pub model: String,
    pub parse_source: ParseSource,
    pub lex_params: LexParams,
    pub dep_params: DepParams,
    pub context_budget_tokens: Option<usize>,
    /// Fingerprints of external resources (dictionary, rule pack, ...),
    /// copied into the manifest.
    pub resource_hashes: BTreeMap<String, String>,
}

impl RunSpec {
    pub fn new(split: Split, setting: Setting, model: &str, parse_source: ParseSource) -> Self {
        RunSpec {
            split,
            setting,
            model: model.to_owned(),
            parse_source,
            lex_params: LexParams::default(),
            dep_params: DepParams::default(),
            context_budget_tokens: None,
            resource_hashes: BTreeMap::new(),
        }
    }
}

fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("serializable").as_bytes())
}

/// Builds every prompt first (so missing or malformed resources fail before
/// any request), translates through the gateway, then scores. Records come
/// back in corpus order whatever order the completions finished in.
pub fn run(spec: &RunSpec, corpus: &Corpus, components: &Components, gateway: &Gateway, scorer: &mut BertScorer) -> Result<RunOutput> {
    if spec.split != corpus.split {
        return Err(RunnerError::Corpus(format!("run is for the {} split but the corpus is {}", spec.split, corpus.split)));
    }
    let sentences = corpus.sentences(spec.parse_source)?;
    if sentences.is_empty() {
        return Err(RunnerError::Corpus(format!("the {} split has no sentences", spec.split)));
    }
    spec.lex_params
        .validate()
        .map_err(|message| RunnerError::Corpus(format!("lexicon parameters: {message}")))?;
    let mut comps = components.clone();
    comps.lex_params = spec.lex_params.clone();
    comps.dep_params = spec.dep_params;

    let mut prompts: Vec<Prompt> = Vec::with_capacity(sentences.len());
    let mut warnings: Vec<Vec<String>> = Vec::with_capacity(sentences.len());
    let budget = spec.context_budget_tokens;
    let max_new = gateway.config().max_new_tokens as usize;
    for s in sentences {
        let prompt = comps.prompt(s, spec.setting).map_err(|source| RunnerError::Pipeline {
            sentence: s.source_id.clone(),
            source,
        })?;
        let mut w = Vec::new();
        if spec.setting.contains(SectionKind::Con) {
            let con = verbalize_constructions_detailed(s, &comps.rules, &comps.translit)?;
            w.extend(con.warnings.into_iter().map(|m| format!("construction: {m}")));
        }
        if let Some(limit) = budget {
            if prompt.token_estimate + max_new > limit {
                w.push(format!("{WARN_CONTEXT_BUDGET}: ~{} prompt tokens + {max_new} new > {limit}", prompt.token_estimate));
            }
        }
        prompts.push(prompt);
        warnings.push(w);
    }

    let texts: Vec<String> = prompts.iter().map(|p| p.text.clone()).collect();
    let completions = gateway.translate_all(&texts).into_iter().collect::<Result<Vec<_>, _>>()?;

    let hypotheses: Vec<&str> = completions.iter().map(|c| c.text.as_str()).collect();
    let references: Vec<&str> = sentences.iter().map(|s| corpus.reference(&s.source_id)).collect();
    let bert = scorer.score(&hypotheses, &references)?;
    let report = score_report(&hypotheses, &references, Some(&bert))?;

    let mut records = Vec::with_capacity(sentences.len());
    for (i, s) in sentences.iter().enumerate() {
        let c = &completions[i];
        let mut w = std::mem::take(&mut warnings[i]);
        match c.status {
            Status::HttpError => w.push(format!("{WARN_REQUEST_FAILED}: http_error")),
            Status::Timeout => w.push(format!("{WARN_REQUEST_FAILED}: timeout")),
            _ if c.text.trim().is_empty() => w.push(WARN_EMPTY_COMPLETION.to_owned()),
            _ => {}
        }
        records.push(TranslationRecord {
            sentence_id: s.source_id.clone(),
            split: spec.split,
            setting: spec.setting,
            model: spec.model.clone(),
            parse_source: spec.parse_source,
            prompt_hash: sha256_hex(prompts[i].text.as_bytes()),
            prompt_tokens: prompts[i].token_estimate,
            completion: c.text.clone(),
            status: c.status,
            reference: references[i].to_owned(),
            bible: corpus.bible.get(&s.source_id).copied(),
            scores: SentenceScores {
                bertscore_precision: bert.precision[i],
                bertscore_recall: bert.recall[i],
                bertscore_f1: bert.f1[i],
                sentence_bleu_relaxed: report.sentence_bleu_relaxed[i],
            },
            warnings: w,
        });
    }

    let mut hashes = spec.resource_hashes.clone();
    hashes.insert("corpus".into(), corpus.fingerprint(spec.parse_source)?);
    hashes.insert("model_config".into(), json_hash(gateway.config()));
    hashes.insert("lex_params".into(), json_hash(&spec.lex_params));
    hashes.insert("dep_params".into(), json_hash(&spec.dep_params));
    hashes.insert(
        "templates".into(),
        json_hash(&(comps.templates.base(), comps.templates.closing(), comps.include_conllu_comments)),
    );
    let manifest = Manifest {
        split: spec.split,
        setting: spec.setting,
        model: spec.model.clone(),
        parse_source: spec.parse_source,
        records: records.len(),
        hashes,
        bertscore_model: bert.model.model_id.clone(),
        bertscore_rescaled: bert.model.rescale_with_baseline,
        corpus_scores: report,
    };
    Ok(RunOutput { records, manifest })
}
