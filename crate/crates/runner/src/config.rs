//! TOML run configuration. Relative paths resolve against the directory of
//! the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use udprompt_core::construction::{parse_rules, TranslitTable};
use udprompt_core::dep::{DepParams, RelationGlossTable};
use udprompt_core::lexicon::{ingest, LexParams, LexiconFormat, LexiconIndex};
use udprompt_core::pipeline::Components;
use udprompt_core::prompt::{Setting, Templates, DEFAULT_BASE_TEMPLATE, DEFAULT_CLOSING_TEMPLATE};
use udprompt_gateway::ModelConfig;
use udprompt_metrics::bertscore::{BertCache, BertScorer, ModelInfo, SidecarClient};

use crate::corpus::{Corpus, CorpusPaths, Split};
use crate::{read_file, Result, RunnerError};

fn default_format() -> LexiconFormat {
    LexiconFormat::NormalizedTsv
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: LexiconFormat,
}

/// Optional replacements for the bundled tables, rule pack and templates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFiles {
    pub rules: Option<PathBuf>,
    pub transliteration: Option<PathBuf>,
    pub relation_glosses: Option<PathBuf>,
    pub base_template: Option<PathBuf>,
    pub closing_template: Option<PathBuf>,
    #[serde(default)]
    pub include_conllu_comments: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BertMode {
    /// In-process stand-in scores, labelled with their own model id.
    #[default]
    Stub,
    /// Launch the scoring sidecar as a child process.
    Spawn,
    /// Connect to a running sidecar.
    Connect,
    /// Cache only; misses are errors.
    Offline,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BertConfig {
    #[serde(default)]
    pub mode: BertMode,
    /// Program and arguments for `spawn`.
    #[serde(default)]
    pub command: Vec<String>,
    /// `host:port` for `connect`.
    pub address: Option<String>,
    pub cache: Option<PathBuf>,
    /// Needed for `offline`, where no hello line tells us the model.
    pub model_id: Option<String>,
    #[serde(default)]
    pub rescale_with_baseline: bool,
}

fn default_runs_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_completion_cache() -> PathBuf {
    PathBuf::from("cache/completions.jsonl")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_runs_dir")]
    pub runs_dir: PathBuf,
    #[serde(default = "default_completion_cache")]
    pub completion_cache: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            runs_dir: default_runs_dir(),
            completion_cache: default_completion_cache(),
        }
    }
}

fn default_languages() -> Vec<Vec<String>> {
    vec![vec!["en".into()], vec!["en".into(), "de".into(), "fr".into()]]
}
fn default_entries() -> Vec<usize> {
    vec![50, 100]
}
fn default_senses() -> Vec<usize> {
    vec![5, 10]
}
fn default_dedup() -> Vec<bool> {
    vec![false, true]
}
fn default_k() -> usize {
    10
}
fn default_shortlist() -> usize {
    4
}
fn default_dep_setting() -> Setting {
    "DEP".parse().expect("valid setting")
}
fn default_lex_setting() -> Setting {
    "LEX+DEP".parse().expect("valid setting")
}

/// Grid-search settings. The LEX lattice is the product of the four lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Model used for the baseline ranking and the grid runs.
    pub pilot_model: Option<String>,
    #[serde(default = "default_k")]
    pub subset_k: usize,
    #[serde(default = "default_shortlist")]
    pub shortlist: usize,
    /// Setting evaluated for each DEP grid point.
    #[serde(default = "default_dep_setting")]
    pub dep_setting: Setting,
    /// Setting evaluated for each LEX grid point (with the chosen DEP config).
    #[serde(default = "default_lex_setting")]
    pub lex_setting: Setting,
    #[serde(default = "default_languages")]
    pub lex_target_languages: Vec<Vec<String>>,
    #[serde(default = "default_entries")]
    pub lex_max_entries: Vec<usize>,
    #[serde(default = "default_senses")]
    pub lex_max_senses: Vec<usize>,
    #[serde(default = "default_dedup")]
    pub lex_dedup_ddglc: Vec<bool>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            pilot_model: None,
            subset_k: default_k(),
            shortlist: default_shortlist(),
            dep_setting: default_dep_setting(),
            lex_setting: default_lex_setting(),
            lex_target_languages: default_languages(),
            lex_max_entries: default_entries(),
            lex_max_senses: default_senses(),
            lex_dedup_ddglc: default_dedup(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Warn when prompt plus generation budget exceeds this many tokens.
    pub context_budget_tokens: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerConfig {
    #[serde(default)]
    pub corpus: BTreeMap<Split, CorpusPaths>,
    pub lexicon: LexiconConfig,
    #[serde(default)]
    pub components: ComponentFiles,
    #[serde(default)]
    pub lex: LexParams,
    #[serde(default)]
    pub dep: DepParams,
    #[serde(default)]
    pub models: BTreeMap<String, ModelConfig>,
    #[serde(default)]
    pub bertscore: BertConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub grid: GridConfig,
    /// Directory the config was loaded from; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunnerConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunnerConfig = toml::from_str(text).map_err(|e| RunnerError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        let bad = |message: String| RunnerError::Config {
            path: path.to_owned(),
            message,
        };
        cfg.lex.validate().map_err(bad)?;
        for (name, m) in &cfg.models {
            m.validate().map_err(|e| bad(format!("model `{name}`: {e}")))?;
        }
        match cfg.bertscore.mode {
            BertMode::Spawn if cfg.bertscore.command.is_empty() => return Err(bad("bertscore mode `spawn` needs `command`".into())),
            BertMode::Connect if cfg.bertscore.address.is_none() => return Err(bad("bertscore mode `connect` needs `address`".into())),
            BertMode::Offline if cfg.bertscore.model_id.is_none() || cfg.bertscore.cache.is_none() => {
                return Err(bad("bertscore mode `offline` needs `model_id` and `cache`".into()))
            }
            _ => {}
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunnerConfig::parse(&read_file(path)?, path)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model(&self, name: &str) -> Result<&ModelConfig> {
        self.models.get(name).ok_or_else(|| RunnerError::UnknownModel(name.to_owned()))
    }

    pub fn load_corpus(&self, split: Split) -> Result<Corpus> {
        let paths = self.corpus.get(&split).ok_or(RunnerError::UnknownSplit(split))?;
        let resolved = CorpusPaths {
            auto: self.resolve(&paths.auto),
            gold: paths.gold.as_deref().map(|g| self.resolve(g)),
            references: self.resolve(&paths.references),
        };
        Corpus::load(split, &resolved)
    }

    /// Dictionary, tables, rule pack and templates with the configured
    /// LEX and DEP parameters.
    pub fn load_components(&self) -> Result<Components> {
        let lex_path = self.resolve(&self.lexicon.path);
        let file = std::fs::File::open(&lex_path).map_err(|source| RunnerError::Io { path: lex_path.clone(), source })?;
        let lexicon: LexiconIndex = ingest(std::io::BufReader::new(file), self.lexicon.format)?;
        let mut c = Components::with_lexicon(lexicon);
        let f = &self.components;
        let text = |p: &Path| read_file(&self.resolve(p));
        if let Some(p) = &f.rules {
            c.rules = parse_rules(&text(p)?)?;
        }
        if let Some(p) = &f.transliteration {
            c.translit = TranslitTable::parse(&text(p)?)?;
        }
        if let Some(p) = &f.relation_glosses {
            c.gloss_table = RelationGlossTable::parse(&text(p)?)?;
        }
        if f.base_template.is_some() || f.closing_template.is_some() {
            let base = f.base_template.as_deref().map(text).transpose()?;
            let closing = f.closing_template.as_deref().map(text).transpose()?;
            c.templates = Templates::new(
                base.as_deref().unwrap_or(DEFAULT_BASE_TEMPLATE),
                closing.as_deref().unwrap_or(DEFAULT_CLOSING_TEMPLATE),
            )?;
        }
        c.include_conllu_comments = f.include_conllu_comments;
        c.lex_params = self.lex.clone();
        c.dep_params = self.dep;
        Ok(c)
    }

    /// Rule pack fingerprint source: the configured file or the bundled pack.
    pub fn rules_text(&self) -> Result<String> {
        match &self.components.rules {
            Some(p) => read_file(&self.resolve(p)),
            None => Ok(udprompt_core::construction::DEFAULT_RULES.to_owned()),
        }
    }

    /// The BERTScore scorer for this config; `offline` forces cache-only
    /// scoring whatever the configured mode (the stub needs no network and
    /// stays as is).
    pub fn bert_scorer(&self, offline: bool) -> Result<BertScorer> {
        let b = &self.bertscore;
        let cache = match &b.cache {
            Some(p) => BertCache::load(&self.resolve(p)).map_err(udprompt_metrics::MetricError::from)?,
            None => BertCache::new(),
        };
        let offline_model = || -> Result<ModelInfo> {
            Ok(ModelInfo {
                model_id: b.model_id.clone().ok_or_else(|| RunnerError::Config {
                    path: self.base_dir.clone(),
                    message: "offline BERTScore needs bertscore.model_id".into(),
                })?,
                rescale_with_baseline: b.rescale_with_baseline,
            })
        };
        let sidecar = |r: std::result::Result<SidecarClient, _>| -> Result<SidecarClient> { r.map_err(|e| RunnerError::Metric(udprompt_metrics::MetricError::from(e))) };
        Ok(match b.mode {
            BertMode::Stub => BertScorer::stub(),
            _ if offline => BertScorer::offline(offline_model()?, cache),
            BertMode::Offline => BertScorer::offline(offline_model()?, cache),
            BertMode::Spawn => BertScorer::with_sidecar(sidecar(SidecarClient::spawn(&b.command[0], &b.command[1..]))?, cache),
            BertMode::Connect => {
                let addr = b.address.as_deref().expect("validated");
                BertScorer::with_sidecar(sidecar(SidecarClient::connect(addr, std::time::Duration::from_secs(30)))?, cache)
            }
        })
    }

    /// Persist the BERTScore cache if one is configured.
    pub fn save_bert_cache(&self, scorer: &BertScorer) -> Result<()> {
        if let (Some(p), BertMode::Spawn | BertMode::Connect) = (&self.bertscore.cache, &self.bertscore.mode) {
            scorer.cache().save(&self.resolve(p)).map_err(udprompt_metrics::MetricError::from)?;
        }
        Ok(())
    }
}

fn file_or_bundled(cfg: &RunnerConfig, p: &Option<PathBuf>) -> Result<String> {
    Ok(match p {
        Some(p) => crate::sha256_hex(read_file(&cfg.resolve(p))?.as_bytes()),
        None => "bundled".to_owned(),
    })
}

impl RunnerConfig {
    /// Fingerprints of the dictionary and of every table the prompts use.
    pub fn resource_hashes(&self) -> Result<BTreeMap<String, String>> {
        let lex_path = self.resolve(&self.lexicon.path);
        let lexicon = std::fs::read(&lex_path).map_err(|source| RunnerError::Io { path: lex_path, source })?;
        let mut out = BTreeMap::new();
        out.insert("lexicon".to_owned(), crate::sha256_hex(&lexicon));
        out.insert("rules".to_owned(), crate::sha256_hex(self.rules_text()?.as_bytes()));
        out.insert("transliteration".to_owned(), file_or_bundled(self, &self.components.transliteration)?);
        out.insert("relation_glosses".to_owned(), file_or_bundled(self, &self.components.relation_glosses)?);
        Ok(out)
    }
}
