//! The CLI commands as library functions: load everything a command needs
//! up front, run it, persist the caches and outputs.

use std::path::PathBuf;

use udprompt_core::conllu::ParseSource;
use udprompt_core::dep::DepParams;
use udprompt_core::prompt::Setting;
use udprompt_gateway::{CompletionCache, Gateway};

use crate::config::RunnerConfig;
use crate::corpus::Split;
use crate::grid::{lex_grid, GridComponent, GridContext, GridReport};
use crate::record::RunOutput;
use crate::report::{build_report, load_runs, Report};
use crate::run::{run, RunSpec};
use crate::{Result, RunnerError};

/// A gateway over the configured completion cache.
pub fn open_gateway(cfg: &RunnerConfig, model: &str, offline: bool) -> Result<Gateway> {
    let model_cfg = cfg.model(model)?.clone();
    let cache = CompletionCache::load(&cfg.resolve(&cfg.output.completion_cache))?;
    Ok(if offline {
        Gateway::offline(model_cfg, cache)?
    } else {
        Gateway::new(model_cfg, cache)?
    })
}

fn save_cache(cfg: &RunnerConfig, gateway: &Gateway) -> Result<()> {
    let path = cfg.resolve(&cfg.output.completion_cache);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| RunnerError::Io { path: dir.to_owned(), source })?;
    }
    gateway.cache().export(&path)?;
    Ok(())
}

pub fn base_spec(cfg: &RunnerConfig, split: Split, setting: Setting, model: &str, parse: ParseSource) -> Result<RunSpec> {
    Ok(RunSpec {
        lex_params: cfg.lex.clone(),
        dep_params: cfg.dep,
        context_budget_tokens: cfg.run.context_budget_tokens,
        resource_hashes: cfg.resource_hashes()?,
        ..RunSpec::new(split, setting, model, parse)
    })
}

/// `run`: returns the output and the record file written.
pub fn run_command(cfg: &RunnerConfig, split: Split, setting: Setting, model: &str, parse: ParseSource, offline: bool) -> Result<(RunOutput, PathBuf)> {
    let corpus = cfg.load_corpus(split)?;
    corpus.sentences(parse)?;
    let components = cfg.load_components()?;
    let spec = base_spec(cfg, split, setting, model, parse)?;
    let gateway = open_gateway(cfg, model, offline)?;
    let mut scorer = cfg.bert_scorer(offline)?;
    let result = run(&spec, &corpus, &components, &gateway, &mut scorer);
    // keep whatever was translated even if scoring failed
    save_cache(cfg, &gateway)?;
    cfg.save_bert_cache(&scorer)?;
    let out = result?;
    let path = out.write(&cfg.resolve(&cfg.output.runs_dir))?;
    Ok((out, path))
}

pub fn grid_result_path(cfg: &RunnerConfig, component: GridComponent) -> PathBuf {
    cfg.resolve(&cfg.output.runs_dir).join(format!("gridsearch.{component}.json"))
}

/// `gridsearch`: DEP must be searched first; the LEX search reads the DEP
/// winner from its result file.
pub fn gridsearch_command(cfg: &RunnerConfig, component: GridComponent, model: Option<&str>, offline: bool) -> Result<(GridReport, PathBuf)> {
    let model = model
        .map(str::to_owned)
        .or_else(|| cfg.grid.pilot_model.clone())
        .ok_or_else(|| RunnerError::Config {
            path: cfg.base_dir.clone(),
            message: "no pilot model: pass --model or set grid.pilot_model".into(),
        })?;
    let dep_best: Option<DepParams> = match component {
        GridComponent::Dep => None,
        GridComponent::Lex => {
            let path = grid_result_path(cfg, GridComponent::Dep);
            let text = std::fs::read_to_string(&path).map_err(|_| RunnerError::Config {
                path: path.clone(),
                message: "the DEP grid search has not been run yet (run `gridsearch --component dep` first)".into(),
            })?;
            let report: GridReport = serde_json::from_str(&text).map_err(|e| RunnerError::BadRecord {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            Some(report.dep.map(|d| d.best).ok_or_else(|| RunnerError::BadRecord {
                path,
                line: 1,
                message: "no DEP outcome".into(),
            })?)
        }
    };
    let corpus = cfg.load_corpus(Split::Dev)?;
    let components = cfg.load_components()?;
    let spec = base_spec(cfg, Split::Dev, Setting::BASELINE, &model, ParseSource::Automatic)?;
    let gateway = open_gateway(cfg, &model, offline)?;
    let mut scorer = cfg.bert_scorer(offline)?;
    let mut ctx = GridContext {
        corpus: &corpus,
        components: &components,
        gateway: &gateway,
        scorer: &mut scorer,
        base_spec: spec,
    };
    let result = match dep_best {
        None => ctx.search_dep(&DepParams::grid(), cfg.grid.dep_setting, &cfg.grid),
        Some(dep) => ctx.search_lex(&lex_grid(&cfg.grid), dep, cfg.grid.lex_setting, &cfg.grid),
    };
    save_cache(cfg, &gateway)?;
    cfg.save_bert_cache(&scorer)?;
    let report = result?;
    let path = grid_result_path(cfg, component);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| RunnerError::Io { path: dir.to_owned(), source })?;
    }
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("serializes") + "\n")
        .map_err(|source| RunnerError::Io { path: path.clone(), source })?;
    Ok((report, path))
}

pub fn report_command(pattern: &str) -> Result<Report> {
    let runs = load_runs(pattern)?;
    build_report(&runs.records, &runs.manifests)
}
