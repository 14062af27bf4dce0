//! Parameter grid search: rank every grid point on the diagnostic subset by
//! mean BERTScore F1, re-evaluate the shortlist on the full split, keep the
//! best.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use udprompt_core::conllu::ParseSource;
use udprompt_core::dep::DepParams;
use udprompt_core::lexicon::LexParams;
use udprompt_core::pipeline::Components;
use udprompt_core::prompt::Setting;
use udprompt_gateway::Gateway;
use udprompt_metrics::bertscore::BertScorer;

use crate::config::GridConfig;
use crate::corpus::Corpus;
use crate::run::{run, RunSpec};
use crate::subset::{f1_scores, select_diagnostic_subset, DiagnosticSubset};
use crate::{Result, RunnerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridComponent {
    Lex,
    Dep,
}

impl fmt::Display for GridComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridComponent::Lex => "lex",
            GridComponent::Dep => "dep",
        })
    }
}

impl FromStr for GridComponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lex" => Ok(GridComponent::Lex),
            "dep" => Ok(GridComponent::Dep),
            other => Err(format!("unknown grid component `{other}` (expected lex or dep)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPoint<P> {
    /// Position in the grid as enumerated.
    pub index: usize,
    pub params: P,
    pub subset_mean_f1: f64,
    #[serde(default)]
    pub full_mean_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome<P> {
    /// Every grid point, best subset score first; ties keep grid order.
    pub ranking: Vec<RankedPoint<P>>,
    /// The top of the ranking with full-split scores, best first.
    pub shortlist: Vec<RankedPoint<P>>,
    pub best: P,
}

fn by_score_then_index<P>(key: impl Fn(&RankedPoint<P>) -> f64) -> impl Fn(&RankedPoint<P>, &RankedPoint<P>) -> std::cmp::Ordering {
    move |a, b| key(b).total_cmp(&key(a)).then(a.index.cmp(&b.index))
}

/// Scores each point with `subset_eval`, shortlists the best `shortlist`,
/// scores those with `full_eval` and picks the highest full score (ties go
/// to the better subset rank).
pub fn grid_search<P: Clone>(
    grid: &[P],
    shortlist: usize,
    mut subset_eval: impl FnMut(&P) -> Result<f64>,
    mut full_eval: impl FnMut(&P) -> Result<f64>,
) -> Result<GridOutcome<P>> {
    if grid.is_empty() {
        return Err(RunnerError::EmptyGrid);
    }
    let mut ranking = Vec::with_capacity(grid.len());
    for (index, p) in grid.iter().enumerate() {
        ranking.push(RankedPoint {
            index,
            params: p.clone(),
            subset_mean_f1: subset_eval(p)?,
            full_mean_f1: None,
        });
    }
    ranking.sort_by(by_score_then_index(|r| r.subset_mean_f1));
    let mut short: Vec<RankedPoint<P>> = ranking.iter().take(shortlist.max(1)).cloned().collect();
    for r in &mut short {
        r.full_mean_f1 = Some(full_eval(&r.params)?);
    }
    // stable sort: equal full scores keep subset order
    short.sort_by(|a, b| b.full_mean_f1.unwrap().total_cmp(&a.full_mean_f1.unwrap()));
    let best = short[0].params.clone();
    Ok(GridOutcome {
        ranking,
        shortlist: short,
        best,
    })
}

/// The LEX lattice: languages × entry caps × sense caps × dedup.
pub fn lex_grid(cfg: &GridConfig) -> Vec<LexParams> {
    let mut out = Vec::new();
    for langs in &cfg.lex_target_languages {
        for &entries in &cfg.lex_max_entries {
            for &senses in &cfg.lex_max_senses {
                for &dedup in &cfg.lex_dedup_ddglc {
                    out.push(LexParams {
                        target_languages: langs.iter().cloned().collect(),
                        max_entries_per_sentence: entries,
                        max_senses_per_entry: senses,
                        dedup_ddglc: dedup,
                    });
                }
            }
        }
    }
    out
}

/// Everything a grid search needs besides the grid itself.
pub struct GridContext<'a> {
    pub corpus: &'a Corpus,
    pub components: &'a Components,
    pub gateway: &'a Gateway,
    pub scorer: &'a mut BertScorer,
    /// Template for the runs; its setting is replaced per search.
    pub base_spec: RunSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub component: GridComponent,
    pub model: String,
    pub setting: Setting,
    pub baseline_mean_f1: f64,
    pub subset: DiagnosticSubset,
    /// DEP configuration used while searching LEX.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep_params: Option<DepParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep: Option<GridOutcome<DepParams>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lex: Option<GridOutcome<LexParams>>,
}

impl GridContext<'_> {
    fn mean_f1(&mut self, corpus: &Corpus, spec: &RunSpec) -> Result<f64> {
        let out = run(spec, corpus, self.components, self.gateway, self.scorer)?;
        Ok(out.manifest.corpus_scores.bertscore_f1_mean.expect("runs are scored with BERTScore"))
    }

    /// Baseline on the full split, then the diagnostic subset of `k` easiest
    /// and `k` hardest sentences.
    pub fn diagnostic_subset(&mut self, k: usize) -> Result<(f64, DiagnosticSubset)> {
        let spec = RunSpec {
            setting: Setting::BASELINE,
            parse_source: ParseSource::Automatic,
            ..self.base_spec.clone()
        };
        let out = run(&spec, self.corpus, self.components, self.gateway, self.scorer)?;
        let subset = select_diagnostic_subset(&f1_scores(&out.records), k)?;
        Ok((out.manifest.corpus_scores.bertscore_f1_mean.unwrap(), subset))
    }

    /// DEP search in `setting` with the base LEX parameters.
    pub fn search_dep(&mut self, grid: &[DepParams], setting: Setting, cfg: &GridConfig) -> Result<GridReport> {
        let (baseline, subset) = self.diagnostic_subset(cfg.subset_k)?;
        let sub = self.corpus.subset(&subset.ids())?;
        let corpus = self.corpus;
        let spec_for = |base: &RunSpec, p: &DepParams| RunSpec {
            setting,
            dep_params: *p,
            ..base.clone()
        };
        let base = self.base_spec.clone();
        let cell = std::cell::RefCell::new(self);
        let outcome = grid_search(
            grid,
            cfg.shortlist,
            |p| cell.borrow_mut().mean_f1(&sub, &spec_for(&base, p)),
            |p| cell.borrow_mut().mean_f1(corpus, &spec_for(&base, p)),
        )?;
        Ok(GridReport {
            component: GridComponent::Dep,
            model: base.model.clone(),
            setting,
            baseline_mean_f1: baseline,
            subset,
            dep_params: None,
            dep: Some(outcome),
            lex: None,
        })
    }

    /// LEX search in `setting` with the DEP configuration `dep` fixed.
    pub fn search_lex(&mut self, grid: &[LexParams], dep: DepParams, setting: Setting, cfg: &GridConfig) -> Result<GridReport> {
        let (baseline, subset) = self.diagnostic_subset(cfg.subset_k)?;
        let sub = self.corpus.subset(&subset.ids())?;
        let corpus = self.corpus;
        let spec_for = |base: &RunSpec, p: &LexParams| RunSpec {
            setting,
            lex_params: p.clone(),
            dep_params: dep,
            ..base.clone()
        };
        let base = self.base_spec.clone();
        let cell = std::cell::RefCell::new(self);
        let outcome = grid_search(
            grid,
            cfg.shortlist,
            |p| cell.borrow_mut().mean_f1(&sub, &spec_for(&base, p)),
            |p| cell.borrow_mut().mean_f1(corpus, &spec_for(&base, p)),
        )?;
        Ok(GridReport {
            component: GridComponent::Lex,
            model: base.model.clone(),
            setting,
            baseline_mean_f1: baseline,
            subset,
            dep_params: Some(dep),
            dep: None,
            lex: Some(outcome),
        })
    }
}
