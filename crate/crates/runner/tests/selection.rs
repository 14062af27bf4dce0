mod common;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use proptest::prelude::*;

use udprompt_core::conllu::ParseSource;
use udprompt_core::dep::DepParams;
use udprompt_core::prompt::Setting;
use udprompt_gateway::CompletionCache;
use udprompt_metrics::bertscore::BertScorer;
use udprompt_runner::config::GridConfig;
use udprompt_runner::grid::GridContext;
use udprompt_runner::session::{base_spec, gridsearch_command, open_gateway};
use udprompt_runner::subset::compare_ids;
use udprompt_runner::{grid_search, lex_grid, run, select_diagnostic_subset, GridComponent, RunnerError, Split};

use common::*;

fn ids(range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|i| format!("s-{i}")).collect()
}

#[test]
fn twenty_sentences_are_all_selected() {
    let scores: Vec<(String, f64)> = ids(1..=20).into_iter().zip([0.5, 0.9, 0.1].iter().cycle().copied()).collect();
    let sub = select_diagnostic_subset(&scores, 10).unwrap();
    let got: BTreeSet<String> = sub.ids().into_iter().collect();
    assert_eq!(got, ids(1..=20).into_iter().collect());
    assert_eq!(sub.ids().len(), 20);
}

#[test]
fn increasing_scores_select_the_ends() {
    let scores: Vec<(String, f64)> = ids(1..=50).into_iter().enumerate().map(|(i, id)| (id, i as f64 / 100.0)).collect();
    let sub = select_diagnostic_subset(&scores, 10).unwrap();
    let easiest: BTreeSet<String> = sub.easiest.into_iter().collect();
    let hardest: BTreeSet<String> = sub.hardest.into_iter().collect();
    assert_eq!(easiest, ids(41..=50).into_iter().collect());
    assert_eq!(hardest, ids(1..=10).into_iter().collect());
}

#[test]
fn too_small_corpus_is_an_error() {
    let scores: Vec<(String, f64)> = ids(1..=19).into_iter().map(|i| (i, 0.5)).collect();
    match select_diagnostic_subset(&scores, 10) {
        Err(RunnerError::SubsetTooSmall { available: 19, required: 20 }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn ties_break_by_ascending_id_and_halves_stay_disjoint() {
    // all scores equal: the easiest are the lowest ids, the hardest the highest
    let scores: Vec<(String, f64)> = ids(1..=30).into_iter().rev().map(|i| (i, 0.7)).collect();
    let sub = select_diagnostic_subset(&scores, 10).unwrap();
    assert_eq!(sub.easiest, ids(1..=10));
    assert_eq!(sub.hardest, ids(21..=30));
}

#[test]
fn natural_id_order() {
    let mut v = vec!["dev-10", "dev-2", "dev-1", "dev-02", "test-1", "dev-100", "dev-9a", "dev-9"];
    v.sort_by(|a, b| compare_ids(a, b));
    assert_eq!(v, ["dev-1", "dev-02", "dev-2", "dev-9", "dev-9a", "dev-10", "dev-100", "test-1"]);
}

/// Oracle: selection by repeated extraction of the best remaining element.
fn oracle_subset(scores: &[(String, f64)], k: usize) -> (Vec<String>, Vec<String>) {
    let better = |a: &(String, f64), b: &(String, f64)| a.1 > b.1 || (a.1 == b.1 && compare_ids(&a.0, &b.0) == Ordering::Less);
    let mut pool: Vec<(String, f64)> = scores.to_vec();
    let mut order = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            if better(&pool[i], &pool[best]) {
                best = i;
            }
        }
        order.push(pool.remove(best).0);
    }
    let n = order.len();
    (order[..k].to_vec(), order[n - k..].to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn subset_equals_sort_and_slice(raw in proptest::collection::vec(0u8..6, 20..80), k in 1usize..11) {
        // coarse scores force many ties
        let scores: Vec<(String, f64)> = raw.iter().enumerate().map(|(i, s)| (format!("id-{}", (i * 7919) % 1000), *s as f64 / 5.0)).collect();
        let distinct: BTreeSet<&String> = scores.iter().map(|s| &s.0).collect();
        prop_assume!(distinct.len() == scores.len());
        let sub = select_diagnostic_subset(&scores, k).unwrap();
        let (e, h) = oracle_subset(&scores, k);
        prop_assert_eq!(sub.easiest, e);
        prop_assert_eq!(sub.hardest, h);
    }
}

#[test]
fn singleton_grid_wins() {
    let out = grid_search(&["only"], 4, |_| Ok(0.3), |_| Ok(0.1)).unwrap();
    assert_eq!(out.best, "only");
    assert_eq!(out.ranking.len(), 1);
    assert_eq!(out.shortlist[0].full_mean_f1, Some(0.1));
}

#[test]
fn empty_grid_is_an_error() {
    let grid: Vec<u8> = vec![];
    assert!(matches!(grid_search(&grid, 4, |_| Ok(0.0), |_| Ok(0.0)), Err(RunnerError::EmptyGrid)));
}

#[test]
fn grid_inventories() {
    let dep = DepParams::grid();
    assert_eq!(dep.len(), 12);
    assert_eq!(dep.iter().map(|p| p.to_string()).collect::<BTreeSet<_>>().len(), 12);
    let lex = lex_grid(&GridConfig::default());
    assert_eq!(lex.len(), 16);
    let distinct: BTreeSet<String> = lex.iter().map(|p| serde_json::to_string(p).unwrap()).collect();
    assert_eq!(distinct.len(), 16);
    assert!(lex.contains(&udprompt_core::lexicon::LexParams::default()), "the fixed setting is a grid point");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Ranking and pick equal a brute-force evaluation over stubbed scores.
    #[test]
    fn ranking_equals_brute_force(sub in proptest::collection::vec(0u8..8, 1..30), full in proptest::collection::vec(0u8..8, 30), shortlist in 1usize..6) {
        let grid: Vec<usize> = (0..sub.len()).collect();
        let s = |p: &usize| Ok(sub[*p] as f64 / 7.0);
        let f = |p: &usize| Ok(full[*p] as f64 / 7.0);
        let out = grid_search(&grid, shortlist, s, f).unwrap();
        // oracle: counting sort by descending score, grid order within a score
        let mut order = Vec::new();
        for score in (0..8u8).rev() {
            order.extend(grid.iter().copied().filter(|p| sub[*p] == score));
        }
        prop_assert_eq!(out.ranking.iter().map(|r| r.params).collect::<Vec<_>>(), order.clone());
        let short: Vec<usize> = order.iter().copied().take(shortlist).collect();
        prop_assert_eq!(out.shortlist.len(), short.len());
        let top = short.iter().map(|p| full[*p]).max().unwrap();
        let want = *short.iter().find(|p| full[**p] == top).unwrap();
        prop_assert_eq!(out.best, want);
    }
}

#[test]
fn dep_search_on_stub_matches_independent_runs() {
    let (server, _) = stub_endpoint();
    let (conllu, references) = synthetic_corpus(24, 11);
    let ws = workspace(Setup {
        conllu,
        references,
        gold: None,
        endpoint: server.url("/v1/chat/completions"),
        max_in_flight: 4,
        extra: "",
    });
    let cfg = ws.config();
    let corpus = cfg.load_corpus(Split::Dev).unwrap();
    let components = cfg.load_components().unwrap();
    let gateway = open_gateway(&cfg, MODEL, false).unwrap();
    let mut scorer = BertScorer::stub();
    let grid_cfg = GridConfig {
        subset_k: 5,
        shortlist: 3,
        ..GridConfig::default()
    };
    let spec = base_spec(&cfg, Split::Dev, Setting::BASELINE, MODEL, ParseSource::Automatic).unwrap();
    let dep_setting: Setting = "DEP".parse().unwrap();
    let report = GridContext {
        corpus: &corpus,
        components: &components,
        gateway: &gateway,
        scorer: &mut scorer,
        base_spec: spec.clone(),
    }
    .search_dep(&DepParams::grid(), dep_setting, &grid_cfg)
    .unwrap();
    assert_eq!(report.subset.ids().len(), 10);
    let outcome = report.dep.unwrap();
    assert_eq!(outcome.ranking.len(), 12);
    assert_eq!(outcome.shortlist.len(), 3);

    // independent evaluation of every point through a fresh gateway + scorer
    let gw2 = udprompt_gateway::Gateway::new(cfg.model(MODEL).unwrap().clone(), CompletionCache::new()).unwrap();
    let baseline = run(&spec, &corpus, &components, &gw2, &mut BertScorer::stub()).unwrap();
    let subset = select_diagnostic_subset(&udprompt_runner::subset::f1_scores(&baseline.records), 5).unwrap();
    assert_eq!(subset, report.subset);
    let sub_corpus = corpus.subset(&subset.ids()).unwrap();
    let mut scored: Vec<(usize, f64)> = DepParams::grid()
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let s = udprompt_runner::RunSpec { setting: dep_setting, dep_params: p, ..spec.clone() };
            let out = run(&s, &sub_corpus, &components, &gw2, &mut BertScorer::stub()).unwrap();
            let f1: Vec<f64> = out.records.iter().map(|r| r.scores.bertscore_f1).collect();
            (i, f1.iter().sum::<f64>() / f1.len() as f64)
        })
        .collect();
    for (i, r) in outcome.ranking.iter().enumerate() {
        let want = scored.iter().find(|s| s.0 == r.index).unwrap().1;
        assert!((r.subset_mean_f1 - want).abs() < 1e-12, "point {i}");
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    assert_eq!(outcome.ranking.iter().map(|r| r.index).collect::<Vec<_>>(), scored.iter().map(|s| s.0).collect::<Vec<_>>());
}

#[test]
fn lex_search_requires_dep_first_and_uses_its_winner() {
    let (server, _) = stub_endpoint();
    let (conllu, references) = synthetic_corpus(20, 3);
    let ws = workspace(Setup {
        conllu,
        references,
        gold: None,
        endpoint: server.url("/v1/chat/completions"),
        max_in_flight: 4,
        extra: "[grid]\npilot_model = \"stub\"\nsubset_k = 4\nshortlist = 2\nlex_target_languages = [[\"en\"]]\nlex_max_entries = [1, 100]\nlex_max_senses = [10]\nlex_dedup_ddglc = [false]\n",
    });
    let cfg = ws.config();
    let err = gridsearch_command(&cfg, GridComponent::Lex, None, false).unwrap_err();
    assert!(err.to_string().contains("gridsearch --component dep"), "{err}");
    let (dep, dep_path) = gridsearch_command(&cfg, GridComponent::Dep, None, false).unwrap();
    assert!(dep_path.exists());
    let (lex, _) = gridsearch_command(&cfg, GridComponent::Lex, None, false).unwrap();
    assert_eq!(lex.dep_params, Some(dep.dep.unwrap().best));
    let outcome = lex.lex.unwrap();
    assert_eq!(outcome.ranking.len(), 2);
    assert_eq!(outcome.shortlist.len(), 2);
    assert_eq!(lex.setting, "LEX+DEP".parse::<Setting>().unwrap());
}
