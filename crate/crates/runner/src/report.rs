//! Result tables computed from translation records.
//!
//! Every number is recomputed from per-sentence data: corpus BLEU and chrF++
//! from completions and references, BERTScore F1 as the mean of the stored
//! per-sentence F1. A cell whose records are missing is `None` (rendered as
//! `—`), never zero. Deltas are only given when both cells cover exactly the
//! same sentences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use udprompt_core::conllu::ParseSource;
use udprompt_core::prompt::{SectionKind, Setting};
use udprompt_metrics::{bleu, chrf, paired_bootstrap, BleuConfig};

use crate::corpus::Split;
use crate::record::{read_records, Manifest, TranslationRecord};
use crate::subset::compare_ids;
use crate::{Result, RunnerError};

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const BOOTSTRAP_SEED: u64 = 42;

/// Corpus-level numbers for one set of records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub sentences: usize,
    pub bleu: f64,
    pub chrf_pp: f64,
    pub bertscore_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingRow {
    pub setting: Setting,
    pub scores: Option<CellScores>,
    pub delta_bleu: Option<f64>,
    pub delta_bertscore_f1: Option<f64>,
    /// Paired bootstrap on per-sentence F1 against the comparison row.
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BibleRow {
    pub setting: Setting,
    pub bible: Option<CellScores>,
    pub other: Option<CellScores>,
    pub delta_bible_f1: Option<f64>,
    pub delta_other_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldAutoRow {
    pub setting: Setting,
    pub auto: Option<CellScores>,
    pub gold: Option<CellScores>,
    /// gold − auto BERTScore F1.
    pub gold_minus_auto_f1: Option<f64>,
}

/// Tables for one (split, model, parse source).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub split: Split,
    pub model: String,
    pub parse_source: ParseSource,
    /// Deltas against the baseline.
    pub settings: Vec<SettingRow>,
    /// Deltas against LEX.
    pub lex_ablation: Vec<SettingRow>,
    /// Empty when no record carries a Bible flag.
    pub bible: Vec<BibleRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldAutoTable {
    pub split: Split,
    pub model: String,
    pub rows: Vec<GoldAutoRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Model ids of the scorer(s) behind the BERTScore columns.
    pub bertscore_models: BTreeSet<String>,
    pub groups: Vec<GroupReport>,
    pub gold_auto: Vec<GoldAutoTable>,
}

/// Records and manifests gathered from record files.
#[derive(Clone, Debug, Default)]
pub struct LoadedRuns {
    pub files: Vec<PathBuf>,
    pub records: Vec<TranslationRecord>,
    pub manifests: Vec<Manifest>,
}

/// Loads every record file matching `pattern` (manifests matching the
/// pattern are skipped; each record file's own manifest is read if present).
pub fn load_runs(pattern: &str) -> Result<LoadedRuns> {
    let paths = glob::glob(pattern).map_err(|e| RunnerError::Report(format!("bad pattern `{pattern}`: {e}")))?;
    let mut out = LoadedRuns::default();
    for entry in paths {
        let path = entry.map_err(|e| RunnerError::Report(e.to_string()))?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if !name.ends_with(".jsonl") {
            continue;
        }
        out.records.extend(read_records(&path)?);
        let manifest = path.with_file_name(name.trim_end_matches(".jsonl").to_owned() + ".manifest.json");
        if manifest.exists() {
            out.manifests.push(read_manifest(&manifest)?);
        }
        out.files.push(path);
    }
    if out.files.is_empty() {
        return Err(RunnerError::Report(format!("no record files match `{pattern}`")));
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    serde_json::from_str(&crate::read_file(path)?).map_err(|e| RunnerError::BadRecord {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

type Cell<'a> = BTreeMap<String, &'a TranslationRecord>;

fn scores_of(records: &[&TranslationRecord]) -> Result<Option<CellScores>> {
    if records.is_empty() {
        return Ok(None);
    }
    let hyps: Vec<&str> = records.iter().map(|r| r.completion.as_str()).collect();
    let refs: Vec<&str> = records.iter().map(|r| r.reference.as_str()).collect();
    let mut f1: Vec<f64> = records.iter().map(|r| r.scores.bertscore_f1).collect();
    f1.sort_by(f64::total_cmp);
    Ok(Some(CellScores {
        sentences: records.len(),
        bleu: bleu(&hyps, &refs, &BleuConfig::DEFAULT)?.score,
        chrf_pp: chrf(&hyps, &refs, 2)?.score,
        bertscore_f1: f1.iter().sum::<f64>() / f1.len() as f64,
    }))
}

/// Records of a cell in sentence-id order.
fn ordered<'a>(cell: &Cell<'a>, keep: impl Fn(&TranslationRecord) -> bool) -> Vec<&'a TranslationRecord> {
    let mut v: Vec<&TranslationRecord> = cell.values().copied().filter(|r| keep(r)).collect();
    v.sort_by(|a, b| compare_ids(&a.sentence_id, &b.sentence_id));
    v
}

fn same_sentences(a: &[&TranslationRecord], b: &[&TranslationRecord]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.sentence_id == y.sentence_id)
}

fn compare_row(setting: Setting, rows: &[&TranslationRecord], against: &[&TranslationRecord]) -> Result<SettingRow> {
    let scores = scores_of(rows)?;
    let other = scores_of(against)?;
    let (mut delta_bleu, mut delta_f1, mut p_value) = (None, None, None);
    if let (Some(s), Some(o)) = (&scores, &other) {
        if same_sentences(rows, against) {
            delta_bleu = Some(s.bleu - o.bleu);
            delta_f1 = Some(s.bertscore_f1 - o.bertscore_f1);
            let a: Vec<f64> = rows.iter().map(|r| r.scores.bertscore_f1).collect();
            let b: Vec<f64> = against.iter().map(|r| r.scores.bertscore_f1).collect();
            p_value = Some(paired_bootstrap(&a, &b, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED)?.p_value);
        }
    }
    Ok(SettingRow {
        setting,
        scores,
        delta_bleu,
        delta_bertscore_f1: delta_f1,
        p_value,
    })
}

/// Matrix settings first, then anything else seen, by name.
fn setting_rows(seen: impl Iterator<Item = Setting>, required: &[Setting]) -> Vec<Setting> {
    let mut out: Vec<Setting> = required.to_vec();
    let mut extra: Vec<Setting> = seen.filter(|s| !out.contains(s)).collect::<BTreeSet<_>>().into_iter().collect();
    extra.sort_by_key(|s| (s.kinds().len(), s.name()));
    out.extend(extra);
    out
}

/// The LEX-plus-syntax settings compared against LEX.
pub fn lex_ablation_settings() -> Vec<Setting> {
    use SectionKind::*;
    vec![
        Setting::from_kinds([Lex, Conll]),
        Setting::from_kinds([Lex, Con]),
        Setting::from_kinds([Lex, Dep]),
        Setting::from_kinds([Lex, Dep, Con]),
        Setting::all(),
    ]
}

pub fn build_report(records: &[TranslationRecord], manifests: &[Manifest]) -> Result<Report> {
    // (split, model, parse, setting) -> sentence id -> record
    let mut cells: BTreeMap<(Split, String, &'static str, Setting), Cell> = BTreeMap::new();
    for r in records {
        let key = (r.split, r.model.clone(), r.parse_source.as_str(), r.setting);
        if cells.entry(key).or_default().insert(r.sentence_id.clone(), r).is_some() {
            return Err(RunnerError::Report(format!(
                "duplicate record for sentence {} ({} / {} / {} / {})",
                r.sentence_id, r.split, r.model, r.parse_source, r.setting
            )));
        }
    }
    let empty = Cell::new();
    let get = |split: Split, model: &str, parse: &'static str, setting: Setting| cells.get(&(split, model.to_owned(), parse, setting)).unwrap_or(&empty);

    let groups_seen: BTreeSet<(Split, String, &'static str)> = cells.keys().map(|(s, m, p, _)| (*s, m.clone(), *p)).collect();
    let mut groups = Vec::new();
    for (split, model, parse) in &groups_seen {
        let seen = || cells.keys().filter(|(s, m, p, _)| s == split && m == model && p == parse).map(|k| k.3);
        let cell = |setting| get(*split, model, parse, setting);
        let baseline = ordered(cell(Setting::BASELINE), |_| true);
        let mut settings = Vec::new();
        for setting in setting_rows(seen(), &Setting::matrix()) {
            settings.push(compare_row(setting, &ordered(cell(setting), |_| true), &baseline)?);
        }
        let lex = ordered(cell(Setting::from_kinds([SectionKind::Lex])), |_| true);
        let mut lex_ablation = Vec::new();
        let with_lex: Vec<Setting> = seen().filter(|s| s.contains(SectionKind::Lex) && s.kinds().len() > 1).collect();
        for setting in setting_rows(with_lex.into_iter(), &lex_ablation_settings()) {
            lex_ablation.push(compare_row(setting, &ordered(cell(setting), |_| true), &lex)?);
        }
        let flagged = seen().any(|s| cell(s).values().any(|r| r.bible.is_some()));
        let mut bible = Vec::new();
        if flagged {
            let part = |setting, flag: bool| ordered(cell(setting), move |r| r.bible == Some(flag));
            let (base_b, base_o) = (part(Setting::BASELINE, true), part(Setting::BASELINE, false));
            for setting in setting_rows(seen(), &Setting::matrix()) {
                let (b, o) = (part(setting, true), part(setting, false));
                let rb = compare_row(setting, &b, &base_b)?;
                let ro = compare_row(setting, &o, &base_o)?;
                bible.push(BibleRow {
                    setting,
                    bible: rb.scores,
                    other: ro.scores,
                    delta_bible_f1: rb.delta_bertscore_f1,
                    delta_other_f1: ro.delta_bertscore_f1,
                });
            }
        }
        groups.push(GroupReport {
            split: *split,
            model: model.clone(),
            parse_source: if *parse == "gold" { ParseSource::Gold } else { ParseSource::Automatic },
            settings,
            lex_ablation,
            bible,
        });
    }

    let mut gold_auto = Vec::new();
    let with_gold: BTreeSet<(Split, String)> = groups_seen.iter().filter(|g| g.2 == "gold").map(|g| (g.0, g.1.clone())).collect();
    for (split, model) in with_gold {
        let seen = cells.keys().filter(|(s, m, _, _)| *s == split && *m == model).map(|k| k.3);
        let mut rows = Vec::new();
        for setting in setting_rows(seen, &Setting::matrix()) {
            let a = ordered(get(split, &model, "auto", setting), |_| true);
            let g = ordered(get(split, &model, "gold", setting), |_| true);
            let r = compare_row(setting, &g, &a)?;
            rows.push(GoldAutoRow {
                setting,
                auto: scores_of(&a)?,
                gold: r.scores,
                gold_minus_auto_f1: r.delta_bertscore_f1,
            });
        }
        gold_auto.push(GoldAutoTable { split, model, rows });
    }

    Ok(Report {
        bertscore_models: manifests.iter().map(|m| m.bertscore_model.clone()).collect(),
        groups,
        gold_auto,
    })
}

const ABSENT: &str = "—";

fn num(v: Option<f64>, decimals: usize) -> String {
    v.map_or(ABSENT.to_owned(), |x| format!("{x:.decimals$}"))
}

fn signed(v: Option<f64>, decimals: usize) -> String {
    v.map_or(ABSENT.to_owned(), |x| format!("{x:+.decimals$}"))
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_owned()
    };
    let _ = writeln!(out, "{}", line(header.iter().map(|h| h.to_string()).collect()));
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.clone()));
    }
    out.push('\n');
}

fn setting_table(out: &mut String, rows: &[SettingRow], against: &str) {
    let d_bleu = format!("ΔBLEU vs {against}");
    let d_f1 = format!("ΔF1 vs {against}");
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let s = r.scores.as_ref();
            vec![
                r.setting.name(),
                s.map_or(ABSENT.to_owned(), |s| s.sentences.to_string()),
                num(s.map(|s| s.bleu), 2),
                signed(r.delta_bleu, 2),
                num(s.map(|s| s.chrf_pp), 2),
                num(s.map(|s| s.bertscore_f1), 4),
                signed(r.delta_bertscore_f1, 4),
                num(r.p_value, 4),
            ]
        })
        .collect();
    table(out, &["setting", "n", "BLEU", &d_bleu, "chrF++", "BERTScore F1", &d_f1, "p"], &cells);
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let models: Vec<&str> = self.bertscore_models.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "BERTScore model: {}\n",
            if models.is_empty() { "unknown (no manifests)".to_owned() } else { models.join(", ") }
        );
        for g in &self.groups {
            let _ = writeln!(out, "== {} / {} / {} parses ==\n", g.split, g.model, g.parse_source);
            let _ = writeln!(out, "Settings (deltas against baseline)");
            setting_table(&mut out, &g.settings, "baseline");
            let _ = writeln!(out, "LEX ablation (deltas against LEX)");
            setting_table(&mut out, &g.lex_ablation, "LEX");
            if !g.bible.is_empty() {
                let _ = writeln!(out, "Bible vs other (BERTScore F1, deltas against baseline)");
                let cells: Vec<Vec<String>> = g
                    .bible
                    .iter()
                    .map(|r| {
                        vec![
                            r.setting.name(),
                            r.bible.as_ref().map_or(ABSENT.to_owned(), |s| s.sentences.to_string()),
                            num(r.bible.as_ref().map(|s| s.bertscore_f1), 4),
                            signed(r.delta_bible_f1, 4),
                            r.other.as_ref().map_or(ABSENT.to_owned(), |s| s.sentences.to_string()),
                            num(r.other.as_ref().map(|s| s.bertscore_f1), 4),
                            signed(r.delta_other_f1, 4),
                        ]
                    })
                    .collect();
                table(&mut out, &["setting", "n bible", "F1 bible", "Δ bible", "n other", "F1 other", "Δ other"], &cells);
            }
        }
        for t in &self.gold_auto {
            let _ = writeln!(out, "== {} / {}: gold vs automatic parses (BERTScore F1) ==\n", t.split, t.model);
            let cells: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.setting.name(),
                        num(r.auto.as_ref().map(|s| s.bertscore_f1), 4),
                        num(r.gold.as_ref().map(|s| s.bertscore_f1), 4),
                        signed(r.gold_minus_auto_f1, 4),
                    ]
                })
                .collect();
            table(&mut out, &["setting", "auto", "gold", "gold − auto"], &cells);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// The settings table of one group, if present.
    pub fn group(&self, split: Split, model: &str, parse_source: ParseSource) -> Option<&GroupReport> {
        self.groups
            .iter()
            .find(|g| g.split == split && g.model == model && g.parse_source == parse_source)
    }
}

impl GroupReport {
    pub fn row(&self, setting: Setting) -> Option<&SettingRow> {
        self.settings.iter().find(|r| r.setting == setting)
    }
}
