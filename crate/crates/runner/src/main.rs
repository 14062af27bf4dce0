use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use udprompt_core::conllu::ParseSource;
use udprompt_core::prompt::Setting;
use udprompt_runner::config::RunnerConfig;
use udprompt_runner::grid::GridComponent;
use udprompt_runner::session::{gridsearch_command, report_command, run_command};
use udprompt_runner::{RunnerError, Split};

#[derive(Parser)]
#[command(name = "udprompt", version, about = "Syntax-augmented in-context translation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate and score one split under one setting.
    Run {
        #[arg(long)]
        split: Split,
        /// baseline, ALL, or a `+`-joined combination of LEX, CONLL, DEP, CON.
        #[arg(long)]
        setting: Setting,
        /// Model name from the config's [models] table.
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "auto")]
        parse: ParseSource,
        #[arg(long)]
        config: PathBuf,
        /// Use cached completions and scores only; a miss is an error.
        #[arg(long)]
        offline: bool,
    },
    /// Grid search over LEX or DEP parameters on the dev split.
    Gridsearch {
        #[arg(long)]
        component: GridComponent,
        #[arg(long)]
        config: PathBuf,
        /// Overrides grid.pilot_model.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        offline: bool,
    },
    /// Tables from record files.
    Report {
        /// Glob over record files, e.g. 'runs/dev.*.jsonl'.
        #[arg(long)]
        runs: String,
        /// Also write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Run {
            split,
            setting,
            model,
            parse,
            config,
            offline,
        } => {
            let cfg = RunnerConfig::load(&config)?;
            let (out, path) = run_command(&cfg, split, setting, &model, parse, offline)?;
            let s = &out.manifest.corpus_scores;
            let warned = out.records.iter().filter(|r| !r.warnings.is_empty()).count();
            println!(
                "{} records -> {}\nBLEU {:.2}  chrF++ {:.2}  BERTScore F1 {:.4} ({})  records with warnings: {warned}",
                out.records.len(),
                path.display(),
                s.bleu,
                s.chrf_pp,
                s.bertscore_f1_mean.unwrap_or(f64::NAN),
                out.manifest.bertscore_model,
            );
        }
        Command::Gridsearch {
            component,
            config,
            model,
            offline,
        } => {
            let cfg = RunnerConfig::load(&config)?;
            let (report, path) = gridsearch_command(&cfg, component, model.as_deref(), offline)?;
            println!("baseline mean F1 {:.4}; subset of {} sentences", report.baseline_mean_f1, report.subset.ids().len());
            let print = |rank: usize, label: String, subset: f64, full: Option<f64>| {
                let full = full.map_or("—".to_owned(), |f| format!("{f:.4}"));
                println!("{rank:>3}  {subset:.4}  {full:>6}  {label}");
            };
            println!("rank  subset    full  params");
            if let Some(o) = &report.dep {
                for (i, r) in o.ranking.iter().enumerate() {
                    let full = o.shortlist.iter().find(|s| s.index == r.index).and_then(|s| s.full_mean_f1);
                    print(i + 1, r.params.to_string(), r.subset_mean_f1, full);
                }
                println!("best: {}", o.best);
            }
            if let Some(o) = &report.lex {
                for (i, r) in o.ranking.iter().enumerate() {
                    let full = o.shortlist.iter().find(|s| s.index == r.index).and_then(|s| s.full_mean_f1);
                    print(i + 1, serde_json::to_string(&r.params).unwrap(), r.subset_mean_f1, full);
                }
                println!("best: {}", serde_json::to_string(&o.best).unwrap());
            }
            println!("-> {}", path.display());
        }
        Command::Report { runs, json } => {
            let report = report_command(&runs)?;
            print!("{}", report.to_text());
            if let Some(path) = json {
                std::fs::write(&path, report.to_json()).map_err(|source| RunnerError::Io { path, source })?;
            }
        }
    }
    Ok(())
}
