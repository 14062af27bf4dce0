#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use udprompt_core::conllu::{parse_document, serialize, Document, ParseSource};
use udprompt_core::testkit::random_rich_sentence;
use udprompt_gateway::stub::{prompt_of, StubReply, StubServer};
use udprompt_runner::config::RunnerConfig;

pub const MODEL: &str = "stub";

pub fn core_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// The first `n` sentences of the core fixture corpus with their reference rows.
pub fn fixture_corpus(n: usize) -> (String, String) {
    let text = fs::read_to_string(core_fixtures().join("dev.conllu")).unwrap();
    let mut doc = parse_document(&text, "dev.conllu", ParseSource::Automatic).unwrap();
    doc.sentences.truncate(n);
    let refs = fs::read_to_string(core_fixtures().join("references.tsv")).unwrap();
    let refs: Vec<&str> = refs.lines().take(n + 1).collect();
    (serialize(&doc), refs.join("\n") + "\n")
}

const ENGLISH: &[&str] = &["the", "man", "said", "it", "he", "would", "have", "lived", "go", "to", "mountain", "holy", "saw", "not", "will"];

/// `n` random sentences `syn-1..=n` with random references and Bible flags.
pub fn synthetic_corpus(n: usize, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = Document::new("synthetic", ParseSource::Automatic);
    let mut refs = String::from("sent_id\tenglish_reference\tbible_flag\n");
    for i in 1..=n {
        let mut s = random_rich_sentence(&mut rng, 10, i);
        for c in &mut s.comments {
            if c.raw.starts_with(" sent_id") {
                c.raw = format!(" sent_id = syn-{i}");
            }
        }
        s.source_id = format!("syn-{i}");
        doc.sentences.push(s);
        let words: Vec<&str> = (0..rng.gen_range(2..8)).map(|_| ENGLISH[rng.gen_range(0..ENGLISH.len())]).collect();
        refs.push_str(&format!("syn-{i}\t{}\t{}\n", words.join(" "), u8::from(rng.gen_bool(0.5))));
    }
    (serialize(&doc), refs)
}

/// Deterministic stand-in translation: a handful of English words picked by
/// hashing the prompt, so different prompts get different replies.
pub fn fake_translation(prompt: &str) -> String {
    let h = udprompt_runner::sha256_hex(prompt.as_bytes());
    let bytes = h.as_bytes();
    let n = 2 + (bytes[0] as usize % 6);
    (0..n).map(|i| ENGLISH[bytes[i + 1] as usize % ENGLISH.len()]).collect::<Vec<_>>().join(" ")
}

pub type Log = Arc<Mutex<Vec<String>>>;

/// A stub endpoint answering with [`fake_translation`] and logging prompts.
pub fn stub_endpoint() -> (StubServer, Log) {
    stub_endpoint_with(|p| StubReply::chat(&fake_translation(p)))
}

pub fn stub_endpoint_with(reply: impl Fn(&str) -> StubReply + Send + Sync + 'static) -> (StubServer, Log) {
    let log: Log = Arc::default();
    let l2 = log.clone();
    let server = StubServer::start(move |body: &Value| {
        let p = prompt_of(body).unwrap_or("").to_owned();
        l2.lock().unwrap().push(p.clone());
        reply(&p)
    });
    (server, log)
}

pub struct Workspace {
    pub dir: TempDir,
    pub config_path: PathBuf,
}

impl Workspace {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config(&self) -> RunnerConfig {
        RunnerConfig::load(&self.config_path).unwrap()
    }
}

pub struct Setup<'a> {
    pub conllu: String,
    pub references: String,
    pub gold: Option<String>,
    pub endpoint: String,
    pub max_in_flight: usize,
    pub extra: &'a str,
}

/// Writes corpus files and a config into a fresh directory.
pub fn workspace(setup: Setup) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("dev.conllu"), &setup.conllu).unwrap();
    fs::write(dir.path().join("references.tsv"), &setup.references).unwrap();
    let gold_line = match &setup.gold {
        Some(g) => {
            fs::write(dir.path().join("dev.gold.conllu"), g).unwrap();
            "gold = \"dev.gold.conllu\"\n"
        }
        None => "",
    };
    let lexicon = core_fixtures().join("lexicon.tsv");
    let config = format!(
        "[corpus.dev]\nauto = \"dev.conllu\"\n{gold_line}references = \"references.tsv\"\n\n\
         [lexicon]\npath = {lexicon:?}\n\n\
         [models.{MODEL}]\nmodel = \"stub-model\"\nendpoint = \"{}\"\nmax_in_flight = {}\nmax_retries = 0\ntimeout_secs = 10\n\n\
         {}\n",
        setup.endpoint, setup.max_in_flight, setup.extra
    );
    let config_path = dir.path().join("config.toml");
    fs::write(&config_path, config).unwrap();
    Workspace { dir, config_path }
}

pub fn fixture_workspace(n: usize, endpoint: &str) -> Workspace {
    let (conllu, references) = fixture_corpus(n);
    workspace(Setup {
        conllu,
        references,
        gold: None,
        endpoint: endpoint.to_owned(),
        max_in_flight: 2,
        extra: "",
    })
}

/// Every file under `dir`, relative path → bytes.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}
