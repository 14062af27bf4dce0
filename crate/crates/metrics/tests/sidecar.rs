use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use udprompt_metrics::bertscore::{
    cache_key, hello_line, serve_stub, stub_scores, BertCache, BertScorer, ModelInfo, Prf, SidecarClient, SidecarError,
};
use udprompt_metrics::MetricError;

fn model() -> ModelInfo {
    ModelInfo {
        model_id: "canned-model".to_owned(),
        rescale_with_baseline: true,
    }
}

/// Canned deterministic scores that differ per pair.
fn canned(h: &str, r: &str) -> Prf {
    if h == r {
        return Prf { precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let x = ((h.len() * 31 + r.len() * 7) % 97) as f64 / 100.0;
    Prf { precision: x, recall: x / 2.0, f1: x / 3.0 }
}

/// Starts a TCP stub on an ephemeral port; returns its address and a
/// counter of scored pairs.
fn start_stub() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let counter = Arc::new(AtomicUsize::new(0));
    let c = counter.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let stream = stream.unwrap();
            let c = c.clone();
            thread::spawn(move || {
                let _ = serve_stub(BufReader::new(stream.try_clone().unwrap()), stream, &model(), |h, r| {
                    c.fetch_add(1, Ordering::SeqCst);
                    canned(h, r)
                });
            });
        }
    });
    (addr, counter)
}

fn pairs(n: usize) -> (Vec<String>, Vec<String>) {
    (0..n)
        .map(|i| {
            let r = format!("reference sentence number {i} with \"quotes\" and ⲁⲩⲱ");
            let h = if i % 5 == 0 { r.clone() } else { format!("hypothesis {}", "x".repeat(i % 13)) };
            (h, r)
        })
        .unzip()
}

#[test]
fn hello_line_comes_first_and_sets_model() {
    let (addr, _) = start_stub();
    let client = SidecarClient::connect(&addr, Duration::from_secs(10)).unwrap();
    assert_eq!(client.model(), &model());
    // the raw stream also starts with the hello line
    let stream = TcpStream::connect(&addr).unwrap();
    let mut first = String::new();
    BufReader::new(stream).read_line(&mut first).unwrap();
    assert_eq!(first.trim_end(), hello_line(&model()));
}

#[test]
fn batch_of_380_returns_request_order() {
    let (addr, _) = start_stub();
    let mut client = SidecarClient::connect(&addr, Duration::from_secs(10)).unwrap();
    let (h, r) = pairs(380);
    let batch: Vec<(&str, &str)> = h.iter().map(String::as_str).zip(r.iter().map(String::as_str)).collect();
    let got = client.score_batch(&batch).unwrap();
    assert_eq!(got.len(), 380);
    for ((hh, rr), s) in batch.iter().zip(&got) {
        assert_eq!(*s, canned(hh, rr));
        if hh == rr {
            assert!(s.f1 >= 0.99);
        }
    }
    // second batch on the same connection
    assert_eq!(client.score_batch(&batch[..7]).unwrap(), got[..7]);
}

#[test]
fn scorer_caches_and_repeats_byte_identically() {
    let (addr, counter) = start_stub();
    let (h, r) = pairs(380);
    let run = || {
        let client = SidecarClient::connect(&addr, Duration::from_secs(10)).unwrap();
        let mut scorer = BertScorer::with_sidecar(client, BertCache::new());
        scorer.batch_size = 100;
        let s = scorer.score(&h, &r).unwrap();
        (serde_json::to_string(&s).unwrap(), scorer)
    };
    let (first, mut scorer) = run();
    let (second, _) = run();
    assert_eq!(first, second);
    let calls = counter.load(Ordering::SeqCst);
    assert_eq!(calls, 2 * 380);
    // warm cache: no further requests
    let again = serde_json::to_string(&scorer.score(&h, &r).unwrap()).unwrap();
    assert_eq!(again, first);
    assert_eq!(counter.load(Ordering::SeqCst), calls);
}

#[test]
fn offline_mode_needs_full_cache() {
    let (h, r) = pairs(20);
    let mut offline = BertScorer::offline(model(), BertCache::new());
    let err = offline.score(&h, &r).unwrap_err();
    assert!(matches!(err, MetricError::Sidecar(SidecarError::Unavailable { missing: 20 })));
    assert!(err.to_string().contains("offline"));

    let (addr, _) = start_stub();
    let mut online = BertScorer::with_sidecar(SidecarClient::connect(&addr, Duration::from_secs(10)).unwrap(), BertCache::new());
    let want = online.score(&h, &r).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bert.jsonl");
    online.cache().save(&path).unwrap();
    let loaded = BertCache::load(&path).unwrap();
    assert_eq!(loaded.len(), 20);
    let mut offline = BertScorer::offline(model(), loaded);
    assert_eq!(offline.score(&h, &r).unwrap(), want);
    // a different model id misses every key
    let mut other = BertScorer::offline(
        ModelInfo { rescale_with_baseline: false, ..model() },
        BertCache::load(&path).unwrap(),
    );
    assert!(other.score(&h, &r).is_err());
}

#[test]
fn cache_keys_separate_fields() {
    let m = model();
    assert_ne!(cache_key(&m, "ab", "c"), cache_key(&m, "a", "bc"));
    assert_eq!(cache_key(&m, "a", "b").len(), 64);
}

#[test]
fn corrupt_cache_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bert.jsonl");
    let good = format!("{{\"key\":\"{}\",\"precision\":0.5,\"recall\":0.5,\"f1\":0.5}}\n", "0".repeat(64));
    std::fs::write(&path, format!("{good}{good}{{\"key\":\"x\",\"prec")).unwrap();
    match BertCache::load(&path) {
        Err(SidecarError::Cache { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(BertCache::load(&dir.path().join("missing.jsonl")).unwrap().is_empty());
}

/// A server that sends the hello line and then the given canned response
/// lines for any batch.
fn scripted(responses: &'static [&'static str]) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut w = stream.try_clone().unwrap();
        writeln!(w, "{}", hello_line(&model())).unwrap();
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        for r in responses {
            writeln!(w, "{r}").unwrap();
        }
        w.flush().unwrap();
    });
    addr
}

#[test]
fn protocol_violations_are_errors() {
    let batch = [("a", "b"), ("c", "d")];
    let connect = |addr: &str| SidecarClient::connect(addr, Duration::from_secs(10)).unwrap();

    let mut c = connect(&scripted(&[r#"{"id":0,"precision":1,"recall":1,"f1":1}"#, r#"{"id":7,"precision":1,"recall":1,"f1":1}"#]));
    assert!(matches!(c.score_batch(&batch), Err(SidecarError::IdMismatch(_))));

    let mut c = connect(&scripted(&[r#"{"id":0,"precision":1,"recall":1,"f1":1}"#, r#"{"id":0,"precision":1,"recall":1,"f1":1}"#]));
    assert!(matches!(c.score_batch(&batch), Err(SidecarError::IdMismatch(_))));

    let mut c = connect(&scripted(&[r#"{"id":1,"error":"out of memory"}"#]));
    assert!(matches!(c.score_batch(&batch), Err(SidecarError::Remote { id: 1, .. })));

    let mut c = connect(&scripted(&[r#"{"id":0,"precision":1,"recall":1,"f1":1}"#]));
    assert!(matches!(c.score_batch(&batch), Err(SidecarError::Closed { received: 1, expected: 2 })));

    let mut c = connect(&scripted(&["not json"]));
    assert!(matches!(c.score_batch(&batch), Err(SidecarError::BadResponse { .. })));
}

#[test]
fn missing_sidecar_is_a_connect_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = SidecarClient::connect(&format!("127.0.0.1:{port}"), Duration::from_secs(1)).unwrap_err();
    assert!(matches!(err, SidecarError::Connect { .. }));
    assert!(matches!(SidecarClient::spawn("/nonexistent/sidecar", &[]), Err(SidecarError::Spawn { .. })));
}

#[test]
fn child_process_sidecar() {
    let mut client = SidecarClient::spawn(env!("CARGO_BIN_EXE_stub-sidecar"), &[]).unwrap();
    assert_eq!(client.model().model_id, "stub-chrf");
    let got = client.score_batch(&[("the monk", "the monk"), ("a cat", "the dog")]).unwrap();
    assert_eq!(got, vec![stub_scores("the monk", "the monk"), stub_scores("a cat", "the dog")]);
    assert_eq!(got[0].f1, 1.0);
}

#[test]
fn in_process_stub_scorer() {
    let mut s = BertScorer::stub();
    let out = s.score(&["same", "other words"], &["same", "different text"]).unwrap();
    assert_eq!(out.f1[0], 1.0);
    assert!(out.f1[1] < 1.0);
    assert!((out.mean_f1 - (out.f1[0] + out.f1[1]) / 2.0).abs() < 1e-12);
}
