use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udprompt_gateway::{cache_key, CachedCompletion, CompletionCache, GatewayError, ModelConfig, Status};

fn entry(prompt: &str, text: &str) -> CachedCompletion {
    CachedCompletion {
        key: cache_key(&ModelConfig::new("m", "http://x"), prompt),
        text: text.to_owned(),
        status: if text.is_empty() { Status::Empty } else { Status::Ok },
        response_hash: "ab".repeat(32),
    }
}

fn random_cache(rng: &mut ChaCha8Rng, n: usize, tag: &str) -> CompletionCache {
    let c = CompletionCache::new();
    for i in 0..n {
        let text = match rng.gen_range(0..4) {
            0 => String::new(),
            1 => "line one\nline \"two\" ⲁⲩⲱ".to_owned(),
            _ => format!("translation {}", rng.gen::<u32>()),
        };
        c.insert(entry(&format!("{tag}{i}"), &text));
    }
    c
}

#[test]
fn export_then_import_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let a = random_cache(&mut rng, 50, "a");
    assert_eq!(a.export(&path).unwrap(), 50);
    let b = CompletionCache::new();
    let summary = b.import(&path).unwrap();
    assert_eq!((summary.added, summary.unchanged), (50, 0));
    assert_eq!(a.entries(), b.entries());
    // export is canonical
    let path2 = dir.path().join("c2.jsonl");
    b.export(&path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    // re-import of identical content changes nothing
    assert_eq!(b.import(&path).unwrap().unchanged, 50);
    assert_eq!(b.len(), 50);
}

#[test]
fn disjoint_caches_merge_to_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (random_cache(&mut rng, 20, "a"), random_cache(&mut rng, 30, "b"));
    let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    a.export(&pa).unwrap();
    b.export(&pb).unwrap();
    let merged = CompletionCache::new();
    merged.import(&pa).unwrap();
    merged.import(&pb).unwrap();
    let mut want = a.entries();
    want.extend(b.entries());
    want.sort_by(|x, y| x.key.cmp(&y.key));
    assert_eq!(merged.entries(), want);
}

#[test]
fn differing_text_is_a_conflict_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let incoming = CompletionCache::new();
    incoming.insert(entry("p1", "same"));
    incoming.insert(entry("p2", "new text"));
    incoming.export(&path).unwrap();
    let existing = CompletionCache::new();
    existing.insert(entry("p2", "old text"));
    let err = existing.import(&path).unwrap_err();
    let conflict_line = incoming.entries().iter().position(|e| e.text == "new text").unwrap() + 1;
    match err {
        GatewayError::CacheConflict { line, .. } => assert_eq!(line, conflict_line),
        other => panic!("{other:?}"),
    }
    // nothing merged
    assert_eq!(existing.entries(), vec![entry("p2", "old text")]);
}

#[test]
fn corrupt_line_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let c = random_cache(&mut ChaCha8Rng::seed_from_u64(3), 5, "x");
    c.export(&path).unwrap();
    let mut lines: Vec<String> = std::fs::read_to_string(&path).unwrap().lines().map(str::to_owned).collect();
    lines[2] = "{not json".into();
    std::fs::write(&path, lines.join("\n")).unwrap();
    match CompletionCache::new().import(&path) {
        Err(GatewayError::CorruptCache { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Cutting an exported file anywhere short of its full content is
    /// detected, and a failed import leaves the cache unchanged.
    #[test]
    fn truncation_is_detected(seed in any::<u64>(), n in 0usize..12, cut_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        random_cache(&mut rng, n, "t").export(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let content_len = bytes.len() - 1; // the final newline carries no data
        let cut = ((content_len as f64) * cut_frac) as usize;
        prop_assume!(cut < content_len);
        // truncated text may end inside a multi-byte character
        std::fs::write(&path, &bytes[..cut]).unwrap();
        let target = CompletionCache::new();
        target.insert(entry("pre-existing", "keep me"));
        let result = target.import(&path);
        let rejected = matches!(result, Err(GatewayError::CorruptCache { .. }) | Err(GatewayError::Io { .. }));
        prop_assert!(rejected, "cut at {} of {} accepted", cut, bytes.len());
        prop_assert_eq!(target.entries(), vec![entry("pre-existing", "keep me")]);
    }
}
