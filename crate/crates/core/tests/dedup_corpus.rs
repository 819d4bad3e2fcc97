//! The 50-record dedup corpus with its planted duplicate pairs.

use std::path::PathBuf;

use ecp_core::eval::{dedup, normalize_text, DedupConfig, DedupPass};
use ecp_core::kb::{cosine, Embedder, HashEmbedder};
use ecp_core::problem::load_corpus;
use serde_json::Value;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/dedup")
}

#[test]
fn planted_pairs_are_confirmed_by_exhaustive_cosines() {
    let records = load_corpus(&dir().join("corpus_50.jsonl")).unwrap();
    assert_eq!(records.len(), 50);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir().join("manifest.json")).unwrap()).unwrap();
    let emb = HashEmbedder::default();
    assert_eq!(manifest["embedder_id"], emb.id());
    let vecs: Vec<Vec<f32>> = records.iter().map(|r| emb.embed_vec(&r.task.informal_statement)).collect();
    let ids: Vec<&str> = records.iter().map(|r| r.task.id.as_str()).collect();

    let mut above = Vec::new();
    for i in 0..50 {
        for j in i + 1..50 {
            if cosine(&vecs[i], &vecs[j]) >= 0.90 {
                above.push((ids[i].to_string(), ids[j].to_string()));
            }
        }
    }
    let mut planted: Vec<(String, String)> = manifest["planted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p["kept"].as_str().unwrap().to_string(), p["duplicate"].as_str().unwrap().to_string()))
        .collect();
    planted.sort();
    above.sort();
    assert_eq!(above, planted);
    assert_eq!(planted.len(), 10);
}

#[test]
fn dedup_keeps_forty_at_point_nine_and_drops_only_exact_at_one() {
    let records = load_corpus(&dir().join("corpus_50.jsonl")).unwrap();
    let emb = HashEmbedder::default();
    let cfg = DedupConfig::for_embedder(&emb);
    assert_eq!(cfg.similarity_threshold, 0.90);

    let (kept, outcome) = dedup(&records, &cfg, &emb).unwrap();
    assert_eq!(kept.len(), 40);
    assert!(kept.iter().all(|r| !r.task.id.ends_with("_dup")));

    let strict = DedupConfig { similarity_threshold: 1.0, ..cfg };
    let (kept, outcome_strict) = dedup(&records, &strict, &emb).unwrap();
    assert_eq!(kept.len(), 48);
    assert!(outcome_strict.groups.iter().all(|g| g.pass == DedupPass::Exact));
    for g in &outcome_strict.groups {
        for &r in &g.removed {
            let (a, b) = (&records[g.kept].task.informal_statement, &records[r].task.informal_statement);
            assert_eq!(normalize_text(a), normalize_text(b));
        }
    }
    let exact: usize = outcome.groups.iter().filter(|g| g.pass == DedupPass::Exact).map(|g| g.removed.len()).sum();
    assert_eq!(exact, 2);
}
