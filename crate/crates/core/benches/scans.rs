//! Parallel (rayon) versus sequential scans over the bundled 1,000-entry KB.
//!
//! `cargo bench -p ecp-core --bench scans`. The sequential side is the same
//! kernel driven by a plain iterator, which is what `--no-default-features`
//! builds use everywhere.

use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ecp_core::eval::{dedup_texts, DedupConfig};
use ecp_core::kb::{cosine, ingest, levenshtein, Embedder, HashEmbedder, KbEntry, KbIndex};
use ecp_core::par;

fn entries() -> Vec<KbEntry> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/kb/synthetic_1000.jsonl");
    ingest(&path).expect("bundled KB fixture").entries
}

fn pools() -> [(&'static str, usize); 2] {
    let all = std::thread::available_parallelism().map_or(1, usize::from);
    [("one_thread", 1), ("all_threads", all)]
}

fn edit_distance(c: &mut Criterion) {
    let entries = entries();
    let mut g = c.benchmark_group("edit_distance_scan");
    for query in ["Nat.gdc", "Finset.sum_range_succ_comm"] {
        g.bench_with_input(BenchmarkId::new("sequential", query), query, |b, q| {
            b.iter(|| entries.iter().map(|e| levenshtein(q, &e.full_name)).collect::<Vec<_>>())
        });
        g.bench_with_input(BenchmarkId::new("parallel", query), query, |b, q| {
            b.iter(|| par::map(&entries, |e| levenshtein(q, &e.full_name)))
        });
    }
    g.finish();
}

fn semantic(c: &mut Criterion) {
    let entries = entries();
    let emb = HashEmbedder::default();
    let vectors: Vec<Vec<f32>> = entries.iter().map(|e| emb.embed_vec(&e.embed_text())).collect();
    let q = emb.embed("sum of the divisors of a natural number").unwrap();
    let mut g = c.benchmark_group("semantic_scan");
    g.bench_function("sequential", |b| b.iter(|| vectors.iter().map(|v| cosine(&q, v)).collect::<Vec<_>>()));
    g.bench_function("parallel", |b| b.iter(|| par::map(&vectors, |v| cosine(&q, v))));
    g.finish();
}

fn index_queries(c: &mut Criterion) {
    let emb = HashEmbedder::default();
    let index = KbIndex::build(entries(), &emb).unwrap();
    let mut g = c.benchmark_group("kb_query");
    for (label, jobs) in pools() {
        g.bench_function(label, |b| {
            par::with_pool(jobs, || {
                b.iter(|| {
                    let sem = index.query_semantic(&emb, "greatest common divisor", 5).unwrap();
                    let lev = index.query_edit_distance("Nat.gdc", 5);
                    black_box((sem, lev))
                })
            })
        });
    }
    g.finish();
}

fn dedup(c: &mut Criterion) {
    let texts: Vec<String> = entries().iter().map(KbEntry::embed_text).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let emb = HashEmbedder::default();
    let cfg = DedupConfig::for_embedder(&emb);
    let mut g = c.benchmark_group("dedup_1000");
    g.sample_size(20);
    for (label, jobs) in pools() {
        g.bench_function(label, |b| par::with_pool(jobs, || b.iter(|| dedup_texts(&refs, &cfg, &emb).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, edit_distance, semantic, index_queries, dedup);
criterion_main!(benches);
