//! Retrieval and namespace filtering against brute-force oracles on the
//! bundled dumps.

use std::path::PathBuf;

use ecp_core::kb::{
    default_allowlist, filter_namespaces, ingest, levenshtein, Embedder, HashEmbedder, KbIndex, NamespaceMatch,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

/// Textbook full-matrix edit distance over chars.
fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn random_query(rng: &mut ChaCha8Rng, names: &[String]) -> String {
    let mut chars: Vec<char> = names[rng.gen_range(0..names.len())].chars().collect();
    for _ in 0..rng.gen_range(0..4) {
        let at = rng.gen_range(0..chars.len());
        match rng.gen_range(0..3) {
            0 => chars[at] = (b'a' + rng.gen_range(0..26)) as char,
            1 => {
                chars.remove(at);
            }
            _ => chars.insert(at, '_'),
        }
    }
    chars.into_iter().collect()
}

#[test]
fn semantic_and_edit_distance_match_brute_force() {
    let report = ingest(&fixture("kb/synthetic_1000.jsonl")).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    assert_eq!(report.entries.len(), 1000);
    let emb = HashEmbedder::default();
    let index = KbIndex::build(report.entries.clone(), &emb).unwrap();
    let names: Vec<String> = report.entries.iter().map(|e| e.full_name.clone()).collect();
    let vectors: Vec<Vec<f32>> = report.entries.iter().map(|e| emb.embed_vec(&e.embed_text())).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let q = random_query(&mut rng, &names);
        let k = rng.gen_range(1..=10);

        let qv = emb.embed(&q).unwrap();
        let mut sem: Vec<(f64, &str)> = vectors
            .iter()
            .zip(&names)
            .map(|(v, n)| (qv.iter().zip(v).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum(), n.as_str()))
            .collect();
        sem.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let got: Vec<(f64, &str)> = index
            .query_semantic(&emb, &q, k)
            .unwrap()
            .iter()
            .map(|s| (s.score, names.iter().find(|n| **n == s.entry.full_name).unwrap().as_str()))
            .collect();
        assert_eq!(got, sem[..k], "semantic query {q}");

        let mut lev: Vec<(usize, &str)> = names.iter().map(|n| (dp_levenshtein(&q, n), n.as_str())).collect();
        lev.sort();
        let got: Vec<(usize, String)> =
            index.query_edit_distance(&q, k).into_iter().map(|s| (s.score, s.entry.full_name)).collect();
        let want: Vec<(usize, String)> = lev[..k].iter().map(|(d, n)| (*d, n.to_string())).collect();
        assert_eq!(got, want, "edit-distance query {q}");
    }
}

#[test]
fn misspelled_gcd_is_two_edits_away() {
    assert_eq!(dp_levenshtein("Nat.gdc", "Nat.gcd"), 2);
    assert_eq!(levenshtein("Nat.gdc", "Nat.gcd"), 2);
    let report = ingest(&fixture("kb/synthetic_1000.jsonl")).unwrap();
    let index = KbIndex::build(report.entries, &HashEmbedder::default()).unwrap();
    let top = &index.query_edit_distance("Nat.gdc", 1)[0];
    assert_eq!((top.entry.full_name.as_str(), top.score), ("Nat.gcd", 2));
}

#[test]
fn namespace_filter_keeps_exactly_listed_first_components() {
    let report = ingest(&fixture("kb/mixed_200.jsonl")).unwrap();
    assert_eq!(report.entries.len(), 200);
    let allow = default_allowlist();
    let kept = filter_namespaces(&report.entries, &allow, NamespaceMatch::FirstComponent);

    let oracle: Vec<&str> = report
        .entries
        .iter()
        .map(|e| e.full_name.as_str())
        .filter(|name| match name.rfind('.') {
            None => false,
            Some(dot) => {
                let first = name[..dot].split('.').next().unwrap();
                allow.iter().any(|a| a == first)
            }
        })
        .collect();
    let got: Vec<&str> = kept.iter().map(|e| e.full_name.as_str()).collect();
    assert_eq!(got, oracle);
    assert!(!kept.is_empty() && kept.len() < 200, "fixture must span both sides");

    let again = filter_namespaces(&kept, &allow, NamespaceMatch::FirstComponent);
    assert_eq!(again, kept);
}
