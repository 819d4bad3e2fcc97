//! Regenerates the KB and dedup fixtures under `fixtures/`.
//!
//! * `kb/synthetic_1000.jsonl`: declaration dump for retrieval tests.
//! * `kb/mixed_200.jsonl`: dump spanning listed and unlisted namespaces.
//! * `dedup/corpus_50.jsonl` + `dedup/manifest.json`: 40 distinct problems
//!   and 10 planted duplicates, with every pairwise cosine checked here.

use std::path::{Path, PathBuf};

use ecp_core::eval::normalize_text;
use ecp_core::kb::{cosine, HashEmbedder, DEFAULT_ALLOWLIST};
use ecp_core::kb::Embedder;
use ecp_core::problem::{save_corpus, ProblemMetadata};
use ecp_core::{AnswerConstructionTask, DatasetRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const STEMS: &[&str] = &[
    "gcd", "lcm", "add", "mul", "sub", "div", "mod", "pow", "sqrt", "abs", "card", "sum", "prod", "succ", "pred",
    "dvd", "prime", "factorial", "choose", "digits", "log", "floor", "ceil", "max", "min", "range", "image", "filter",
    "map", "fold", "le", "lt", "cast", "coe", "inv", "neg", "norm", "exp", "sin", "cos",
];
const SUFFIXES: &[&str] = &[
    "", "_comm", "_assoc", "_zero", "_one", "_self", "_le", "_lt", "_pos", "_nonneg", "_eq_iff", "_mono", "_succ",
    "_add", "_mul", "_left", "_right", "_def", "_apply", "_cancel",
];
const KINDS: &[&str] = &["theorem", "def", "lemma", "abbrev", "instance", "structure"];

fn dump_line(name: &str, kind: &str, signature: &str, doc: Option<&str>) -> String {
    let mut v = json!({ "name": name, "kind": kind, "signature": signature });
    if let Some(d) = doc {
        v["doc"] = json!(d);
    }
    v.to_string()
}

fn write_lines(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn synthetic_kb(rng: &mut ChaCha8Rng) -> Vec<String> {
    let namespaces = ["Nat", "Int", "Real", "Finset", "Set", "Complex", "Polynomial", "List", "Rat", "Nat.Prime"];
    let mut names = std::collections::BTreeSet::new();
    names.insert("Nat.gcd".to_string());
    while names.len() < 1000 {
        let ns = namespaces.choose(rng).unwrap();
        let stem = STEMS.choose(rng).unwrap();
        let suffix = SUFFIXES.choose(rng).unwrap();
        names.insert(format!("{ns}.{stem}{suffix}"));
    }
    let mut names: Vec<String> = names.into_iter().collect();
    names.shuffle(rng);
    names
        .iter()
        .map(|n| {
            let kind = KINDS.choose(rng).unwrap();
            let arity = rng.gen_range(1..4);
            let args: Vec<String> = (0..arity).map(|i| format!("(x{i} : α)")).collect();
            let sig = format!("{} : {} = {}", args.join(" "), n.rsplit('.').next().unwrap(), rng.gen_range(0..100));
            let doc = rng.gen_bool(0.3).then(|| format!("Fact number {} about {}.", rng.gen_range(0..1000), n));
            dump_line(n, kind, &sig, doc.as_deref())
        })
        .collect()
}

fn mixed_kb(rng: &mut ChaCha8Rng) -> Vec<String> {
    let unlisted = [
        "CategoryTheory", "MeasureTheory", "AlgebraicGeometry", "Lean", "Mathlib", "Std", "Aesop", "NatCast",
        "Natural", "RealInnerProductSpace", "SetLike", "nat",
    ];
    let listed: Vec<&str> = DEFAULT_ALLOWLIST.to_vec();
    let mut names = std::collections::BTreeSet::new();
    // top-level names have an empty namespace
    for top in ["foo_bar", "Nat", "id_comp"] {
        names.insert(top.to_string());
    }
    while names.len() < 200 {
        let first = if rng.gen_bool(0.5) { listed.choose(rng).unwrap() } else { unlisted.choose(rng).unwrap() };
        let depth = rng.gen_range(0..3);
        let mut name = first.to_string();
        for _ in 0..depth {
            let inner = if rng.gen_bool(0.5) { listed.choose(rng).unwrap() } else { unlisted.choose(rng).unwrap() };
            name.push('.');
            name.push_str(inner);
        }
        name.push('.');
        name.push_str(STEMS.choose(rng).unwrap());
        name.push_str(SUFFIXES.choose(rng).unwrap());
        names.insert(name);
    }
    let mut names: Vec<String> = names.into_iter().collect();
    names.shuffle(rng);
    names.iter().map(|n| dump_line(n, KINDS.choose(rng).unwrap(), "Prop", None)).collect()
}

const PROBLEMS: [&str; 40] = [
    "Find all positive integers n such that n squared plus one is divisible by n plus one.",
    "Determine every prime p for which two to the power p minus one is a multiple of p squared.",
    "How many ordered pairs of integers satisfy x squared plus y squared equals fifty?",
    "Find the smallest positive integer whose digits multiply to two thousand and sixteen.",
    "Compute the number of subsets of a ten element set with an even number of elements.",
    "Find all real functions f with f of x plus y equal to f of x plus f of y and f continuous.",
    "What is the largest area of a rectangle inscribed in a circle of radius three?",
    "Find the remainder when three to the power two thousand is divided by thirteen.",
    "Determine all triples of primes whose product is five times their sum.",
    "Count lattice paths from the origin to the point six comma four using unit steps right and up.",
    "Find every integer k for which the quadratic x squared minus k x plus nine has integer roots.",
    "Evaluate the infinite sum of one over n times n plus one for n from one onwards.",
    "Which positive integers can be written as the difference of two perfect squares?",
    "Find the minimum of a plus b over the square root of a b for positive reals a and b.",
    "How many trailing zeros does one hundred factorial have in base ten?",
    "Find all polynomials P with real coefficients such that P of x squared equals P of x squared.",
    "Determine the number of divisors of seven hundred twenty.",
    "Find the sum of all two digit numbers that are divisible by both of their digits.",
    "A fair die is rolled three times; find the probability that the rolls strictly increase.",
    "Find the least n such that any n points in a unit square contain two within distance one half.",
    "Solve the equation two to the x plus three to the x equals five to the x over the reals.",
    "Find all natural numbers m for which m factorial plus one is a perfect square below ten thousand.",
    "Compute the determinant of the four by four matrix with entries i plus j.",
    "Determine the greatest common divisor of all numbers of the form n to the fifth minus n.",
    "Find the number of ways to tile a two by ten board with dominoes.",
    "Find every positive integer equal to the sum of the cubes of its decimal digits.",
    "What is the maximum number of regions that five lines can divide the plane into?",
    "Find all pairs of positive integers a and b with a factorial plus b factorial equal to a power of two.",
    "Compute the sum of the reciprocals of the divisors of twenty eight.",
    "Determine the set of real x for which the absolute value of x minus one is less than two x.",
    "Find the coefficient of x cubed in the expansion of one plus two x to the seventh.",
    "How many integers between one and one thousand are coprime to thirty?",
    "Find the smallest prime that divides some number of the form n squared plus n plus forty one.",
    "Determine the period of the decimal expansion of one seventh.",
    "Find the volume of the tetrahedron with vertices at the origin and the three unit vectors.",
    "Find all integers n for which n cubed minus n is divisible by twenty four.",
    "What is the expected number of fixed points of a random permutation of eight elements?",
    "Find the value of the sine of eighteen degrees in closed form.",
    "Determine all complex numbers z with z to the fourth equal to minus sixteen.",
    "Find the number of binary strings of length twelve with no two consecutive ones.",
];

/// Small rewrites, largest first; the first one that stays above the
/// threshold (but is not an exact duplicate) is used.
const EDITS: &[(&str, &str)] = &[
    ("Find all", "Determine all"),
    ("Find every", "Determine every"),
    ("Find the", "Determine the"),
    ("Determine", "Find"),
    ("How many", "Count how many"),
    ("What is", "Compute"),
    (" such that ", " so that "),
    ("?", "."),
    (".", "!"),
];

fn record(id: String, statement: &str) -> DatasetRecord {
    let formal = format!("import Mathlib\n\nabbrev {id}_answer : ℕ := sorry\n\ntheorem {id} : {id}_answer = {id}_answer := by\n  sorry\n");
    let task = AnswerConstructionTask::new(
        id.clone(),
        statement.into(),
        formal,
        format!("{id}_answer"),
        "ℕ".into(),
        None,
        ProblemMetadata::default(),
    )
    .unwrap();
    DatasetRecord {
        task,
        informal_solution: None,
        extra: Default::default(),
        extra_metadata: Default::default(),
    }
}

fn dedup_corpus(rng: &mut ChaCha8Rng, out: &Path) {
    let emb = HashEmbedder::default();
    let threshold = 0.90;
    let cos = |a: &str, b: &str| cosine(&emb.embed_vec(a), &emb.embed_vec(b));

    let mut variants: Vec<(usize, String, bool)> = Vec::new();
    for base in 0..10 {
        let original = PROBLEMS[base];
        if base < 2 {
            let dup = if base == 0 { original.to_uppercase() } else { original.replace(' ', "  ") };
            variants.push((base, dup, true));
            continue;
        }
        let para = EDITS
            .iter()
            .filter(|(from, _)| original.contains(from))
            .map(|(from, to)| original.replacen(from, to, 1))
            .find(|p| normalize_text(p) != normalize_text(original) && cos(original, p) >= threshold)
            .unwrap_or_else(|| panic!("no paraphrase of problem {base} stays above {threshold}"));
        variants.push((base, para, false));
    }

    // Originals keep their relative order; each variant lands somewhere after
    // its original.
    let mut order: Vec<(String, String)> = PROBLEMS.iter().enumerate().map(|(i, p)| (format!("p{i:02}"), p.to_string())).collect();
    for (base, text, _) in &variants {
        let at = order.iter().position(|(id, _)| *id == format!("p{base:02}")).unwrap();
        let pos = rng.gen_range(at + 1..=order.len());
        order.insert(pos, (format!("p{base:02}_dup"), text.clone()));
    }

    let texts: Vec<&str> = order.iter().map(|(_, t)| t.as_str()).collect();
    let mut planted = Vec::new();
    let mut max_other = 0.0f64;
    for i in 0..texts.len() {
        for j in i + 1..texts.len() {
            let c = cos(texts[i], texts[j]);
            let pair = order[j].0 == format!("{}_dup", order[i].0);
            if pair {
                planted.push(json!({
                    "kept": order[i].0, "duplicate": order[j].0,
                    "exact": normalize_text(texts[i]) == normalize_text(texts[j]),
                    "cosine": c,
                }));
                assert!(c >= threshold, "{} / {}: {c}", order[i].0, order[j].0);
            } else {
                max_other = max_other.max(c);
            }
        }
    }
    assert_eq!(planted.len(), 10);
    assert!(max_other < threshold, "unplanted pair at {max_other}");

    let records: Vec<DatasetRecord> = order.iter().map(|(id, t)| record(id.clone(), t)).collect();
    save_corpus(&records, &out.join("corpus_50.jsonl")).unwrap();
    let manifest = json!({
        "embedder_id": emb.id(),
        "threshold": threshold,
        "survivors_at_threshold": 40,
        "survivors_at_one": 48,
        "planted": planted,
        "max_unplanted_cosine": max_other,
    });
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap() + "\n").unwrap();
}

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_630);
    std::fs::create_dir_all(root.join("kb")).unwrap();
    std::fs::create_dir_all(root.join("dedup")).unwrap();
    write_lines(&root.join("kb/synthetic_1000.jsonl"), &synthetic_kb(&mut rng));
    write_lines(&root.join("kb/mixed_200.jsonl"), &mixed_kb(&mut rng));
    dedup_corpus(&mut rng, &root.join("dedup"));
    println!("wrote fixtures under {}", root.display());
}
