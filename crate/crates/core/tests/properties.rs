//! Property tests for the invariants the pipeline relies on.

mod common;

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use common::*;
use ecp_core::autoformalize::{autoformalize, AutoformalizeConfig, InformalProblem};
use ecp_core::conjecture::{conjecture, triviality_check, ConjectureConfig, RoundResult, TrivialityReason, DEFAULT_ECHO_THRESHOLD};
use ecp_core::enumerate::{enumerate, EnumerationConfig, EnumerationStatus};
use ecp_core::eval::{
    dedup_texts, normalize_text, union_accuracy, DedupConfig, DedupPass, Equivalence, Method, MethodResult, ProofSummary,
    ReportError, ReportRow, RunReport, SolvedKind,
};
use ecp_core::kb::{cosine, filter_namespaces, levenshtein, namespace_allowed, HashEmbedder, KbEntry, DeclKind, NamespaceMatch};
use ecp_core::lean::LeanVerdict;
use ecp_core::llm::{BackendConfig, ChatBackend, ChatMessage, ModelRouter, Role, ScriptedBackend};
use ecp_core::prompts::PromptSet;
use ecp_core::sandbox::SandboxStatus;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..=a.len() {
        d[i][0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = (d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1])).min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

proptest! {
    #[test]
    fn levenshtein_is_a_metric(a in "[ab.Nℕ]{0,8}", b in "[ab.Nℕ]{0,8}", c in "[ab.Nℕ]{0,8}") {
        let d = |x: &str, y: &str| levenshtein(x, y);
        prop_assert_eq!(d(&a, &b), dp_levenshtein(&a, &b));
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        let (la, lb) = (a.chars().count(), b.chars().count());
        prop_assert!(d(&a, &b) >= la.abs_diff(lb) && d(&a, &b) <= la.max(lb));
    }

    #[test]
    fn namespace_filter_is_idempotent(
        names in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["Nat", "Real", "Cat", "Foo", "Set", "x", "y"]), 1..4), 0..40),
        allow in prop::collection::btree_set(prop::sample::select(vec!["Nat", "Real", "Set", "Foo"]), 0..4),
    ) {
        let entries: Vec<KbEntry> = names
            .iter()
            .map(|parts| KbEntry::new(parts.join("."), DeclKind::Theorem, "Prop", None))
            .collect();
        let allow: Vec<String> = allow.into_iter().map(String::from).collect();
        let once = filter_namespaces(&entries, &allow, NamespaceMatch::FirstComponent);
        prop_assert_eq!(&filter_namespaces(&once, &allow, NamespaceMatch::FirstComponent), &once);
        prop_assert!(once.iter().all(|e| namespace_allowed(&e.namespace, &allow, NamespaceMatch::FirstComponent)));
        let mut it = entries.iter();
        prop_assert!(once.iter().all(|k| it.any(|e| e == k)), "not a subsequence");
        // with undotted allowlist entries both match modes agree
        prop_assert_eq!(filter_namespaces(&entries, &allow, NamespaceMatch::AnyPrefix), once);
    }
}

fn result_of(method: Method, construction: &BTreeSet<String>, e2e: &BTreeSet<String>, total: usize) -> MethodResult {
    let mut r = MethodResult::new(method);
    r.attempted = (0..total).map(|i| format!("t{i}")).collect();
    r.solved_construction = construction.clone();
    r.solved_end_to_end = e2e.clone();
    r
}

#[test]
fn union_accuracy_matches_set_oracle() {
    let ids = |v: &[u32]| v.iter().map(|i| format!("t{i}")).collect::<BTreeSet<_>>();
    let a = result_of(Method::Cot, &ids(&[1, 2]), &BTreeSet::new(), 4);
    let b = result_of(Method::Ecp, &ids(&[2, 3]), &BTreeSet::new(), 4);
    assert_eq!(union_accuracy(&a, &b, SolvedKind::Construction, 4), 0.75);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let total = rng.gen_range(0..30usize);
        let pick = |rng: &mut ChaCha8Rng| -> BTreeSet<String> {
            (0..total).filter(|_| rng.gen_bool(0.4)).map(|i| format!("t{i}")).collect()
        };
        let (sa, sb) = (pick(&mut rng), pick(&mut rng));
        let a = result_of(Method::Cot, &sa, &BTreeSet::new(), total);
        let b = result_of(Method::Ecp, &sb, &BTreeSet::new(), total);
        let got = union_accuracy(&a, &b, SolvedKind::Construction, total);
        let want = if total == 0 { 0.0 } else { sa.union(&sb).count() as f64 / total as f64 };
        assert_eq!(got, want);
        let max = sa.len().max(sb.len()) as f64 / total.max(1) as f64;
        assert!(got >= max);
        assert!(got <= 1.0);
    }
}

// ---- triviality ----

const RENAMES: [(&str, &str); 10] =
    [("x", "y"), ("a", "b"), ("u", "v"), ("m", "n"), ("p", "q"), ("s", "t"), ("i", "j"), ("k", "l"), ("c", "d"), ("α", "β")];

fn echo_with(v: (&str, &str), spaced: bool) -> String {
    let (x, y) = v;
    if spaced {
        format!("{{ ( {x} , {y} ) : ℕ × ℕ |  {x} ^ 3 + {y} ^ 3   =  {x} ^ 2 + 42 * {x} * {y} + {y} ^ 2 }}")
    } else {
        format!("{{({x},{y}) : ℕ × ℕ | {x}^3+{y}^3 = {x}^2+42*{x}*{y}+{y}^2}}")
    }
}

#[test]
fn triviality_verdicts_survive_twenty_mutations() {
    let task = cubic_task();
    let base_echo = triviality_check(&task, CUBIC_ECHO, DEFAULT_ECHO_THRESHOLD);
    let base_set = triviality_check(&task, CUBIC_SET, DEFAULT_ECHO_THRESHOLD);
    assert_eq!(base_echo.reason, TrivialityReason::EchoesPredicate);
    assert!(base_set.legal);
    let mut cases = 0;
    for v in RENAMES {
        for spaced in [false, true] {
            let echo = triviality_check(&task, &echo_with(v, spaced), DEFAULT_ECHO_THRESHOLD);
            assert_eq!(echo, base_echo, "{v:?} spaced={spaced}");
            cases += 1;
        }
    }
    assert_eq!(cases, 20);
    for layout in ["{(1,7),(7,1),(22,22)}", "{ (1, 7) , (7, 1) , (22, 22) }", "{(1, 7),\n  (7, 1),\n  (22, 22)}"] {
        assert_eq!(triviality_check(&task, layout, DEFAULT_ECHO_THRESHOLD), base_set);
    }
}

proptest! {
    #[test]
    fn triviality_ignores_spacing(spaces in prop::collection::vec(1usize..4, 40)) {
        let task = cubic_task();
        let base = triviality_check(&task, CUBIC_ECHO, DEFAULT_ECHO_THRESHOLD);
        let mut n = 0;
        let respaced: String = CUBIC_ECHO
            .split(' ')
            .map(|w| { n += 1; format!("{w}{}", " ".repeat(spaces[n % spaces.len()])) })
            .collect();
        prop_assert_eq!(triviality_check(&task, &respaced, DEFAULT_ECHO_THRESHOLD), base);
    }
}

// ---- budgets and transcripts, 100 seeds per stage ----

fn prompts() -> PromptSet {
    PromptSet::builtin()
}

#[test]
fn enumerate_budget_holds_under_random_failures() {
    for seed in 0..100u64 {
        let rng = Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(seed)));
        let r1 = rng.clone();
        let model = ScriptedBackend::new(move |req| {
            let turn = req.messages.iter().filter(|m| m.role == Role::Assistant).count();
            Ok(match r1.lock().unwrap().gen_range(0..3) {
                0 => ChatMessage::assistant("No code this time,\nsorry."),
                1 => tool_call("print(1)", &format!("c{turn}")),
                _ => ChatMessage::assistant("```python\nprint(1)\n```"),
            })
        });
        let r2 = rng.clone();
        let sb = FnSandbox::new(move |_: &_| match r2.lock().unwrap().gen_range(0..5) {
            0 => sandbox_result(SandboxStatus::Ok, &["1", "2"]),
            1 => sandbox_result(SandboxStatus::Ok, &[]),
            2 => sandbox_result(SandboxStatus::Timeout, &[]),
            3 => sandbox_result(SandboxStatus::OutputOverflow, &["1"]),
            _ => sandbox_result(SandboxStatus::RuntimeError, &[]),
        });
        let out = enumerate(&cubic_task(), &model, &sb, &prompts(), &EnumerationConfig::default()).unwrap();
        assert!(out.attempts_used <= 3, "seed {seed}");
        assert_eq!(model.calls(), out.attempts_used);
        assert!(sb.runs() <= out.attempts_used);
        out.transcript.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(out.transcript.finished);
        let succeeded: Vec<usize> = out
            .attempts
            .iter()
            .filter(|a| a.result.as_ref().is_some_and(|r| r.status == SandboxStatus::Ok && !r.answers.is_empty()))
            .map(|a| a.attempt)
            .collect();
        match out.status {
            EnumerationStatus::Ok => assert_eq!(succeeded, [out.attempts_used]),
            _ => assert!(succeeded.is_empty() && out.answers.is_empty()),
        }
    }
}

#[test]
fn conjecture_budget_holds_under_random_failures() {
    let verifier = FnVerifier(|src: &str| if src.contains("Nat.bogus") { fails("unknown identifier 'Nat.bogus'") } else { LeanVerdict::ok() });
    for seed in 0..100u64 {
        let rng = Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(1000 + seed)));
        let model = ScriptedBackend::new(move |_| {
            Ok(match rng.lock().unwrap().gen_range(0..6) {
                0 => ChatMessage::assistant("I need more time\nto think."),
                1 => lean_reply(CUBIC_ECHO),
                2 => lean_reply("sorry"),
                3 | 4 => lean_reply("{(Nat.bogus, 1)}"),
                _ => lean_reply(CUBIC_SET),
            })
        });
        let out = conjecture(&cubic_task(), None, &model, &verifier, &prompts(), &ConjectureConfig::default()).unwrap();
        assert!(out.rounds_used <= 5 && out.rounds.len() == out.rounds_used, "seed {seed}");
        assert_eq!(model.calls(), out.rounds_used);
        out.transcript.validate().unwrap();
        let accepted: Vec<usize> =
            out.rounds.iter().filter(|r| r.result == RoundResult::Accepted).map(|r| r.round).collect();
        match &out.candidate {
            Some(c) => {
                assert_eq!(accepted, [out.rounds_used]);
                assert_eq!(c.expression, CUBIC_SET);
            }
            None => assert!(accepted.is_empty() && out.rounds_used == 5),
        }
    }
}

#[test]
fn autoformalize_budget_holds_under_random_failures() {
    let draft = |ok: bool| {
        lean_reply(&format!(
            "import Mathlib\n\nabbrev p_answer : ℕ := 1\n\n-- {}\ntheorem p : p_answer = 1 := by\n  sorry",
            if ok { "good" } else { "bad" }
        ))
    };
    let verifier = FnVerifier(|src: &str| if src.contains("-- good") { LeanVerdict::ok() } else { fails("unknown identifier 'foo'") });
    for seed in 0..100u64 {
        let rng = Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(2000 + seed)));
        let models = rng.lock().unwrap().gen_range(1..=3usize);
        let r1 = rng.clone();
        let drafter: Arc<dyn ChatBackend> =
            Arc::new(ScriptedBackend::new(move |_| Ok(draft(r1.lock().unwrap().gen_bool(0.3)))));
        let r2 = rng.clone();
        let judge: Arc<dyn ChatBackend> = Arc::new(ScriptedBackend::new(move |_| {
            let approve = r2.lock().unwrap().gen_bool(0.4);
            Ok(ChatMessage::assistant(format!("{{\"approve\": {approve}, \"feedback\": \"no\"}}")))
        }));
        let names: Vec<String> = (0..models).map(|i| format!("m{i}")).collect();
        let mut router = ModelRouter::new().route("judge", judge);
        for n in &names {
            router = router.route(n.clone(), drafter.clone());
        }
        let config = AutoformalizeConfig {
            models: names.iter().map(|m| BackendConfig { model_id: m.clone(), ..BackendConfig::default() }).collect(),
            judge: BackendConfig { model_id: "judge".into(), ..BackendConfig::default() },
            ..AutoformalizeConfig::default()
        };
        let problem = InformalProblem { id: "p".into(), informal: "One.".into(), solution: None, metadata: None };
        let result = autoformalize(&problem, &router, &verifier, None, &prompts(), &config);
        assert!(result.trace.iter().all(|m| m.iterations.len() <= 5), "seed {seed}");
        match &result.accepted {
            Some(a) => {
                let last = result.trace.last().unwrap();
                assert_eq!(last.model_id, a.model_id);
                let it = last.iterations.last().unwrap();
                assert_eq!(it.iteration, a.iteration);
                assert!(it.compile.as_ref().unwrap().success && it.judge.as_ref().unwrap().approve);
                assert!(result.trace[..result.trace.len() - 1].iter().all(|m| m.iterations.len() == 5));
            }
            None => {
                assert_eq!(result.trace.len(), models);
                assert!(result.trace.iter().all(|m| m.iterations.len() == 5));
            }
        }
    }
}

// ---- dedup ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn dedup_survivors_are_pairwise_distinct(
        texts in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["find", "all", "primes", "p", "such", "that", "Sum", "is", "odd"]), 2..8), 1..25),
        threshold in 0.5f64..=1.0,
    ) {
        let texts: Vec<String> = texts.iter().map(|w| w.join(" ")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let emb = HashEmbedder::default();
        let cfg = DedupConfig { similarity_threshold: threshold, ..DedupConfig::for_embedder(&emb) };
        let out = dedup_texts(&refs, &cfg, &emb).unwrap();
        let vecs: Vec<Vec<f32>> = texts.iter().map(|t| emb.embed_vec(t)).collect();
        for (i, &a) in out.survivors.iter().enumerate() {
            for &b in &out.survivors[i + 1..] {
                prop_assert!(cosine(&vecs[a], &vecs[b]) < threshold);
                prop_assert_ne!(normalize_text(&texts[a]), normalize_text(&texts[b]));
            }
        }
        let removed: usize = out.groups.iter().map(|g| g.removed.len()).sum();
        prop_assert_eq!(removed + out.survivors.len(), texts.len());
        for g in &out.groups {
            for &r in &g.removed {
                prop_assert!(g.kept < r);
                match g.pass {
                    DedupPass::Exact => prop_assert_eq!(normalize_text(&texts[g.kept]), normalize_text(&texts[r])),
                    DedupPass::Semantic => prop_assert!(cosine(&vecs[g.kept], &vecs[r]) >= threshold),
                }
            }
        }
    }
}

// ---- report aggregates ----

fn row(task: usize, method: Method, eq: u8, proved: bool) -> ReportRow {
    let equivalence = match eq {
        0 => Equivalence::Equivalent,
        1 => Equivalence::NotEquivalent,
        _ => Equivalence::Unchecked,
    };
    ReportRow {
        task_id: format!("t{task:02}"),
        method,
        candidate: Some("1".into()),
        candidate_digest: None,
        equivalence,
        proof: Some(ProofSummary { success: proved, method: None, samples_tried: 1, winning_sample_index: None, k: 8 }),
        stage_error: None,
        review: None,
        timings: None,
    }
}

proptest! {
    #[test]
    fn aggregates_equal_row_recomputation(
        cells in prop::collection::vec((any::<bool>(), any::<bool>(), 0u8..3, any::<bool>(), 0u8..3, any::<bool>()), 0..20),
        extra in 0usize..5,
    ) {
        let mut rows = Vec::new();
        for (i, (has_cot, has_ecp, eq_c, pr_c, eq_e, pr_e)) in cells.iter().enumerate() {
            if *has_cot { rows.push(row(i, Method::Cot, *eq_c, *pr_c)); }
            if *has_ecp { rows.push(row(i, Method::Ecp, *eq_e, *pr_e)); }
        }
        let total = cells.len() + extra;
        let report = RunReport::new("r", "b", total, rows.clone()).unwrap();
        let solved = |m: Method, e2e: bool| -> BTreeSet<String> {
            rows.iter()
                .filter(|r| r.method == m && r.equivalence == Equivalence::Equivalent && (!e2e || r.proof.as_ref().unwrap().success))
                .map(|r| r.task_id.clone())
                .collect()
        };
        let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
        for agg in &report.aggregates.methods {
            prop_assert_eq!(agg.solved_construction, solved(agg.method, false).len());
            prop_assert_eq!(agg.solved_end_to_end, solved(agg.method, true).len());
            prop_assert_eq!(agg.construction_accuracy, frac(agg.solved_construction));
            prop_assert_eq!(agg.end_to_end_accuracy, frac(agg.solved_end_to_end));
        }
        let both = rows.iter().any(|r| r.method == Method::Cot) && rows.iter().any(|r| r.method == Method::Ecp);
        if both {
            let u = solved(Method::Cot, false).union(&solved(Method::Ecp, false)).count();
            prop_assert_eq!(report.aggregates.union_construction, Some(frac(u)));
            let u = solved(Method::Cot, true).union(&solved(Method::Ecp, true)).count();
            prop_assert_eq!(report.aggregates.union_end_to_end, Some(frac(u)));
        } else {
            prop_assert_eq!(report.aggregates.union_construction, None);
        }

        let back = RunReport::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(&back, &report);
        if let Some(first) = report.aggregates.methods.first() {
            let mut tampered = report.clone();
            tampered.aggregates.methods[0].solved_construction = first.solved_construction + 1;
            let text = serde_json::to_string(&tampered).unwrap();
            prop_assert!(matches!(RunReport::from_json(&text), Err(ReportError::AggregateMismatch)));
        }
    }
}
