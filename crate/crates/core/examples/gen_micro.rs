//! Regenerates `fixtures/micro`: the 10-task replay benchmark.
//!
//! The chat model is a scripted stand-in and Lean is simulated by a table of
//! sources that are declared to compile; enumeration programs really run
//! under the local Python sandbox. Everything is recorded through the same
//! record-mode wrappers a live run uses, then replayed once to confirm the
//! fixture set is complete.
//!
//! ```text
//! cargo run -p ecp-core --example gen_micro [-- <out-dir>]
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use ecp_core::config::EcpConfig;
use ecp_core::eval::{Equivalence, Method};
use ecp_core::lean::{fill_hole, sorry_spans, Diagnostic, LeanError, LeanVerdict, LeanVerifier, RecordingVerifier, Severity};
use ecp_core::llm::{ChatMessage, ChatRequest, FixtureStore, Gateway, LlmError, Role, ScriptedBackend, ToolCall, ToolName};
use ecp_core::pipeline::{solve_all, Services, TaskRun};
use ecp_core::problem::{render_equivalence_goal, save_corpus, substitute_answer, ProblemMetadata};
use ecp_core::prompts::PromptSet;
use ecp_core::prove::{assemble_proof, extract_proof};
use ecp_core::sandbox::{LocalPythonSandbox, ReplaySandbox};
use ecp_core::services::{replay_services, FixtureLayout};
use ecp_core::{AnswerConstructionTask, DatasetRecord};

const CONFIG: &str = r#"# Replay configuration for the micro benchmark.
jobs = 4

[eval]
benchmark = "micro"

[roles.conjecturer]
provider = "sim"
model_id = "sim-conjecturer"
temperature = 1.0
top_p = 0.95
max_tokens = 4096

[roles.prover]
provider = "sim"
model_id = "sim-prover"
temperature = 1.0
top_p = 0.95
max_tokens = 4096

[providers.sim]
base_url = "http://127.0.0.1:9/v1"

[prove]
k = 8
batch = 4
"#;

enum Program {
    Native(&'static str),
    Fenced(&'static str),
}

struct Problem {
    id: &'static str,
    informal: &'static str,
    /// Theorem text after the placeholder declaration.
    theorem: &'static str,
    answer_type: &'static str,
    truth: &'static str,
    created: Option<&'static str>,
    source: &'static str,
    domain: &'static str,
    tag: &'static str,
    programs: Vec<Program>,
    ecp: Vec<&'static str>,
    cot: Vec<&'static str>,
    /// Candidates the cascade proves equal to the truth, with the tactic.
    equal: Vec<(&'static str, &'static str)>,
    /// Tactic closing the main theorem once the answer is substituted.
    cascade: Option<&'static str>,
    /// Prover replies by sample index; the last one repeats.
    prover: Vec<&'static str>,
    winning_sample: Option<usize>,
}

fn lean(expr: &str) -> String {
    format!("```lean\n{expr}\n```")
}

fn problems() -> Vec<Problem> {
    vec![
        Problem {
            id: "cubic",
            informal: "Find all pairs (x, y) of positive integers with x^3 + y^3 = x^2 + 42xy + y^2.",
            theorem: "theorem cubic (x y : ℕ) (hx : 0 < x) (hy : 0 < y) :\n    x ^ 3 + y ^ 3 = x ^ 2 + 42 * x * y + y ^ 2 ↔ (x, y) ∈ cubic_answer := by\n  sorry\n",
            answer_type: "Set (ℕ × ℕ)",
            truth: "{(7, 1), (1, 7), (22, 22)}",
            created: Some("2023-03-14"),
            source: "olympiad practice",
            domain: "number theory",
            tag: "set",
            programs: vec![Program::Native(
                "for x in range(1, 101):\n    for y in range(1, 101):\n        if x**3 + y**3 == x**2 + 42*x*y + y**2:\n            print((x, y))\n",
            )],
            ecp: vec!["{(1, 7), (7, 1), (22, 22)}"],
            cot: vec![
                "{(x, y) : ℕ × ℕ | x ^ 3 + y ^ 3 = x ^ 2 + 42 * x * y + y ^ 2}",
                "{(1, 7), (7, 1)}",
            ],
            equal: vec![("{(1, 7), (7, 1), (22, 22)}", "aesop")],
            cascade: None,
            prover: vec![
                "by\n  constructor <;> intro h <;> simp_all",
                "by\n  nlinarith [sq_nonneg (x - y), sq_nonneg (x + y)]",
                "by\n  constructor\n  · intro h\n    have hb : x ≤ 43 ∧ y ≤ 43 := by\n      constructor <;> nlinarith [sq_nonneg (x - y), mul_pos hx hy]\n    obtain ⟨h1, h2⟩ := hb\n    interval_cases x <;> interval_cases y <;> simp_all\n  · rintro (h | h | h) <;> simp_all",
                "by\n  omega",
            ],
            winning_sample: Some(2),
        },
        Problem {
            id: "fixedfree",
            informal: "Let X = {1, ..., 100} and let f : X → X have no fixed point, such that every 40-element subset A of X meets f(A). Determine the least k such that for every such f some k-element B ⊆ X satisfies B ∪ f(B) = X.",
            theorem: "theorem fixedfree :\n    IsLeast {k : ℕ | 0 < k ∧ ∀ f : Fin 100 → Fin 100, (∀ x, f x ≠ x) →\n      (∀ A : Finset (Fin 100), A.card = 40 → (A ∩ A.image f).Nonempty) →\n      ∃ B : Finset (Fin 100), B.card = k ∧ B ∪ B.image f = Finset.univ} fixedfree_answer := by\n  sorry\n",
            answer_type: "ℕ",
            truth: "69",
            created: Some("2021-01-10"),
            source: "national olympiad",
            domain: "combinatorics",
            tag: "natural number",
            programs: vec![
                Program::Fenced("The full search is out of reach, so I start from the bound given by the 40-set condition.\n```python\nbound = 100 - 40 + 9\n```\n"),
                Program::Fenced("Printing the bound this time.\n```python\nbound = 100 - 40 + 9\nprint(bound)\n```\n"),
            ],
            ecp: vec!["69"],
            cot: vec!["69"],
            equal: vec![("69", "simp")],
            cascade: None,
            prover: vec!["by\n  constructor\n  · simp\n  · intro k hk\n    omega"],
            winning_sample: None,
        },
        Problem {
            id: "sumsq",
            informal: "Find a closed form for 0^2 + 1^2 + ... + n^2.",
            theorem: "theorem sumsq (n : ℕ) : ∑ i ∈ Finset.range (n + 1), i ^ 2 = sumsq_answer n := by\n  sorry\n",
            answer_type: "ℕ → ℕ",
            truth: "fun n => n * (n + 1) * (2 * n + 1) / 6",
            created: None,
            source: "textbook",
            domain: "algebra",
            tag: "function",
            programs: vec![Program::Native("for n in range(8):\n    print(n, sum(i * i for i in range(n + 1)))\n")],
            ecp: vec!["fun n => n * (n + 1) * (2 * n + 1) / 6"],
            cot: vec!["fun n => n ^ 3 / 3 + n ^ 2 / 2 + n / 6"],
            equal: vec![("fun n => n * (n + 1) * (2 * n + 1) / 6", "simp")],
            cascade: None,
            prover: vec![
                "by\n  induction n with\n  | zero => simp\n  | succ k ih =>\n    rw [Finset.sum_range_succ, ih]\n    simp only [sumsq_answer]\n    rw [Nat.div_add_div_same, Nat.div_eq_iff_eq_mul_left] <;> ring_nf <;> omega",
            ],
            winning_sample: Some(0),
        },
        Problem {
            id: "divisors",
            informal: "For a positive integer n, describe the set of positive integers k that divide n.",
            theorem: "theorem divisors (n : ℕ) (hn : 0 < n) (k : ℕ) :\n    k ∈ divisors_answer n ↔ 0 < k ∧ k ∣ n := by\n  sorry\n",
            answer_type: "ℕ → Set ℕ",
            truth: "fun n => (Nat.divisors n : Set ℕ)",
            created: Some("2022-05-02"),
            source: "textbook",
            domain: "number theory",
            tag: "set function",
            programs: vec![Program::Native(
                "for n in range(1, 9):\n    print(n, sorted(k for k in range(1, n + 1) if n % k == 0))\n",
            )],
            ecp: vec!["fun n => ↑(Nat.divisors n)"],
            cot: vec!["fun n => {k | 0 < k ∧ k ∣ n}", "fun n => Set.Icc 1 n"],
            equal: vec![("fun n => ↑(Nat.divisors n)", "simp")],
            cascade: Some("simp"),
            prover: vec!["by\n  simp"],
            winning_sample: None,
        },
        Problem {
            id: "maxprod",
            informal: "Two natural numbers sum to 10. What is the largest possible value of their product?",
            theorem: "theorem maxprod : IsGreatest {p : ℕ | ∃ a b : ℕ, a + b = 10 ∧ p = a * b} maxprod_answer := by\n  sorry\n",
            answer_type: "ℕ",
            truth: "25",
            created: Some("2020-09-30"),
            source: "contest warm-up",
            domain: "algebra",
            tag: "natural number",
            programs: vec![Program::Fenced(
                "```python\nprint(max(a * (10 - a) for a in range(11)))\n```\n",
            )],
            ecp: vec!["25"],
            cot: vec!["25"],
            equal: vec![("25", "simp")],
            cascade: None,
            prover: vec![
                "by\n  constructor\n  · exact ⟨5, 5, rfl, rfl⟩\n  · simp",
                "by\n  constructor\n  · exact ⟨5, 5, rfl, rfl⟩\n  · rintro p ⟨a, b, hab, rfl⟩\n    nlinarith [sq_nonneg ((a : ℤ) - b)]",
            ],
            winning_sample: Some(1),
        },
        Problem {
            id: "digits",
            informal: "Compute the sum of the decimal digits of 2^10.",
            theorem: "theorem digits : (Nat.digits 10 (2 ^ 10)).sum = digits_answer := by\n  sorry\n",
            answer_type: "ℕ",
            truth: "7",
            created: Some("2024-09-01"),
            source: "contest warm-up",
            domain: "arithmetic",
            tag: "natural number",
            programs: vec![Program::Native("print(sum(int(c) for c in str(2 ** 10)))\n")],
            ecp: vec!["7"],
            cot: vec!["7"],
            equal: vec![("7", "simp")],
            cascade: Some("norm_num"),
            prover: vec!["by\n  norm_num"],
            winning_sample: None,
        },
        Problem {
            id: "powmod",
            informal: "Find the remainder when 2^100 is divided by 7.",
            theorem: "theorem powmod : 2 ^ 100 % 7 = powmod_answer := by\n  sorry\n",
            answer_type: "ℕ",
            truth: "2",
            created: Some("2024-11-15"),
            source: "contest warm-up",
            domain: "number theory",
            tag: "natural number",
            programs: vec![Program::Native("print(pow(2, 100, 7))\n")],
            ecp: vec!["2"],
            cot: vec!["4"],
            equal: vec![("2", "simp")],
            cascade: Some("norm_num"),
            prover: vec!["by\n  norm_num"],
            winning_sample: None,
        },
        Problem {
            id: "fibgcd",
            informal: "Express gcd(F_m, F_n) in terms of m and n, where F is the Fibonacci sequence.",
            theorem: "theorem fibgcd (m n : ℕ) : Nat.gcd (Nat.fib m) (Nat.fib n) = fibgcd_answer m n := by\n  sorry\n",
            answer_type: "ℕ → ℕ → ℕ",
            truth: "fun m n => Nat.fib (Nat.gcd m n)",
            created: None,
            source: "number theory notes",
            domain: "number theory",
            tag: "function",
            programs: vec![Program::Native(
                "from math import gcd\nf = [0, 1]\nfor _ in range(30):\n    f.append(f[-1] + f[-2])\nfor m in range(1, 9):\n    for n in range(1, 9):\n        print(m, n, gcd(f[m], f[n]))\n",
            )],
            ecp: vec![
                "fun m n => Nat.fibb (Nat.gcd m n)",
                "fun m n => Nat.gcd (Nat.fib m) (Nat.fib n)",
                "fun m n => Nat.fibb (m.gcd n)",
                "fun m n => Nat.fibb (Nat.gcd m n)",
                "fun m n => Nat.fibb (Nat.gcd n m)",
            ],
            cot: vec!["fun m n => Nat.fib (Nat.gcd m n)"],
            equal: vec![("fun m n => Nat.fib (Nat.gcd m n)", "simp")],
            cascade: None,
            prover: vec!["by\n  simp [Nat.fib_gcd]", "by\n  induction m <;> simp_all"],
            winning_sample: None,
        },
        Problem {
            id: "triple",
            informal: "Find all primes p such that p + 2 and p + 4 are also prime.",
            theorem: "theorem triple (p : ℕ) : p ∈ triple_answer ↔ p.Prime ∧ (p + 2).Prime ∧ (p + 4).Prime := by\n  sorry\n",
            answer_type: "Set ℕ",
            truth: "{3}",
            created: Some("2019-04-20"),
            source: "olympiad practice",
            domain: "number theory",
            tag: "set",
            programs: vec![Program::Native(
                "def is_prime(n):\n    return n > 1 and all(n % d for d in range(2, int(n ** 0.5) + 1))\nfor p in range(2, 2000):\n    if is_prime(p) and is_prime(p + 2) and is_prime(p + 4):\n        print(p)\n",
            )],
            ecp: vec!["{p | p.Prime ∧ (p + 2).Prime ∧ (p + 4).Prime}", "{3}"],
            cot: vec!["{3}"],
            equal: vec![("{3}", "simp")],
            cascade: None,
            prover: vec!["by\n  constructor\n  · simp\n  · rintro ⟨h1, h2, h3⟩\n    omega"],
            winning_sample: None,
        },
        Problem {
            id: "least4div",
            informal: "Find the smallest positive integer n such that n, n + 1 and n + 2 each have exactly four positive divisors.",
            theorem: "theorem least4div :\n    IsLeast {n : ℕ | 0 < n ∧ (Nat.divisors n).card = 4 ∧ (Nat.divisors (n + 1)).card = 4 ∧\n      (Nat.divisors (n + 2)).card = 4} least4div_answer := by\n  sorry\n",
            answer_type: "ℕ",
            truth: "33",
            created: Some("2025-02-01"),
            source: "contest",
            domain: "number theory",
            tag: "natural number",
            programs: vec![
                Program::Native("n = 1\nwhile True:\n    if all(num_divisors(n + i) == 4 for i in range(3)):\n        print(n)\n        break\n    n += 1\n"),
                Program::Native("d = [0] * 10\nfor i in range(1, 100):\n    for j in range(i, 100, i):\n        d[j] += 1\nprint(d[33])\n"),
                Program::Native("def count(n):\n    return sum(1 for k in range(1, n + 1) if n % k == 0\nprint(count(33))\n"),
            ],
            ecp: vec!["14"],
            cot: vec!["21"],
            equal: vec![],
            cascade: None,
            prover: vec!["by\n  sorry"],
            winning_sample: None,
        },
    ]
}

/// Targets the acceptance suite checks replayed runs against.
const ECP_TARGET: [&str; 6] = ["cubic", "fixedfree", "sumsq", "divisors", "maxprod", "digits"];
const COT_TARGET: [&str; 4] = ["fixedfree", "maxprod", "digits", "triple"];

fn task_of(p: &Problem) -> AnswerConstructionTask {
    let formal = format!(
        "import Mathlib\n\nabbrev {id}_answer : {ty} := sorry\n\n{thm}",
        id = p.id,
        ty = p.answer_type,
        thm = p.theorem
    );
    let metadata = ProblemMetadata {
        source: p.source.into(),
        domain_tag: p.domain.into(),
        difficulty: "micro".into(),
        created_after: p.created.map(|d| d.parse().expect("valid date")),
        answer_type_tag: p.tag.into(),
        shape_override: None,
    };
    AnswerConstructionTask::new(
        p.id.into(),
        p.informal.into(),
        formal,
        format!("{}_answer", p.id),
        p.answer_type.into(),
        Some(p.truth.into()),
        metadata,
    )
    .unwrap_or_else(|e| panic!("{}: {e}", p.id))
}

/// Simulated compiler: a source compiles if it was declared provable, or if
/// it still has a `sorry` hole or no theorem at all (answer checks).
/// `Nat.fibb` stands in for a misspelled identifier.
struct SimLean {
    proofs: HashSet<String>,
}

impl LeanVerifier for SimLean {
    fn check(&self, source: &str, _timeout: Duration) -> Result<LeanVerdict, LeanError> {
        if let Some(line) = source.lines().position(|l| l.contains("Nat.fibb")) {
            let col = source.lines().nth(line).unwrap().find("Nat.fibb").unwrap();
            return Ok(LeanVerdict::failed(vec![Diagnostic::error(
                line as u32 + 1,
                col as u32,
                "unknown identifier 'Nat.fibb'",
            )]));
        }
        if self.proofs.contains(source) {
            return Ok(LeanVerdict::ok());
        }
        if let Some(span) = sorry_spans(source).first() {
            let line = source[..span.start].lines().count() as u32;
            let mut v = LeanVerdict::ok();
            v.diagnostics.push(Diagnostic {
                severity: Severity::Warning,
                line,
                column: 0,
                message: "declaration uses 'sorry'".into(),
            });
            return Ok(v);
        }
        if !source.contains("theorem ") {
            return Ok(LeanVerdict::ok());
        }
        Ok(LeanVerdict::failed(vec![Diagnostic::error(1, 0, "unsolved goals")]))
    }
}

fn program_reply(program: &Program, turn: usize) -> ChatMessage {
    match program {
        Program::Native(code) => ChatMessage::assistant_tool_call(
            "",
            ToolCall {
                tool: ToolName::RunEnumeration,
                arguments: code.to_string(),
                call_id: format!("call_{turn}"),
            },
        ),
        Program::Fenced(text) => ChatMessage::assistant(*text),
    }
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/micro"));
    let layout = FixtureLayout::new(&out);
    for dir in [layout.llm(), layout.sandbox(), layout.root.join("lean")] {
        let _ = std::fs::remove_dir_all(&dir);
    }
    std::fs::create_dir_all(&layout.root).unwrap();
    std::fs::write(layout.config(), CONFIG).unwrap();
    let config = EcpConfig::from_toml(CONFIG).unwrap();

    let problems = problems();
    let tasks: Vec<AnswerConstructionTask> = problems.iter().map(task_of).collect();
    let records: Vec<DatasetRecord> = tasks
        .iter()
        .map(|t| DatasetRecord {
            task: t.clone(),
            informal_solution: None,
            extra: Default::default(),
            extra_metadata: Default::default(),
        })
        .collect();
    save_corpus(&records, &layout.corpus()).unwrap();

    let mut proofs = HashSet::new();
    for (p, t) in problems.iter().zip(&tasks) {
        for (cand, tactic) in &p.equal {
            let goal = render_equivalence_goal(t, cand, None).unwrap();
            proofs.insert(fill_hole(&goal, tactic).unwrap());
        }
        let Some((correct, _)) = p.equal.first() else { continue };
        let theorem = substitute_answer(t, correct).unwrap();
        if let Some(tactic) = p.cascade {
            proofs.insert(fill_hole(&theorem, tactic).unwrap());
        }
        if let Some(i) = p.winning_sample {
            let proof = extract_proof(&ChatMessage::assistant(lean(p.prover[i]))).unwrap();
            proofs.insert(assemble_proof(&theorem, &proof).unwrap());
        }
    }

    let prompts = PromptSet::builtin();
    let model = {
        let scripts: BTreeMap<String, (Vec<ChatMessage>, Vec<String>, Vec<String>, Vec<String>)> = problems
            .iter()
            .map(|p| {
                let enumerate = p.programs.iter().enumerate().map(|(i, prog)| program_reply(prog, i)).collect();
                let ecp = p.ecp.iter().map(|e| lean(e)).collect();
                let cot = p.cot.iter().map(|e| lean(e)).collect();
                let prover = p.prover.iter().map(|e| lean(e)).collect();
                (format!("{}_answer", p.id), (enumerate, ecp, cot, prover))
            })
            .collect();
        ScriptedBackend::new(move |req: &ChatRequest| {
            let user = req.messages.iter().find(|m| m.role == Role::User).map(|m| m.content.as_str()).unwrap_or("");
            let (_, (enumerate, ecp, cot, prover)) = scripts
                .iter()
                .find(|(name, _)| user.contains(&format!("{name} ")) || user.contains(&format!("{name}`")))
                .ok_or_else(|| LlmError::Scripted("unknown task".into()))?;
            let turn = req.messages.iter().filter(|m| m.role == Role::Assistant).count();
            let pick = |v: &Vec<String>, i: usize| v[i.min(v.len() - 1)].clone();
            Ok(if req.tools.contains(&ToolName::RunEnumeration) {
                enumerate[turn.min(enumerate.len() - 1)].clone()
            } else if req.config.model_id == "sim-prover" {
                ChatMessage::assistant(pick(prover, req.sample_index as usize))
            } else if user.contains("A program enumerated") {
                ChatMessage::assistant(pick(ecp, turn))
            } else {
                ChatMessage::assistant(pick(cot, turn))
            })
        })
    };

    let store = Arc::new(FixtureStore::open(layout.llm()));
    let recorder = Arc::new(RecordingVerifier::new(SimLean { proofs }));
    let services = Services {
        llm: Arc::new(Gateway::record(Arc::new(model), store.clone())),
        sandbox: Arc::new(ReplaySandbox::recording(layout.sandbox(), Arc::new(LocalPythonSandbox::new("python3")))),
        lean: recorder.clone(),
        prompts: prompts.clone(),
    };
    let recorded: Vec<Vec<TaskRun>> = [Method::Ecp, Method::Cot]
        .iter()
        .map(|&m| solve_all(&tasks, m, &services, &config, None, 1))
        .collect();
    recorder.save(&layout.lean_table()).unwrap();

    let replay = replay_services(&layout, prompts).unwrap();
    for (runs, method) in recorded.iter().zip([Method::Ecp, Method::Cot]) {
        let again = solve_all(&tasks, method, &replay, &config, None, 4);
        let solved: Vec<&str> = again
            .iter()
            .filter(|r| r.equivalence == Equivalence::Equivalent)
            .map(|r| r.task_id.as_str())
            .collect();
        println!("{}: construction {:?}", method.label(), solved);
        for (a, b) in runs.iter().zip(&again) {
            assert_eq!(a.row(8, false), b.row(8, false), "replay differs on {}", a.task_id);
            if let Some(e) = &b.stage_error {
                println!("  {} stage error: {e}", b.task_id);
            }
        }
        let target: &[&str] = if method == Method::Ecp { &ECP_TARGET } else { &COT_TARGET };
        assert!(target.iter().all(|t| solved.contains(t)), "{} misses its target", method.label());
    }
    let targets = serde_json::json!({ "ecp": ECP_TARGET, "cot": COT_TARGET });
    std::fs::write(layout.root.join("targets.json"), format!("{}\n", serde_json::to_string_pretty(&targets).unwrap())).unwrap();
    println!("wrote {}", layout.root.display());
}
