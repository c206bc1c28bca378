//! Whole property suites with a case budget, returning a summary on success
//! and a readable failure otherwise. The crates' own tests run them small;
//! the acceptance target runs them at full size.

use std::cell::RefCell;
use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::{json, Value};

use spacerace_core::grading::{grade, GradeError, Submission, Verdict};
use spacerace_core::protocol::{
    decode_message, encode_message, route_event, snapshot_for, DecodeError, Flow, WireMessage, VOCABULARY,
};
use spacerace_core::question::{
    present_question, ClassificationItem, Question, QuestionBody, MAX_OPTIONS, MIN_OPTIONS,
};

use crate::driver::{self, Coverage};
use crate::{gen, oracle, scan};

/// A seeded runner, so a budget always explores the same cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 256, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run_cases<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), String>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, |value| test(value).map_err(TestCaseError::fail)).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnumerationSummary {
    pub graded: u64,
    pub ordering_permutations: usize,
    pub classification_assignments: usize,
    pub choice_correct_sets: usize,
    pub numeric_boundaries: usize,
}

fn verdict(q: &Question, tokens: &spacerace_core::question::TokenMap, s: &Submission) -> Result<Verdict, String> {
    grade(q, tokens, s).map(|r| r.verdict).map_err(|e| format!("{}: {e}", q.id))
}

/// Exhaustive check that exactly one submission is correct for ordering,
/// classification and multiple choice, plus the numeric interval ends.
pub fn grading_enumeration() -> Result<EnumerationSummary, String> {
    let mut summary = EnumerationSummary::default();

    // Ordering: each seed gives a different display order and token set.
    let ordering = Question {
        id: "order".into(),
        prompt: "Order".into(),
        body: QuestionBody::Ordering { items: ["a", "b", "c", "d"].map(String::from).to_vec() },
    };
    for seed in 0..8 {
        let (view, tokens) = present_question(&ordering, "T1", seed);
        let shown: Vec<_> = view.body.items().iter().map(|i| i.token.clone()).collect();
        let perms = oracle::permutations(4);
        summary.ordering_permutations = perms.len();
        let mut winners = Vec::new();
        for perm in &perms {
            let ordered_tokens = perm.iter().map(|&i| shown[i].clone()).collect();
            summary.graded += 1;
            if verdict(&ordering, &tokens, &Submission::Ordering { ordered_tokens })? == Verdict::Correct {
                winners.push(perm.clone());
            }
        }
        let expected: Vec<usize> = (0..4)
            .map(|authored| shown.iter().position(|t| tokens.resolve(t) == Some(authored)).expect("every index shown"))
            .collect();
        if winners != [expected] {
            return Err(format!("ordering seed {seed}: winners {winners:?} out of {}", perms.len()));
        }
    }

    // Classification: every authored pattern against every assignment.
    let patterns = oracle::category_assignments(4);
    summary.classification_assignments = patterns.len();
    for (p, authored) in patterns.iter().enumerate() {
        let q = Question {
            id: format!("class{p}"),
            prompt: "Sort".into(),
            body: QuestionBody::Classification {
                categories: ["x".into(), "y".into()],
                items: authored
                    .iter()
                    .enumerate()
                    .map(|(i, &category)| ClassificationItem { text: format!("item{i}"), category })
                    .collect(),
            },
        };
        let (_, tokens) = present_question(&q, "T1", p as u64);
        let mut correct = 0;
        for candidate in &patterns {
            let assignments = candidate
                .iter()
                .enumerate()
                .map(|(i, &c)| (tokens.token_for(i).cloned().expect("token per item"), c))
                .collect();
            summary.graded += 1;
            let v = verdict(&q, &tokens, &Submission::Classification { assignments })?;
            if v == Verdict::Correct {
                correct += 1;
                if candidate != authored {
                    return Err(format!("classification {authored:?} accepted {candidate:?}"));
                }
            }
        }
        if correct != 1 {
            return Err(format!("classification {authored:?}: {correct} correct of {}", patterns.len()));
        }
    }

    // Multiple choice: every correct set against every non-empty selection.
    for n in MIN_OPTIONS..=MAX_OPTIONS {
        let subsets = oracle::nonempty_subsets(n);
        if subsets.len() != (1 << n) - 1 {
            return Err("subset enumeration is wrong".into());
        }
        for correct in &subsets {
            summary.choice_correct_sets += 1;
            let q = Question {
                id: format!("mc{n}"),
                prompt: "Pick".into(),
                body: QuestionBody::MultipleChoice {
                    options: (0..n).map(|i| format!("opt{i}")).collect(),
                    correct: correct.clone(),
                },
            };
            let (_, tokens) = present_question(&q, "T1", n as u64);
            let mut winners = 0;
            for selection in &subsets {
                let selected_tokens = selection.iter().map(|&i| tokens.token_for(i).cloned().unwrap()).collect();
                summary.graded += 1;
                if verdict(&q, &tokens, &Submission::MultipleChoice { selected_tokens })? == Verdict::Correct {
                    winners += 1;
                    if selection != correct {
                        return Err(format!("choice {correct:?} accepted {selection:?}"));
                    }
                }
            }
            if winners != 1 {
                return Err(format!("choice n={n} correct={correct:?}: {winners} of {} accepted", subsets.len()));
            }
            let empty = Submission::MultipleChoice { selected_tokens: Vec::new() };
            if grade(&q, &tokens, &empty) != Err(GradeError::EmptySelection) {
                return Err("empty selection was not rejected".into());
            }
        }
    }

    // Numeric: both interval ends are inside, the next floats outside.
    let cases = [(42.0, 0.0), (42.0, 0.5), (9.81, 0.05), (-3.5, 1.25), (0.1, 0.2), (1e6, 1e-3), (-0.0, 0.0)];
    for (answer, tolerance) in cases {
        let q =
            Question { id: "n".into(), prompt: "How much?".into(), body: QuestionBody::Numeric { answer, tolerance } };
        let tokens = present_question(&q, "T1", 0).1;
        let check = |value: f64, want: Verdict| -> Result<(), String> {
            let got = verdict(&q, &tokens, &Submission::Numeric { value })?;
            if got == want {
                Ok(())
            } else {
                Err(format!("answer {answer} ± {tolerance}: value {value} graded {got:?}"))
            }
        };
        check(answer, Verdict::Correct)?;
        check(answer + tolerance, Verdict::Correct)?;
        check(answer - tolerance, Verdict::Correct)?;
        check((answer + tolerance).next_up(), Verdict::Incorrect)?;
        check((answer - tolerance).next_down(), Verdict::Incorrect)?;
        summary.numeric_boundaries += 5;
        summary.graded += 5;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineSummary {
    pub cases: u32,
    pub ops: u64,
    pub rejected: u64,
    pub started: u32,
    pub presented: u64,
    pub correct: u64,
    pub incorrect: u64,
    pub cooldown_hits: u64,
    pub already_completed: u64,
    pub natural_ends: u32,
    pub admin_ends: u32,
}

impl EngineSummary {
    fn add(&mut self, c: &Coverage) {
        self.cases += 1;
        self.ops += c.ops;
        self.rejected += c.rejected;
        self.started += u32::from(c.started);
        self.presented += c.presented;
        self.correct += c.correct;
        self.incorrect += c.incorrect;
        self.cooldown_hits += c.cooldown_hits;
        self.already_completed += c.already_completed;
        self.natural_ends += u32::from(c.natural_end);
        self.admin_ends += u32::from(c.admin_end);
    }
}

/// Randomized engine sessions with every law checked after every step.
pub fn engine_properties(cases: u32) -> Result<EngineSummary, String> {
    let total = RefCell::new(EngineSummary::default());
    run_cases(cases, driver::scenario(), |s| {
        let coverage = driver::run_scenario(&s)?;
        total.borrow_mut().add(&coverage);
        Ok(())
    })?;
    Ok(total.into_inner())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CodecSummary {
    pub round_trips: u64,
    pub types_checked: usize,
    pub missing_field_checks: u64,
    pub mistyped_field_checks: u64,
    pub extra_field_checks: u64,
}

fn round_trip(m: &WireMessage) -> Result<(), String> {
    let bytes = encode_message(m);
    if bytes.contains(&b'\n') {
        return Err(format!("{} encodes with a newline", m.payload.type_name()));
    }
    let back = decode_message(&bytes).map_err(|e| format!("{}: {e}", m.payload.type_name()))?;
    if back != *m {
        return Err(format!("{} did not round-trip", m.payload.type_name()));
    }
    if encode_message(&back) != bytes {
        return Err(format!("{} re-encodes differently", m.payload.type_name()));
    }
    Ok(())
}

fn mistyped(value: &Value) -> Value {
    match value {
        Value::String(_) => json!(7),
        _ => json!("not the right type"),
    }
}

/// Drops, retypes and adds fields of one message and checks the decoder's
/// reaction to each.
fn field_rules(m: &WireMessage, summary: &mut CodecSummary) -> Result<(), String> {
    let name = m.payload.type_name();
    let original: Value = serde_json::from_slice(&encode_message(m)).expect("encoder emits JSON");
    let payload = original["payload"].as_object().expect("payload is an object").clone();
    let optional = gen::optional_fields(name);
    let decode = |v: &Value| decode_message(&serde_json::to_vec(v).expect("value serializes"));

    for key in payload.keys() {
        let mut dropped = original.clone();
        dropped["payload"].as_object_mut().unwrap().remove(key);
        summary.missing_field_checks += 1;
        match (decode(&dropped), optional.contains(&key.as_str())) {
            (Err(DecodeError::SchemaViolation { message, .. }), false) if message.contains(key.as_str()) => {}
            (Ok(_), true) => {}
            (got, _) => return Err(format!("{name} without {key}: {got:?}")),
        }

        let mut retyped = original.clone();
        retyped["payload"][key] = mistyped(&payload[key]);
        summary.mistyped_field_checks += 1;
        match decode(&retyped) {
            Err(DecodeError::SchemaViolation { field, .. }) if field.starts_with(&format!("payload.{key}")) => {}
            got => return Err(format!("{name} with mistyped {key}: {got:?}")),
        }
    }

    let mut extended = original.clone();
    extended["payload"]["zzUnknown"] = json!({"nested": [1, 2, 3]});
    extended["trace"] = json!("ignored");
    summary.extra_field_checks += 1;
    match decode(&extended) {
        Ok(back) if back == *m => Ok(()),
        got => Err(format!("{name} with extra fields: {got:?}")),
    }
}

/// Round trip over the full vocabulary plus per-type field strictness.
pub fn codec_properties(cases: u32, per_type: u32) -> Result<CodecSummary, String> {
    let summary = RefCell::new(CodecSummary::default());
    run_cases(cases, gen::wire_message(), |m| {
        round_trip(&m)?;
        summary.borrow_mut().round_trips += 1;
        Ok(())
    })?;

    let strategies = gen::payload_strategies();
    let names: BTreeSet<&str> = strategies.iter().map(|(n, _)| *n).collect();
    let vocabulary: BTreeSet<&str> = VOCABULARY.iter().map(|(n, _)| *n).collect();
    if names != vocabulary {
        return Err(format!("generators cover {names:?}, vocabulary is {vocabulary:?}"));
    }
    for (name, strategy) in strategies {
        let seq = any::<u64>();
        run_cases(per_type, (seq, strategy), |(seq, payload)| {
            let m = WireMessage { seq, payload };
            if m.payload.type_name() != name {
                return Err(format!("generator for {name} produced {}", m.payload.type_name()));
            }
            field_rules(&m, &mut summary.borrow_mut())
        })?;
        summary.borrow_mut().types_checked += 1;
    }
    Ok(summary.into_inner())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditSummary {
    pub server_types: usize,
    pub documents: u64,
    pub presentations: u64,
    pub games: u32,
}

fn audit(doc: &Value, what: &str) -> Result<(), String> {
    let hits = scan::find_keys(doc, scan::ANSWER_KEYS);
    if hits.is_empty() {
        Ok(())
    } else {
        Err(format!("{what} exposes {hits:?}"))
    }
}

/// Scans every server-to-client type, real presentations and everything a
/// played game sends, for keys that carry answers.
pub fn answer_hiding_audit(per_type: u32, games: u32) -> Result<AuditSummary, String> {
    let summary = RefCell::new(AuditSummary::default());

    for (name, strategy) in gen::payload_strategies() {
        let flow = VOCABULARY.iter().find(|(n, _)| *n == name).map(|(_, f)| *f);
        if flow != Some(Flow::ServerToClient) {
            continue;
        }
        run_cases(per_type, strategy, |payload| {
            let doc: Value = serde_json::from_slice(&encode_message(&WireMessage { seq: 1, payload })).unwrap();
            summary.borrow_mut().documents += 1;
            audit(&doc, name)
        })?;
        summary.borrow_mut().server_types += 1;
    }

    run_cases(per_type, (gen::question(), any::<u64>()), |(q, seed)| {
        let (view, tokens) = present_question(&q, "T1", seed);
        let doc = serde_json::to_value(&view).unwrap();
        audit(&doc, "presented question")?;
        let text = doc.to_string();
        match &q.body {
            QuestionBody::Numeric { .. } => {
                if doc.as_object().is_some_and(|o| o.len() != 3) {
                    return Err(format!("numeric presentation carries extra data: {text}"));
                }
            }
            QuestionBody::MultipleChoice { options, .. } => {
                // Items carry exactly a token and a text, nothing that marks correctness.
                for item in doc["options"].as_array().unwrap() {
                    let keys: BTreeSet<&str> = item.as_object().unwrap().keys().map(String::as_str).collect();
                    if keys != BTreeSet::from(["token", "text"]) {
                        return Err(format!("option carries {keys:?}"));
                    }
                }
                if view.body.items().len() != options.len() {
                    return Err("options were dropped".into());
                }
            }
            QuestionBody::Ordering { .. } | QuestionBody::Classification { .. } => {}
        }
        // Tokens never spell the authored index.
        for item in view.body.items() {
            let index = tokens.resolve(&item.token).ok_or("token not in map")?;
            if item.token.as_str() == index.to_string() {
                return Err("token equals its authored index".into());
            }
        }
        summary.borrow_mut().presentations += 1;
        Ok(())
    })?;

    run_cases(games, driver::scenario(), |s| {
        let state = driver::play(&s)?.state;
        audit(&serde_json::to_value(snapshot_for(&state, "GAME01")).unwrap(), "snapshot")?;
        for logged in state.event_log() {
            if let Some((_, payload)) = route_event(&state, "GAME01", &logged.event) {
                let doc: Value = serde_json::from_slice(&encode_message(&WireMessage { seq: 1, payload })).unwrap();
                audit(&doc, "routed event")?;
                summary.borrow_mut().documents += 1;
            }
        }
        summary.borrow_mut().games += 1;
        Ok(())
    })?;
    Ok(summary.into_inner())
}
