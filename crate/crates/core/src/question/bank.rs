use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{validate_question, Question, Violation};

pub const BANK_VERSION: u32 = 1;

/// A named, ordered set of questions a game samples its tasks from.
///
/// Serialized keys follow declaration order: `version`, `name`, `questions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    pub version: u32,
    pub name: String,
    pub questions: Vec<Question>,
}

impl QuestionBank {
    pub fn new(name: impl Into<String>, questions: Vec<Question>) -> Self {
        Self { version: BANK_VERSION, name: name.into(), questions }
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidQuestion {
    pub id: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BankError {
    #[error("malformed bank file: {0}")]
    MalformedFile(String),
    #[error("unsupported bank version {0}")]
    UnsupportedVersion(u32),
    #[error("bank has no questions")]
    Empty,
    #[error("{} invalid question(s), first: {}", .0.len(), first_invalid(.0))]
    InvalidQuestion(Vec<InvalidQuestion>),
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
}

fn first_invalid(list: &[InvalidQuestion]) -> String {
    match list.first() {
        Some(q) => {
            let rules: Vec<String> = q.violations.iter().map(ToString::to_string).collect();
            alloc::format!("{:?}: {}", q.id, rules.join("; "))
        }
        None => String::new(),
    }
}

pub fn validate_bank(bank: &QuestionBank) -> Result<(), BankError> {
    if bank.version != BANK_VERSION {
        return Err(BankError::UnsupportedVersion(bank.version));
    }
    if bank.questions.is_empty() {
        return Err(BankError::Empty);
    }
    let invalid: Vec<InvalidQuestion> = bank
        .questions
        .iter()
        .filter_map(|q| validate_question(q).err().map(|violations| InvalidQuestion { id: q.id.clone(), violations }))
        .collect();
    if !invalid.is_empty() {
        return Err(BankError::InvalidQuestion(invalid));
    }
    let mut ids = BTreeSet::new();
    for q in &bank.questions {
        if !ids.insert(q.id.as_str()) {
            return Err(BankError::DuplicateId(q.id.clone()));
        }
    }
    Ok(())
}

/// Parses and fully validates a bank file.
pub fn load_bank(bytes: &[u8]) -> Result<QuestionBank, BankError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let bank: QuestionBank =
        serde_path_to_error::deserialize(&mut de).map_err(|e| BankError::MalformedFile(e.to_string()))?;
    de.end().map_err(|e| BankError::MalformedFile(e.to_string()))?;
    validate_bank(&bank)?;
    Ok(bank)
}

/// Canonical bank bytes: two-space indented JSON with a trailing newline.
/// Refuses banks that would not load back.
pub fn save_bank(bank: &QuestionBank) -> Result<Vec<u8>, BankError> {
    validate_bank(bank)?;
    let mut out = serde_json::to_vec_pretty(bank).map_err(|e| BankError::MalformedFile(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::{Category, ClassificationItem, QuestionBody};
    use alloc::vec;

    fn sample() -> QuestionBank {
        QuestionBank::new(
            "planets",
            vec![
                Question {
                    id: "q1".into(),
                    prompt: "Gas giants?".into(),
                    body: QuestionBody::MultipleChoice {
                        options: vec!["Jupiter".into(), "Mars".into(), "Saturn".into()],
                        correct: vec![0, 2],
                    },
                },
                Question {
                    id: "q2".into(),
                    prompt: "Moons of Mars?".into(),
                    body: QuestionBody::Numeric { answer: 2.0, tolerance: 0.0 },
                },
                Question {
                    id: "q3".into(),
                    prompt: "Rocky or gas".into(),
                    body: QuestionBody::Classification {
                        categories: ["rocky".into(), "gas".into()],
                        items: ["Venus", "Uranus", "Earth", "Neptune"]
                            .iter()
                            .enumerate()
                            .map(|(i, t)| ClassificationItem {
                                text: (*t).into(),
                                category: if i % 2 == 0 { Category::First } else { Category::Second },
                            })
                            .collect(),
                    },
                },
            ],
        )
    }

    #[test]
    fn round_trip_is_exact_and_canonical() {
        let bank = sample();
        let bytes = save_bank(&bank).unwrap();
        assert_eq!(load_bank(&bytes).unwrap(), bank);
        assert_eq!(save_bank(&bank).unwrap(), bytes);
        let text = core::str::from_utf8(&bytes).unwrap();
        let v = text.find("\"version\"").unwrap();
        let n = text.find("\"name\"").unwrap();
        let q = text.find("\"questions\"").unwrap();
        assert!(v < n && n < q);
        let id = text.find("\"id\"").unwrap();
        let prompt = text.find("\"prompt\"").unwrap();
        let ty = text.find("\"type\"").unwrap();
        assert!(id < prompt && prompt < ty);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut bank = sample();
        bank.questions[1].id = "q1".into();
        let bytes = serde_json::to_vec(&bank).unwrap();
        assert_eq!(load_bank(&bytes), Err(BankError::DuplicateId("q1".into())));
    }

    #[test]
    fn truncated_file_is_malformed() {
        let bytes = save_bank(&sample()).unwrap();
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(load_bank(cut), Err(BankError::MalformedFile(_))));
    }

    #[test]
    fn tolerance_defaults_to_zero() {
        let text = br#"{"version":1,"name":"n","questions":[
            {"id":"a","prompt":"p","type":"numeric","answer":42}]}"#;
        let bank = load_bank(text).unwrap();
        assert_eq!(bank.questions[0].body, QuestionBody::Numeric { answer: 42.0, tolerance: 0.0 });
    }

    #[test]
    fn invalid_questions_are_collected() {
        let text = br#"{"version":1,"name":"n","questions":[
            {"id":"a","prompt":"p","type":"ordering","items":["1","2","3"]},
            {"id":"b","prompt":"p","type":"numeric","answer":1,"tolerance":-2}]}"#;
        match load_bank(text) {
            Err(BankError::InvalidQuestion(list)) => {
                assert_eq!(list.len(), 2);
                assert_eq!(list[0].id, "a");
                assert_eq!(list[1].violations[0].to_string(), "tolerance < 0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_type_and_version() {
        let text = br#"{"version":1,"name":"n","questions":[{"id":"a","prompt":"p","type":"essay"}]}"#;
        assert!(matches!(load_bank(text), Err(BankError::MalformedFile(_))));
        let text = br#"{"version":2,"name":"n","questions":[{"id":"a","prompt":"p","type":"numeric","answer":1}]}"#;
        assert_eq!(load_bank(text), Err(BankError::UnsupportedVersion(2)));
        let text = br#"{"version":1,"name":"n","questions":[]}"#;
        assert_eq!(load_bank(text), Err(BankError::Empty));
    }

    #[test]
    fn save_refuses_invalid_bank() {
        let mut bank = sample();
        bank.questions[1].body = QuestionBody::Numeric { answer: 1.0, tolerance: -1.0 };
        assert!(matches!(save_bank(&bank), Err(BankError::InvalidQuestion(_))));
    }
}
