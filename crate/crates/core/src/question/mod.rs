//! Questions, question banks and their validation rules.
//!
//! A [`Question`] holds its answer data; it never leaves the server. What
//! clients see is a [`PresentedQuestion`] produced by [`present_question`].

mod bank;
mod present;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bank::{load_bank, save_bank, validate_bank, BankError, InvalidQuestion, QuestionBank, BANK_VERSION};
pub use present::{present_question, PresentedBody, PresentedItem, PresentedQuestion, Token, TokenMap};

/// Fewest options a multiple choice question may offer.
pub const MIN_OPTIONS: usize = 2;
/// Most options a multiple choice question may offer.
pub const MAX_OPTIONS: usize = 6;
/// Ordering and classification questions always carry exactly this many items.
pub const FIXED_ITEMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub prompt: String,
    #[serde(flatten)]
    pub body: QuestionBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QuestionBody {
    /// `correct` holds indices into `options`; any non-empty subset is allowed.
    MultipleChoice {
        options: Vec<String>,
        correct: Vec<usize>,
    },
    Numeric {
        answer: f64,
        #[serde(default)]
        tolerance: f64,
    },
    /// The authored order of `items` is the correct order.
    Ordering {
        items: Vec<String>,
    },
    Classification {
        categories: [String; 2],
        items: Vec<ClassificationItem>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationItem {
    pub text: String,
    pub category: Category,
}

/// One of the two buckets of a classification question, spelled `0` or `1`
/// on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    First,
    Second,
}

impl Category {
    pub fn index(self) -> u8 {
        match self {
            Category::First => 0,
            Category::Second => 1,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            0 => Some(Category::First),
            1 => Some(Category::Second),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Category::First => Category::Second,
            Category::Second => Category::First,
        }
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = u8::deserialize(deserializer)?;
        Category::from_index(raw)
            .ok_or_else(|| serde::de::Error::invalid_value(serde::de::Unexpected::Unsigned(raw.into()), &"0 or 1"))
    }
}

/// Short type tag, identical to the `type` spelling in files and messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultipleChoice,
    Numeric,
    Ordering,
    Classification,
}

impl QuestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::MultipleChoice => "multiple_choice",
            QuestionKind::Numeric => "numeric",
            QuestionKind::Ordering => "ordering",
            QuestionKind::Classification => "classification",
        }
    }
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl QuestionBody {
    pub fn kind(&self) -> QuestionKind {
        match self {
            QuestionBody::MultipleChoice { .. } => QuestionKind::MultipleChoice,
            QuestionBody::Numeric { .. } => QuestionKind::Numeric,
            QuestionBody::Ordering { .. } => QuestionKind::Ordering,
            QuestionBody::Classification { .. } => QuestionKind::Classification,
        }
    }
}

impl Question {
    pub fn kind(&self) -> QuestionKind {
        self.body.kind()
    }
}

/// A broken rule, naming the field it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: &str, rule: impl Into<String>) -> Self {
        Self { field: field.to_string(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.rule)
    }
}

/// Checks every structural rule of a question. Returns all violations found,
/// not just the first.
pub fn validate_question(q: &Question) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if q.id.trim().is_empty() {
        out.push(Violation::new("id", "is empty"));
    }
    if q.prompt.trim().is_empty() {
        out.push(Violation::new("prompt", "is empty"));
    }
    match &q.body {
        QuestionBody::MultipleChoice { options, correct } => {
            if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&options.len()) {
                out.push(Violation::new("options", format!("length ∉ {MIN_OPTIONS}..{MAX_OPTIONS}")));
            }
            check_texts("options", options.iter().map(String::as_str), &mut out);
            if correct.is_empty() {
                out.push(Violation::new("correct", "is empty"));
            }
            let mut seen = BTreeSet::new();
            for &index in correct {
                if index >= options.len() {
                    out.push(Violation::new("correct", format!("index {index} out of range")));
                }
                if !seen.insert(index) {
                    out.push(Violation::new("correct", format!("index {index} repeated")));
                }
            }
        }
        QuestionBody::Numeric { answer, tolerance } => {
            if !answer.is_finite() {
                out.push(Violation::new("answer", "is not finite"));
            }
            if !tolerance.is_finite() {
                out.push(Violation::new("tolerance", "is not finite"));
            } else if *tolerance < 0.0 {
                out.push(Violation::new("tolerance", "< 0"));
            }
        }
        QuestionBody::Ordering { items } => {
            if items.len() != FIXED_ITEMS {
                out.push(Violation::new("items", "length ≠ 4"));
            }
            check_texts("items", items.iter().map(String::as_str), &mut out);
        }
        QuestionBody::Classification { categories, items } => {
            if categories[0] == categories[1] {
                out.push(Violation::new("categories", "names are not distinct"));
            }
            if categories.iter().any(|c| c.trim().is_empty()) {
                out.push(Violation::new("categories", "has an empty name"));
            }
            if items.len() != FIXED_ITEMS {
                out.push(Violation::new("items", "length ≠ 4"));
            }
            // Identical texts would make their tokens indistinguishable.
            check_texts("items", items.iter().map(|i| i.text.as_str()), &mut out);
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn check_texts<'a>(field: &str, texts: impl Iterator<Item = &'a str>, out: &mut Vec<Violation>) {
    let mut seen = BTreeSet::new();
    let mut empty = false;
    let mut duplicate = false;
    for text in texts {
        empty |= text.trim().is_empty();
        duplicate |= !seen.insert(text);
    }
    if empty {
        out.push(Violation::new(field, "has an empty text"));
    }
    if duplicate {
        out.push(Violation::new(field, "texts are not distinct"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn q(body: QuestionBody) -> Question {
        Question { id: "q1".into(), prompt: "Which?".into(), body }
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn four_option_choice_with_two_correct_is_valid() {
        let question = q(QuestionBody::MultipleChoice {
            options: strings(&["Mercury", "Venus", "Earth", "Mars"]),
            correct: vec![0, 2],
        });
        assert_eq!(validate_question(&question), Ok(()));
    }

    #[test]
    fn ordering_needs_exactly_four_items() {
        let question = q(QuestionBody::Ordering { items: strings(&["a", "b", "c"]) });
        let violations = validate_question(&question).unwrap_err();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].to_string(), "items length ≠ 4");
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let question = q(QuestionBody::Numeric { answer: 3.0, tolerance: -1.0 });
        let violations = validate_question(&question).unwrap_err();
        assert_eq!(violations[0].to_string(), "tolerance < 0");
    }

    #[test]
    fn choice_rules_are_all_reported() {
        let question = q(QuestionBody::MultipleChoice { options: strings(&["same", "same"]), correct: vec![4, 4] });
        let fields: Vec<_> = validate_question(&question).unwrap_err().into_iter().map(|v| v.to_string()).collect();
        assert!(fields.contains(&"options texts are not distinct".to_string()));
        assert!(fields.contains(&"correct index 4 out of range".to_string()));
        assert!(fields.contains(&"correct index 4 repeated".to_string()));
    }

    #[test]
    fn choice_option_count_bounds() {
        for n in 0..9 {
            let question = q(QuestionBody::MultipleChoice {
                options: (0..n).map(|i| format!("o{i}")).collect(),
                correct: vec![0],
            });
            let ok = validate_question(&question).is_ok();
            assert_eq!(ok, (2..=6).contains(&n), "n = {n}");
        }
    }

    #[test]
    fn all_options_correct_is_allowed() {
        let question = q(QuestionBody::MultipleChoice { options: strings(&["a", "b"]), correct: vec![1, 0] });
        assert!(validate_question(&question).is_ok());
    }

    #[test]
    fn classification_categories_must_differ() {
        let items = ["w", "x", "y", "z"]
            .iter()
            .map(|t| ClassificationItem { text: t.to_string(), category: Category::First })
            .collect();
        let question = q(QuestionBody::Classification { categories: ["Gas".into(), "Gas".into()], items });
        let violations = validate_question(&question).unwrap_err();
        assert_eq!(violations[0].field, "categories");
    }

    #[test]
    fn empty_prompt_and_nan_answer() {
        let mut question = q(QuestionBody::Numeric { answer: f64::NAN, tolerance: 0.0 });
        question.prompt = "  ".into();
        let violations = validate_question(&question).unwrap_err();
        assert_eq!(violations.len(), 2);
    }

    #[test]
    fn category_accepts_only_zero_and_one() {
        assert_eq!(serde_json::from_str::<Category>("1").unwrap(), Category::Second);
        assert!(serde_json::from_str::<Category>("2").is_err());
        assert!(serde_json::from_str::<Category>("\"0\"").is_err());
    }
}
