//! Binary grading: a submission is either right or wrong, never partly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::question::{Category, Question, QuestionBody, QuestionKind, Token, TokenMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Submission {
    #[serde(rename_all = "camelCase")]
    MultipleChoice {
        selected_tokens: Vec<Token>,
    },
    Numeric {
        value: f64,
    },
    #[serde(rename_all = "camelCase")]
    Ordering {
        ordered_tokens: Vec<Token>,
    },
    Classification {
        assignments: BTreeMap<Token, Category>,
    },
}

impl Submission {
    pub fn kind(&self) -> QuestionKind {
        match self {
            Submission::MultipleChoice { .. } => QuestionKind::MultipleChoice,
            Submission::Numeric { .. } => QuestionKind::Numeric,
            Submission::Ordering { .. } => QuestionKind::Ordering,
            Submission::Classification { .. } => QuestionKind::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Correct
        } else {
            Verdict::Incorrect
        }
    }

    pub fn is_correct(self) -> bool {
        self == Verdict::Correct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeResult {
    pub verdict: Verdict,
}

impl From<Verdict> for GradeResult {
    fn from(verdict: Verdict) -> Self {
        Self { verdict }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GradeError {
    #[error("submission is {found} but the question is {expected}")]
    TypeMismatch { expected: QuestionKind, found: QuestionKind },
    #[error("token {0} does not belong to this presentation")]
    UnknownToken(Token),
    #[error("token {0} appears more than once")]
    DuplicateToken(Token),
    #[error("no option selected")]
    EmptySelection,
    #[error("numeric value is not finite")]
    NonFiniteValue,
    #[error("submitted order is not a permutation of the items")]
    NotAPermutation,
    #[error("every item needs exactly one category")]
    IncompleteAssignment,
}

/// Resolves the tokens of `submission` through `tokens` and grades it
/// against `question`.
pub fn grade(question: &Question, tokens: &TokenMap, submission: &Submission) -> Result<GradeResult, GradeError> {
    let resolve = |t: &Token| tokens.resolve(t).ok_or_else(|| GradeError::UnknownToken(t.clone()));
    match (&question.body, submission) {
        (QuestionBody::MultipleChoice { correct, .. }, Submission::MultipleChoice { selected_tokens }) => {
            let mut selected = BTreeSet::new();
            for token in selected_tokens {
                if !selected.insert(resolve(token)?) {
                    return Err(GradeError::DuplicateToken(token.clone()));
                }
            }
            let correct: BTreeSet<usize> = correct.iter().copied().collect();
            grade_multiple_choice(&correct, &selected)
        }
        (QuestionBody::Numeric { answer, tolerance }, Submission::Numeric { value }) => {
            grade_numeric(*answer, *tolerance, *value)
        }
        (QuestionBody::Ordering { items }, Submission::Ordering { ordered_tokens }) => {
            let submitted = ordered_tokens.iter().map(resolve).collect::<Result<Vec<_>, _>>()?;
            let authored: Vec<usize> = (0..items.len()).collect();
            grade_ordering(&authored, &submitted)
        }
        (QuestionBody::Classification { items, .. }, Submission::Classification { assignments }) => {
            let mut submitted = BTreeMap::new();
            for (token, &category) in assignments {
                submitted.insert(resolve(token)?, category);
            }
            let authored: Vec<Category> = items.iter().map(|i| i.category).collect();
            grade_classification(&authored, &submitted)
        }
        (body, submission) => Err(GradeError::TypeMismatch { expected: body.kind(), found: submission.kind() }),
    }
}

/// Correct iff the selection equals the correct set exactly.
pub fn grade_multiple_choice(correct: &BTreeSet<usize>, selected: &BTreeSet<usize>) -> Result<GradeResult, GradeError> {
    if selected.is_empty() {
        return Err(GradeError::EmptySelection);
    }
    Ok(Verdict::from_bool(correct == selected).into())
}

/// Closed interval: `answer - tolerance <= value <= answer + tolerance`.
///
/// The bounds are computed once so that a value built as `answer ± tolerance`
/// lands on them exactly.
pub fn grade_numeric(answer: f64, tolerance: f64, value: f64) -> Result<GradeResult, GradeError> {
    if !value.is_finite() {
        return Err(GradeError::NonFiniteValue);
    }
    let low = answer - tolerance;
    let high = answer + tolerance;
    Ok(Verdict::from_bool(low <= value && value <= high).into())
}

pub fn grade_ordering(authored: &[usize], submitted: &[usize]) -> Result<GradeResult, GradeError> {
    let mut sorted_authored = authored.to_vec();
    sorted_authored.sort_unstable();
    let mut sorted_submitted = submitted.to_vec();
    sorted_submitted.sort_unstable();
    if sorted_authored != sorted_submitted {
        return Err(GradeError::NotAPermutation);
    }
    Ok(Verdict::from_bool(authored == submitted).into())
}

/// `item_categories[i]` is the authored category of item `i`; `submitted`
/// must assign every one of those indices and nothing else.
pub fn grade_classification(
    item_categories: &[Category],
    submitted: &BTreeMap<usize, Category>,
) -> Result<GradeResult, GradeError> {
    if submitted.len() != item_categories.len() || submitted.keys().any(|&i| i >= item_categories.len()) {
        return Err(GradeError::IncompleteAssignment);
    }
    let all_match = item_categories.iter().enumerate().all(|(i, c)| submitted.get(&i) == Some(c));
    Ok(Verdict::from_bool(all_match).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::{present_question, ClassificationItem};
    use alloc::string::ToString;
    use alloc::vec;

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn multiple_choice_equality() {
        let correct = set(&[0, 2]);
        assert_eq!(grade_multiple_choice(&correct, &set(&[0, 2])).unwrap().verdict, Verdict::Correct);
        assert_eq!(grade_multiple_choice(&correct, &set(&[0])).unwrap().verdict, Verdict::Incorrect);
        assert_eq!(grade_multiple_choice(&correct, &set(&[])), Err(GradeError::EmptySelection));
    }

    #[test]
    fn numeric_closed_interval() {
        let verdict = |a, t, v| grade_numeric(a, t, v).unwrap().verdict;
        assert_eq!(verdict(42.0, 0.0, 42.0), Verdict::Correct);
        assert_eq!(verdict(42.0, 0.5, 41.6), Verdict::Correct);
        assert_eq!(verdict(42.0, 0.5, 41.4), Verdict::Incorrect);
        assert_eq!(verdict(42.0, 0.5, 42.5), Verdict::Correct);
        assert_eq!(verdict(42.0, 0.5, 41.5), Verdict::Correct);
        assert_eq!(verdict(0.1, 0.2, 0.1 + 0.2), Verdict::Correct);
        assert_eq!(grade_numeric(1.0, 0.0, f64::NAN), Err(GradeError::NonFiniteValue));
        assert_eq!(grade_numeric(1.0, 0.0, f64::INFINITY), Err(GradeError::NonFiniteValue));
    }

    #[test]
    fn ordering_identity_and_swap() {
        let authored = [0, 1, 2, 3];
        assert_eq!(grade_ordering(&authored, &[0, 1, 2, 3]).unwrap().verdict, Verdict::Correct);
        assert_eq!(grade_ordering(&authored, &[1, 0, 2, 3]).unwrap().verdict, Verdict::Incorrect);
        assert_eq!(grade_ordering(&authored, &[0, 0, 2, 3]), Err(GradeError::NotAPermutation));
        assert_eq!(grade_ordering(&authored, &[0, 1, 2]), Err(GradeError::NotAPermutation));
    }

    #[test]
    fn classification_pointwise() {
        use Category::*;
        let authored = [First, Second, Second, First];
        let exact: BTreeMap<usize, Category> = authored.iter().copied().enumerate().collect();
        assert_eq!(grade_classification(&authored, &exact).unwrap().verdict, Verdict::Correct);
        let mut flipped = exact.clone();
        flipped.insert(2, First);
        assert_eq!(grade_classification(&authored, &flipped).unwrap().verdict, Verdict::Incorrect);
        let mut partial = exact;
        partial.remove(&1);
        assert_eq!(grade_classification(&authored, &partial), Err(GradeError::IncompleteAssignment));
    }

    fn ordering_question() -> Question {
        Question {
            id: "o".into(),
            prompt: "p".into(),
            body: QuestionBody::Ordering { items: vec!["a".into(), "b".into(), "c".into(), "d".into()] },
        }
    }

    #[test]
    fn wrong_variant_is_a_type_mismatch() {
        let q = ordering_question();
        let (_, map) = present_question(&q, "T1", 5);
        let err = grade(&q, &map, &Submission::Numeric { value: 1.0 }).unwrap_err();
        assert_eq!(err, GradeError::TypeMismatch { expected: QuestionKind::Ordering, found: QuestionKind::Numeric });
    }

    #[test]
    fn stale_tokens_are_unknown() {
        let q = ordering_question();
        let (old, _) = present_question(&q, "T1", 5);
        let (_, fresh) = present_question(&q, "T1", 6);
        let stale = Submission::Ordering { ordered_tokens: old.body.items().iter().map(|i| i.token.clone()).collect() };
        assert!(matches!(grade(&q, &fresh, &stale), Err(GradeError::UnknownToken(_))));
    }

    #[test]
    fn token_grading_follows_authored_order() {
        let q = ordering_question();
        let (_, map) = present_question(&q, "T1", 11);
        let in_order =
            Submission::Ordering { ordered_tokens: (0..4).map(|i| map.token_for(i).unwrap().clone()).collect() };
        assert_eq!(grade(&q, &map, &in_order).unwrap().verdict, Verdict::Correct);
    }

    #[test]
    fn duplicate_choice_token_is_rejected() {
        let q = Question {
            id: "m".into(),
            prompt: "p".into(),
            body: QuestionBody::MultipleChoice { options: vec!["x".into(), "y".into()], correct: vec![0] },
        };
        let (_, map) = present_question(&q, "T1", 3);
        let t = map.token_for(0).unwrap().clone();
        let s = Submission::MultipleChoice { selected_tokens: vec![t.clone(), t] };
        assert!(matches!(grade(&q, &map, &s), Err(GradeError::DuplicateToken(_))));
    }

    #[test]
    fn classification_with_foreign_token() {
        let q = Question {
            id: "c".into(),
            prompt: "p".into(),
            body: QuestionBody::Classification {
                categories: ["a".into(), "b".into()],
                items: (0..4).map(|i| ClassificationItem { text: i.to_string(), category: Category::First }).collect(),
            },
        };
        let (_, map) = present_question(&q, "T1", 3);
        let mut assignments: BTreeMap<Token, Category> =
            map.iter().map(|(t, _)| (t.clone(), Category::First)).collect();
        assert_eq!(
            grade(&q, &map, &Submission::Classification { assignments: assignments.clone() }).unwrap().verdict,
            Verdict::Correct
        );
        assignments.insert(Token::from("deadbeef"), Category::First);
        assert!(matches!(
            grade(&q, &map, &Submission::Classification { assignments }),
            Err(GradeError::UnknownToken(_))
        ));
    }

    #[test]
    fn submission_wire_spelling() {
        let s = Submission::MultipleChoice { selected_tokens: vec![Token::from("0a0b0c0d")] };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"type":"multiple_choice","selectedTokens":["0a0b0c0d"]}"#);
        let s: Submission = serde_json::from_str(r#"{"type":"classification","assignments":{"aa":1}}"#).unwrap();
        assert_eq!(s.kind(), QuestionKind::Classification);
    }
}
