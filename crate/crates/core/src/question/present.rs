//! The answer-free view of a question that players receive.
//!
//! Options and items travel under opaque per-presentation tokens instead of
//! their authored indices, and in a shuffled order. Only the server keeps the
//! [`TokenMap`] that turns a token back into an index.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{Question, QuestionBody, QuestionKind};
use crate::rng;

/// Opaque 8 hex digit handle for one option or item of one presentation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Token {
    fn from(s: &str) -> Self {
        Token(s.into())
    }
}

/// Server-side inverse of a presentation: token to authored index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenMap(BTreeMap<Token, usize>);

impl TokenMap {
    pub fn resolve(&self, token: &Token) -> Option<usize> {
        self.0.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Token presented for an authored index.
    pub fn token_for(&self, index: usize) -> Option<&Token> {
        self.0.iter().find(|(_, &i)| i == index).map(|(t, _)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, usize)> {
        self.0.iter().map(|(t, &i)| (t, i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedItem {
    pub token: Token,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PresentedQuestion {
    pub task_id: String,
    pub prompt: String,
    #[serde(flatten)]
    pub body: PresentedBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PresentedBody {
    MultipleChoice {
        options: Vec<PresentedItem>,
    },
    Numeric {},
    Ordering {
        items: Vec<PresentedItem>,
    },
    /// Category names keep their authored order since submissions refer to
    /// them by position.
    Classification {
        categories: [String; 2],
        items: Vec<PresentedItem>,
    },
}

impl PresentedBody {
    pub fn kind(&self) -> QuestionKind {
        match self {
            PresentedBody::MultipleChoice { .. } => QuestionKind::MultipleChoice,
            PresentedBody::Numeric {} => QuestionKind::Numeric,
            PresentedBody::Ordering { .. } => QuestionKind::Ordering,
            PresentedBody::Classification { .. } => QuestionKind::Classification,
        }
    }

    pub fn items(&self) -> &[PresentedItem] {
        match self {
            PresentedBody::MultipleChoice { options } => options,
            PresentedBody::Numeric {} => &[],
            PresentedBody::Ordering { items } | PresentedBody::Classification { items, .. } => items,
        }
    }
}

/// Builds the client view of `q` for one task, shuffled and tokenized from
/// `seed`. Equal inputs give equal outputs.
pub fn present_question(q: &Question, task_id: &str, seed: u64) -> (PresentedQuestion, TokenMap) {
    let mut rng = rng::seeded(seed);
    let texts: Vec<&str> = match &q.body {
        QuestionBody::MultipleChoice { options, .. } => options.iter().map(String::as_str).collect(),
        QuestionBody::Numeric { .. } => Vec::new(),
        QuestionBody::Ordering { items } => items.iter().map(String::as_str).collect(),
        QuestionBody::Classification { items, .. } => items.iter().map(|i| i.text.as_str()).collect(),
    };

    let mut order: Vec<usize> = (0..texts.len()).collect();
    order.shuffle(&mut rng);

    let mut map = BTreeMap::new();
    let mut presented = Vec::with_capacity(order.len());
    for index in order {
        let token = loop {
            let candidate = Token(format!("{:08x}", rng.next_u32()));
            if !map.contains_key(&candidate) {
                break candidate;
            }
        };
        map.insert(token.clone(), index);
        presented.push(PresentedItem { token, text: texts[index].into() });
    }

    let body = match &q.body {
        QuestionBody::MultipleChoice { .. } => PresentedBody::MultipleChoice { options: presented },
        QuestionBody::Numeric { .. } => PresentedBody::Numeric {},
        QuestionBody::Ordering { .. } => PresentedBody::Ordering { items: presented },
        QuestionBody::Classification { categories, .. } => {
            PresentedBody::Classification { categories: categories.clone(), items: presented }
        }
    };
    let view = PresentedQuestion { task_id: task_id.into(), prompt: q.prompt.clone(), body };
    (view, TokenMap(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::{Category, ClassificationItem};
    use alloc::collections::BTreeSet;
    use alloc::string::ToString;
    use alloc::vec;

    fn ordering() -> Question {
        Question {
            id: "o".into(),
            prompt: "Smallest to largest".into(),
            body: QuestionBody::Ordering {
                items: vec!["Mercury".into(), "Mars".into(), "Earth".into(), "Jupiter".into()],
            },
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let q = ordering();
        assert_eq!(present_question(&q, "T1", 7), present_question(&q, "T1", 7));
    }

    #[test]
    fn ordering_tokens_cover_every_index() {
        let (view, map) = present_question(&ordering(), "T1", 99);
        assert_eq!(view.body.items().len(), 4);
        let indices: BTreeSet<usize> = view.body.items().iter().map(|item| map.resolve(&item.token).unwrap()).collect();
        assert_eq!(indices, (0..4).collect());
        for item in view.body.items() {
            assert_eq!(item.token.as_str().len(), 8);
            assert!(item.token.as_str().chars().all(|c| c.is_ascii_hexdigit()));
        }
    }

    #[test]
    fn shuffle_order_varies_with_seed() {
        let q = ordering();
        let orders: BTreeSet<Vec<String>> = (0..32)
            .map(|seed| {
                let (view, _) = present_question(&q, "T1", seed);
                view.body.items().iter().map(|i| i.text.clone()).collect()
            })
            .collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn classification_view_has_no_item_categories() {
        let q = Question {
            id: "c".into(),
            prompt: "Sort".into(),
            body: QuestionBody::Classification {
                categories: ["rocky".into(), "gas".into()],
                items: ["a", "b", "c", "d"]
                    .iter()
                    .map(|t| ClassificationItem { text: t.to_string(), category: Category::Second })
                    .collect(),
            },
        };
        let (view, _) = present_question(&q, "T3", 1);
        let json = serde_json::to_string(&view).unwrap();
        assert!(!json.contains("\"category\""));
        assert!(json.contains("\"categories\":[\"rocky\",\"gas\"]"));
        assert!(json.starts_with("{\"taskId\":\"T3\",\"prompt\":\"Sort\",\"type\":\"classification\""));
    }
}
