//! A generated bank so the harness runs without any files.

use spacerace_core::question::{Category, ClassificationItem, Question, QuestionBank, QuestionBody};

/// `n` questions cycling through the four kinds, every prompt distinct.
pub fn practice_bank(n: usize) -> QuestionBank {
    let questions = (0..n)
        .map(|i| {
            let k = i as u64;
            let (prompt, body) = match i % 4 {
                0 => (
                    format!("What is {} + {}?", k + 2, 3 * k + 1),
                    QuestionBody::Numeric { answer: (4 * k + 3) as f64, tolerance: 0.0 },
                ),
                1 => (
                    format!("Which of these are even? (set {i})"),
                    QuestionBody::MultipleChoice {
                        options: (1..=4).map(|d| (4 * k + d).to_string()).collect(),
                        correct: vec![1, 3],
                    },
                ),
                2 => (
                    format!("Order from smallest to largest (set {i})"),
                    QuestionBody::Ordering { items: (0..4).map(|d| (k + 10 * d).to_string()).collect() },
                ),
                _ => (
                    format!("Even or odd? (set {i})"),
                    QuestionBody::Classification {
                        categories: ["even".into(), "odd".into()],
                        items: (0..4)
                            .map(|d| ClassificationItem {
                                text: (2 * k + d).to_string(),
                                category: if d % 2 == 0 { Category::First } else { Category::Second },
                            })
                            .collect(),
                    },
                ),
            };
            Question { id: format!("q{}", i + 1), prompt, body }
        })
        .collect();
    QuestionBank::new("practice", questions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_banks_validate() {
        for n in [1, 4, 8, 40] {
            let bank = practice_bank(n);
            assert_eq!(bank.len(), n);
            spacerace_core::question::validate_bank(&bank).unwrap();
        }
    }
}
