//! Reference answers and enumerations, written without reusing the grader
//! or the pathfinder they are used to check.

use std::collections::{BTreeMap, VecDeque};

use spacerace_core::grading::Submission;
use spacerace_core::question::{Category, Question, QuestionBody, Token, TokenMap};
use spacerace_core::world::{Cell, WorldMap};

fn token(tokens: &TokenMap, index: usize) -> Token {
    tokens.token_for(index).cloned().expect("presentation covers every authored index")
}

/// The one submission the author intended.
pub fn correct_submission(q: &Question, tokens: &TokenMap) -> Submission {
    match &q.body {
        QuestionBody::MultipleChoice { correct, .. } => {
            Submission::MultipleChoice { selected_tokens: correct.iter().map(|&i| token(tokens, i)).collect() }
        }
        QuestionBody::Numeric { answer, .. } => Submission::Numeric { value: *answer },
        QuestionBody::Ordering { items } => {
            Submission::Ordering { ordered_tokens: (0..items.len()).map(|i| token(tokens, i)).collect() }
        }
        QuestionBody::Classification { items, .. } => Submission::Classification {
            assignments: items.iter().enumerate().map(|(i, item)| (token(tokens, i), item.category)).collect(),
        },
    }
}

/// A well-formed submission that is certainly wrong.
pub fn wrong_submission(q: &Question, tokens: &TokenMap) -> Submission {
    match &q.body {
        QuestionBody::MultipleChoice { options, correct } => {
            let mut picks: Vec<usize> = (0..options.len()).filter(|i| !correct.contains(i)).collect();
            if picks.is_empty() {
                // Every option is correct: any strict subset is wrong.
                picks.push(0);
            }
            Submission::MultipleChoice { selected_tokens: picks.into_iter().map(|i| token(tokens, i)).collect() }
        }
        QuestionBody::Numeric { answer, tolerance } => Submission::Numeric { value: answer + tolerance + 1.0 },
        QuestionBody::Ordering { items } => {
            Submission::Ordering { ordered_tokens: (0..items.len()).rev().map(|i| token(tokens, i)).collect() }
        }
        QuestionBody::Classification { items, .. } => Submission::Classification {
            assignments: items
                .iter()
                .enumerate()
                .map(|(i, item)| (token(tokens, i), item.category.flipped()))
                .collect(),
        },
    }
}

/// Every permutation of `0..n`, in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                extend(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Every non-empty subset of `0..n`, as sorted index lists.
pub fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n)).map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect()).collect()
}

/// All `2^n` ways to put `n` items into two categories.
pub fn category_assignments(n: usize) -> Vec<Vec<Category>> {
    (0u32..(1 << n))
        .map(|mask| (0..n).map(|i| if mask & (1 << i) != 0 { Category::Second } else { Category::First }).collect())
        .collect()
}

/// Breadth-first distance over walkable cells, 4-neighbour moves.
pub fn bfs_distance(map: &WorldMap, from: Cell, to: Cell) -> Option<u32> {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let open = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && !map.is_blocked(Cell::new(x as u32, y as u32));
    if !open(from.x as i64, from.y as i64) {
        return None;
    }
    let mut dist = BTreeMap::new();
    dist.insert((from.x as i64, from.y as i64), 0u32);
    let mut queue = VecDeque::from([(from.x as i64, from.y as i64)]);
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[&(x, y)];
        if (x, y) == (to.x as i64, to.y as i64) {
            return Some(d);
        }
        for (nx, ny) in [(x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)] {
            if open(nx, ny) && !dist.contains_key(&(nx, ny)) {
                dist.insert((nx, ny), d + 1);
                queue.push_back((nx, ny));
            }
        }
    }
    None
}

/// Lowest station id within one king's move of `pos`, found by brute force.
pub fn station_in_reach(map: &WorldMap, pos: Cell) -> Option<u32> {
    map.stations().iter().filter(|s| s.cell.x.abs_diff(pos.x) <= 1 && s.cell.y.abs_diff(pos.y) <= 1).map(|s| s.id).min()
}
