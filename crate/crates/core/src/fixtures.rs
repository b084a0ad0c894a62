//! Sample data used by tests, the acceptance suite and the CLI demo.
//!
//! The search exercise uses a nine-node graph (A to I) with edge costs and
//! node heuristics; five subtasks ask for the next four expanded nodes under
//! DFS, BFS, uniform-cost, greedy and A* search starting at A. Point rules
//! are example configuration, not a prescribed grading key.

use serde_json::{json, Value};

use crate::exam::Exam;
use crate::ids::BookletId;
use crate::points::Points;
use crate::scoring::{Action, Rule, ScoringRuleSet};
use crate::searchlab::{Graph, GraphDoc};

const FIGURE_GRAPH: &str = include_str!("../fixtures/figure_graph.json");
const SEARCH_PROBLEM: &str = include_str!("../fixtures/search_problem.json");

pub fn figure_graph_json() -> &'static str {
    FIGURE_GRAPH
}

pub fn figure_graph() -> Graph {
    let doc: GraphDoc = serde_json::from_str(FIGURE_GRAPH).expect("figure graph parses");
    Graph::from_doc(&doc).expect("figure graph is valid")
}

/// Rules used for the two-point search subtasks: AC3 earns `max`, each
/// correct position half a point, listing the start node costs half a point.
pub fn search_ruleset(max: Points) -> ScoringRuleSet {
    let half = Points::from_half_points(1);
    let mut rules = vec![Rule::new("has(AC3)", Action::Set(max))];
    for ac in ["AC5", "AC6", "AC7", "AC8"] {
        rules.push(Rule::new(&format!("has({ac})"), Action::Add(half)));
    }
    rules.push(Rule::new("has(AC10)", Action::Deduct(half)));
    ScoringRuleSet::new(Points::ZERO, rules)
}

pub fn search_problem_json() -> &'static str {
    SEARCH_PROBLEM
}

/// Exam with the single search problem (ST1 to ST5) and a four-page layout.
pub fn search_problem_exam() -> Exam {
    Exam::from_json(SEARCH_PROBLEM).expect("search problem fixture is valid")
}

pub const SYNTHETIC_PROBLEMS: usize = 12;
pub const SYNTHETIC_TASKS: usize = 41;
pub const SYNTHETIC_SPECIFIC_ACS: usize = 192;

/// A 12-problem, 41-task exam with 192 task-specific answer classes.
///
/// Problem P2 is the search problem with only the initial positional classes
/// AC5 to AC8 per subtask. The other 36
/// tasks carry five specific classes each, except the last eight which carry
/// four.
pub fn synthetic_exam_json() -> String {
    let search: Value = serde_json::from_str(SEARCH_PROBLEM).expect("search fixture parses");
    let mut problems = Vec::new();
    let mut other_index = 0usize;
    for p in 1..=SYNTHETIC_PROBLEMS {
        if p == 2 {
            let tasks: Vec<Value> = search["problems"][0]["tasks"]
                .as_array()
                .expect("tasks")
                .iter()
                .map(|t| {
                    let max = t["max_points"].clone();
                    let acs: Vec<Value> = t["answer_classes"]
                        .as_array()
                        .expect("classes")
                        .iter()
                        .filter(|ac| ["AC5", "AC6", "AC7", "AC8"].contains(&ac["id"].as_str().unwrap_or_default()))
                        .map(|ac| json!({"id": ac["id"], "description": ac["description"], "detector": ac["detector"]}))
                        .collect();
                    json!({
                        "id": t["id"],
                        "title": t["title"],
                        "max_points": max,
                        "answer_classes": acs,
                        "oracle": t["oracle"],
                        "ruleset": {"rules": [{"if": "has(AC3)", "then": {"set": max}}]},
                    })
                })
                .collect();
            problems.push(json!({"id": "P2", "title": "Search algorithms", "tasks": tasks}));
            continue;
        }
        // 36 tasks over 11 problems: the first three get four tasks.
        let task_count = if p <= 4 { 4 } else { 3 };
        let mut tasks = Vec::new();
        for t in 1..=task_count {
            other_index += 1;
            let ac_count = if other_index > 28 { 4 } else { 5 };
            let max = [1.0, 2.0, 1.5, 3.0][other_index % 4];
            let acs: Vec<Value> = (0..ac_count)
                .map(|k| {
                    json!({
                        "id": format!("AC{}", 5 + k),
                        "description": format!("answer shows pattern {} of task {p}.{t}", k + 1),
                    })
                })
                .collect();
            tasks.push(json!({
                "id": format!("P{p}.{t}"),
                "title": format!("Task {p}.{t}"),
                "max_points": max,
                "answer_classes": acs,
                "ruleset": {"rules": [
                    {"if": "has(AC3)", "then": {"set": max}},
                    {"if": "has(AC5) and not has(AC6)", "then": {"add": 0.5}},
                ]},
            }));
        }
        problems.push(json!({"id": format!("P{p}"), "title": format!("Problem {p}"), "tasks": tasks}));
    }
    serde_json::to_string_pretty(&json!({
        "exam_id": "SYNTH-41",
        "title": "Synthetic exam",
        "problems": problems,
    }))
    .expect("serializes")
}

pub fn synthetic_exam() -> Exam {
    Exam::from_json(&synthetic_exam_json()).expect("synthetic exam fixture is valid")
}

/// Planted clusters per search subtask: canonical answer and how many of the
/// 462 booklets gave it. Everything else is answered by distinct one-offs.
pub fn planted_clusters(task: &str) -> &'static [(&'static str, usize)] {
    match task {
        "ST4" => &[
            ("B,E,D,H", 180),
            ("B,E,C,G", 89),
            ("A,B,E,D", 40),
            ("C,F,B,E", 25),
            ("B,D,H,I", 12),
            ("E,B,D,H", 6),
            ("B,E,H,D", 5),
        ],
        "ST5" => &[
            ("C,F,G,E", 200),
            ("C,F,G,I", 52),
            ("A,C,F,G", 30),
            ("C,F,E,G", 11),
            ("C,G,F,E", 7),
            ("C,F,E,B", 6),
            ("F,C,G,E", 6),
            ("C,B,F,G", 5),
        ],
        _ => &[],
    }
}

pub const COHORT_SIZE: usize = 462;

/// Transcribed answers of a 462-booklet cohort for one search subtask, in
/// a seeded random order and with varied spelling (`b e c g`, `B→E→C→G`).
pub fn search_cohort(task: &str, seed: u64) -> Vec<(BookletId, String)> {
    let planted = planted_clusters(task);
    let mut answers: Vec<String> = Vec::with_capacity(COHORT_SIZE);
    for (answer, count) in planted {
        for i in 0..*count {
            answers.push(respell(answer, i));
        }
    }
    let taken: Vec<&str> = planted.iter().map(|(a, _)| *a).collect();
    let letters = ["A", "B", "C", "D", "E", "F", "G", "H", "I"];
    'fill: for a in letters {
        for b in letters {
            for c in letters {
                for d in letters {
                    if answers.len() == COHORT_SIZE {
                        break 'fill;
                    }
                    let seq = [a, b, c, d];
                    let distinct = (0..4).all(|i| (i + 1..4).all(|j| seq[i] != seq[j]));
                    let joined = seq.join(",");
                    if distinct && !taken.contains(&joined.as_str()) {
                        answers.push(joined);
                    }
                }
            }
        }
    }
    let mut state = seed ^ 0x9E37_79B9_7F4A_7C15;
    for i in (1..answers.len()).rev() {
        // xorshift64*, enough for a reproducible shuffle.
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        let j = (state.wrapping_mul(0x2545_F491_4F6C_DD1D) % (i as u64 + 1)) as usize;
        answers.swap(i, j);
    }
    answers
        .into_iter()
        .enumerate()
        .map(|(i, a)| (BookletId::new(format!("S{:04}", i + 1)), a))
        .collect()
}

fn respell(canonical: &str, i: usize) -> String {
    match i % 4 {
        0 => canonical.to_string(),
        1 => canonical.to_lowercase().replace(',', " "),
        2 => canonical.replace(',', " → "),
        _ => canonical.replace(',', "; "),
    }
}
