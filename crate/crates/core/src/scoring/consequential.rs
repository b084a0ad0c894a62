use std::collections::BTreeSet;

use serde::Serialize;

use super::rules::evaluate;
use super::ScoringError;
use crate::ac::{AcId, Task};
use crate::points::Points;
use crate::searchlab::{classify_answer, run_search, run_variant, NodeId, SearchTask, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsequentialBasis {
    /// The answer is the model answer.
    Exact,
    /// The answer follows the algorithm correctly from another start node.
    WrongStart { start: NodeId },
    /// Neither; points come from the detected answer classes.
    Classified { ac_ids: BTreeSet<AcId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsequentialScore {
    pub points: Points,
    pub basis: ConsequentialBasis,
}

/// Start node from which `answer` is a correct expansion sequence.
///
/// Two readings are accepted: the answer lists its (wrong) start node first
/// followed by the expansions from it, or the answer is the plain expansion
/// sequence from some other node. The first reading is tried first; for the
/// second, candidate start nodes are tried in id order.
fn wrong_start(answer: &[NodeId], oracle: &SearchTask) -> Option<NodeId> {
    let first = answer.first()?;
    if first != oracle.start() {
        if let Ok(reseeded) = oracle.reseeded(first.clone()) {
            if let Ok(run) = run_variant(&reseeded, &Variant::IncludeStart) {
                if run.nodes == answer {
                    return Some(first.clone());
                }
            }
        }
    }
    oracle
        .graph()
        .nodes()
        .filter(|n| *n != oracle.start())
        .find(|n| {
            let reseeded = oracle.reseeded((*n).clone()).expect("node from graph");
            run_search(&reseeded).nodes == answer
        })
        .cloned()
}

/// Scores a search answer, giving credit for a correctly executed algorithm
/// that started from the wrong node: full marks minus `wrong_start_deduction`.
pub fn consequential_score(
    answer: &[NodeId],
    task: &Task,
    wrong_start_deduction: Points,
) -> Result<ConsequentialScore, ScoringError> {
    let oracle = task.oracle.as_ref().ok_or_else(|| ScoringError::NoOracle(task.id.clone()))?;
    let bindings = task.detector_bindings();
    let correct = run_search(oracle).nodes;
    let full = evaluate(&classify_answer(&correct, oracle, &bindings), &task.ruleset, task.max_points);
    if answer == correct.as_slice() {
        return Ok(ConsequentialScore { points: full, basis: ConsequentialBasis::Exact });
    }
    if let Some(start) = wrong_start(answer, oracle) {
        let points = (full - wrong_start_deduction).clamp_to(task.max_points);
        return Ok(ConsequentialScore { points, basis: ConsequentialBasis::WrongStart { start } });
    }
    let ac_ids = classify_answer(answer, oracle, &bindings);
    let points = evaluate(&ac_ids, &task.ruleset, task.max_points);
    Ok(ConsequentialScore { points, basis: ConsequentialBasis::Classified { ac_ids } })
}
