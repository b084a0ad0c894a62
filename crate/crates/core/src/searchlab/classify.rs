use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::NodeId;
use super::search::{run_search, run_variant, Algorithm, SearchTask, Variant};
use crate::ac::{AcId, AC_CORRECT, AC_EMPTY, AC_NO_MATCH};
use crate::analytics::normalize;

/// How an answer class is recognised automatically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Detector {
    /// Assigned by graders only.
    Manual,
    /// The n-th listed node (1-based) matches the model answer, after
    /// dropping a leading start node.
    Position(usize),
    /// The first listed node is the start node.
    StartIncluded,
    /// Some node is listed more than once.
    RepeatedNode,
    /// The answer is exactly the output of a misapplied algorithm.
    Variant(Variant),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown detector {0:?}")]
pub struct DetectorParseError(pub String);

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Detector::Manual => f.write_str("manual"),
            Detector::Position(n) => write!(f, "position:{n}"),
            Detector::StartIncluded => f.write_str("start_included"),
            Detector::RepeatedNode => f.write_str("repeated_node"),
            Detector::Variant(v) => v.fmt(f),
        }
    }
}

impl FromStr for Detector {
    type Err = DetectorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        match trimmed {
            "manual" => return Ok(Detector::Manual),
            "start_included" => return Ok(Detector::StartIncluded),
            "repeated_node" => return Ok(Detector::RepeatedNode),
            _ => {}
        }
        if let Some(n) = trimmed.strip_prefix("position:") {
            return match n.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Detector::Position(n)),
                _ => Err(DetectorParseError(s.to_string())),
            };
        }
        trimmed.parse::<Variant>().map(Detector::Variant).map_err(|_| DetectorParseError(s.to_string()))
    }
}

impl Serialize for Detector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Detector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorBinding {
    pub ac: AcId,
    pub detector: Detector,
}

impl DetectorBinding {
    pub fn new(ac: &str, detector: Detector) -> Self {
        DetectorBinding { ac: AcId::new(ac).expect("static AC id"), detector }
    }
}

/// Detectors shared by every search exercise: positional classes AC5..AC8,
/// AC10 (start included), AC11 (repeated node), AC12 (reverse tie-break), and
/// AC22 (cost and heuristic swapped) for uniform-cost and greedy search.
pub fn default_bindings(algorithm: Algorithm) -> Vec<DetectorBinding> {
    let mut bindings: Vec<DetectorBinding> =
        (1..=4).map(|n| DetectorBinding::new(&format!("AC{}", n + 4), Detector::Position(n))).collect();
    bindings.push(DetectorBinding::new("AC10", Detector::StartIncluded));
    bindings.push(DetectorBinding::new("AC11", Detector::RepeatedNode));
    bindings.push(DetectorBinding::new("AC12", Detector::Variant(Variant::ReverseTieBreak)));
    if matches!(algorithm, Algorithm::Ucs | Algorithm::Greedy) {
        bindings.push(DetectorBinding::new("AC22", Detector::Variant(Variant::SwapCostHeuristic)));
    }
    bindings
}

/// Splits a transcribed answer such as `"b -> e, c"` into node ids.
pub fn parse_answer(text: &str) -> Vec<NodeId> {
    let canonical = normalize(text);
    if canonical.is_empty() {
        return Vec::new();
    }
    canonical.split(',').map(|t| NodeId::new(t.trim())).collect()
}

/// Answer classes recognised for `answer`.
///
/// AC3 fires on an exact match with the model answer and AC4 when nothing
/// else fired. An empty answer is AC1 only, an answer naming unknown nodes is
/// AC4 only. Variant detectors fire only where the variant's output differs
/// from the model answer.
pub fn classify_answer(answer: &[NodeId], task: &SearchTask, bindings: &[DetectorBinding]) -> BTreeSet<AcId> {
    let mut fired = BTreeSet::new();
    if answer.is_empty() {
        fired.insert(AcId::from_static(AC_EMPTY));
        return fired;
    }
    if answer.iter().any(|n| !task.graph().contains(n)) {
        fired.insert(AcId::from_static(AC_NO_MATCH));
        return fired;
    }
    let correct = run_search(task).nodes;
    if answer == correct.as_slice() {
        fired.insert(AcId::from_static(AC_CORRECT));
    }
    let starts_with_start = answer.first() == Some(task.start());
    let stripped = if starts_with_start { &answer[1..] } else { answer };
    for binding in bindings {
        let hit = match &binding.detector {
            Detector::Manual => false,
            Detector::Position(n) => match (stripped.get(n - 1), correct.get(n - 1)) {
                (Some(a), Some(c)) => a == c,
                _ => false,
            },
            Detector::StartIncluded => starts_with_start,
            Detector::RepeatedNode => {
                let mut seen = HashSet::new();
                !answer.iter().all(|n| seen.insert(n))
            }
            Detector::Variant(v) => match run_variant(task, v) {
                Ok(run) => run.nodes != correct && run.nodes == answer,
                Err(_) => false,
            },
        };
        if hit {
            fired.insert(binding.ac.clone());
        }
    }
    if fired.is_empty() {
        fired.insert(AcId::from_static(AC_NO_MATCH));
    }
    fired
}
