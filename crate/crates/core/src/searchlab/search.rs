use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{Graph, GraphError, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "dfs")]
    Dfs,
    #[serde(rename = "bfs")]
    Bfs,
    #[serde(rename = "ucs")]
    Ucs,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "astar")]
    AStar,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Dfs, Algorithm::Bfs, Algorithm::Ucs, Algorithm::Greedy, Algorithm::AStar];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dfs => "dfs",
            Algorithm::Bfs => "bfs",
            Algorithm::Ucs => "ucs",
            Algorithm::Greedy => "greedy",
            Algorithm::AStar => "astar",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', '*'], "").as_str() {
            "dfs" | "depthfirst" => Ok(Algorithm::Dfs),
            "bfs" | "breadthfirst" => Ok(Algorithm::Bfs),
            "ucs" | "uniformcost" => Ok(Algorithm::Ucs),
            "greedy" | "greedybestfirst" => Ok(Algorithm::Greedy),
            "astar" | "a" => Ok(Algorithm::AStar),
            _ => Err(format!("unknown algorithm {s:?} (expected dfs, bfs, ucs, greedy or astar)")),
        }
    }
}

/// Which of two tied nodes is expanded first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Ascending,
    Descending,
}

impl TieBreak {
    fn reversed(self) -> TieBreak {
        match self {
            TieBreak::Ascending => TieBreak::Descending,
            TieBreak::Descending => TieBreak::Ascending,
        }
    }

    /// `Less` when `a` wins the tie.
    fn prefer(self, a: &NodeId, b: &NodeId) -> Ordering {
        match self {
            TieBreak::Ascending => a.cmp(b),
            TieBreak::Descending => b.cmp(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid graph: {0}")]
    InvalidGraph(#[from] GraphError),
    #[error("start node {0} is not in the graph")]
    UnknownStart(NodeId),
    #[error("answer length must be at least 1")]
    ZeroLength,
    #[error("variant {variant} is not applicable to {algorithm}: {reason}")]
    InapplicableVariant { variant: Variant, algorithm: Algorithm, reason: String },
}

fn default_length() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchTaskDoc {
    graph: Graph,
    start: NodeId,
    algorithm: Algorithm,
    #[serde(default = "default_length")]
    answer_length: usize,
    #[serde(default)]
    tie_break: TieBreak,
}

/// One "list the next k expanded nodes" exercise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SearchTaskDoc", into = "SearchTaskDoc")]
pub struct SearchTask {
    graph: Graph,
    start: NodeId,
    algorithm: Algorithm,
    answer_length: usize,
    tie_break: TieBreak,
}

impl TryFrom<SearchTaskDoc> for SearchTask {
    type Error = SearchError;

    fn try_from(doc: SearchTaskDoc) -> Result<Self, Self::Error> {
        SearchTask::new(doc.graph, doc.start, doc.algorithm, doc.answer_length)
            .map(|t| t.with_tie_break(doc.tie_break))
    }
}

impl From<SearchTask> for SearchTaskDoc {
    fn from(t: SearchTask) -> Self {
        SearchTaskDoc {
            graph: t.graph,
            start: t.start,
            algorithm: t.algorithm,
            answer_length: t.answer_length,
            tie_break: t.tie_break,
        }
    }
}

impl SearchTask {
    pub fn new(
        graph: Graph,
        start: NodeId,
        algorithm: Algorithm,
        answer_length: usize,
    ) -> Result<Self, SearchError> {
        if !graph.contains(&start) {
            return Err(SearchError::UnknownStart(start));
        }
        if answer_length == 0 {
            return Err(SearchError::ZeroLength);
        }
        Ok(SearchTask { graph, start, algorithm, answer_length, tie_break: TieBreak::Ascending })
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// Same exercise started from another node.
    pub fn reseeded(&self, start: NodeId) -> Result<Self, SearchError> {
        if !self.graph.contains(&start) {
            return Err(SearchError::UnknownStart(start));
        }
        Ok(SearchTask { start, ..self.clone() })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn start(&self) -> &NodeId {
        &self.start
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn answer_length(&self) -> usize {
        self.answer_length
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }
}

/// Expansion order after the start node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchRun {
    pub nodes: Vec<NodeId>,
    /// Set when the frontier ran dry before `answer_length` nodes were expanded.
    pub exhausted: bool,
}

/// A systematic misapplication of a search algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Greedy search that only looks at the successors of the node expanded
    /// last, falling back to the global frontier at dead ends.
    GreedyLocal,
    /// Uniform-cost search ordered by heuristic, or greedy search ordered by
    /// accumulated cost.
    SwapCostHeuristic,
    /// The edge `from -> to` is read as `to -> from`.
    ReverseEdge { from: NodeId, to: NodeId },
    ReverseTieBreak,
    /// The start node is listed as the first expanded node.
    IncludeStart,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::GreedyLocal => f.write_str("greedy_local"),
            Variant::SwapCostHeuristic => f.write_str("swap_cost_heuristic"),
            Variant::ReverseEdge { from, to } => write!(f, "reverse_edge:{from},{to}"),
            Variant::ReverseTieBreak => f.write_str("reverse_tie_break"),
            Variant::IncludeStart => f.write_str("include_start"),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let normalized = s.replace('-', "_").to_ascii_lowercase();
        match normalized.as_str() {
            "greedy_local" => return Ok(Variant::GreedyLocal),
            "swap_cost_heuristic" => return Ok(Variant::SwapCostHeuristic),
            "reverse_tie_break" => return Ok(Variant::ReverseTieBreak),
            "include_start" => return Ok(Variant::IncludeStart),
            _ => {}
        }
        if let Some(rest) = normalized.strip_prefix("reverse_edge:") {
            // Keep the original case of the node ids.
            let args = &s[s.len() - rest.len()..];
            if let Some((from, to)) = args.split_once(',') {
                let (from, to) = (from.trim(), to.trim());
                if !from.is_empty() && !to.is_empty() {
                    return Ok(Variant::ReverseEdge { from: from.into(), to: to.into() });
                }
            }
        }
        Err(format!("unknown variant {s:?}"))
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Model answer: the next `answer_length` nodes expanded after `start`.
pub fn run_search(task: &SearchTask) -> SearchRun {
    expand(&task.graph, &task.start, task.algorithm, task.tie_break, task.answer_length)
}

pub fn run_variant(task: &SearchTask, variant: &Variant) -> Result<SearchRun, SearchError> {
    let inapplicable = |reason: &str| SearchError::InapplicableVariant {
        variant: variant.clone(),
        algorithm: task.algorithm,
        reason: reason.to_string(),
    };
    match variant {
        Variant::GreedyLocal => {
            if task.algorithm != Algorithm::Greedy {
                return Err(inapplicable("only defined for greedy search"));
            }
            Ok(greedy_local(&task.graph, &task.start, task.tie_break, task.answer_length))
        }
        Variant::SwapCostHeuristic => {
            let swapped = match task.algorithm {
                Algorithm::Ucs => Algorithm::Greedy,
                Algorithm::Greedy => Algorithm::Ucs,
                _ => return Err(inapplicable("the algorithm does not order by cost or heuristic alone")),
            };
            Ok(expand(&task.graph, &task.start, swapped, task.tie_break, task.answer_length))
        }
        Variant::ReverseEdge { from, to } => {
            let graph = task
                .graph
                .with_reversed_edge(from, to)
                .map_err(|e| inapplicable(&e.to_string()))?;
            Ok(expand(&graph, &task.start, task.algorithm, task.tie_break, task.answer_length))
        }
        Variant::ReverseTieBreak => Ok(expand(
            &task.graph,
            &task.start,
            task.algorithm,
            task.tie_break.reversed(),
            task.answer_length,
        )),
        Variant::IncludeStart => {
            let run = run_search(task);
            let mut nodes = Vec::with_capacity(task.answer_length);
            nodes.push(task.start.clone());
            nodes.extend(run.nodes);
            nodes.truncate(task.answer_length);
            Ok(SearchRun { nodes, exhausted: run.exhausted })
        }
    }
}

fn expand(graph: &Graph, start: &NodeId, algorithm: Algorithm, tie: TieBreak, limit: usize) -> SearchRun {
    match algorithm {
        Algorithm::Dfs => depth_first(graph, start, tie, limit),
        Algorithm::Bfs => breadth_first(graph, start, tie, limit),
        Algorithm::Ucs | Algorithm::Greedy | Algorithm::AStar => {
            best_first(graph, start, algorithm, tie, limit)
        }
    }
}

/// Unexpanded successors of `node`, most preferred first.
fn open_successors<'a>(
    graph: &'a Graph,
    node: &NodeId,
    expanded: &BTreeSet<NodeId>,
    tie: TieBreak,
) -> Vec<(&'a NodeId, f64)> {
    let mut succ: Vec<_> = graph.successors(node).filter(|(s, _)| !expanded.contains(*s)).collect();
    succ.sort_by(|a, b| tie.prefer(a.0, b.0));
    succ
}

// A node rediscovered while still on the stack moves to the top, so the
// expansion order is that of recursive depth-first traversal.
fn depth_first(graph: &Graph, start: &NodeId, tie: TieBreak, limit: usize) -> SearchRun {
    let mut expanded = BTreeSet::from([start.clone()]);
    let mut stack: Vec<NodeId> = Vec::new();
    let mut nodes = Vec::new();
    let mut current = start.clone();
    loop {
        for (succ, _) in open_successors(graph, &current, &expanded, tie).into_iter().rev() {
            stack.retain(|n| n != succ);
            stack.push(succ.clone());
        }
        if nodes.len() == limit {
            return SearchRun { nodes, exhausted: false };
        }
        let Some(next) = stack.pop() else {
            return SearchRun { nodes, exhausted: true };
        };
        expanded.insert(next.clone());
        nodes.push(next.clone());
        current = next;
    }
}

fn breadth_first(graph: &Graph, start: &NodeId, tie: TieBreak, limit: usize) -> SearchRun {
    let mut expanded = BTreeSet::from([start.clone()]);
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    let mut nodes = Vec::new();
    let mut current = start.clone();
    loop {
        for (succ, _) in open_successors(graph, &current, &expanded, tie) {
            if !queue.contains(succ) {
                queue.push_back(succ.clone());
            }
        }
        if nodes.len() == limit {
            return SearchRun { nodes, exhausted: false };
        }
        let Some(next) = queue.pop_front() else {
            return SearchRun { nodes, exhausted: true };
        };
        expanded.insert(next.clone());
        nodes.push(next.clone());
        current = next;
    }
}

/// Frontier of discovered, unexpanded nodes with the cheapest known path
/// cost. A rediscovery replaces the entry only when strictly cheaper.
struct Frontier {
    cost: BTreeMap<NodeId, f64>,
}

impl Frontier {
    fn new() -> Self {
        Frontier { cost: BTreeMap::new() }
    }

    fn discover(&mut self, graph: &Graph, node: &NodeId, g: f64, expanded: &BTreeSet<NodeId>) {
        for (succ, cost) in graph.successors(node) {
            if expanded.contains(succ) {
                continue;
            }
            let candidate = g + cost;
            match self.cost.get(succ) {
                Some(&known) if known <= candidate => {}
                _ => {
                    self.cost.insert(succ.clone(), candidate);
                }
            }
        }
    }

    fn pop_best(&mut self, priority: impl Fn(&NodeId, f64) -> f64, tie: TieBreak) -> Option<(NodeId, f64)> {
        let best = self
            .cost
            .iter()
            .min_by(|(a, &ga), (b, &gb)| {
                priority(a, ga).total_cmp(&priority(b, gb)).then_with(|| tie.prefer(a, b))
            })
            .map(|(n, _)| n.clone())?;
        let g = self.cost.remove(&best).expect("present");
        Some((best, g))
    }
}

fn best_first(graph: &Graph, start: &NodeId, algorithm: Algorithm, tie: TieBreak, limit: usize) -> SearchRun {
    let priority = |node: &NodeId, g: f64| match algorithm {
        Algorithm::Ucs => g,
        Algorithm::Greedy => graph.h(node),
        _ => g + graph.h(node),
    };
    let mut expanded = BTreeSet::from([start.clone()]);
    let mut frontier = Frontier::new();
    frontier.discover(graph, start, 0.0, &expanded);
    let mut nodes = Vec::new();
    while nodes.len() < limit {
        let Some((node, g)) = frontier.pop_best(priority, tie) else {
            return SearchRun { nodes, exhausted: true };
        };
        expanded.insert(node.clone());
        frontier.discover(graph, &node, g, &expanded);
        nodes.push(node);
    }
    SearchRun { nodes, exhausted: false }
}

fn greedy_local(graph: &Graph, start: &NodeId, tie: TieBreak, limit: usize) -> SearchRun {
    let by_h = |a: &&NodeId, b: &&NodeId| graph.h(a).total_cmp(&graph.h(b)).then_with(|| tie.prefer(a, b));
    let mut expanded = BTreeSet::from([start.clone()]);
    let mut frontier: BTreeSet<NodeId> = BTreeSet::new();
    let mut last = start.clone();
    let mut nodes = Vec::new();
    while nodes.len() < limit {
        for (succ, _) in graph.successors(&last) {
            if !expanded.contains(succ) {
                frontier.insert(succ.clone());
            }
        }
        let local = graph
            .successors(&last)
            .map(|(s, _)| s)
            .filter(|s| !expanded.contains(*s))
            .min_by(by_h);
        let next = match local {
            Some(n) => n.clone(),
            None => match frontier.iter().min_by(by_h) {
                Some(n) => n.clone(),
                None => return SearchRun { nodes, exhausted: true },
            },
        };
        frontier.remove(&next);
        expanded.insert(next.clone());
        nodes.push(next.clone());
        last = next;
    }
    SearchRun { nodes, exhausted: false }
}
