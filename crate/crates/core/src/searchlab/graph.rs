use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node identifier. Ordering is plain byte-wise string order, which is the
/// "alphabetical" order used for tie-breaking.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid node id {0:?}: must be a non-empty token without whitespace, ',', ';' or '|'")]
    BadNodeId(String),
    #[error("node {0} declared twice")]
    DuplicateNode(NodeId),
    #[error("heuristic of node {0} must be finite and non-negative")]
    BadHeuristic(NodeId),
    #[error("edge {from}->{to} references unknown node {missing}")]
    UnknownEndpoint { from: NodeId, to: NodeId, missing: NodeId },
    #[error("edge {0}->{1} declared twice")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge {0}->{1} must have a finite positive cost")]
    BadCost(NodeId, NodeId),
    #[error("no edge {0}->{1}")]
    NoSuchEdge(NodeId, NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub cost: f64,
}

/// Directed graph with positive edge costs and a non-negative heuristic per
/// node.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    heuristic: BTreeMap<NodeId, f64>,
    successors: BTreeMap<NodeId, BTreeMap<NodeId, Edge>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: NodeId,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub from: NodeId,
    pub to: NodeId,
    pub cost: f64,
}

/// On-disk graph format: `{nodes:[{id,h}], edges:[{from,to,cost}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

fn valid_node_token(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c.is_whitespace() || matches!(c, ',' | ';' | '|'))
}

impl Graph {
    pub fn new<N, E>(nodes: N, edges: E) -> Result<Self, GraphError>
    where
        N: IntoIterator<Item = (NodeId, f64)>,
        E: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let mut heuristic = BTreeMap::new();
        let mut successors: BTreeMap<NodeId, BTreeMap<NodeId, Edge>> = BTreeMap::new();
        for (id, h) in nodes {
            if !valid_node_token(id.as_str()) {
                return Err(GraphError::BadNodeId(id.0));
            }
            if !(h.is_finite() && h >= 0.0) {
                return Err(GraphError::BadHeuristic(id));
            }
            if heuristic.insert(id.clone(), h).is_some() {
                return Err(GraphError::DuplicateNode(id));
            }
            successors.insert(id, BTreeMap::new());
        }
        for (from, to, cost) in edges {
            for end in [&from, &to] {
                if !heuristic.contains_key(end) {
                    return Err(GraphError::UnknownEndpoint {
                        from: from.clone(),
                        to: to.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if !(cost.is_finite() && cost > 0.0) {
                return Err(GraphError::BadCost(from, to));
            }
            let out = successors.get_mut(&from).expect("endpoint checked");
            if out.insert(to.clone(), Edge { cost }).is_some() {
                return Err(GraphError::DuplicateEdge(from, to));
            }
        }
        Ok(Graph { heuristic, successors })
    }

    pub fn from_doc(doc: &GraphDoc) -> Result<Self, GraphError> {
        Graph::new(
            doc.nodes.iter().map(|n| (n.id.clone(), n.h)),
            doc.edges.iter().map(|e| (e.from.clone(), e.to.clone(), e.cost)),
        )
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            nodes: self.heuristic.iter().map(|(id, &h)| NodeDoc { id: id.clone(), h }).collect(),
            edges: self.edges().map(|(from, to, cost)| EdgeDoc { from: from.clone(), to: to.clone(), cost }).collect(),
        }
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.heuristic.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.heuristic.keys()
    }

    pub fn node_count(&self) -> usize {
        self.heuristic.len()
    }

    /// Heuristic value of `id`. Panics on an unknown node.
    pub fn h(&self, id: &NodeId) -> f64 {
        self.heuristic[id]
    }

    /// Outgoing edges of `id`, ordered by target id.
    pub fn successors<'a>(&'a self, id: &NodeId) -> impl Iterator<Item = (&'a NodeId, f64)> + 'a {
        self.successors
            .get(id)
            .into_iter()
            .flat_map(|out| out.iter().map(|(to, e)| (to, e.cost)))
    }

    pub fn cost(&self, from: &NodeId, to: &NodeId) -> Option<f64> {
        self.successors.get(from)?.get(to).map(|e| e.cost)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId, f64)> {
        self.successors
            .iter()
            .flat_map(|(from, out)| out.iter().map(move |(to, e)| (from, to, e.cost)))
    }

    /// Copy of the graph with the edge `from -> to` turned into `to -> from`.
    pub fn with_reversed_edge(&self, from: &NodeId, to: &NodeId) -> Result<Graph, GraphError> {
        let cost = self
            .cost(from, to)
            .ok_or_else(|| GraphError::NoSuchEdge(from.clone(), to.clone()))?;
        let mut reversed = self.clone();
        reversed.successors.get_mut(from).expect("edge exists").remove(to);
        let back = reversed.successors.get_mut(to).expect("endpoint exists");
        if back.insert(from.clone(), Edge { cost }).is_some() {
            return Err(GraphError::DuplicateEdge(to.clone(), from.clone()));
        }
        Ok(reversed)
    }

    /// Copy with every edge cost multiplied by `factor`.
    pub fn scaled_costs(&self, factor: f64) -> Graph {
        let mut scaled = self.clone();
        for out in scaled.successors.values_mut() {
            for edge in out.values_mut() {
                edge.cost *= factor;
            }
        }
        scaled
    }
}

impl TryFrom<GraphDoc> for Graph {
    type Error = GraphError;

    fn try_from(doc: GraphDoc) -> Result<Self, Self::Error> {
        Graph::from_doc(&doc)
    }
}

impl From<Graph> for GraphDoc {
    fn from(graph: Graph) -> Self {
        graph.to_doc()
    }
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = GraphDoc::deserialize(deserializer)?;
        Graph::from_doc(&doc).map_err(serde::de::Error::custom)
    }
}
