//! Frontier simulation for the five textbook search algorithms.
//!
//! Every frontier entry carries an insertion stamp and a path cost; each
//! step scans the whole frontier for the entry to expand.

#[derive(Debug, Clone, PartialEq)]
pub struct RefGraph {
    pub nodes: Vec<(String, f64)>,
    pub edges: Vec<(String, String, f64)>,
}

impl RefGraph {
    fn h(&self, node: &str) -> f64 {
        self.nodes.iter().find(|(n, _)| n == node).map(|(_, h)| *h).unwrap()
    }

    /// Successors sorted by name, ascending or descending.
    fn successors(&self, node: &str, descending: bool) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> =
            self.edges.iter().filter(|(f, _, _)| f == node).map(|(_, t, c)| (t.clone(), *c)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        if descending {
            out.reverse();
        }
        out
    }

    pub fn reversed(&self, from: &str, to: &str) -> RefGraph {
        let mut g = self.clone();
        for e in g.edges.iter_mut() {
            if e.0 == from && e.1 == to {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        g
    }
}

#[derive(Debug, Clone)]
struct Entry {
    node: String,
    g: f64,
    stamp: u64,
}

/// Returns the first `k` nodes expanded after `start`.
///
/// `algorithm` is one of `dfs`, `bfs`, `ucs`, `greedy`, `astar`. Ties go to
/// the alphabetically first node, or the last one when `descending`.
pub fn simulate(graph: &RefGraph, start: &str, algorithm: &str, descending: bool, k: usize) -> Vec<String> {
    let mut closed: Vec<String> = vec![start.to_string()];
    let mut frontier: Vec<Entry> = Vec::new();
    let mut clock = 0u64;
    let mut out = Vec::new();
    let mut current = start.to_string();
    let mut current_g = 0.0;
    loop {
        // Discover successors of the node just expanded.
        let succ = graph.successors(&current, descending);
        match algorithm {
            "dfs" => {
                // Least preferred first, so the preferred one ends up newest.
                for (s, _) in succ.iter().rev() {
                    if closed.contains(s) {
                        continue;
                    }
                    frontier.retain(|e| &e.node != s);
                    clock += 1;
                    frontier.push(Entry { node: s.clone(), g: 0.0, stamp: clock });
                }
            }
            "bfs" => {
                for (s, _) in &succ {
                    if closed.contains(s) || frontier.iter().any(|e| &e.node == s) {
                        continue;
                    }
                    clock += 1;
                    frontier.push(Entry { node: s.clone(), g: 0.0, stamp: clock });
                }
            }
            _ => {
                for (s, c) in &succ {
                    if closed.contains(s) {
                        continue;
                    }
                    let g = current_g + c;
                    match frontier.iter_mut().find(|e| &e.node == s) {
                        Some(e) => {
                            if g < e.g {
                                e.g = g;
                            }
                        }
                        None => {
                            clock += 1;
                            frontier.push(Entry { node: s.clone(), g, stamp: clock });
                        }
                    }
                }
            }
        }
        if out.len() == k || frontier.is_empty() {
            return out;
        }
        let mut best = 0;
        for i in 1..frontier.len() {
            if better(graph, algorithm, descending, &frontier[i], &frontier[best]) {
                best = i;
            }
        }
        let chosen = frontier.remove(best);
        closed.push(chosen.node.clone());
        out.push(chosen.node.clone());
        current = chosen.node;
        current_g = chosen.g;
    }
}

fn better(graph: &RefGraph, algorithm: &str, descending: bool, a: &Entry, b: &Entry) -> bool {
    let key = |e: &Entry| match algorithm {
        "dfs" => -(e.stamp as f64),
        "bfs" => e.stamp as f64,
        "ucs" => e.g,
        "greedy" => graph.h(&e.node),
        "astar" => e.g + graph.h(&e.node),
        other => panic!("unknown algorithm {other}"),
    };
    let (ka, kb) = (key(a), key(b));
    if ka != kb {
        return ka < kb;
    }
    if descending {
        a.node > b.node
    } else {
        a.node < b.node
    }
}

/// Greedy search that only looks at the successors of the last expanded
/// node, using the whole frontier only when none is left.
pub fn greedy_local(graph: &RefGraph, start: &str, descending: bool, k: usize) -> Vec<String> {
    let mut closed: Vec<String> = vec![start.to_string()];
    let mut seen: Vec<String> = Vec::new();
    let mut last = start.to_string();
    let mut out = Vec::new();
    let pick = |cands: &[String]| -> Option<String> {
        let mut best: Option<&String> = None;
        for c in cands {
            best = match best {
                None => Some(c),
                Some(b) => {
                    let (hc, hb) = (graph.h(c), graph.h(b));
                    let wins = hc < hb || (hc == hb && if descending { c > b } else { c < b });
                    Some(if wins { c } else { b })
                }
            };
        }
        best.cloned()
    };
    while out.len() < k {
        let local: Vec<String> =
            graph.successors(&last, false).into_iter().map(|(s, _)| s).filter(|s| !closed.contains(s)).collect();
        for s in &local {
            if !seen.contains(s) {
                seen.push(s.clone());
            }
        }
        let open: Vec<String> = seen.iter().filter(|s| !closed.contains(s)).cloned().collect();
        let next = match pick(&local).or_else(|| pick(&open)) {
            Some(n) => n,
            None => break,
        };
        closed.push(next.clone());
        out.push(next.clone());
        last = next;
    }
    out
}
