//! Search oracles against the reference frontier simulator.

use acgrade_core::fixtures::figure_graph;
use acgrade_core::searchlab::{run_search, run_variant, Algorithm, Graph, NodeId, SearchTask, TieBreak, Variant};
use acgrade_reference::search::{greedy_local, simulate, RefGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_ref(graph: &Graph) -> RefGraph {
    RefGraph {
        nodes: graph.nodes().map(|n| (n.to_string(), graph.h(n))).collect(),
        edges: graph.edges().map(|(f, t, c)| (f.to_string(), t.to_string(), c)).collect(),
    }
}

fn names(nodes: &[NodeId]) -> Vec<String> {
    nodes.iter().map(ToString::to_string).collect()
}

fn task(graph: Graph, alg: Algorithm) -> SearchTask {
    SearchTask::new(graph, "A".into(), alg, 4).unwrap()
}

// Expected outputs on the figure graph from A, worked out by hand before the
// implementation existed.
const FIGURE: [(Algorithm, [&str; 4]); 5] = [
    (Algorithm::Dfs, ["B", "D", "H", "I"]),
    (Algorithm::Bfs, ["B", "C", "D", "E"]),
    (Algorithm::Ucs, ["C", "F", "B", "E"]),
    (Algorithm::Greedy, ["B", "E", "D", "H"]),
    (Algorithm::AStar, ["C", "F", "G", "E"]),
];

#[test]
fn figure_graph_model_answers() {
    let reference = to_ref(&figure_graph());
    for (alg, expected) in FIGURE {
        let ours = names(&run_search(&task(figure_graph(), alg)).nodes);
        let theirs = simulate(&reference, "A", alg.name(), false, 4);
        assert_eq!(ours, expected, "{alg}");
        assert_eq!(theirs, expected, "reference {alg}");
    }
}

#[test]
fn figure_graph_variants() {
    let reference = to_ref(&figure_graph());
    let greedy = task(figure_graph(), Algorithm::Greedy);
    let local = run_variant(&greedy, &Variant::GreedyLocal).unwrap();
    assert_eq!(names(&local.nodes), ["B", "E", "C", "G"]);
    assert_eq!(greedy_local(&reference, "A", false, 4), ["B", "E", "C", "G"]);

    let astar = task(figure_graph(), Algorithm::AStar);
    let flipped = run_variant(&astar, &Variant::ReverseEdge { from: "I".into(), to: "G".into() }).unwrap();
    assert_eq!(names(&flipped.nodes), ["C", "F", "G", "I"]);
    assert_eq!(simulate(&reference.reversed("I", "G"), "A", "astar", false, 4), ["C", "F", "G", "I"]);

    let dfs = task(figure_graph(), Algorithm::Dfs);
    let reversed = run_variant(&dfs, &Variant::ReverseTieBreak).unwrap();
    assert_eq!(names(&reversed.nodes), ["C", "G", "F", "I"]);
    assert_eq!(simulate(&reference, "A", "dfs", true, 4), ["C", "G", "F", "I"]);

    let swapped = run_variant(&greedy, &Variant::SwapCostHeuristic).unwrap();
    assert_eq!(names(&swapped.nodes), ["C", "F", "B", "E"]);
    let ucs = task(figure_graph(), Algorithm::Ucs);
    assert_eq!(names(&run_variant(&ucs, &Variant::SwapCostHeuristic).unwrap().nodes), ["B", "E", "D", "H"]);

    let from_c = greedy.reseeded("C".into()).unwrap();
    assert_eq!(names(&run_search(&from_c).nodes), ["G", "F", "I", "H"]);
    assert_eq!(simulate(&reference, "C", "greedy", false, 4), ["G", "F", "I", "H"]);

    assert!(run_variant(&astar, &Variant::GreedyLocal).is_err());
    assert!(run_variant(&astar, &Variant::SwapCostHeuristic).is_err());
    assert!(run_variant(&astar, &Variant::ReverseEdge { from: "G".into(), to: "I".into() }).is_err());
}

/// Random graph with up to 8 nodes, integer costs 1..=9 and heuristics 0..=9.
pub fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
    let n = rng.gen_range(1..=8);
    let ids: Vec<String> = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
    let nodes: Vec<(NodeId, f64)> = ids.iter().map(|id| (NodeId::new(id.clone()), rng.gen_range(0..=9) as f64)).collect();
    let mut edges = Vec::new();
    for from in &ids {
        for to in &ids {
            if from != to && rng.gen_bool(0.3) {
                edges.push((NodeId::new(from.clone()), NodeId::new(to.clone()), rng.gen_range(1..=9) as f64));
            }
        }
    }
    Graph::new(nodes, edges).unwrap()
}

#[test]
fn random_graphs_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EA2C4);
    let mut compared = 0;
    for _ in 0..1000 {
        let graph = random_graph(&mut rng);
        let reference = to_ref(&graph);
        let k = rng.gen_range(1..=6);
        for alg in Algorithm::ALL {
            for tie in [TieBreak::Ascending, TieBreak::Descending] {
                let t = SearchTask::new(graph.clone(), "A".into(), alg, k).unwrap().with_tie_break(tie);
                let ours = names(&run_search(&t).nodes);
                let theirs = simulate(&reference, "A", alg.name(), tie == TieBreak::Descending, k);
                assert_eq!(ours, theirs, "{alg} {tie:?} k={k} on {reference:?}");
                compared += 1;
            }
        }
        let t = SearchTask::new(graph.clone(), "A".into(), Algorithm::Greedy, k).unwrap();
        let ours = names(&run_variant(&t, &Variant::GreedyLocal).unwrap().nodes);
        assert_eq!(ours, greedy_local(&reference, "A", false, k), "greedy-local on {reference:?}");
    }
    assert_eq!(compared, 10_000);
}

#[test]
fn positive_cost_scaling_keeps_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let graph = random_graph(&mut rng);
        let factor = [0.5, 2.0, 3.0, 10.0][rng.gen_range(0..4)];
        for alg in [Algorithm::Dfs, Algorithm::Bfs, Algorithm::Ucs, Algorithm::Greedy] {
            let a = SearchTask::new(graph.clone(), "A".into(), alg, 5).unwrap();
            let b = SearchTask::new(graph.scaled_costs(factor), "A".into(), alg, 5).unwrap();
            assert_eq!(run_search(&a), run_search(&b), "{alg} x{factor}");
        }
    }
}

#[test]
fn outputs_never_repeat_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let graph = random_graph(&mut rng);
        for alg in Algorithm::ALL {
            let t = SearchTask::new(graph.clone(), "A".into(), alg, 8).unwrap();
            let run = run_search(&t);
            let mut seen = std::collections::BTreeSet::new();
            assert!(run.nodes.iter().all(|n| seen.insert(n.clone()) && n.as_str() != "A"));
            assert_eq!(run.exhausted, run.nodes.len() < 8);
        }
    }
}
