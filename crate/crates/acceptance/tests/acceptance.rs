//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use acgrade_core::analytics::{
    discover_candidates, frequency_clusters, known_answers, CandidateParams, KnownAnswers,
};
use acgrade_core::exam::Exam;
use acgrade_core::fixtures::{
    figure_graph, figure_graph_json, search_cohort, search_problem_exam, search_problem_json, synthetic_exam,
    synthetic_exam_json, COHORT_SIZE,
};
use acgrade_core::scoring::{consequential_score, evaluate, Action, ConsequentialBasis};
use acgrade_core::searchlab::{
    classify_answer, parse_answer, run_search, Algorithm, Graph, NodeId, SearchTask, TieBreak,
};
use acgrade_core::sheet::{decode_payload, encode_payload, route_batch, RoutingConfig, ScanBatch, ScanPage};
use acgrade_core::{AcId, BookletId, Points, Task, TaskId};
use acgrade_reference::crc;
use acgrade_reference::rules::{score, RefAction};
use acgrade_reference::search::{greedy_local, simulate, RefGraph};
use acgrade_service::{Actor, ExamState, GradingService, ManualClock, ServiceOptions, SubmitRequest};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("exam shape: 12 problems / 41 tasks load with 4 common + 192 specific classes in < 1 s", exam_shape),
        ("search oracles: figure graph and 1000 random graphs match the reference simulator in < 10 s", search_oracles),
        ("classifier: exact answer-class sets for the planted wrong answers", classifier),
        ("frequency analysis: planted 89 (ST4) and 52 (ST5) clusters top the candidates; >5 and top-5 boundaries", frequency),
        ("codec: 10,000 round trips, every single-character mutation of 100 payloads rejected, order-independent routing", codec),
        ("scoring: clamp, deduction monotonicity, exhaustive 2^n equivalence, consequential wrong start", scoring),
        ("workflow: shuffled 3-booklet batch graded via the service; exports replay byte-for-byte", workflow),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ac(id: &str) -> AcId {
    AcId::new(id).unwrap()
}

fn set(ids: &[&str]) -> BTreeSet<AcId> {
    ids.iter().map(|s| ac(s)).collect()
}

// 1 -----------------------------------------------------------------------

fn exam_shape() -> Outcome {
    let text = synthetic_exam_json();
    // Independent count straight from the document.
    let doc: Value = serde_json::from_str(&text).unwrap();
    let problems = doc["problems"].as_array().unwrap();
    let tasks: Vec<&Value> = problems.iter().flat_map(|p| p["tasks"].as_array().unwrap()).collect();
    let authored: usize = tasks.iter().map(|t| t["answer_classes"].as_array().unwrap().len()).sum();
    ensure!((problems.len(), tasks.len(), authored) == (12, 41, 192), "fixture shape {:?}", (problems.len(), tasks.len(), authored));

    let started = Instant::now();
    let exam = Exam::from_json(&text).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "load took {elapsed:?}");

    let mut common = BTreeSet::new();
    let mut specific = 0;
    for task in exam.tasks() {
        let effective = task.effective_ac_set();
        common.extend(effective.iter().filter(|c| c.id.is_common()).map(|c| c.id.clone()));
        specific += effective.iter().filter(|c| !c.id.is_common()).count();
        ensure!(effective.iter().filter(|c| c.id.is_common()).count() == 4, "task {} lacks common classes", task.id);
    }
    ensure!(common == set(&["AC1", "AC2", "AC3", "AC4"]), "common classes {common:?}");
    ensure!(specific == 192 && exam.specific_ac_count() == 192, "specific classes {specific}");
    ensure!(exam.problems.len() == 12 && exam.task_count() == 41, "exam shape");
    Ok(format!("{} common + {specific} specific in {:.1} ms", common.len(), elapsed.as_secs_f64() * 1e3))
}

// 2 -----------------------------------------------------------------------

fn to_ref(graph: &Graph) -> RefGraph {
    RefGraph {
        nodes: graph.nodes().map(|n| (n.to_string(), graph.h(n))).collect(),
        edges: graph.edges().map(|(f, t, c)| (f.to_string(), t.to_string(), c)).collect(),
    }
}

/// The figure graph read from its JSON text without the production parser.
fn figure_ref() -> RefGraph {
    let doc: Value = serde_json::from_str(figure_graph_json()).unwrap();
    RefGraph {
        nodes: doc["nodes"].as_array().unwrap().iter().map(|n| (n["id"].as_str().unwrap().into(), n["h"].as_f64().unwrap())).collect(),
        edges: doc["edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["from"].as_str().unwrap().into(), e["to"].as_str().unwrap().into(), e["cost"].as_f64().unwrap()))
            .collect(),
    }
}

fn names(nodes: &[NodeId]) -> Vec<String> {
    nodes.iter().map(ToString::to_string).collect()
}

fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
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

fn search_oracles() -> Outcome {
    let started = Instant::now();
    // Worked out by hand on the figure graph before the implementation.
    let fixed: [(Algorithm, &str); 5] = [
        (Algorithm::Dfs, "B,D,H,I"),
        (Algorithm::Bfs, "B,C,D,E"),
        (Algorithm::Ucs, "C,F,B,E"),
        (Algorithm::Greedy, "B,E,D,H"),
        (Algorithm::AStar, "C,F,G,E"),
    ];
    let reference = figure_ref();
    for (alg, expected) in fixed {
        let task = SearchTask::new(figure_graph(), "A".into(), alg, 4).unwrap();
        let ours = names(&run_search(&task).nodes).join(",");
        let theirs = simulate(&reference, "A", alg.name(), false, 4).join(",");
        ensure!(ours == expected && theirs == expected, "{alg}: ours {ours}, reference {theirs}, fixed {expected}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xAC_CE97);
    let mut mismatches = 0;
    let mut compared = 0;
    for _ in 0..1000 {
        let graph = random_graph(&mut rng);
        let reference = to_ref(&graph);
        let k = rng.gen_range(1..=6);
        for alg in Algorithm::ALL {
            for tie in [TieBreak::Ascending, TieBreak::Descending] {
                let task = SearchTask::new(graph.clone(), "A".into(), alg, k).unwrap().with_tie_break(tie);
                let ours = names(&run_search(&task).nodes);
                if ours != simulate(&reference, "A", alg.name(), tie == TieBreak::Descending, k) {
                    mismatches += 1;
                }
                compared += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(mismatches == 0, "{mismatches} of {compared} runs differ from the reference");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("5 figure runs + {compared} random runs, 0 mismatches"))
}

// 3 -----------------------------------------------------------------------

/// Positional classes AC5.. for every index where `answer` agrees with `model`.
fn positional(answer: &[String], model: &[String]) -> BTreeSet<AcId> {
    answer.iter().zip(model).enumerate().filter(|(_, (a, m))| a == m).map(|(i, _)| ac(&format!("AC{}", i + 5))).collect()
}

fn classify(task: &Task, answer: &[String]) -> BTreeSet<AcId> {
    let nodes: Vec<NodeId> = answer.iter().map(|s| NodeId::new(s.clone())).collect();
    classify_answer(&nodes, task.oracle.as_ref().unwrap(), &task.detector_bindings())
}

fn classifier() -> Outcome {
    let exam = search_problem_exam();
    let reference = figure_ref();
    let task = |id: &str| exam.task(&TaskId::new(id)).unwrap().clone();
    let model = |alg: &str| simulate(&reference, "A", alg, false, 4);
    let mut checked = 0;
    let mut expect = |task: &Task, answer: Vec<String>, expected: BTreeSet<AcId>| -> Result<(), String> {
        let got = classify(task, &answer);
        checked += 1;
        ensure!(got == expected, "{} {:?}: got {:?}, expected {:?}", task.id, answer, got, expected);
        Ok(())
    };

    let st4 = task("ST4");
    let local = greedy_local(&reference, "A", false, 4);
    let mut expected = positional(&local, &model("greedy"));
    expected.insert(ac("AC30"));
    expect(&st4, local, expected)?;

    let st5 = task("ST5");
    let flipped = simulate(&reference.reversed("I", "G"), "A", "astar", false, 4);
    let mut expected = positional(&flipped, &model("astar"));
    expected.insert(ac("AC30"));
    expect(&st5, flipped, expected)?;

    for (id, alg) in [("ST1", "dfs"), ("ST2", "bfs"), ("ST3", "ucs"), ("ST4", "greedy"), ("ST5", "astar")] {
        let t = task(id);
        let correct = model(alg);
        expect(&t, correct.clone(), set(&["AC3", "AC5", "AC6", "AC7", "AC8"]))?;

        // Start node listed first, then the model answer.
        let mut prepended = vec!["A".to_string()];
        prepended.extend(correct.iter().cloned());
        expect(&t, prepended, set(&["AC5", "AC6", "AC7", "AC8", "AC10"]))?;

        // Second node repeated in place of the third.
        let duplicated = vec![correct[0].clone(), correct[1].clone(), correct[1].clone(), correct[3].clone()];
        let mut expected = positional(&duplicated, &correct);
        expected.insert(ac("AC11"));
        expect(&t, duplicated, expected)?;
    }
    Ok(format!("{checked} exact-set assertions"))
}

// 4 -----------------------------------------------------------------------

fn candidate_sizes(task: &Task, answers: &[(BookletId, String)], known: &KnownAnswers) -> Vec<(String, usize)> {
    let clusters = frequency_clusters(&task.id, answers);
    discover_candidates(&clusters, known, &task.effective_ids(), CandidateParams::default())
        .into_iter()
        .map(|c| {
            let size = c.cluster.size();
            (c.cluster.canonical_answer, size)
        })
        .collect()
}

fn frequency() -> Outcome {
    // Initial class set: only positional classes, so nothing explains the
    // planted wrong answers yet.
    let exam = synthetic_exam();
    let mut tops = Vec::new();
    for (id, answer, size) in [("ST4", "B,E,C,G", 89), ("ST5", "C,F,G,I", 52)] {
        let task = exam.task(&TaskId::new(id)).unwrap();
        let answers = search_cohort(id, 17);
        ensure!(answers.len() == COHORT_SIZE, "cohort has {} answers", answers.len());
        // Independent tally of the raw answers after stripping separators.
        let tally = answers
            .iter()
            .filter(|(_, a)| a.chars().filter(|c| c.is_ascii_alphabetic()).collect::<String>().to_uppercase() == answer.replace(',', ""))
            .count();
        ensure!(tally == size, "{id}: {tally} raw answers spell {answer}");
        let clusters = frequency_clusters(&task.id, &answers);
        let canon: Vec<&str> = clusters.iter().map(|c| c.canonical_answer.as_str()).collect();
        let known = known_answers(task, &canon);
        let candidates = candidate_sizes(task, &answers, &known);
        ensure!(candidates.first() == Some(&(answer.to_string(), size)), "{id}: top candidates {candidates:?}");
        ensure!(candidates.len() <= 5 && candidates.iter().all(|c| c.1 > 5), "{id}: {candidates:?}");
        tops.push(format!("{id} {answer} x{size}"));
    }

    // Boundaries on hand-built clusters: 5 members never qualify, 6 do, and
    // at most five groups are reported.
    let task = exam.task(&TaskId::new("ST4")).unwrap();
    let mut next = 0;
    let mut cohort = |groups: &[(&str, usize)]| -> Vec<(BookletId, String)> {
        let mut out = Vec::new();
        for (answer, n) in groups {
            for _ in 0..*n {
                next += 1;
                out.push((BookletId::new(format!("X{next:04}")), answer.to_string()));
            }
        }
        out
    };
    let none = KnownAnswers::default();
    let got = candidate_sizes(task, &cohort(&[("A,B", 5), ("A,C", 6)]), &none);
    ensure!(got == [("A,C".to_string(), 6)], "5/6 boundary: {got:?}");
    let seven: Vec<(String, usize)> = (0..7).map(|i| (format!("B,{}", (b'C' + i) as char), 12 - i as usize)).collect();
    let groups: Vec<(&str, usize)> = seven.iter().map(|(a, n)| (a.as_str(), *n)).collect();
    let got = candidate_sizes(task, &cohort(&groups), &none);
    ensure!(got.len() == 5 && got == seven[..5], "top-5 cut: {got:?}");
    let got = candidate_sizes(task, &cohort(&[("D,E", 5), ("D,F", 5)]), &none);
    ensure!(got.is_empty(), "size-5 groups reported: {got:?}");
    Ok(tops.join(", "))
}

// 5 -----------------------------------------------------------------------

const ID_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";

fn random_id(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..=32);
    (0..len).map(|_| ID_ALPHABET[rng.gen_range(0..ID_ALPHABET.len())] as char).collect()
}

fn codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
    for _ in 0..10_000 {
        let (exam, booklet) = (random_id(&mut rng), random_id(&mut rng));
        let page = rng.gen_range(1..=u32::MAX);
        let text = encode_payload(&exam, &booklet, page).map_err(|e| e.to_string())?;
        ensure!(text == crc::payload(&exam, &booklet, page), "{text} differs from the reference encoding");
        let back = decode_payload(&text).map_err(|e| format!("{text}: {e}"))?;
        ensure!(back.exam_id == exam && back.booklet_id.as_str() == booklet && back.page == page, "{text} round trip");
    }

    let printable: Vec<char> = (0x20u8..0x7f).map(char::from).collect();
    let mut mutations = 0usize;
    for _ in 0..100 {
        let good = encode_payload(&random_id(&mut rng), &random_id(&mut rng), rng.gen_range(1..=5000)).unwrap();
        let chars: Vec<char> = good.chars().collect();
        let mut reject = |candidate: Vec<char>| -> Result<(), String> {
            let s: String = candidate.into_iter().collect();
            mutations += 1;
            ensure!(decode_payload(&s).is_err(), "accepted mutation {s:?} of {good:?}");
            Ok(())
        };
        for i in 0..chars.len() {
            for &c in printable.iter().filter(|&&c| c != chars[i]) {
                let mut m = chars.clone();
                m[i] = c;
                reject(m)?;
            }
            let mut m = chars.clone();
            m.remove(i);
            reject(m)?;
        }
        for i in 0..=chars.len() {
            for &c in &printable {
                let mut m = chars.clone();
                m.insert(i, c);
                reject(m)?;
            }
        }
    }

    let mut pages = Vec::new();
    for b in 1..=5 {
        for p in 1..=4u32 {
            if (b, p) != (2, 3) {
                let booklet = format!("B{b:04}");
                pages.push(ScanPage { image_ref: format!("s{b}-{p}.png"), payload_text: encode_payload("EX", &booklet, p).unwrap() });
            }
        }
    }
    pages.push(ScanPage { image_ref: "again.png".into(), payload_text: encode_payload("EX", "B0001", 4).unwrap() });
    pages.push(ScanPage { image_ref: "torn.png".into(), payload_text: "VK1|EX|B00".into() });
    let config = RoutingConfig { exam_id: "EX".into(), pages_per_booklet: Some(4) };
    let route = |pages: &[ScanPage]| {
        let batch = ScanBatch::new(pages.to_vec(), chrono::DateTime::UNIX_EPOCH).unwrap();
        serde_json::to_vec(&route_batch(&batch, &config, None)).unwrap()
    };
    let baseline = route(&pages);
    for _ in 0..100 {
        pages.shuffle(&mut rng);
        ensure!(route(&pages) == baseline, "routing changed under permutation");
    }
    Ok(format!("10000 round trips, {mutations} mutations rejected, 100 permutations identical"))
}

// 6 -----------------------------------------------------------------------

fn to_ref_rules(task: &Task) -> (f64, Vec<(String, RefAction)>) {
    let rules = task
        .ruleset
        .rules
        .iter()
        .map(|r| {
            let action = match r.action {
                Action::Set(p) => RefAction::Set(p.as_f64()),
                Action::Add(p) => RefAction::Add(p.as_f64()),
                Action::Deduct(p) => RefAction::Deduct(p.as_f64()),
            };
            (r.predicate.to_string(), action)
        })
        .collect();
    (task.ruleset.base.as_f64(), rules)
}

fn scoring() -> Outcome {
    let search = search_problem_exam();
    let synthetic = synthetic_exam();
    let mut subsets = 0usize;
    let mut monotone_pairs = 0usize;
    for task in search.tasks().chain(synthetic.tasks()) {
        let referenced = task.ruleset.referenced_ids();
        ensure!(referenced.len() <= 12, "{} mentions {} classes", task.id, referenced.len());
        let mut ids: Vec<AcId> = referenced.iter().cloned().collect();
        for id in task.effective_ids() {
            if ids.len() < 12 && !referenced.contains(&id) {
                ids.push(id);
            }
        }
        let (base, rules) = to_ref_rules(task);
        let max = task.max_points;
        let mut table = BTreeMap::new();
        for mask in 0u32..(1 << ids.len()) {
            let subset: BTreeSet<AcId> = (0..ids.len()).filter(|i| mask & (1 << i) != 0).map(|i| ids[i].clone()).collect();
            let names: Vec<&str> = subset.iter().map(AcId::as_str).collect();
            let ours = evaluate(&subset, &task.ruleset, max);
            ensure!(ours.as_f64() == score(base, &rules, max.as_f64(), &names), "{} {names:?}: {ours}", task.id);
            ensure!(Points::ZERO <= ours && ours <= max, "{} {names:?}: {ours} outside [0, {max}]", task.id);
            table.insert(mask, (ours, task.ruleset.fired(&subset)));
            subsets += 1;
        }
        // Adding a class whose only effect is to fire further deductions never
        // raises the score.
        for (&mask, (points, fired)) in &table {
            for bit in 0..ids.len() {
                if mask & (1 << bit) != 0 {
                    continue;
                }
                let (bigger, bigger_fired) = &table[&(mask | (1 << bit))];
                let only_deductions = task.ruleset.rules.iter().zip(fired.iter().zip(bigger_fired)).all(|(r, (b, a))| {
                    b == a || (!b && *a && matches!(r.action, Action::Deduct(_)))
                });
                if only_deductions && fired != bigger_fired {
                    ensure!(bigger <= points, "{}: deduction raised {points} to {bigger}", task.id);
                    monotone_pairs += 1;
                }
            }
        }
    }
    ensure!(monotone_pairs > 0, "no deduction pairs exercised");

    // Consequential wrong start: a correct run from another start node earns
    // the maximum minus the deduction.
    let deduction = Points::from_half_points(1);
    let reference = figure_ref();
    let mut cases = 0;
    for (id, alg) in [("ST1", "dfs"), ("ST2", "bfs"), ("ST3", "ucs"), ("ST4", "greedy"), ("ST5", "astar")] {
        let task = search.task(&TaskId::new(id)).unwrap();
        let model = simulate(&reference, "A", alg, false, 4);
        for (start, _) in reference.nodes.iter().filter(|(n, _)| n != "A") {
            let run = simulate(&reference, start, alg, false, 4);
            if run.len() < 4 || run == model || run.contains(&"A".to_string()) {
                continue;
            }
            let answer = parse_answer(&run.join(","));
            let got = consequential_score(&answer, task, deduction).map_err(|e| e.to_string())?;
            let expected = (task.max_points - deduction).clamp_to(task.max_points);
            ensure!(
                got.points == expected && matches!(got.basis, ConsequentialBasis::WrongStart { .. }),
                "{id} from {start} {run:?}: {got:?}"
            );
            cases += 1;
        }
    }
    let st4 = search.task(&TaskId::new("ST4")).unwrap();
    let got = consequential_score(&parse_answer("G,F,I,H"), st4, deduction).unwrap();
    ensure!(got.points == Points::from_half_points(3), "ST4 G,F,I,H scored {}", got.points);
    Ok(format!("{subsets} subsets, {monotone_pairs} deduction pairs, {cases} wrong-start answers"))
}

// 7 -----------------------------------------------------------------------

fn reference_points(exam_json: &str, task_id: &str, acs: &[&str]) -> f64 {
    let doc: Value = serde_json::from_str(exam_json).unwrap();
    let task = doc["problems"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|p| p["tasks"].as_array().unwrap())
        .find(|t| t["id"] == task_id)
        .unwrap();
    let rules: Vec<(String, RefAction)> = task["ruleset"]["rules"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            let (kind, value) = r["then"].as_object().unwrap().iter().next().unwrap();
            let v = value.as_f64().unwrap();
            let action = match kind.as_str() {
                "set" => RefAction::Set(v),
                "add" => RefAction::Add(v),
                _ => RefAction::Deduct(v),
            };
            (r["if"].as_str().unwrap().to_string(), action)
        })
        .collect();
    score(task["ruleset"]["base"].as_f64().unwrap(), &rules, task["max_points"].as_f64().unwrap(), acs)
}

fn open(dir: &std::path::Path, clock: &ManualClock) -> GradingService {
    let options = ServiceOptions { clock: Arc::new(clock.clone()), ..ServiceOptions::default() };
    GradingService::open(dir, options).unwrap()
}

fn workflow() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new(chrono::DateTime::from_timestamp(1_760_000_000, 0).unwrap());
    let lead = Actor::lead("lead");
    let graders = [Actor::grader("g1"), Actor::grader("g2")];
    let booklets = ["B0001", "B0002", "B0003"];
    // Transcribed answers per booklet: all correct, the planted wrong answers,
    // and a mixture.
    let answers: BTreeMap<(&str, &str), &str> = [
        (("B0001", "ST1"), "B,D,H,I"), (("B0001", "ST2"), "B,C,D,E"), (("B0001", "ST3"), "C,F,B,E"),
        (("B0001", "ST4"), "B,E,D,H"), (("B0001", "ST5"), "C,F,G,E"),
        (("B0002", "ST1"), "A,B,D,H"), (("B0002", "ST2"), "B,C,C,E"), (("B0002", "ST3"), "B,E,D,H"),
        (("B0002", "ST4"), "B,E,C,G"), (("B0002", "ST5"), "C,F,G,I"),
        (("B0003", "ST1"), "C,G,F,I"), (("B0003", "ST2"), ""), (("B0003", "ST3"), "c f b e"),
        (("B0003", "ST4"), "G,F,I,H"), (("B0003", "ST5"), "C F G E"),
    ]
    .into_iter()
    .collect();

    let (grades, feedback, graded) = {
        let service = open(dir.path(), &clock);
        service.upload_exam(&lead, search_problem_json()).map_err(|e| e.to_string())?;
        service.transition(&lead, ExamState::AcReview).map_err(|e| e.to_string())?;
        let mut scans: Vec<ScanPage> = booklets
            .iter()
            .flat_map(|b| {
                (1..=4).map(move |p| ScanPage { image_ref: format!("scan/{b}-{p}.png"), payload_text: crc::payload("AI1-SEARCH", b, p) })
            })
            .collect();
        scans.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let routed = service.ingest_batch(&lead, scans).map_err(|e| e.to_string())?;
        ensure!(routed.anomalies.is_empty(), "anomalies {:?}", routed.anomalies);
        ensure!(
            routed.booklets.len() == 3 && routed.booklets.values().all(|p| p.iter().map(|r| r.page).eq(1..=4)),
            "routing {routed:?}"
        );
        service.transition(&lead, ExamState::Grading).map_err(|e| e.to_string())?;

        let exam = service.exam().unwrap();
        let mut graded = Vec::new();
        for task in exam.tasks() {
            for (turn, grader) in graders.iter().cycle().enumerate() {
                let claim = match service.claim_next(grader, &task.id) {
                    Ok(c) => c,
                    Err(acgrade_service::ServiceError::NoWork(_)) => break,
                    Err(e) => return Err(e.to_string()),
                };
                ensure!(turn < 3, "more claims than booklets");
                let text = answers[&(claim.booklet_id.as_str(), task.id.as_str())];
                let ac_ids = classify_answer(&parse_answer(text), task.oracle.as_ref().unwrap(), &task.detector_bindings());
                clock.advance(chrono::Duration::seconds(30));
                let request = SubmitRequest {
                    booklet_id: claim.booklet_id.clone(),
                    task_id: task.id.clone(),
                    ac_ids: ac_ids.clone(),
                    transcription: Some(text.to_string()),
                    finalize: true,
                    expected_version: Some(claim.version),
                };
                service.submit_assignment(grader, request).map_err(|e| e.to_string())?;
                graded.push((claim.booklet_id, task.id.clone(), ac_ids));
            }
        }
        ensure!(graded.len() == 15, "graded {} submissions", graded.len());
        service.transition(&lead, ExamState::Analysis).map_err(|e| e.to_string())?;
        service.transition(&lead, ExamState::FeedbackReady).map_err(|e| e.to_string())?;
        let grades = service.export_grades().map_err(|e| e.to_string())?;
        let feedback: Vec<String> = booklets.iter().map(|b| service.export_feedback(&BookletId::new(*b)).unwrap()).collect();
        (grades, feedback, graded)
    };

    // Totals recomputed from the raw exam document with the reference evaluator.
    let mut expected = String::from("booklet_id,student_ref,total,ST1,ST2,ST3,ST4,ST5\n");
    for b in booklets {
        let cells: Vec<f64> = ["ST1", "ST2", "ST3", "ST4", "ST5"]
            .iter()
            .map(|t| {
                let acs = &graded.iter().find(|(gb, gt, _)| gb.as_str() == b && gt.as_str() == *t).unwrap().2;
                let names: Vec<&str> = acs.iter().map(AcId::as_str).collect();
                reference_points(search_problem_json(), t, &names)
            })
            .collect();
        let fmt = |v: f64| if v.fract() == 0.0 { format!("{v}") } else { format!("{v:.1}") };
        let row: Vec<String> = cells.iter().map(|v| fmt(*v)).collect();
        expected.push_str(&format!("{b},,{},{}\n", fmt(cells.iter().sum()), row.join(",")));
    }
    ensure!(grades == expected, "grades\n{grades}expected\n{expected}");
    ensure!(feedback[1].contains("AC30: Greedy search picks the node"), "B0002 feedback lacks AC30 text");

    let replayed = open(dir.path(), &clock);
    ensure!(replayed.export_grades().map_err(|e| e.to_string())? == grades, "grades differ after replay");
    for (b, text) in booklets.iter().zip(&feedback) {
        ensure!(&replayed.export_feedback(&BookletId::new(*b)).unwrap() == text, "feedback for {b} differs after replay");
    }
    let totals: Vec<&str> = grades.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    Ok(format!("15 submissions graded, totals {}, replay identical", totals.join("/")))
}
