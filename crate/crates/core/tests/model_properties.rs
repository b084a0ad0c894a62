//! Property tests over assignments, classification and layouts.

use std::collections::BTreeSet;

use acgrade_core::ac::{compose_feedback, record_assignment, AcError};
use acgrade_core::fixtures::{search_problem_exam, synthetic_exam};
use acgrade_core::searchlab::{classify_answer, default_bindings, run_search, Algorithm, Graph, NodeId, SearchTask};
use acgrade_core::sheet::{decode_payload, generate_layout, sequential_booklet_ids, Corner, LayoutTemplate, PageTemplate};
use acgrade_core::{AcId, Assignment};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn st2_ids() -> Vec<String> {
    let exam = search_problem_exam();
    exam.task(&"ST2".into()).unwrap().effective_ids().iter().map(ToString::to_string).collect()
}

proptest! {
    #[test]
    fn stored_assignments_never_violate_exclusions(ids in subsequence(st2_ids(), 0..=6), finalize in any::<bool>()) {
        let exam = search_problem_exam();
        let task = exam.task(&"ST2".into()).unwrap();
        let mut a = Assignment::new("B1", "ST2", "g").with_acs(ids.iter().map(String::as_str));
        if finalize {
            a = a.finalized();
        }
        match record_assignment(a.clone(), task, None) {
            Ok(stored) => {
                prop_assert!(task.exclusion_pairs().iter().all(|p| !p.is_within(&stored.ac_ids)));
                prop_assert_eq!(stored.version, 1);
                prop_assert!(!(stored.is_finalized() && stored.ac_ids.is_empty()));
            }
            Err(AcError::ExclusionViolation(pair)) => prop_assert!(pair.is_within(&a.ac_ids)),
            Err(AcError::FinalizeEmpty) => prop_assert!(finalize && ids.is_empty()),
            Err(other) => prop_assert!(false, "unexpected {other}"),
        }
    }

    #[test]
    fn ac_ids_round_trip_through_json(n in 1u64..100_000, prefix in "[A-Za-z_]{1,4}") {
        let id = AcId::new(format!("{prefix}{n}")).unwrap();
        let json = serde_json::to_string(&id).unwrap();
        prop_assert_eq!(serde_json::from_str::<AcId>(&json).unwrap(), id);
    }

    #[test]
    fn feedback_is_a_pure_function(ids in subsequence(st2_ids(), 1..=3)) {
        let exam = search_problem_exam();
        let task = exam.task(&"ST2".into()).unwrap();
        let a = Assignment::new("B1", "ST2", "g").with_acs(ids.iter().map(String::as_str));
        prop_assert_eq!(compose_feedback(&a, task), compose_feedback(&a.clone(), &task.clone()));
    }

    #[test]
    fn model_answer_is_always_classified_correct(
        h in proptest::collection::vec(0u8..10, 6),
        costs in proptest::collection::vec(prop::option::weighted(0.4, 1u8..10), 36),
        alg in prop::sample::select(Algorithm::ALL.to_vec()),
    ) {
        let ids: Vec<NodeId> = (0..6).map(|i| NodeId::new(((b'A' + i) as char).to_string())).collect();
        let nodes = ids.iter().cloned().zip(h.iter().map(|&v| v as f64));
        let mut edges = Vec::new();
        for (k, c) in costs.iter().enumerate() {
            let (from, to) = (k / 6, k % 6);
            if let (Some(c), true) = (c, from != to) {
                edges.push((ids[from].clone(), ids[to].clone(), *c as f64));
            }
        }
        let graph = Graph::new(nodes, edges).unwrap();
        let task = SearchTask::new(graph, ids[0].clone(), alg, 4).unwrap();
        let model = run_search(&task).nodes;
        let bindings = default_bindings(alg);
        let fired = classify_answer(&model, &task, &bindings);
        let ac3 = AcId::new("AC3").unwrap();
        let ac4 = AcId::new("AC4").unwrap();
        if !model.is_empty() {
            prop_assert!(fired.contains(&ac3));
        }
        prop_assert!(!(fired.contains(&ac3) && fired.contains(&ac4)));
        let mut wrong = model.clone();
        wrong.reverse();
        let fired = classify_answer(&wrong, &task, &bindings);
        prop_assert!(!(fired.contains(&ac3) && fired.contains(&ac4)));
    }
}

#[test]
fn every_task_has_the_common_classes() {
    for exam in [search_problem_exam(), synthetic_exam()] {
        for task in exam.tasks() {
            let ids = task.effective_ids();
            assert!(ids.len() >= 4);
            for common in ["AC1", "AC2", "AC3", "AC4"] {
                assert!(ids.contains(&AcId::new(common).unwrap()));
            }
        }
    }
}

#[test]
fn cohort_sized_layout_has_distinct_payloads() {
    let mut exam = synthetic_exam();
    let template = LayoutTemplate {
        pages: (1..=8).map(|page| PageTemplate { page, qr_corner: Corner::TopRight, regions: vec![] }).collect(),
    };
    let booklets = sequential_booklet_ids(462);
    let layouts = generate_layout(&exam, &booklets, Some(&template)).unwrap();
    assert_eq!(layouts.len(), 462);
    let payloads: BTreeSet<&str> = layouts.iter().flat_map(|l| l.pages.iter().map(|p| p.payload.as_str())).collect();
    assert_eq!(payloads.len(), 3696);
    for l in &layouts {
        for p in &l.pages {
            let decoded = decode_payload(&p.payload).unwrap();
            assert_eq!((decoded.booklet_id.clone(), decoded.page), (l.booklet_id.clone(), p.page));
        }
    }

    let single = generate_layout(&search_problem_exam(), &sequential_booklet_ids(1), None).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].pages.len(), 4);

    exam.layout = None;
    assert!(generate_layout(&exam, &booklets, None).is_err());
}
