#![allow(dead_code)]

use std::sync::Arc;

use acgrade_core::fixtures::search_problem_json;
use acgrade_core::sheet::{encode_payload, ScanPage};
use acgrade_reference::rules::{score, RefAction};
use acgrade_service::{Actor, GradingService, ManualClock, ServiceOptions};
use chrono::{DateTime, Duration};
use serde_json::Value;

pub const EXAM_ID: &str = "AI1-SEARCH";
pub const PAGES: u32 = 4;

pub fn lead() -> Actor {
    Actor::lead("lead")
}

pub fn clock() -> ManualClock {
    ManualClock::new(DateTime::from_timestamp(1_760_000_000, 0).unwrap())
}

pub fn open(dir: &std::path::Path, clock: &ManualClock) -> GradingService {
    let options = ServiceOptions { lease: Duration::minutes(10), registry: None, clock: Arc::new(clock.clone()) };
    GradingService::open(dir, options).unwrap()
}

pub fn scans(booklets: &[&str]) -> Vec<ScanPage> {
    let mut pages = Vec::new();
    for booklet in booklets {
        for page in 1..=PAGES {
            pages.push(ScanPage {
                image_ref: format!("scan/{booklet}-{page}.png"),
                payload_text: encode_payload(EXAM_ID, booklet, page).unwrap(),
            });
        }
    }
    pages
}

/// Uploads the search exam, ingests `booklets` and opens grading.
pub fn grading_service(dir: &std::path::Path, clock: &ManualClock, booklets: &[&str]) -> GradingService {
    let service = open(dir, clock);
    service.upload_exam(&lead(), search_problem_json()).unwrap();
    service.transition(&lead(), "ac_review".parse().unwrap()).unwrap();
    service.ingest_batch(&lead(), scans(booklets)).unwrap();
    service.transition(&lead(), "grading".parse().unwrap()).unwrap();
    service
}

/// Points for `task_id` given `acs`, computed from the raw exam JSON with the
/// reference evaluator.
pub fn reference_points(exam_json: &str, task_id: &str, acs: &[&str]) -> f64 {
    let doc: Value = serde_json::from_str(exam_json).unwrap();
    for problem in doc["problems"].as_array().unwrap() {
        for task in problem["tasks"].as_array().unwrap() {
            if task["id"] != task_id {
                continue;
            }
            let rules = &task["ruleset"];
            let parsed: Vec<(String, RefAction)> = rules["rules"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| {
                    let then = r["then"].as_object().unwrap();
                    let (kind, value) = then.iter().next().unwrap();
                    let v = value.as_f64().unwrap();
                    let action = match kind.as_str() {
                        "set" => RefAction::Set(v),
                        "add" => RefAction::Add(v),
                        "deduct" => RefAction::Deduct(v),
                        other => panic!("unknown action {other}"),
                    };
                    (r["if"].as_str().unwrap().to_string(), action)
                })
                .collect();
            let max = task["max_points"].as_f64().unwrap();
            return score(rules["base"].as_f64().unwrap(), &parsed, max, acs);
        }
    }
    panic!("task {task_id} not in exam");
}
