//! Frequency analysis of transcribed answers and cohort overviews.
//!
//! Identical answers (after normalization) are grouped; large groups that
//! are neither correct nor explained by an existing detector become
//! candidates for new answer classes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ac::{AcId, Assignment, Task, AC_CORRECT};
use crate::exam::Exam;
use crate::ids::{BookletId, TaskId};
use crate::scoring::GradeReport;
use crate::searchlab::{classify_answer, run_search, Detector, DetectorBinding, NodeId};

const ARROWS: [&str; 2] = ["->", "→"];

fn is_separator_char(c: char) -> bool {
    c == ',' || c == ';' || c.is_whitespace()
}

fn tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut start = 0;
    let mut pos = 0;
    while !rest.is_empty() {
        let sep_len = ARROWS
            .iter()
            .find(|a| rest.starts_with(**a))
            .map(|a| a.len())
            .or_else(|| rest.chars().next().filter(|c| is_separator_char(*c)).map(char::len_utf8));
        match sep_len {
            Some(len) => {
                if pos > start {
                    out.push(&text[start..pos]);
                }
                pos += len;
                start = pos;
            }
            None => pos += rest.chars().next().map_or(1, char::len_utf8),
        }
        rest = &text[pos..];
    }
    if pos > start {
        out.push(&text[start..pos]);
    }
    out
}

/// Canonical form used to compare answers.
///
/// Text is trimmed and uppercased. When every token is a single letter or
/// digit (a node sequence), tokens are joined with `,` regardless of the
/// separators used (`,` `;` `->` `→` or whitespace). Other text only has its
/// whitespace runs collapsed to one space.
pub fn normalize(raw: &str) -> String {
    let upper = raw.trim().to_uppercase();
    let toks = tokens(&upper);
    if toks.is_empty() {
        return String::new();
    }
    let node_like = toks.iter().all(|t| {
            let mut chars = t.chars();
            matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphanumeric())
        });
    if node_like {
        toks.join(",")
    } else {
        upper.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Booklets that gave the same normalized answer to one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerCluster {
    pub task_id: TaskId,
    pub canonical_answer: String,
    /// Sorted, distinct.
    pub members: Vec<BookletId>,
}

impl AnswerCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Exact-match clusters over normalized answers, largest first, ties by
/// canonical answer. A booklet listed twice counts once with its last answer;
/// answers that normalize to nothing are skipped.
pub fn frequency_clusters(task_id: &TaskId, answers: &[(BookletId, String)]) -> Vec<AnswerCluster> {
    let mut by_booklet: BTreeMap<&BookletId, String> = BTreeMap::new();
    for (booklet, text) in answers {
        by_booklet.insert(booklet, normalize(text));
    }
    let mut groups: BTreeMap<String, Vec<BookletId>> = BTreeMap::new();
    for (booklet, canonical) in by_booklet {
        if !canonical.is_empty() {
            groups.entry(canonical).or_default().push(booklet.clone());
        }
    }
    let mut clusters: Vec<AnswerCluster> = groups
        .into_iter()
        .map(|(canonical_answer, members)| AnswerCluster { task_id: task_id.clone(), canonical_answer, members })
        .collect();
    clusters.sort_by(|a, b| b.size().cmp(&a.size()).then_with(|| a.canonical_answer.cmp(&b.canonical_answer)));
    clusters
}

/// Canonical answers that need no new class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownAnswers {
    pub correct: Option<String>,
    pub explained: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateParams {
    /// Clusters must be strictly larger than this.
    pub min_size: usize,
    pub top_k: usize,
}

impl Default for CandidateParams {
    fn default() -> Self {
        CandidateParams { min_size: 5, top_k: 5 }
    }
}

/// Placeholder for a class still to be described by a person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAc {
    pub cluster: AnswerCluster,
    pub suggested_id: AcId,
    pub description: String,
}

/// Clusters larger than `min_size` that are neither correct nor explained,
/// at most `top_k` of them, with fresh ids after the highest existing one.
pub fn discover_candidates(
    clusters: &[AnswerCluster],
    known: &KnownAnswers,
    existing: &BTreeSet<AcId>,
    params: CandidateParams,
) -> Vec<CandidateAc> {
    let mut next = existing.iter().filter_map(AcId::number).max().unwrap_or(0) + 1;
    clusters
        .iter()
        .filter(|c| c.size() > params.min_size)
        .filter(|c| known.correct.as_deref() != Some(c.canonical_answer.as_str()))
        .filter(|c| !known.explained.contains(&c.canonical_answer))
        .take(params.top_k)
        .map(|c| {
            let suggested_id = AcId::new(format!("AC{next}")).expect("numeric id");
            next += 1;
            CandidateAc { cluster: c.clone(), suggested_id, description: String::new() }
        })
        .collect()
}

/// Correct answer and detector-explained answers for a search task.
///
/// Positional detectors do not count as an explanation: nearly every wrong
/// answer shares some position with the model answer.
pub fn known_answers(task: &Task, canonical_answers: &[&str]) -> KnownAnswers {
    let Some(oracle) = &task.oracle else {
        return KnownAnswers::default();
    };
    let model = run_search(oracle).nodes;
    let correct: Vec<&str> = model.iter().map(NodeId::as_str).collect();
    let bindings: Vec<DetectorBinding> = task
        .detector_bindings()
        .into_iter()
        .filter(|b| !matches!(b.detector, Detector::Manual | Detector::Position(_)))
        .collect();
    let explaining: BTreeSet<&AcId> = bindings.iter().map(|b| &b.ac).collect();
    let explained = canonical_answers
        .iter()
        .filter(|answer| {
            let nodes = crate::searchlab::parse_answer(answer);
            classify_answer(&nodes, oracle, &bindings).iter().any(|ac| explaining.contains(ac))
        })
        .map(|a| a.to_string())
        .collect();
    KnownAnswers { correct: Some(correct.join(",")), explained }
}

fn latest_finalized<'a>(task_id: &TaskId, assignments: &'a [Assignment]) -> BTreeMap<&'a BookletId, &'a Assignment> {
    let mut latest: BTreeMap<&BookletId, &Assignment> = BTreeMap::new();
    for a in assignments.iter().filter(|a| &a.task_id == task_id) {
        match latest.get(&a.booklet_id) {
            Some(prev) if prev.version >= a.version => {}
            _ => {
                latest.insert(&a.booklet_id, a);
            }
        }
    }
    latest.retain(|_, a| a.is_finalized());
    latest
}

/// How often each class was assigned to `task_id`, over the latest finalized
/// assignment per booklet.
pub fn ac_histogram(task_id: &TaskId, assignments: &[Assignment]) -> BTreeMap<AcId, usize> {
    let mut counts = BTreeMap::new();
    for a in latest_finalized(task_id, assignments).values() {
        for id in &a.ac_ids {
            *counts.entry(id.clone()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn score_stats(values: &[f64]) -> Option<ScoreStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    Some(ScoreStats {
        count: n,
        min: sorted[0],
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSection {
    pub task_id: TaskId,
    pub graded: usize,
    pub histogram: BTreeMap<AcId, usize>,
    /// Classes sharing the highest count.
    pub most_frequent: Vec<AcId>,
    pub candidates: Vec<CandidateAc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub exam_id: String,
    pub booklets: usize,
    /// Some grade reports still have unfinished tasks.
    pub partial: bool,
    pub scores: Option<ScoreStats>,
    pub tasks: Vec<TaskSection>,
    /// Tasks whose most frequent class is not AC3.
    pub attention: Vec<TaskId>,
}

/// Per-task histograms and candidates plus the total score distribution.
/// Tasks without finalized assignments get no section.
pub fn cohort_report(exam: &Exam, assignments: &[Assignment], grades: &[GradeReport]) -> CohortReport {
    let correct = AcId::from_static(AC_CORRECT);
    let mut tasks = Vec::new();
    let mut attention = Vec::new();
    for task in exam.tasks() {
        let latest = latest_finalized(&task.id, assignments);
        if latest.is_empty() {
            continue;
        }
        let histogram = ac_histogram(&task.id, assignments);
        let top = histogram.values().copied().max().unwrap_or(0);
        let most_frequent: Vec<AcId> =
            histogram.iter().filter(|(_, &n)| n == top).map(|(id, _)| id.clone()).collect();
        if !most_frequent.contains(&correct) {
            attention.push(task.id.clone());
        }
        let answers: Vec<(BookletId, String)> = latest
            .values()
            .filter_map(|a| a.transcription.as_ref().map(|t| (a.booklet_id.clone(), t.clone())))
            .collect();
        let clusters = frequency_clusters(&task.id, &answers);
        let mut known = {
            let canon: Vec<&str> = clusters.iter().map(|c| c.canonical_answer.as_str()).collect();
            known_answers(task, &canon)
        };
        if known.correct.is_none() {
            known.correct = clusters
                .iter()
                .find(|c| c.members.iter().all(|b| latest[b].ac_ids.contains(&correct)))
                .map(|c| c.canonical_answer.clone());
        }
        let candidates = discover_candidates(&clusters, &known, &task.effective_ids(), CandidateParams::default());
        tasks.push(TaskSection { task_id: task.id.clone(), graded: latest.len(), histogram, most_frequent, candidates });
    }
    let totals: Vec<f64> = grades.iter().map(|g| g.total.as_f64()).collect();
    CohortReport {
        exam_id: exam.exam_id.clone(),
        booklets: grades.len(),
        partial: grades.iter().any(|g| !g.is_complete()),
        scores: score_stats(&totals),
        tasks,
        attention,
    }
}

impl CohortReport {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("task_id,ac_id,count\n");
        for section in &self.tasks {
            for (ac, count) in &section.histogram {
                let _ = writeln!(out, "{},{},{}", section.task_id, ac, count);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Cohort report for {}", self.exam_id);
        let _ = writeln!(out, "Booklets: {}{}", self.booklets, if self.partial { " (grading incomplete)" } else { "" });
        if let Some(s) = &self.scores {
            let _ = writeln!(
                out,
                "Scores: min {} / max {} / mean {:.2} / median {}",
                s.min, s.max, s.mean, s.median
            );
        }
        for section in &self.tasks {
            let _ = writeln!(out, "\n{} ({} graded)", section.task_id, section.graded);
            for (ac, count) in &section.histogram {
                let _ = writeln!(out, "  {ac:<6} {count}");
            }
            for c in &section.candidates {
                let _ = writeln!(
                    out,
                    "  candidate {}: {:?} given by {} booklets",
                    c.suggested_id,
                    c.cluster.canonical_answer,
                    c.cluster.size()
                );
            }
        }
        if !self.attention.is_empty() {
            let ids: Vec<&str> = self.attention.iter().map(TaskId::as_str).collect();
            let _ = writeln!(out, "\nMost frequent class is not AC3: {}", ids.join(", "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::search_problem_exam;
    use proptest::prelude::*;

    #[test]
    fn normal_forms() {
        assert_eq!(normalize("b, e, c, g"), "B,E,C,G");
        assert_eq!(normalize("B → E → C → G"), "B,E,C,G");
        assert_eq!(normalize("  b->e;c  g "), "B,E,C,G");
        assert_eq!(normalize(",B,,E,"), "B,E");
        assert_eq!(normalize("  the   start  node "), "THE START NODE");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize(" ,; "), "");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "[a-dA-D ,;>→\\-xyzß]{0,16}") {
            let once = normalize(&raw);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn clusters_partition_the_answers(answers in proptest::collection::vec("[abc]( ?, ?[abc]){0,2}", 0..40)) {
            let input: Vec<(BookletId, String)> =
                answers.iter().enumerate().map(|(i, a)| (BookletId::new(format!("B{i}")), a.clone())).collect();
            let clusters = frequency_clusters(&"T".into(), &input);
            let total: usize = clusters.iter().map(AnswerCluster::size).sum();
            prop_assert_eq!(total, input.len());
            let mut seen = BTreeSet::new();
            for c in &clusters {
                for m in &c.members {
                    prop_assert!(seen.insert(m.clone()));
                }
            }
            for pair in clusters.windows(2) {
                prop_assert!(pair[0].size() >= pair[1].size());
            }
        }
    }

    fn sized(sizes: &[usize]) -> Vec<AnswerCluster> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| AnswerCluster {
                task_id: "T".into(),
                canonical_answer: format!("ANSWER{i}"),
                members: (0..n).map(|k| BookletId::new(format!("C{i}-{k}"))).collect(),
            })
            .collect()
    }

    #[test]
    fn candidate_threshold_is_strict() {
        let clusters = sized(&[120, 89, 12, 6, 5, 3]);
        let known = KnownAnswers { correct: Some("ANSWER0".into()), explained: BTreeSet::new() };
        let existing: BTreeSet<AcId> = ["AC1", "AC2", "AC3", "AC4", "AC8"].iter().map(|s| AcId::new(*s).unwrap()).collect();
        let found = discover_candidates(&clusters, &known, &existing, CandidateParams::default());
        let sizes: Vec<usize> = found.iter().map(|c| c.cluster.size()).collect();
        assert_eq!(sizes, [89, 12, 6]);
        let ids: Vec<&str> = found.iter().map(|c| c.suggested_id.as_str()).collect();
        assert_eq!(ids, ["AC9", "AC10", "AC11"]);
        assert!(found.iter().all(|c| c.description.is_empty()));
    }

    #[test]
    fn at_most_top_k_candidates() {
        let clusters = sized(&[30, 20, 15, 10, 9, 8, 7]);
        let found = discover_candidates(&clusters, &KnownAnswers::default(), &BTreeSet::new(), CandidateParams::default());
        assert_eq!(found.len(), 5);
        assert_eq!(found.last().unwrap().cluster.size(), 9);
    }

    #[test]
    fn all_correct_gives_no_candidates() {
        let clusters = sized(&[462]);
        let known = KnownAnswers { correct: Some("ANSWER0".into()), explained: BTreeSet::new() };
        assert!(discover_candidates(&clusters, &known, &BTreeSet::new(), CandidateParams::default()).is_empty());
    }

    #[test]
    fn detectors_explain_known_patterns() {
        let exam = search_problem_exam();
        let st4 = exam.task(&"ST4".into()).unwrap();
        let known = known_answers(st4, &["B,E,D,H", "B,E,C,G", "A,B,E,D", "D,B,E,H"]);
        assert_eq!(known.correct.as_deref(), Some("B,E,D,H"));
        let explained: Vec<&str> = known.explained.iter().map(String::as_str).collect();
        assert_eq!(explained, ["A,B,E,D", "B,E,C,G"]);
    }

    #[test]
    fn histogram_counts_each_class() {
        let a = |b: &str, acs: &[&str]| Assignment::new(b, "ST1", "g").with_acs(acs.iter().copied()).finalized();
        let assignments = vec![a("B1", &["AC10", "AC11"]), a("B2", &["AC3"]), a("B3", &["AC10"])];
        let h = ac_histogram(&"ST1".into(), &assignments);
        assert_eq!(h[&AcId::new("AC10").unwrap()], 2);
        assert_eq!(h[&AcId::new("AC11").unwrap()], 1);
        assert_eq!(h[&AcId::new("AC3").unwrap()], 1);
    }

    #[test]
    fn stats_of_small_samples() {
        assert_eq!(score_stats(&[]), None);
        let one = score_stats(&[3.5]).unwrap();
        assert_eq!((one.mean, one.median), (3.5, 3.5));
        let s = score_stats(&[4.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.median), (1.0, 4.0, 2.5, 2.5));
    }

    #[test]
    fn empty_exam_report() {
        let exam = Exam::from_json(r#"{"exam_id": "E", "title": "empty", "problems": []}"#).unwrap();
        let report = cohort_report(&exam, &[], &[]);
        assert!(report.tasks.is_empty());
        assert_eq!(report.scores, None);
        assert_eq!(report.histogram_csv(), "task_id,ac_id,count\n");
        assert!(report.to_text().contains("Booklets: 0"));
    }
}
