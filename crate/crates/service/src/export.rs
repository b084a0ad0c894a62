//! Grade and feedback documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use acgrade_core::ac::compose_feedback;
use acgrade_core::scoring::GradeReport;
use acgrade_core::{Assignment, BookletId, Exam};

use crate::error::ServiceError;

pub const INCOMPLETE: &str = "INCOMPLETE";

/// Booklet id to student reference.
pub type Registry = BTreeMap<BookletId, String>;

/// Reads a `booklet_id,student_ref` CSV file.
pub fn load_registry(path: &Path) -> Result<Registry, ServiceError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
    let mut registry = Registry::new();
    for row in reader.deserialize::<(String, String)>() {
        let (booklet, student) = row.map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        registry.insert(BookletId::new(booklet.trim()), student.trim().to_string());
    }
    Ok(registry)
}

/// CSV with one row per report, in booklet order. Tasks without a finalized
/// assignment read `INCOMPLETE`; the total counts them as zero.
pub fn grades_csv(exam: &Exam, reports: &[GradeReport], registry: Option<&Registry>) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["booklet_id".to_string(), "student_ref".to_string(), "total".to_string()];
    header.extend(exam.tasks().map(|t| t.id.to_string()));
    writer.write_record(&header).expect("writing to memory");
    let mut sorted: Vec<&GradeReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.booklet_id.cmp(&b.booklet_id));
    for report in sorted {
        let student = registry.and_then(|r| r.get(&report.booklet_id)).cloned().unwrap_or_default();
        let mut row = vec![report.booklet_id.to_string(), student, report.total.to_string()];
        row.extend(
            report.tasks.iter().map(|t| if t.finalized { t.points.to_string() } else { INCOMPLETE.to_string() }),
        );
        writer.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

/// Plain-text feedback for one booklet: a block per task with title, points
/// and the composed class feedback.
pub fn feedback_text(exam: &Exam, report: &GradeReport, assignments: &[Assignment]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Exam {}: {}", exam.exam_id, exam.title);
    let _ = writeln!(out, "Booklet {}", report.booklet_id);
    let _ = writeln!(out, "Total: {} / {}", report.total, report.max_total);
    for grade in &report.tasks {
        let task = exam.task(&grade.task_id).expect("report built from this exam");
        let _ = writeln!(out);
        let _ = writeln!(out, "{} {} ({} / {})", task.id, task.title, grade.points, grade.max_points);
        let assignment = assignments
            .iter()
            .filter(|a| a.booklet_id == report.booklet_id && a.task_id == task.id && a.is_finalized())
            .max_by_key(|a| a.version);
        match assignment {
            Some(a) => {
                let text = compose_feedback(a, task);
                if !text.is_empty() {
                    let _ = writeln!(out, "{text}");
                }
            }
            None => {
                let _ = writeln!(out, "Not graded.");
            }
        }
    }
    out
}
