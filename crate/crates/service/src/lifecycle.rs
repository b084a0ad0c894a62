use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Exam lifecycle, following the iterative class-creation process: author
/// classes, review them, grade, analyse answers, release feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExamState {
    #[default]
    Draft,
    AcReview,
    Grading,
    Analysis,
    FeedbackReady,
    Archived,
}

impl ExamState {
    pub const ALL: [ExamState; 6] = [
        ExamState::Draft,
        ExamState::AcReview,
        ExamState::Grading,
        ExamState::Analysis,
        ExamState::FeedbackReady,
        ExamState::Archived,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExamState::Draft => "draft",
            ExamState::AcReview => "ac_review",
            ExamState::Grading => "grading",
            ExamState::Analysis => "analysis",
            ExamState::FeedbackReady => "feedback_ready",
            ExamState::Archived => "archived",
        }
    }

    /// Forward one step, or back from analysis to class review for the next
    /// iteration.
    pub fn can_become(self, to: ExamState) -> bool {
        use ExamState::*;
        matches!(
            (self, to),
            (Draft, AcReview)
                | (AcReview, Grading)
                | (Grading, Analysis)
                | (Analysis, FeedbackReady)
                | (FeedbackReady, Archived)
                | (Analysis, AcReview)
        )
    }
}

impl fmt::Display for ExamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExamState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        ExamState::ALL.into_iter().find(|st| st.name() == wanted).ok_or_else(|| format!("unknown exam state {s:?}"))
    }
}
