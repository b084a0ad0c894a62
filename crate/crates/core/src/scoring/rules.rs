use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::ScoringError;
use crate::ac::{AcId, AC_CORRECT};
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Action {
    Set(Points),
    Add(Points),
    Deduct(Points),
}

impl Action {
    fn amount(self) -> Points {
        match self {
            Action::Set(p) | Action::Add(p) | Action::Deduct(p) => p,
        }
    }

    fn apply(self, running: Points) -> Points {
        match self {
            Action::Set(p) => p,
            Action::Add(p) => running + p,
            Action::Deduct(p) => running - p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub predicate: Expr,
    pub action: Action,
}

impl Rule {
    pub fn new(predicate: &str, action: Action) -> Self {
        Rule { predicate: Expr::parse(predicate).expect("valid predicate"), action }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RuleSetDoc", into = "RuleSetDoc")]
pub struct ScoringRuleSet {
    pub base: Points,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    #[serde(rename = "if")]
    condition: String,
    then: Action,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetDoc {
    #[serde(default)]
    base: Points,
    #[serde(default)]
    rules: Vec<RuleDoc>,
}

impl TryFrom<RuleSetDoc> for ScoringRuleSet {
    type Error = ScoringError;

    fn try_from(doc: RuleSetDoc) -> Result<Self, Self::Error> {
        if doc.base.is_negative() {
            return Err(ScoringError::NegativeBase);
        }
        let rules = doc
            .rules
            .into_iter()
            .enumerate()
            .map(|(rule, r)| {
                if r.then.amount().is_negative() {
                    return Err(ScoringError::NegativeAmount { rule });
                }
                let predicate = Expr::parse(&r.condition).map_err(|error| ScoringError::Parse { rule, error })?;
                Ok(Rule { predicate, action: r.then })
            })
            .collect::<Result<_, _>>()?;
        Ok(ScoringRuleSet { base: doc.base, rules })
    }
}

impl From<ScoringRuleSet> for RuleSetDoc {
    fn from(set: ScoringRuleSet) -> Self {
        RuleSetDoc {
            base: set.base,
            rules: set
                .rules
                .into_iter()
                .map(|r| RuleDoc { condition: r.predicate.to_string(), then: r.action })
                .collect(),
        }
    }
}

impl ScoringRuleSet {
    pub fn new(base: Points, rules: Vec<Rule>) -> Self {
        ScoringRuleSet { base, rules }
    }

    pub fn referenced_ids(&self) -> BTreeSet<AcId> {
        self.rules.iter().flat_map(|r| r.predicate.referenced_ids()).collect()
    }

    /// Every id used by a predicate must be in `known`.
    pub fn validate(&self, known: &BTreeSet<AcId>) -> Result<(), ScoringError> {
        for (rule, r) in self.rules.iter().enumerate() {
            if let Some(id) = r.predicate.referenced_ids().into_iter().find(|id| !known.contains(id)) {
                return Err(ScoringError::UnknownAcInRule { rule, id });
            }
            if r.action.amount().is_negative() {
                return Err(ScoringError::NegativeAmount { rule });
            }
        }
        if self.base.is_negative() {
            return Err(ScoringError::NegativeBase);
        }
        Ok(())
    }

    /// Warnings for rule sets where a lone AC3 does not earn full marks
    /// even though a `has(AC3) -> set(..)` rule is present.
    pub fn lint(&self, max_points: Points) -> Vec<String> {
        let correct = AcId::from_static(AC_CORRECT);
        let conventional = self
            .rules
            .iter()
            .any(|r| r.predicate == Expr::Has(correct.clone()) && matches!(r.action, Action::Set(_)));
        if !conventional {
            return Vec::new();
        }
        let got = evaluate(&BTreeSet::from([correct]), self, max_points);
        if got == max_points {
            Vec::new()
        } else {
            vec![format!("{{AC3}} scores {got}, expected the maximum {max_points}")]
        }
    }

    /// Which rules fire for `ac_ids`, in rule order.
    pub fn fired(&self, ac_ids: &BTreeSet<AcId>) -> Vec<bool> {
        self.rules.iter().map(|r| r.predicate.eval(ac_ids)).collect()
    }
}

pub fn evaluate(ac_ids: &BTreeSet<AcId>, ruleset: &ScoringRuleSet, max_points: Points) -> Points {
    ruleset
        .rules
        .iter()
        .filter(|r| r.predicate.eval(ac_ids))
        .fold(ruleset.base, |running, r| r.action.apply(running))
        .clamp_to(max_points)
}
