use std::collections::HashSet;
use std::fmt;

use super::{Clause, FmlDocument, FuzzyVariable, Shape, VariableKind};

/// The invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    BadIdentifier,
    InvertedBounds,
    NoTerms,
    DuplicateVariable,
    DuplicateTerm,
    DuplicateRule,
    ShapeOrder,
    NonPositiveSigma,
    NonFiniteParameter,
    MissingDefuzzifier,
    UnexpectedDefuzzifier,
    NoInputVariable,
    NoOutputVariable,
    NoRules,
    EmptyAntecedent,
    EmptyConsequent,
    DanglingVariable,
    DanglingTerm,
    ClauseKindMismatch,
    WeightOutOfRange,
}

/// One broken invariant, located by a human-readable element path such as
/// `variable 'score' / term 'low'` or `rule 'r2'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub element: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.element, self.kind, self.detail)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, element: impl Into<String>, kind: ViolationKind, detail: impl Into<String>) {
        self.0.push(Violation {
            element: element.into(),
            kind,
            detail: detail.into(),
        });
    }
}

/// Identifier syntax: a letter or underscore followed by letters, digits,
/// `_`, `-` or `.`.
pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Lists every broken invariant of `doc`. An empty list means the document
/// is valid.
pub fn validate(doc: &FmlDocument) -> Vec<Violation> {
    let mut out = Collector(Vec::new());

    if !is_identifier(&doc.name) {
        out.push(
            format!("fuzzySystem '{}'", doc.name),
            ViolationKind::BadIdentifier,
            "system name is not an identifier",
        );
    }

    let mut seen = HashSet::new();
    for var in &doc.variables {
        if !seen.insert(var.name.as_str()) {
            out.push(
                format!("variable '{}'", var.name),
                ViolationKind::DuplicateVariable,
                "variable name declared more than once",
            );
        }
        check_variable(var, &mut out);
    }

    if doc.inputs().next().is_none() {
        out.push("knowledgeBase", ViolationKind::NoInputVariable, "no input variable");
    }
    if doc.outputs().next().is_none() {
        out.push("knowledgeBase", ViolationKind::NoOutputVariable, "no output variable");
    }
    if doc.rule_base.rules.is_empty() {
        out.push("mamdaniRuleBase", ViolationKind::NoRules, "rule base has no rules");
    }

    let mut rule_names = HashSet::new();
    for rule in &doc.rule_base.rules {
        let at = format!("rule '{}'", rule.name);
        if !is_identifier(&rule.name) {
            out.push(&at, ViolationKind::BadIdentifier, "rule name is not an identifier");
        }
        if !rule_names.insert(rule.name.as_str()) {
            out.push(&at, ViolationKind::DuplicateRule, "rule name declared more than once");
        }
        if !(0.0..=1.0).contains(&rule.weight) {
            out.push(
                &at,
                ViolationKind::WeightOutOfRange,
                format!("weight {} outside [0, 1]", rule.weight),
            );
        }
        if rule.antecedent.is_empty() {
            out.push(&at, ViolationKind::EmptyAntecedent, "antecedent has no clauses");
        }
        if rule.consequent.is_empty() {
            out.push(&at, ViolationKind::EmptyConsequent, "consequent has no clauses");
        }
        for clause in &rule.antecedent {
            check_clause(doc, &at, clause, VariableKind::Input, &mut out);
        }
        for clause in &rule.consequent {
            if clause.negated {
                out.push(
                    &at,
                    ViolationKind::ClauseKindMismatch,
                    format!("consequent clause on '{}' cannot be negated", clause.variable),
                );
            }
            check_clause(doc, &at, clause, VariableKind::Output, &mut out);
        }
    }

    out.0
}

fn check_variable(var: &FuzzyVariable, out: &mut Collector) {
    let at = format!("variable '{}'", var.name);
    if !is_identifier(&var.name) {
        out.push(&at, ViolationKind::BadIdentifier, "variable name is not an identifier");
    }
    if !(var.domain_left.is_finite() && var.domain_right.is_finite()) {
        out.push(&at, ViolationKind::NonFiniteParameter, "domain bound is not finite");
    } else if var.domain_left >= var.domain_right {
        out.push(
            &at,
            ViolationKind::InvertedBounds,
            format!("domainLeft {} >= domainRight {}", var.domain_left, var.domain_right),
        );
    }
    match (var.kind, var.defuzzifier) {
        (VariableKind::Output, None) => {
            out.push(&at, ViolationKind::MissingDefuzzifier, "output variable has no defuzzifier")
        }
        (VariableKind::Input, Some(_)) => out.push(
            &at,
            ViolationKind::UnexpectedDefuzzifier,
            "input variable declares a defuzzifier",
        ),
        _ => {}
    }
    if var.terms.is_empty() {
        out.push(&at, ViolationKind::NoTerms, "variable has no terms");
    }

    let mut names = HashSet::new();
    for term in &var.terms {
        let at = format!("variable '{}' / term '{}'", var.name, term.name);
        if !is_identifier(&term.name) {
            out.push(&at, ViolationKind::BadIdentifier, "term name is not an identifier");
        }
        if !names.insert(term.name.as_str()) {
            out.push(&at, ViolationKind::DuplicateTerm, "term name declared more than once");
        }
        let params = term.shape.params();
        if params.iter().any(|p| !p.is_finite()) {
            out.push(&at, ViolationKind::NonFiniteParameter, "shape parameter is not finite");
            continue;
        }
        match term.shape {
            Shape::Triangular { .. } | Shape::Trapezoidal { .. } => {
                if params.windows(2).any(|w| w[0] > w[1]) {
                    out.push(
                        &at,
                        ViolationKind::ShapeOrder,
                        format!("{} parameters {:?} not ascending", term.shape.kind_name(), params),
                    );
                }
            }
            Shape::Gaussian { sigma, .. } => {
                if sigma <= 0.0 {
                    out.push(&at, ViolationKind::NonPositiveSigma, format!("sigma {sigma} <= 0"));
                }
            }
            Shape::Singleton { .. } => {}
        }
    }
}

fn check_clause(
    doc: &FmlDocument,
    rule_at: &str,
    clause: &Clause,
    expected: VariableKind,
    out: &mut Collector,
) {
    let Some(var) = doc.variable(&clause.variable) else {
        out.push(
            rule_at,
            ViolationKind::DanglingVariable,
            format!("clause references unknown variable '{}'", clause.variable),
        );
        return;
    };
    if var.term(&clause.term).is_none() {
        out.push(
            rule_at,
            ViolationKind::DanglingTerm,
            format!("variable '{}' has no term '{}'", clause.variable, clause.term),
        );
    }
    if var.kind != expected {
        out.push(
            rule_at,
            ViolationKind::ClauseKindMismatch,
            format!(
                "clause on {} variable '{}' where {} expected",
                var.kind.as_str(),
                var.name,
                expected.as_str()
            ),
        );
    }
}
