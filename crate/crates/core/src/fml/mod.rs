//! Document model for the Mamdani subset of the Fuzzy Markup Language
//! (IEEE 1855): knowledge base variables and terms plus a weighted rule base.

mod membership;
mod parse;
mod serialize;
mod validate;

pub use membership::membership;
pub use parse::parse_fml;
pub use serialize::serialize_fml;
pub use validate::{validate, Violation, ViolationKind};

use thiserror::Error;

/// Errors raised while reading an FML document.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FmlError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("semantic error: {}", join_violations(.0))]
    SemanticError(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Membership function shapes. Parameters are in the owning variable's units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
    Gaussian { mean: f64, sigma: f64 },
    Singleton { value: f64 },
}

impl Shape {
    /// Parameters in canonical (serialization) order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            Shape::Triangular { a, b, c } => vec![a, b, c],
            Shape::Trapezoidal { a, b, c, d } => vec![a, b, c, d],
            Shape::Gaussian { mean, sigma } => vec![mean, sigma],
            Shape::Singleton { value } => vec![value],
        }
    }

    /// Rebuilds a shape of the same kind from `params`. Panics if the
    /// parameter count does not match the shape.
    pub fn with_params(&self, params: &[f64]) -> Shape {
        match (self, params) {
            (Shape::Triangular { .. }, &[a, b, c]) => Shape::Triangular { a, b, c },
            (Shape::Trapezoidal { .. }, &[a, b, c, d]) => Shape::Trapezoidal { a, b, c, d },
            (Shape::Gaussian { .. }, &[mean, sigma]) => Shape::Gaussian { mean, sigma },
            (Shape::Singleton { .. }, &[value]) => Shape::Singleton { value },
            _ => panic!("parameter count {} does not fit {:?}", params.len(), self),
        }
    }

    /// Representative point used by weighted-average defuzzification.
    pub fn center(&self) -> f64 {
        match *self {
            Shape::Triangular { b, .. } => b,
            Shape::Trapezoidal { b, c, .. } => 0.5 * (b + c),
            Shape::Gaussian { mean, .. } => mean,
            Shape::Singleton { value } => value,
        }
    }

    /// Location of the spike if this shape is a singleton (including the
    /// degenerate triangle `a == b == c`).
    pub fn spike(&self) -> Option<f64> {
        match *self {
            Shape::Singleton { value } => Some(value),
            Shape::Triangular { a, b, c } if a == b && b == c => Some(b),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Triangular { .. } => "triangular",
            Shape::Trapezoidal { .. } => "trapezoidal",
            Shape::Gaussian { .. } => "gaussian",
            Shape::Singleton { .. } => "singleton",
        }
    }
}

/// A linguistic term. A complemented term has membership `1 - shape(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyTerm {
    pub name: String,
    pub complement: bool,
    pub shape: Shape,
}

impl FuzzyTerm {
    pub fn new(name: impl Into<String>, shape: Shape) -> Self {
        Self {
            name: name.into(),
            complement: false,
            shape,
        }
    }

    pub fn degree(&self, x: f64) -> f64 {
        let mu = membership(&self.shape, x);
        if self.complement {
            1.0 - mu
        } else {
            mu
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableKind {
    Input,
    Output,
}

impl VariableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Input => "input",
            VariableKind::Output => "output",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defuzzifier {
    Centroid,
    MeanOfMaxima,
    WeightedAverage,
}

impl Defuzzifier {
    pub fn as_str(self) -> &'static str {
        match self {
            Defuzzifier::Centroid => "centroid",
            Defuzzifier::MeanOfMaxima => "mean_of_maxima",
            Defuzzifier::WeightedAverage => "weighted_average",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "centroid" => Some(Defuzzifier::Centroid),
            "mean_of_maxima" => Some(Defuzzifier::MeanOfMaxima),
            "weighted_average" => Some(Defuzzifier::WeightedAverage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyVariable {
    pub name: String,
    pub domain_left: f64,
    pub domain_right: f64,
    pub kind: VariableKind,
    /// Only set on output variables.
    pub defuzzifier: Option<Defuzzifier>,
    pub terms: Vec<FuzzyTerm>,
}

impl FuzzyVariable {
    pub fn input(name: impl Into<String>, domain: (f64, f64), terms: Vec<FuzzyTerm>) -> Self {
        Self {
            name: name.into(),
            domain_left: domain.0,
            domain_right: domain.1,
            kind: VariableKind::Input,
            defuzzifier: None,
            terms,
        }
    }

    pub fn output(
        name: impl Into<String>,
        domain: (f64, f64),
        defuzzifier: Defuzzifier,
        terms: Vec<FuzzyTerm>,
    ) -> Self {
        Self {
            name: name.into(),
            domain_left: domain.0,
            domain_right: domain.1,
            kind: VariableKind::Output,
            defuzzifier: Some(defuzzifier),
            terms,
        }
    }

    pub fn term(&self, name: &str) -> Option<&FuzzyTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.domain_left, self.domain_right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub variable: String,
    pub term: String,
    pub negated: bool,
}

impl Clause {
    pub fn new(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Self {
            variable: variable.into(),
            term: term.into(),
            negated: false,
        }
    }

    pub fn not(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Self {
            negated: true,
            ..Self::new(variable, term)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connector {
    And,
    Or,
}

impl Connector {
    pub fn as_str(self) -> &'static str {
        match self {
            Connector::And => "and",
            Connector::Or => "or",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub antecedent: Vec<Clause>,
    pub connector: Connector,
    pub consequent: Vec<Clause>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AndMethod {
    Min,
    Prod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrMethod {
    Max,
}

/// How a rule's activation shapes its consequent set: clipping or scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationMethod {
    Min,
    Prod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    pub and_method: AndMethod,
    pub or_method: OrMethod,
    pub activation: ActivationMethod,
    pub rules: Vec<Rule>,
}

impl RuleBase {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self {
            and_method: AndMethod::Min,
            or_method: OrMethod::Max,
            activation: ActivationMethod::Min,
            rules,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmlDocument {
    pub name: String,
    pub variables: Vec<FuzzyVariable>,
    pub rule_base: RuleBase,
}

impl FmlDocument {
    pub fn variable(&self, name: &str) -> Option<&FuzzyVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &FuzzyVariable> {
        self.variables.iter().filter(|v| v.kind == VariableKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &FuzzyVariable> {
        self.variables.iter().filter(|v| v.kind == VariableKind::Output)
    }
}
