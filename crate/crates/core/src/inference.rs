//! Mamdani inference: fuzzification, rule activation, aggregation over a
//! uniform output grid, and defuzzification.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::fml::{
    ActivationMethod, AndMethod, Connector, Defuzzifier, FmlDocument, FuzzyTerm, FuzzyVariable,
    OrMethod, Rule, VariableKind,
};

/// Grid size used when callers do not pick one.
pub const DEFAULT_RESOLUTION: usize = 1001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("no value supplied for input variable '{0}'")]
    MissingInput(String),
    #[error("'{0}' is not an input variable of this system")]
    UnknownInput(String),
    #[error("input '{0}' is not a finite number")]
    NonFiniteInput(String),
    #[error("no rule fires for output variable '{0}'")]
    EmptyActivation(String),
    #[error("aggregated set for '{0}' has zero mass")]
    ZeroMass(String),
    #[error("rule '{rule}' references unknown {what} '{name}'")]
    UnknownReference {
        rule: String,
        what: &'static str,
        name: String,
    },
    #[error("resolution must be at least 3 grid points, got {0}")]
    InvalidResolution(usize),
}

/// Per-term degrees of one variable.
pub type TermDegrees = BTreeMap<String, f64>;

/// Output fuzzy set sampled on `resolution` evenly spaced points spanning
/// `[left, right]`, plus the per-rule contributions needed by
/// weighted-average defuzzification.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFuzzySet {
    pub variable: String,
    pub left: f64,
    pub right: f64,
    pub degrees: Vec<f64>,
    /// `(activation, term center)` for every fired consequent.
    pub contributions: Vec<(f64, f64)>,
}

impl AggregatedFuzzySet {
    pub fn resolution(&self) -> usize {
        self.degrees.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        grid_point(self.left, self.right, self.degrees.len(), i)
    }
}

fn grid_point(left: f64, right: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        right
    } else {
        left + (right - left) * i as f64 / (n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub outputs: BTreeMap<String, f64>,
    pub rule_activations: BTreeMap<String, f64>,
}

/// Degree of `x` in every term of `variable`; `x` is clamped to the domain.
pub fn fuzzify(variable: &FuzzyVariable, x: f64) -> TermDegrees {
    let x = variable.clamp(x);
    variable
        .terms
        .iter()
        .map(|t| (t.name.clone(), t.degree(x)))
        .collect()
}

fn fold(connector: Connector, and_method: AndMethod, degrees: impl Iterator<Item = f64>) -> f64 {
    match connector {
        Connector::And => match and_method {
            AndMethod::Min => degrees.fold(1.0, f64::min),
            AndMethod::Prod => degrees.product(),
        },
        Connector::Or => degrees.fold(0.0, f64::max),
    }
}

/// Activation of `rule` given fuzzified inputs keyed by variable name.
pub fn evaluate_rule(
    rule: &Rule,
    degrees: &HashMap<String, TermDegrees>,
    and_method: AndMethod,
    or_method: OrMethod,
) -> Result<f64, InferenceError> {
    let OrMethod::Max = or_method;
    let mut clause_degrees = Vec::with_capacity(rule.antecedent.len());
    for clause in &rule.antecedent {
        let terms = degrees
            .get(&clause.variable)
            .ok_or_else(|| InferenceError::UnknownReference {
                rule: rule.name.clone(),
                what: "variable",
                name: clause.variable.clone(),
            })?;
        let d = *terms
            .get(&clause.term)
            .ok_or_else(|| InferenceError::UnknownReference {
                rule: rule.name.clone(),
                what: "term",
                name: format!("{}.{}", clause.variable, clause.term),
            })?;
        clause_degrees.push(if clause.negated { 1.0 - d } else { d });
    }
    Ok(rule.weight * fold(rule.connector, and_method, clause_degrees.into_iter()))
}

/// Runs the full Mamdani pipeline on `doc`.
pub fn infer(
    doc: &FmlDocument,
    inputs: &BTreeMap<String, f64>,
    resolution: usize,
) -> Result<InferenceResult, InferenceError> {
    let system = CompiledSystem::new(doc)?;
    for name in inputs.keys() {
        if !system.input_names().any(|n| n == name) {
            return Err(InferenceError::UnknownInput(name.clone()));
        }
    }
    let values = system
        .input_names()
        .map(|n| {
            inputs
                .get(n)
                .copied()
                .ok_or_else(|| InferenceError::MissingInput(n.to_owned()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    system.infer(&values, resolution)
}

/// Turns an aggregated set into a crisp value.
pub fn defuzzify(set: &AggregatedFuzzySet, method: Defuzzifier) -> Result<f64, InferenceError> {
    let zero = || InferenceError::ZeroMass(set.variable.clone());
    match method {
        Defuzzifier::Centroid => {
            // Trapezoid weights: interior points 1, end points 1/2.
            let last = set.degrees.len() - 1;
            let (mut num, mut den) = (0.0, 0.0);
            for (i, &mu) in set.degrees.iter().enumerate() {
                let w = if i == 0 || i == last { 0.5 * mu } else { mu };
                num += set.x(i) * w;
                den += w;
            }
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(zero())
            }
        }
        Defuzzifier::MeanOfMaxima => {
            let max = set.degrees.iter().copied().fold(0.0, f64::max);
            if max <= 0.0 {
                return Err(zero());
            }
            let (sum, count) = set
                .degrees
                .iter()
                .enumerate()
                .filter(|(_, &mu)| mu == max)
                .fold((0.0, 0usize), |(s, c), (i, _)| (s + set.x(i), c + 1));
            Ok(sum / count as f64)
        }
        Defuzzifier::WeightedAverage => {
            let (num, den) = set
                .contributions
                .iter()
                .fold((0.0, 0.0), |(n, d), &(a, v)| (n + a * v, d + a));
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(zero())
            }
        }
    }
}

struct CompiledClause {
    variable: usize,
    term: usize,
    negated: bool,
}

struct CompiledRule {
    antecedent: Vec<CompiledClause>,
    consequent: Vec<CompiledClause>,
    connector: Connector,
    weight: f64,
}

/// A document with clause references resolved to indices, for repeated
/// evaluation (tuning loops evaluate one system over many samples).
pub struct CompiledSystem<'a> {
    doc: &'a FmlDocument,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    rules: Vec<CompiledRule>,
}

impl<'a> CompiledSystem<'a> {
    pub fn new(doc: &'a FmlDocument) -> Result<Self, InferenceError> {
        let index: HashMap<&str, usize> = doc
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let resolve = |rule: &Rule, clause: &crate::fml::Clause, kind: VariableKind| {
            let unknown = |what, name: String| InferenceError::UnknownReference {
                rule: rule.name.clone(),
                what,
                name,
            };
            let &vi = index
                .get(clause.variable.as_str())
                .filter(|&&i| doc.variables[i].kind == kind)
                .ok_or_else(|| unknown("variable", clause.variable.clone()))?;
            let ti = doc.variables[vi]
                .terms
                .iter()
                .position(|t| t.name == clause.term)
                .ok_or_else(|| unknown("term", format!("{}.{}", clause.variable, clause.term)))?;
            Ok(CompiledClause {
                variable: vi,
                term: ti,
                negated: clause.negated,
            })
        };
        let rules = doc
            .rule_base
            .rules
            .iter()
            .map(|rule| {
                Ok(CompiledRule {
                    antecedent: rule
                        .antecedent
                        .iter()
                        .map(|c| resolve(rule, c, VariableKind::Input))
                        .collect::<Result<_, InferenceError>>()?,
                    consequent: rule
                        .consequent
                        .iter()
                        .map(|c| resolve(rule, c, VariableKind::Output))
                        .collect::<Result<_, InferenceError>>()?,
                    connector: rule.connector,
                    weight: rule.weight,
                })
            })
            .collect::<Result<_, InferenceError>>()?;
        let kind_indices = |kind| {
            doc.variables
                .iter()
                .enumerate()
                .filter(|(_, v)| v.kind == kind)
                .map(|(i, _)| i)
                .collect()
        };
        Ok(Self {
            doc,
            inputs: kind_indices(VariableKind::Input),
            outputs: kind_indices(VariableKind::Output),
            rules,
        })
    }

    /// Input variable names, in the order `infer` expects values.
    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|&i| self.doc.variables[i].name.as_str())
    }

    /// Rule activations for input values given in [`Self::input_names`] order.
    pub fn activations(&self, values: &[f64]) -> Result<Vec<f64>, InferenceError> {
        assert_eq!(values.len(), self.inputs.len(), "one value per input variable");
        // degrees[variable][term]; output rows stay empty.
        let mut degrees: Vec<Vec<f64>> = vec![Vec::new(); self.doc.variables.len()];
        for (&vi, &x) in self.inputs.iter().zip(values) {
            let var = &self.doc.variables[vi];
            if !x.is_finite() {
                return Err(InferenceError::NonFiniteInput(var.name.clone()));
            }
            let x = var.clamp(x);
            degrees[vi] = var.terms.iter().map(|t| t.degree(x)).collect();
        }
        let and_method = self.doc.rule_base.and_method;
        Ok(self
            .rules
            .iter()
            .map(|r| {
                let clause = |c: &CompiledClause| {
                    let d = degrees[c.variable][c.term];
                    if c.negated {
                        1.0 - d
                    } else {
                        d
                    }
                };
                r.weight * fold(r.connector, and_method, r.antecedent.iter().map(clause))
            })
            .collect())
    }

    /// Output variable names in declaration order.
    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|&i| self.doc.variables[i].name.as_str())
    }

    /// Aggregates every output variable for the given rule activations.
    pub fn aggregate(
        &self,
        activations: &[f64],
        resolution: usize,
    ) -> Result<Vec<AggregatedFuzzySet>, InferenceError> {
        (0..self.outputs.len())
            .map(|k| self.aggregate_output(activations, resolution, k))
            .collect()
    }

    /// Aggregates the `k`-th output variable.
    pub fn aggregate_output(
        &self,
        activations: &[f64],
        resolution: usize,
        k: usize,
    ) -> Result<AggregatedFuzzySet, InferenceError> {
        if resolution < 3 {
            return Err(InferenceError::InvalidResolution(resolution));
        }
        let method = self.doc.rule_base.activation;
        let vi = self.outputs[k];
        let var = &self.doc.variables[vi];
        let mut set = AggregatedFuzzySet {
            variable: var.name.clone(),
            left: var.domain_left,
            right: var.domain_right,
            degrees: vec![0.0; resolution],
            contributions: Vec::new(),
        };
        let mut fired = false;
        for (rule, &act) in self.rules.iter().zip(activations) {
            for c in rule.consequent.iter().filter(|c| c.variable == vi) {
                if act <= 0.0 {
                    continue;
                }
                fired = true;
                let term = &var.terms[c.term];
                set.contributions.push((act, term.shape.center()));
                accumulate(&mut set, term, act, method);
            }
        }
        if fired {
            Ok(set)
        } else {
            Err(InferenceError::EmptyActivation(var.name.clone()))
        }
    }

    /// Crisp outputs (in output-variable declaration order) and rule
    /// activations.
    pub fn infer(&self, values: &[f64], resolution: usize) -> Result<InferenceResult, InferenceError> {
        let activations = self.activations(values)?;
        let sets = self.aggregate(&activations, resolution)?;
        let mut outputs = BTreeMap::new();
        for (set, &vi) in sets.iter().zip(&self.outputs) {
            let method = self.doc.variables[vi]
                .defuzzifier
                .unwrap_or(Defuzzifier::Centroid);
            outputs.insert(set.variable.clone(), defuzzify(set, method)?);
        }
        let rule_activations = self
            .doc
            .rule_base
            .rules
            .iter()
            .zip(activations)
            .map(|(r, a)| (r.name.clone(), a))
            .collect();
        Ok(InferenceResult {
            outputs,
            rule_activations,
        })
    }

    /// Crisp value of the `k`-th output variable only; the hot path for
    /// tuning loops.
    pub fn infer_output(&self, values: &[f64], resolution: usize, k: usize) -> Result<f64, InferenceError> {
        let activations = self.activations(values)?;
        let set = self.aggregate_output(&activations, resolution, k)?;
        let method = self.doc.variables[self.outputs[k]]
            .defuzzifier
            .unwrap_or(Defuzzifier::Centroid);
        defuzzify(&set, method)
    }
}

/// Max-combines one fired consequent into `set`. Spikes (singletons and
/// degenerate triangles) land on the nearest grid point, since an exact hit
/// on the grid is not guaranteed.
fn accumulate(set: &mut AggregatedFuzzySet, term: &FuzzyTerm, act: f64, method: ActivationMethod) {
    let shape_at = |mu: f64| match method {
        ActivationMethod::Min => mu.min(act),
        ActivationMethod::Prod => mu * act,
    };
    let n = set.degrees.len();
    match term.shape.spike() {
        Some(v) if !term.complement => {
            let pos = ((v - set.left) / (set.right - set.left) * (n - 1) as f64).round();
            let i = pos.clamp(0.0, (n - 1) as f64) as usize;
            set.degrees[i] = set.degrees[i].max(shape_at(1.0));
        }
        _ => {
            for i in 0..n {
                let mu = shape_at(term.degree(grid_point(set.left, set.right, n, i)));
                if mu > set.degrees[i] {
                    set.degrees[i] = mu;
                }
            }
        }
    }
}
