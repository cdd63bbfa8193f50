//! Random valid FML documents and invalidating mutations.

use aifml_core::fml::*;
use proptest::prelude::*;

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}"
}

fn shape(left: f64, right: f64) -> impl Strategy<Value = Shape> {
    let p = left..=right;
    let width = right - left;
    prop_oneof![
        prop::array::uniform3(p.clone()).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            Shape::Triangular { a: v[0], b: v[1], c: v[2] }
        }),
        prop::array::uniform4(p.clone()).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            Shape::Trapezoidal { a: v[0], b: v[1], c: v[2], d: v[3] }
        }),
        (p.clone(), (width * 1e-3)..width).prop_map(|(mean, sigma)| Shape::Gaussian { mean, sigma }),
        p.prop_map(|value| Shape::Singleton { value }),
    ]
}

fn variable(kind: VariableKind) -> impl Strategy<Value = FuzzyVariable> {
    (-1e3f64..1e3, 1e-3f64..1e3)
        .prop_flat_map(move |(left, width)| {
            let right = left + width;
            (
                Just((left, right)),
                prop::collection::vec((any::<bool>(), shape(left, right)), 1..4),
                prop_oneof![
                    Just(Defuzzifier::Centroid),
                    Just(Defuzzifier::MeanOfMaxima),
                    Just(Defuzzifier::WeightedAverage)
                ],
            )
        })
        .prop_map(move |((left, right), shapes, defuzzifier)| FuzzyVariable {
            name: String::new(),
            domain_left: left,
            domain_right: right,
            kind,
            defuzzifier: (kind == VariableKind::Output).then_some(defuzzifier),
            terms: shapes
                .into_iter()
                .enumerate()
                .map(|(i, (complement, shape))| FuzzyTerm {
                    name: format!("t{i}"),
                    complement,
                    shape,
                })
                .collect(),
        })
}

type RawClause = (usize, usize, bool);

/// Strategy over documents that satisfy every model invariant.
pub fn valid_document() -> impl Strategy<Value = FmlDocument> {
    (
        ident(),
        prop::collection::vec(variable(VariableKind::Input), 1..4),
        prop::collection::vec(variable(VariableKind::Output), 1..3),
        prop::collection::vec(
            (
                prop::collection::vec((any::<usize>(), any::<usize>(), any::<bool>()), 1..4),
                prop::collection::vec((any::<usize>(), any::<usize>()), 1..3),
                any::<bool>(),
                0.0f64..=1.0,
            ),
            1..6,
        ),
        any::<(bool, bool)>(),
    )
        .prop_map(|(name, mut inputs, mut outputs, raw_rules, (and_prod, act_prod))| {
            for (i, v) in inputs.iter_mut().enumerate() {
                v.name = format!("in{i}");
            }
            for (i, v) in outputs.iter_mut().enumerate() {
                v.name = format!("out{i}");
            }
            let pick = |vars: &[FuzzyVariable], (vi, ti): (usize, usize)| {
                let v = &vars[vi % vars.len()];
                (v.name.clone(), v.terms[ti % v.terms.len()].name.clone())
            };
            let rules = raw_rules
                .into_iter()
                .enumerate()
                .map(|(i, (ante, cons, or, weight))| Rule {
                    name: format!("r{i}"),
                    antecedent: ante
                        .into_iter()
                        .map(|(vi, ti, negated): RawClause| {
                            let (variable, term) = pick(&inputs, (vi, ti));
                            Clause { variable, term, negated }
                        })
                        .collect(),
                    connector: if or { Connector::Or } else { Connector::And },
                    consequent: cons
                        .into_iter()
                        .map(|c| {
                            let (variable, term) = pick(&outputs, c);
                            Clause::new(variable, term)
                        })
                        .collect(),
                    weight,
                })
                .collect();
            let mut variables = inputs;
            variables.extend(outputs);
            FmlDocument {
                name,
                variables,
                rule_base: RuleBase {
                    and_method: if and_prod { AndMethod::Prod } else { AndMethod::Min },
                    or_method: OrMethod::Max,
                    activation: if act_prod { ActivationMethod::Prod } else { ActivationMethod::Min },
                    rules,
                },
            }
        })
}

#[derive(Debug, Clone, Copy)]
pub enum Mutation {
    InvertedBounds,
    DanglingTerm,
    DanglingVariable,
    HeavyWeight,
    UnorderedShape,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::InvertedBounds,
        Mutation::DanglingTerm,
        Mutation::DanglingVariable,
        Mutation::HeavyWeight,
        Mutation::UnorderedShape,
    ];

    pub fn expected(self) -> ViolationKind {
        match self {
            Mutation::InvertedBounds => ViolationKind::InvertedBounds,
            Mutation::DanglingTerm => ViolationKind::DanglingTerm,
            Mutation::DanglingVariable => ViolationKind::DanglingVariable,
            Mutation::HeavyWeight => ViolationKind::WeightOutOfRange,
            Mutation::UnorderedShape => ViolationKind::ShapeOrder,
        }
    }

    /// Applies the mutation; returns `None` when the document offers no
    /// place for it (e.g. no triangle to disorder).
    pub fn apply(self, doc: &FmlDocument) -> Option<FmlDocument> {
        let mut d = doc.clone();
        match self {
            Mutation::InvertedBounds => {
                let v = &mut d.variables[0];
                std::mem::swap(&mut v.domain_left, &mut v.domain_right);
            }
            Mutation::DanglingTerm => d.rule_base.rules[0].antecedent[0].term = "hot".into(),
            Mutation::DanglingVariable => {
                d.rule_base.rules[0].consequent[0].variable = "nowhere".into()
            }
            Mutation::HeavyWeight => d.rule_base.rules[0].weight = 1.5,
            Mutation::UnorderedShape => {
                let term = d
                    .variables
                    .iter_mut()
                    .flat_map(|v| v.terms.iter_mut())
                    .find(|t| match t.shape {
                        Shape::Triangular { a, c, .. } => a < c,
                        Shape::Trapezoidal { a, d, .. } => a < d,
                        _ => false,
                    })?;
                let mut p = term.shape.params();
                p.reverse();
                term.shape = term.shape.with_params(&p);
            }
        }
        Some(d)
    }
}
