//! Brute-force Mamdani evaluation used as an independent reference: its own
//! membership formulas, rule folding, and trapezoid-rule integration over a
//! dense grid.

use std::collections::BTreeMap;

use aifml_core::fml::*;

pub const DENSE_POINTS: usize = 1_000_000;

fn tri(a: f64, b: f64, c: f64, x: f64) -> f64 {
    if x == b {
        return 1.0;
    }
    let rise = if b > a { (x - a) / (b - a) } else if x >= b { 1.0 } else { 0.0 };
    let fall = if c > b { (c - x) / (c - b) } else if x <= b { 1.0 } else { 0.0 };
    rise.min(fall).clamp(0.0, 1.0)
}

fn trap(a: f64, b: f64, c: f64, d: f64, x: f64) -> f64 {
    if b <= x && x <= c {
        return 1.0;
    }
    let rise = if b > a { (x - a) / (b - a) } else if x >= b { 1.0 } else { 0.0 };
    let fall = if d > c { (d - x) / (d - c) } else if x <= c { 1.0 } else { 0.0 };
    rise.min(fall).clamp(0.0, 1.0)
}

pub fn mu(term: &FuzzyTerm, x: f64) -> f64 {
    let m = match term.shape {
        Shape::Triangular { a, b, c } => tri(a, b, c, x),
        Shape::Trapezoidal { a, b, c, d } => trap(a, b, c, d, x),
        Shape::Gaussian { mean, sigma } => (-0.5 * ((x - mean) / sigma).powi(2)).exp(),
        Shape::Singleton { value } => f64::from(u8::from(x == value)),
    };
    if term.complement {
        1.0 - m
    } else {
        m
    }
}

fn term_of<'a>(doc: &'a FmlDocument, clause: &Clause) -> (&'a FuzzyVariable, &'a FuzzyTerm) {
    let v = doc.variables.iter().find(|v| v.name == clause.variable).unwrap();
    (v, v.terms.iter().find(|t| t.name == clause.term).unwrap())
}

pub fn activations(doc: &FmlDocument, inputs: &BTreeMap<String, f64>) -> Vec<f64> {
    doc.rule_base
        .rules
        .iter()
        .map(|rule| {
            let ds: Vec<f64> = rule
                .antecedent
                .iter()
                .map(|c| {
                    let (v, t) = term_of(doc, c);
                    let x = inputs[&v.name].max(v.domain_left).min(v.domain_right);
                    let d = mu(t, x);
                    if c.negated {
                        1.0 - d
                    } else {
                        d
                    }
                })
                .collect();
            let folded = match (rule.connector, doc.rule_base.and_method) {
                (Connector::Or, _) => ds.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                (Connector::And, AndMethod::Min) => ds.iter().cloned().fold(f64::INFINITY, f64::min),
                (Connector::And, AndMethod::Prod) => ds.iter().product(),
            };
            rule.weight * folded
        })
        .collect()
}

/// Centroid of `output` by trapezoid-rule integration of the aggregated set
/// on `points` evenly spaced samples.
pub fn centroid(doc: &FmlDocument, inputs: &BTreeMap<String, f64>, output: &str, points: usize) -> f64 {
    let acts = activations(doc, inputs);
    let var = doc.variables.iter().find(|v| v.name == output).unwrap();
    let fired: Vec<(f64, &FuzzyTerm)> = doc
        .rule_base
        .rules
        .iter()
        .zip(&acts)
        .flat_map(|(r, &a)| {
            r.consequent
                .iter()
                .filter(|c| c.variable == output)
                .map(move |c| (a, term_of(doc, c).1))
        })
        .filter(|(a, _)| *a > 0.0)
        .collect();
    let h = (var.domain_right - var.domain_left) / (points - 1) as f64;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..points {
        let x = var.domain_left + h * i as f64;
        let m = fired
            .iter()
            .map(|&(a, t)| match doc.rule_base.activation {
                ActivationMethod::Min => a.min(mu(t, x)),
                ActivationMethod::Prod => a * mu(t, x),
            })
            .fold(0.0, f64::max);
        let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        num += w * x * m;
        den += w * m;
    }
    num / den
}
