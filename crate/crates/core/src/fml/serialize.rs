use std::fmt::Write;

use quick_xml::escape::escape;

use super::{ActivationMethod, AndMethod, Clause, FmlDocument, FuzzyVariable, OrMethod, Shape};

/// Renders `doc` as FML text. Output is deterministic: variables, terms and
/// rules appear in declaration order, numbers use the shortest decimal form
/// that reads back to the same `f64`.
pub fn serialize_fml(doc: &FmlDocument) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<fuzzySystem name=\"{}\">", escape(&doc.name));
    out.push_str("  <knowledgeBase>\n");
    for var in &doc.variables {
        write_variable(&mut out, var);
    }
    out.push_str("  </knowledgeBase>\n");

    let rb = &doc.rule_base;
    let _ = writeln!(
        out,
        "  <mamdaniRuleBase andMethod=\"{}\" orMethod=\"{}\" activationMethod=\"{}\">",
        match rb.and_method {
            AndMethod::Min => "min",
            AndMethod::Prod => "prod",
        },
        match rb.or_method {
            OrMethod::Max => "max",
        },
        match rb.activation {
            ActivationMethod::Min => "min",
            ActivationMethod::Prod => "prod",
        },
    );
    for rule in &rb.rules {
        let _ = writeln!(
            out,
            "    <rule name=\"{}\" weight=\"{}\" connector=\"{}\">",
            escape(&rule.name),
            rule.weight,
            rule.connector.as_str()
        );
        write_clauses(&mut out, "antecedent", &rule.antecedent);
        write_clauses(&mut out, "consequent", &rule.consequent);
        out.push_str("    </rule>\n");
    }
    out.push_str("  </mamdaniRuleBase>\n");
    out.push_str("</fuzzySystem>\n");
    out
}

fn write_variable(out: &mut String, var: &FuzzyVariable) {
    let _ = write!(
        out,
        "    <fuzzyVariable name=\"{}\" domainLeft=\"{}\" domainRight=\"{}\" type=\"{}\"",
        escape(&var.name),
        var.domain_left,
        var.domain_right,
        var.kind.as_str()
    );
    if let Some(d) = var.defuzzifier {
        let _ = write!(out, " defuzzifier=\"{}\"", d.as_str());
    }
    out.push_str(">\n");
    for term in &var.terms {
        let _ = writeln!(
            out,
            "      <fuzzyTerm name=\"{}\" complement=\"{}\">",
            escape(&term.name),
            term.complement
        );
        let element = match term.shape {
            Shape::Triangular { .. } => "triangularShape",
            Shape::Trapezoidal { .. } => "trapezoidShape",
            Shape::Gaussian { .. } => "gaussianShape",
            Shape::Singleton { .. } => "singletonShape",
        };
        let _ = write!(out, "        <{element}");
        for (i, p) in term.shape.params().iter().enumerate() {
            let _ = write!(out, " param{}=\"{}\"", i + 1, p);
        }
        out.push_str("/>\n");
        out.push_str("      </fuzzyTerm>\n");
    }
    out.push_str("    </fuzzyVariable>\n");
}

fn write_clauses(out: &mut String, element: &str, clauses: &[Clause]) {
    if clauses.is_empty() {
        let _ = writeln!(out, "      <{element}/>");
        return;
    }
    let _ = writeln!(out, "      <{element}>");
    for c in clauses {
        let open = if c.negated {
            "<clause modifier=\"not\">"
        } else {
            "<clause>"
        };
        let _ = writeln!(
            out,
            "        {open}<variable>{}</variable><term>{}</term></clause>",
            escape(&c.variable),
            escape(&c.term)
        );
    }
    let _ = writeln!(out, "      </{element}>");
}
