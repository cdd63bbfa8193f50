use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{
    validate, ActivationMethod, AndMethod, Clause, Connector, Defuzzifier, FmlDocument, FmlError,
    FuzzyTerm, FuzzyVariable, OrMethod, Rule, RuleBase, Shape, VariableKind,
};

/// Parses FML text into a validated document.
///
/// Elements and attributes outside the supported subset are rejected with
/// [`FmlError::SchemaViolation`]; documents that parse but break a model
/// invariant are rejected with [`FmlError::SemanticError`].
pub fn parse_fml(text: &str) -> Result<FmlDocument, FmlError> {
    let root = read_tree(text)?;
    let doc = build_document(&root)?;
    let violations = validate(&doc);
    if violations.is_empty() {
        Ok(doc)
    } else {
        Err(FmlError::SemanticError(violations))
    }
}

#[derive(Debug)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    text: String,
}

fn malformed(e: impl std::fmt::Display) -> FmlError {
    FmlError::MalformedXml(e.to_string())
}

fn schema(msg: impl Into<String>) -> FmlError {
    FmlError::SchemaViolation(msg.into())
}

fn open_node(e: &BytesStart<'_>) -> Result<Node, FmlError> {
    let name = std::str::from_utf8(e.name().as_ref()).map_err(malformed)?.to_owned();
    let mut attrs = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(malformed)?;
        let key = std::str::from_utf8(attr.key.as_ref()).map_err(malformed)?.to_owned();
        let value = attr.unescape_value().map_err(malformed)?.into_owned();
        attrs.push((key, value));
    }
    Ok(Node {
        name,
        attrs,
        children: Vec::new(),
        text: String::new(),
    })
}

fn read_tree(text: &str) -> Result<Node, FmlError> {
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;

    let mut attach = |node: Node, stack: &mut Vec<Node>| -> Result<(), FmlError> {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None if root.is_none() => root = Some(node),
            None => return Err(malformed("more than one root element")),
        }
        Ok(())
    };

    loop {
        match reader.read_event().map_err(malformed)? {
            Event::Start(e) => stack.push(open_node(&e)?),
            Event::Empty(e) => {
                let node = open_node(&e)?;
                attach(node, &mut stack)?;
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| malformed("unbalanced end tag"))?;
                attach(node, &mut stack)?;
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(malformed)?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&s),
                    None if s.trim().is_empty() => {}
                    None => return Err(malformed("text outside the root element")),
                }
            }
            Event::CData(c) => {
                let s = String::from_utf8(c.into_inner().into_owned()).map_err(malformed)?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&s),
                    None => return Err(malformed("CDATA outside the root element")),
                }
            }
            Event::Eof => break,
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
        }
    }
    if !stack.is_empty() {
        return Err(malformed("unexpected end of document"));
    }
    root.ok_or_else(|| malformed("document has no root element"))
}

impl Node {
    /// Checks attribute names against `allowed` and that no character data
    /// appears where only elements belong.
    fn expect(&self, allowed: &[&str], text_allowed: bool) -> Result<(), FmlError> {
        for (k, _) in &self.attrs {
            if !allowed.contains(&k.as_str()) {
                return Err(schema(format!("<{}> has unsupported attribute '{}'", self.name, k)));
            }
        }
        if !text_allowed && !self.text.trim().is_empty() {
            return Err(schema(format!("<{}> must not contain text", self.name)));
        }
        if text_allowed && !self.children.is_empty() {
            return Err(schema(format!("<{}> must not contain elements", self.name)));
        }
        Ok(())
    }

    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, FmlError> {
        self.attr(key)
            .ok_or_else(|| schema(format!("<{}> is missing attribute '{}'", self.name, key)))
    }

    fn number(&self, key: &str) -> Result<f64, FmlError> {
        let raw = self.required(key)?;
        raw.trim().parse().map_err(|_| {
            schema(format!("<{}> attribute '{}' is not a number: '{}'", self.name, key, raw))
        })
    }

    fn only_child(&self) -> Result<&Node, FmlError> {
        match self.children.as_slice() {
            [one] => Ok(one),
            _ => Err(schema(format!("<{}> must contain exactly one element", self.name))),
        }
    }
}

fn build_document(root: &Node) -> Result<FmlDocument, FmlError> {
    if root.name != "fuzzySystem" {
        return Err(schema(format!("root element is <{}>, expected <fuzzySystem>", root.name)));
    }
    root.expect(&["name"], false)?;
    let name = root.required("name")?.to_owned();

    let mut kb = None;
    let mut rb = None;
    for child in &root.children {
        match child.name.as_str() {
            "knowledgeBase" if kb.is_none() => kb = Some(build_knowledge_base(child)?),
            "mamdaniRuleBase" if rb.is_none() => rb = Some(build_rule_base(child)?),
            "knowledgeBase" | "mamdaniRuleBase" => {
                return Err(schema(format!("<{}> appears more than once", child.name)))
            }
            other => return Err(schema(format!("unsupported element <{other}> in <fuzzySystem>"))),
        }
    }
    Ok(FmlDocument {
        name,
        variables: kb.ok_or_else(|| schema("missing <knowledgeBase>"))?,
        rule_base: rb.ok_or_else(|| schema("missing <mamdaniRuleBase>"))?,
    })
}

fn build_knowledge_base(node: &Node) -> Result<Vec<FuzzyVariable>, FmlError> {
    node.expect(&[], false)?;
    node.children.iter().map(build_variable).collect()
}

fn build_variable(node: &Node) -> Result<FuzzyVariable, FmlError> {
    if node.name != "fuzzyVariable" {
        return Err(schema(format!("unsupported element <{}> in <knowledgeBase>", node.name)));
    }
    node.expect(&["name", "domainLeft", "domainRight", "type", "defuzzifier"], false)?;
    let kind = match node.required("type")? {
        "input" => VariableKind::Input,
        "output" => VariableKind::Output,
        other => return Err(schema(format!("unsupported variable type '{other}'"))),
    };
    let defuzzifier = match (kind, node.attr("defuzzifier")) {
        (VariableKind::Output, Some(d)) => Some(
            Defuzzifier::parse(d).ok_or_else(|| schema(format!("unsupported defuzzifier '{d}'")))?,
        ),
        (VariableKind::Output, None) => {
            return Err(schema("output <fuzzyVariable> is missing attribute 'defuzzifier'"))
        }
        (VariableKind::Input, Some(_)) => {
            return Err(schema("input <fuzzyVariable> must not declare a defuzzifier"))
        }
        (VariableKind::Input, None) => None,
    };
    Ok(FuzzyVariable {
        name: node.required("name")?.to_owned(),
        domain_left: node.number("domainLeft")?,
        domain_right: node.number("domainRight")?,
        kind,
        defuzzifier,
        terms: node.children.iter().map(build_term).collect::<Result<_, _>>()?,
    })
}

fn build_term(node: &Node) -> Result<FuzzyTerm, FmlError> {
    if node.name != "fuzzyTerm" {
        return Err(schema(format!("unsupported element <{}> in <fuzzyVariable>", node.name)));
    }
    node.expect(&["name", "complement"], false)?;
    let complement = match node.attr("complement") {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(schema(format!("complement must be true or false, got '{other}'"))),
    };
    Ok(FuzzyTerm {
        name: node.required("name")?.to_owned(),
        complement,
        shape: build_shape(node.only_child()?)?,
    })
}

fn build_shape(node: &Node) -> Result<Shape, FmlError> {
    let arity = match node.name.as_str() {
        "triangularShape" => 3,
        "trapezoidShape" => 4,
        "gaussianShape" => 2,
        "singletonShape" => 1,
        other => return Err(schema(format!("unsupported shape <{other}>"))),
    };
    const KEYS: [&str; 4] = ["param1", "param2", "param3", "param4"];
    node.expect(&KEYS[..arity], false)?;
    if !node.children.is_empty() {
        return Err(schema(format!("<{}> must be empty", node.name)));
    }
    let p = KEYS[..arity]
        .iter()
        .map(|k| node.number(k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match arity {
        3 => Shape::Triangular { a: p[0], b: p[1], c: p[2] },
        4 => Shape::Trapezoidal { a: p[0], b: p[1], c: p[2], d: p[3] },
        2 => Shape::Gaussian { mean: p[0], sigma: p[1] },
        _ => Shape::Singleton { value: p[0] },
    })
}

fn build_rule_base(node: &Node) -> Result<RuleBase, FmlError> {
    node.expect(&["andMethod", "orMethod", "activationMethod"], false)?;
    let and_method = match node.attr("andMethod").unwrap_or("min") {
        "min" => AndMethod::Min,
        "prod" => AndMethod::Prod,
        other => return Err(schema(format!("unsupported andMethod '{other}'"))),
    };
    let or_method = match node.attr("orMethod").unwrap_or("max") {
        "max" => OrMethod::Max,
        other => return Err(schema(format!("unsupported orMethod '{other}'"))),
    };
    let activation = match node.attr("activationMethod").unwrap_or("min") {
        "min" => ActivationMethod::Min,
        "prod" => ActivationMethod::Prod,
        other => return Err(schema(format!("unsupported activationMethod '{other}'"))),
    };
    Ok(RuleBase {
        and_method,
        or_method,
        activation,
        rules: node.children.iter().map(build_rule).collect::<Result<_, _>>()?,
    })
}

fn build_rule(node: &Node) -> Result<Rule, FmlError> {
    if node.name != "rule" {
        return Err(schema(format!("unsupported element <{}> in <mamdaniRuleBase>", node.name)));
    }
    node.expect(&["name", "weight", "connector"], false)?;
    let weight = if node.attr("weight").is_some() {
        node.number("weight")?
    } else {
        1.0
    };
    let connector = match node.attr("connector").unwrap_or("and") {
        "and" => Connector::And,
        "or" => Connector::Or,
        other => return Err(schema(format!("unsupported connector '{other}'"))),
    };
    let mut antecedent = None;
    let mut consequent = None;
    for child in &node.children {
        let slot = match child.name.as_str() {
            "antecedent" => &mut antecedent,
            "consequent" => &mut consequent,
            other => return Err(schema(format!("unsupported element <{other}> in <rule>"))),
        };
        if slot.is_some() {
            return Err(schema(format!("<{}> appears more than once in a rule", child.name)));
        }
        child.expect(&[], false)?;
        *slot = Some(child.children.iter().map(build_clause).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(Rule {
        name: node.required("name")?.to_owned(),
        antecedent: antecedent.ok_or_else(|| schema("<rule> is missing <antecedent>"))?,
        connector,
        consequent: consequent.ok_or_else(|| schema("<rule> is missing <consequent>"))?,
        weight,
    })
}

fn build_clause(node: &Node) -> Result<Clause, FmlError> {
    if node.name != "clause" {
        return Err(schema(format!("unsupported element <{}> where <clause> expected", node.name)));
    }
    node.expect(&["modifier"], false)?;
    let negated = match node.attr("modifier") {
        None => false,
        Some("not") => true,
        Some(other) => return Err(schema(format!("unsupported clause modifier '{other}'"))),
    };
    let mut variable = None;
    let mut term = None;
    for child in &node.children {
        let slot = match child.name.as_str() {
            "variable" => &mut variable,
            "term" => &mut term,
            other => return Err(schema(format!("unsupported element <{other}> in <clause>"))),
        };
        child.expect(&[], true)?;
        if slot.replace(child.text.clone()).is_some() {
            return Err(schema(format!("<{}> appears more than once in a clause", child.name)));
        }
    }
    Ok(Clause {
        variable: variable.ok_or_else(|| schema("<clause> is missing <variable>"))?,
        term: term.ok_or_else(|| schema("<clause> is missing <term>"))?,
        negated,
    })
}
