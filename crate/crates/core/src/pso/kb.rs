//! Knowledge-base tuning: membership-function parameters flattened into a
//! PSO search vector, scored by mean squared error against labeled data.

use std::io::Read;

use super::{optimize_seeded, ParameterSpec, PsoConfig, PsoError, RepairRule};
use crate::fml::{validate, FmlDocument, Shape, VariableKind};
use crate::inference::{CompiledSystem, DEFAULT_RESOLUTION};

/// Which terms the optimizer may move.
#[derive(Debug, Clone, PartialEq)]
pub enum Tunable {
    All,
    /// Every term of every input variable.
    Inputs,
    /// Explicit `(variable, term)` pairs.
    Terms(Vec<(String, String)>),
}

/// Where one term's parameters live in the search vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub variable: usize,
    pub term: usize,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbEncoding {
    pub spec: ParameterSpec,
    pub slots: Vec<Slot>,
}

/// Flattens the selected terms' shape parameters, in declaration order.
///
/// Each parameter is bounded by its variable's domain (widened to include
/// the current value); triangle and trapezoid groups are kept ascending,
/// Gaussian widths positive.
pub fn encode_kb(doc: &FmlDocument, tunable: &Tunable) -> Result<(Vec<f64>, KbEncoding), PsoError> {
    let selected: Vec<(usize, usize)> = match tunable {
        Tunable::All | Tunable::Inputs => doc
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| *tunable == Tunable::All || v.kind == VariableKind::Input)
            .flat_map(|(vi, v)| (0..v.terms.len()).map(move |ti| (vi, ti)))
            .collect(),
        Tunable::Terms(pairs) => {
            let mut out = pairs
                .iter()
                .map(|(var, term)| {
                    let vi = doc
                        .variables
                        .iter()
                        .position(|v| &v.name == var)
                        .ok_or_else(|| PsoError::UnknownReference(format!("unknown variable '{var}'")))?;
                    let ti = doc.variables[vi]
                        .terms
                        .iter()
                        .position(|t| &t.name == term)
                        .ok_or_else(|| {
                            PsoError::UnknownReference(format!("variable '{var}' has no term '{term}'"))
                        })?;
                    Ok((vi, ti))
                })
                .collect::<Result<Vec<_>, PsoError>>()?;
            out.sort_unstable();
            out.dedup();
            out
        }
    };

    let mut x = Vec::new();
    let (mut lower, mut upper, mut repair, mut slots) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (vi, ti) in selected {
        let var = &doc.variables[vi];
        let shape = &var.terms[ti].shape;
        let params = shape.params();
        let offset = x.len();
        let width = var.domain_right - var.domain_left;
        for (k, &p) in params.iter().enumerate() {
            let (lo, hi) = match shape {
                Shape::Gaussian { .. } if k == 1 => (width * 1e-6, width),
                _ => (var.domain_left, var.domain_right),
            };
            lower.push(lo.min(p));
            upper.push(hi.max(p));
        }
        match shape {
            Shape::Triangular { .. } | Shape::Trapezoidal { .. } => {
                repair.push(RepairRule::Ascending(offset..offset + params.len()))
            }
            Shape::Gaussian { .. } => repair.push(RepairRule::AtLeast {
                dim: offset + 1,
                min: width * 1e-6,
            }),
            Shape::Singleton { .. } => {}
        }
        slots.push(Slot {
            variable: vi,
            term: ti,
            offset,
            len: params.len(),
        });
        x.extend(params);
    }
    let mut spec = ParameterSpec::new(lower, upper)?;
    spec.repair = repair;
    Ok((x, KbEncoding { spec, slots }))
}

/// Writes `x` back into a copy of `doc`.
pub fn decode_kb(doc: &FmlDocument, encoding: &KbEncoding, x: &[f64]) -> FmlDocument {
    let mut out = doc.clone();
    for slot in &encoding.slots {
        let term = &mut out.variables[slot.variable].terms[slot.term];
        term.shape = term.shape.with_params(&x[slot.offset..slot.offset + slot.len]);
    }
    out
}

/// Labeled samples: input values in the document's input order and the
/// target value of one output variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningData {
    pub target: String,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl TuningData {
    /// Reads CSV with a header naming every input variable (any order)
    /// followed by one output-variable column.
    pub fn from_csv<R: Read>(doc: &FmlDocument, input: R) -> Result<Self, PsoError> {
        let bad = |m: String| PsoError::Data(m);
        let mut reader = csv::Reader::from_reader(input);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let Some((target, input_cols)) = header.split_last() else {
            return Err(bad("empty header".into()));
        };
        match doc.variable(target) {
            Some(v) if v.kind == VariableKind::Output => {}
            _ => return Err(bad(format!("last column '{target}' is not an output variable"))),
        }
        let order: Vec<usize> = doc
            .inputs()
            .map(|v| {
                input_cols
                    .iter()
                    .position(|c| *c == v.name)
                    .ok_or_else(|| bad(format!("missing column for input '{}'", v.name)))
            })
            .collect::<Result<_, _>>()?;
        if let Some(extra) = input_cols.iter().find(|c| doc.inputs().all(|v| &v.name != *c)) {
            return Err(bad(format!("column '{extra}' is not an input variable")));
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let nums = record
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
            if nums.len() != header.len() {
                return Err(bad(format!("row {} has {} fields", line + 1, nums.len())));
            }
            rows.push((order.iter().map(|&i| nums[i]).collect(), nums[header.len() - 1]));
        }
        Ok(Self {
            target: target.clone(),
            rows,
        })
    }

    /// Samples the document itself on the given input rows.
    pub fn generate(doc: &FmlDocument, inputs: &[Vec<f64>], resolution: usize) -> Result<Self, PsoError> {
        let sys = CompiledSystem::new(doc).map_err(|e| PsoError::InvalidDocument(e.to_string()))?;
        let target = sys.output_names().next().expect("valid documents have an output").to_owned();
        let rows = inputs
            .iter()
            .map(|x| {
                sys.infer_output(x, resolution, 0)
                    .map(|y| (x.clone(), y))
                    .map_err(|e| PsoError::Data(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { target, rows })
    }

    pub fn to_csv(&self, doc: &FmlDocument) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = doc.inputs().map(|v| v.name.as_str()).collect();
        header.push(&self.target);
        w.write_record(&header).expect("in-memory write");
        for (x, y) in &self.rows {
            let fields: Vec<String> = x.iter().chain(std::iter::once(y)).map(f64::to_string).collect();
            w.write_record(&fields).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub pso: PsoConfig,
    pub tunable: Tunable,
    pub resolution: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            pso: PsoConfig::default(),
            tunable: Tunable::All,
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub document: FmlDocument,
    pub initial_mse: f64,
    pub final_mse: f64,
    pub history: Vec<f64>,
}

/// Mean squared error of `doc` on `data`; `+inf` if any sample cannot be
/// inferred (for example no rule fires).
pub fn mse(doc: &FmlDocument, data: &TuningData, resolution: usize) -> f64 {
    let Ok(sys) = CompiledSystem::new(doc) else {
        return f64::INFINITY;
    };
    let Some(k) = sys.output_names().position(|n| n == data.target) else {
        return f64::INFINITY;
    };
    let mut sum = 0.0;
    for (x, y) in &data.rows {
        match sys.infer_output(x, resolution, k) {
            Ok(p) => sum += (p - y) * (p - y),
            Err(_) => return f64::INFINITY,
        }
    }
    sum / data.rows.len() as f64
}

/// Tunes the selected membership functions of `doc` to minimize MSE on
/// `data`. The starting document is part of the initial swarm, so the
/// result is never worse than the input.
pub fn tune_kb(doc: &FmlDocument, data: &TuningData, config: &TuneConfig) -> Result<TuneResult, PsoError> {
    let violations = validate(doc);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(PsoError::InvalidDocument(text.join("; ")));
    }
    if data.rows.is_empty() {
        return Err(PsoError::EmptyDataset);
    }
    let inputs = doc.inputs().count();
    if let Some((x, _)) = data.rows.iter().find(|(x, _)| x.len() != inputs) {
        return Err(PsoError::Data(format!("sample has {} inputs, expected {inputs}", x.len())));
    }
    if let Some((_, y)) = data.rows.iter().find(|(x, y)| !y.is_finite() || x.iter().any(|v| !v.is_finite())) {
        return Err(PsoError::Data(format!("non-finite sample value (target {y})")));
    }

    let (x0, encoding) = encode_kb(doc, &config.tunable)?;
    let initial_mse = mse(doc, data, config.resolution);
    let fitness = |x: &[f64]| mse(&decode_kb(doc, &encoding, x), data, config.resolution);
    let result = optimize_seeded(&encoding.spec, fitness, &config.pso, &[x0])?;
    Ok(TuneResult {
        document: decode_kb(doc, &encoding, &result.best_position),
        initial_mse,
        final_mse: result.best_fitness,
        history: result.history,
    })
}
