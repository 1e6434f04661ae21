//! JSON and CSV rendering of subcommand results.
//!
//! JSON keys come from the serde derives in `bellwigner` and stay in struct
//! order. Floats are written in their shortest round-trip form. CSV output
//! puts correlators in the fixed column order `A1B1, A1B0, A0B1, A0B0, S`.

use bellwigner::chsh::{ChshReport, JointOutcome};
use bellwigner::interpretations::{AgreementReport, Backend, BackendReports, Branch};
use bellwigner::observables::{AlgebraReport, Observable};
use bellwigner::states::StateVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;

pub const CHSH_COLUMNS: [&str; 9] = [
    "mode",
    "A1B1",
    "A1B0",
    "A0B1",
    "A0B0",
    "S",
    "shots_per_setting",
    "standard_error",
    "sigma_violation",
];

/// A table: header followed by rows.
pub type Table = Vec<Vec<String>>;

/// Shortest round-trip form, matching the JSON output.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else {
        x.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn chsh_cells(r: &ChshReport) -> Vec<String> {
    let c = &r.correlators;
    vec![
        serde_json::to_value(r.mode)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string(),
        num(c.a1b1),
        num(c.a1b0),
        num(c.a0b1),
        num(c.a0b0),
        num(r.s_value),
        r.shots_per_setting
            .map(|n| n.to_string())
            .unwrap_or_default(),
        opt(r.standard_error),
        opt(r.sigma_violation),
    ]
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn backend_rows(table: &mut Table, kind: &str, reports: &BackendReports) {
    for b in Backend::ALL {
        let mut row = vec![kind.to_string(), b.as_str().to_string()];
        row.extend(chsh_cells(reports.get(b)));
        table.push(row);
    }
}

fn state_rows(table: &mut Table, tag: &str, state: &StateVector) {
    for (i, z) in state.amplitudes().entries().iter().enumerate() {
        table.push(vec![tag.to_string(), i.to_string(), num(z.re), num(z.im)]);
    }
}

/// The result of one subcommand.
#[derive(Debug, Clone)]
pub enum Document {
    Chsh(ChshReport),
    ClassicalBound {
        max: i32,
        cases: usize,
        maximizers: usize,
    },
    Distribution {
        setting: String,
        outcomes: Vec<JointOutcome>,
    },
    Algebra(AlgebraReport),
    GrwProb {
        params: Value,
        linear: f64,
        exact: f64,
    },
    GrwSim(Value),
    Branches(Value, Vec<(String, Branch)>),
    Agreement(AgreementReport),
    State(StateVector),
    Observable(Observable),
}

impl Document {
    pub fn to_json(&self) -> Value {
        fn v<T: Serialize>(x: &T) -> Value {
            serde_json::to_value(x).expect("serializable")
        }
        match self {
            Self::Chsh(r) => v(r),
            Self::ClassicalBound {
                max,
                cases,
                maximizers,
            } => json!({"classical_max": max, "cases": cases, "maximizers": maximizers}),
            Self::Distribution { setting, outcomes } => {
                json!({"setting": setting, "outcomes": outcomes})
            }
            Self::Algebra(r) => v(r),
            Self::GrwProb {
                params,
                linear,
                exact,
            } => {
                let mut m = params.as_object().cloned().unwrap_or_default();
                m.insert("linear".into(), json!(linear));
                m.insert("exact".into(), json!(exact));
                Value::Object(m)
            }
            Self::GrwSim(doc) | Self::Branches(doc, _) => doc.clone(),
            Self::Agreement(r) => v(r),
            Self::State(s) => v(s),
            Self::Observable(o) => v(o),
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t: Table = Vec::new();
        match self {
            Self::Chsh(r) => {
                t.push(header(&CHSH_COLUMNS));
                t.push(chsh_cells(r));
            }
            Self::ClassicalBound {
                max,
                cases,
                maximizers,
            } => {
                t.push(header(&["classical_max", "cases", "maximizers"]));
                t.push(vec![
                    max.to_string(),
                    cases.to_string(),
                    maximizers.to_string(),
                ]);
            }
            Self::Distribution { setting, outcomes } => {
                t.push(header(&[
                    "setting",
                    "a_value",
                    "b_value",
                    "joint_probability",
                ]));
                for o in outcomes {
                    t.push(vec![
                        setting.clone(),
                        num(o.a_value),
                        num(o.b_value),
                        num(o.joint_probability),
                    ]);
                }
            }
            Self::Algebra(r) => {
                t.push(header(&["name", "passed", "residual"]));
                for c in &r.checks {
                    t.push(vec![c.name.clone(), c.passed.to_string(), num(c.residual)]);
                }
            }
            Self::GrwProb { .. } | Self::GrwSim(_) => {
                let doc = self.to_json();
                let m = doc.as_object().expect("flat object");
                t.push(m.keys().cloned().collect());
                t.push(m.values().map(scalar).collect());
            }
            Self::Branches(_, branches) => {
                t.push(header(&["source", "label", "weight", "index", "re", "im"]));
                for (source, b) in branches {
                    for (i, z) in b.state.amplitudes().entries().iter().enumerate() {
                        t.push(vec![
                            source.clone(),
                            b.label.clone(),
                            num(b.weight),
                            i.to_string(),
                            num(z.re),
                            num(z.im),
                        ]);
                    }
                }
            }
            Self::Agreement(r) => {
                let mut cols = vec!["kind", "backend"];
                cols.extend(CHSH_COLUMNS);
                t.push(header(&cols));
                backend_rows(&mut t, "exact", &r.backends);
                backend_rows(&mut t, "sampled", &r.sampled_backends);
            }
            Self::State(s) => {
                t.push(header(&["layout", "index", "re", "im"]));
                state_rows(&mut t, &s.space().subsystems().join("|"), s);
            }
            Self::Observable(o) => {
                t.push(header(&["part", "value", "row", "col", "re", "im"]));
                let mut push =
                    |part: &str, value: String, m: &bellwigner::linalg::ComplexMatrix| {
                        for i in 0..m.rows() {
                            for j in 0..m.cols() {
                                let z = m.get(i, j);
                                t.push(vec![
                                    part.to_string(),
                                    value.clone(),
                                    i.to_string(),
                                    j.to_string(),
                                    num(z.re),
                                    num(z.im),
                                ]);
                            }
                        }
                    };
                push("matrix", String::new(), o.matrix());
                for term in o.spectrum() {
                    push("projector", num(term.value), &term.projector);
                }
            }
        }
        t
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in self.to_table() {
                    w.write_record(&row).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
            }
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => num(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}
