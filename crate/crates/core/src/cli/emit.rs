//! Result records and their table, csv and json-lines renderings.
//!
//! Every float is printed with 12 significant digits; infinities print as
//! `inf`. Within one invocation all records share a task, so the csv header
//! is fixed by the task:
//!
//! ```text
//! task,unit,<inputs...>,<scalars...>[,upper,middle,lower,slack_upper,slack_lower,chain_ok][,<flags...>],restarts,converged,evaluations[,runtime_ms]
//! ```

use serde::{Deserialize, Serialize};

use super::scenario::Unit;

/// Significant digits used for every printed float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%g`-style formatting with [`SIGNIFICANT_DIGITS`] digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIGNIFICANT_DIGITS as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Serializes floats rounded to [`SIGNIFICANT_DIGITS`], non-finite values as strings.
mod sig12 {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::format_sig;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(format_sig(*x).parse().expect("formatted float parses"))
        } else {
            s.serialize_str(&format_sig(*x))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(x),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid float '{other}'"))),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputField {
    pub name: String,
    pub value: String,
}

/// Information quantity in the record's unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub name: String,
    #[serde(with = "sig12")]
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFields {
    #[serde(with = "sig12")]
    pub upper: f64,
    #[serde(with = "sig12")]
    pub middle: f64,
    #[serde(with = "sig12")]
    pub lower: f64,
    #[serde(with = "sig12")]
    pub slack_upper: f64,
    #[serde(with = "sig12")]
    pub slack_lower: f64,
    pub chain_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub restarts: usize,
    pub converged: bool,
    pub evaluations: usize,
    #[serde(with = "sig12::option", default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task: String,
    pub unit: Unit,
    pub inputs: Vec<InputField>,
    pub scalars: Vec<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundFields>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    pub diagnostics: Diagnostics,
}

impl ResultRecord {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn input(&self, name: &str) -> Option<&str> {
        self.inputs.iter().find(|i| i.name == name).map(|i| i.value.as_str())
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|f| f.name == name).map(|f| f.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Jsonl,
}

pub fn emit(records: &[ResultRecord], format: Format) -> String {
    match format {
        Format::Table => emit_table(records),
        Format::Csv => emit_csv(records),
        Format::Jsonl => emit_jsonl(records),
    }
}

pub fn emit_jsonl(records: &[ResultRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses one json-lines record.
pub fn parse_record(line: &str) -> serde_json::Result<ResultRecord> {
    serde_json::from_str(line)
}

const BOUND_COLUMNS: [&str; 6] = ["upper", "middle", "lower", "slack_upper", "slack_lower", "chain_ok"];

fn csv_header(r: &ResultRecord) -> Vec<String> {
    let mut h = vec!["task".to_string(), "unit".to_string()];
    h.extend(r.inputs.iter().map(|i| i.name.clone()));
    h.extend(r.scalars.iter().map(|s| s.name.clone()));
    if r.bounds.is_some() {
        h.extend(BOUND_COLUMNS.iter().map(|s| s.to_string()));
    }
    h.extend(r.flags.iter().map(|f| f.name.clone()));
    h.extend(["restarts", "converged", "evaluations"].map(String::from));
    if r.diagnostics.runtime_ms.is_some() {
        h.push("runtime_ms".into());
    }
    h
}

fn csv_row(r: &ResultRecord) -> Vec<String> {
    let mut row = vec![r.task.clone(), r.unit.as_str().to_string()];
    row.extend(r.inputs.iter().map(|i| i.value.clone()));
    row.extend(r.scalars.iter().map(|s| format_sig(s.value)));
    if let Some(b) = &r.bounds {
        row.extend([b.upper, b.middle, b.lower, b.slack_upper, b.slack_lower].map(format_sig));
        row.push(b.chain_ok.to_string());
    }
    row.extend(r.flags.iter().map(|f| f.value.to_string()));
    row.push(r.diagnostics.restarts.to_string());
    row.push(r.diagnostics.converged.to_string());
    row.push(r.diagnostics.evaluations.to_string());
    if let Some(t) = r.diagnostics.runtime_ms {
        row.push(format_sig(t));
    }
    row
}

pub fn emit_csv(records: &[ResultRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = records.first() {
        w.write_record(csv_header(first)).expect("in-memory write");
    }
    for r in records {
        w.write_record(csv_row(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn pad_rows(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Value columns: the record's unit, plus nats when the unit is bits.
fn unit_columns(unit: Unit, value: f64) -> Vec<String> {
    match unit {
        Unit::Nats => vec![format_sig(value)],
        Unit::Bits => vec![format_sig(value), format_sig(value * std::f64::consts::LN_2)],
    }
}

fn unit_header(unit: Unit) -> Vec<String> {
    match unit {
        Unit::Nats => vec!["nats".into()],
        Unit::Bits => vec!["bits".into(), "nats".into()],
    }
}

fn table_single(r: &ResultRecord) -> String {
    let mut out = String::new();
    let mut head = vec![vec!["task".to_string(), r.task.clone()]];
    head.extend(r.inputs.iter().map(|i| vec![i.name.clone(), i.value.clone()]));
    out.push_str(&pad_rows(&head));

    let mut body = vec![{
        let mut h = vec!["quantity".to_string()];
        h.extend(unit_header(r.unit));
        h
    }];
    for s in &r.scalars {
        let mut row = vec![s.name.clone()];
        row.extend(unit_columns(r.unit, s.value));
        body.push(row);
    }
    if let Some(b) = &r.bounds {
        for (name, v) in [
            ("upper", b.upper),
            ("middle", b.middle),
            ("lower", b.lower),
            ("slack_upper", b.slack_upper),
            ("slack_lower", b.slack_lower),
        ] {
            let mut row = vec![format!("bound.{name}")];
            row.extend(unit_columns(r.unit, v));
            body.push(row);
        }
        body.push(vec!["bound.chain_ok".into(), b.chain_ok.to_string()]);
    }
    for f in &r.flags {
        body.push(vec![f.name.clone(), f.value.to_string()]);
    }
    out.push('\n');
    out.push_str(&pad_rows(&body));

    let mut diag = vec![
        vec!["restarts".to_string(), r.diagnostics.restarts.to_string()],
        vec!["converged".to_string(), r.diagnostics.converged.to_string()],
        vec!["evaluations".to_string(), r.diagnostics.evaluations.to_string()],
    ];
    if let Some(t) = r.diagnostics.runtime_ms {
        diag.push(vec!["runtime_ms".into(), format_sig(t)]);
    }
    out.push('\n');
    out.push_str(&pad_rows(&diag));
    out
}

/// One row per record; used for sweeps.
fn table_multi(records: &[ResultRecord]) -> String {
    let first = &records[0];
    let unit = first.unit;
    let mut header: Vec<String> = first.inputs.iter().map(|i| i.name.clone()).collect();
    for s in &first.scalars {
        header.push(format!("{} [{}]", s.name, unit.as_str()));
        if unit == Unit::Bits {
            header.push(format!("{} [nats]", s.name));
        }
    }
    header.extend(first.flags.iter().map(|f| f.name.clone()));
    header.extend(["restarts", "converged"].map(String::from));
    let mut rows = vec![header];
    for r in records {
        let mut row: Vec<String> = r.inputs.iter().map(|i| i.value.clone()).collect();
        for s in &r.scalars {
            row.extend(unit_columns(unit, s.value));
        }
        row.extend(r.flags.iter().map(|f| f.value.to_string()));
        row.push(r.diagnostics.restarts.to_string());
        row.push(r.diagnostics.converged.to_string());
        rows.push(row);
    }
    format!("task  {}\n\n{}", first.task, pad_rows(&rows))
}

pub fn emit_table(records: &[ResultRecord]) -> String {
    match records {
        [] => String::new(),
        [one] => table_single(one),
        many => table_multi(many),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ResultRecord {
        ResultRecord {
            task: "bounds".into(),
            unit: Unit::Bits,
            inputs: vec![InputField {
                name: "channel".into(),
                value: "identity dim=2".into(),
            }],
            scalars: vec![Scalar {
                name: "holevo_chi".into(),
                value: 1.0 / 3.0,
                unit: Unit::Bits,
            }],
            bounds: Some(BoundFields {
                upper: f64::INFINITY,
                middle: 0.5,
                lower: 0.25,
                slack_upper: f64::INFINITY,
                slack_lower: 0.25,
                chain_ok: true,
            }),
            flags: vec![],
            diagnostics: Diagnostics {
                restarts: 0,
                converged: true,
                evaluations: 0,
                runtime_ms: None,
            },
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(std::f64::consts::LN_2), "0.69314718056");
        assert_eq!(format_sig(-1.0 / 3.0), "-0.333333333333");
        assert_eq!(format_sig(123456.789), "123456.789");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(1.5e13), "1.5e13");
        assert_eq!(format_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn one_record_one_csv_row() {
        let csv = emit_csv(&[record()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("task,unit,channel,holevo_chi,upper,middle,lower"));
        assert!(lines[1].contains(",inf,"));
    }

    #[test]
    fn table_shows_rungs_and_slacks() {
        let t = emit_table(&[record()]);
        for key in ["bound.upper", "bound.middle", "bound.lower", "bound.slack_upper", "bound.slack_lower"] {
            assert!(t.contains(key), "{t}");
        }
        assert!(t.contains("bits") && t.contains("nats"));
    }

    #[test]
    fn jsonl_round_trip() {
        let r = record();
        let text = emit_jsonl(&[r.clone()]);
        assert!(text.contains("\"inf\""));
        let back = parse_record(text.trim_end()).unwrap();
        assert_eq!(back.bounds.as_ref().unwrap().upper, f64::INFINITY);
        assert!((back.scalars[0].value - r.scalars[0].value).abs() < 1e-12);
        assert_eq!(emit_jsonl(&[back]), text);
    }
}
