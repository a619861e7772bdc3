//! Scenario files: a line-oriented `key = value` format with nested
//! `name { ... }` blocks. `#` starts a comment. See the README for the
//! full grammar.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::capacity::Ensemble;
use crate::channels::{
    amplitude_damping, depolarizing, identity_channel, phase_damping, unitary_channel, ProjectiveMeasurement,
    QuantumChannel,
};
use crate::entropy::DensityMatrix;
use crate::linalg::{ComplexMatrix, ComplexVector};

use super::emit::format_sig;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl ScenarioError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

type Parsed<T> = Result<T, ScenarioError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Entropy,
    Mutual,
    Chi,
    Bounds,
    Capacity,
    Cqc,
    Sweep,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Entropy => "entropy",
            Task::Mutual => "mutual",
            Task::Chi => "chi",
            Task::Bounds => "bounds",
            Task::Capacity => "capacity",
            Task::Cqc => "cqc",
            Task::Sweep => "sweep",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "entropy" => Task::Entropy,
            "mutual" => Task::Mutual,
            "chi" => Task::Chi,
            "bounds" => Task::Bounds,
            "capacity" => Task::Capacity,
            "cqc" => Task::Cqc,
            "sweep" => Task::Sweep,
            other => return Err(format!("unknown task '{other}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Nats,
    Bits,
}

impl Unit {
    /// Converts a value in nats to this unit.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Unit::Nats => nats,
            Unit::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Nats => "nats",
            Unit::Bits => "bits",
        }
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nats" => Ok(Unit::Nats),
            "bits" => Ok(Unit::Bits),
            other => Err(format!("unknown unit '{other}' (expected nats or bits)")),
        }
    }
}

// ---------------------------------------------------------------------------
// syntax tree

#[derive(Debug, Clone)]
struct Assign {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Block {
    name: String,
    line: usize,
    assigns: Vec<Assign>,
    blocks: Vec<Block>,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_tree(text: &str) -> Parsed<Block> {
    let mut stack = vec![Block {
        name: "scenario".into(),
        line: 0,
        assigns: Vec::new(),
        blocks: Vec::new(),
    }];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "}" {
            if stack.len() == 1 {
                return Err(ScenarioError::at(line, "unmatched '}'"));
            }
            let done = stack.pop().expect("non-empty");
            stack.last_mut().expect("root").blocks.push(done);
        } else if let Some(head) = content.strip_suffix('{') {
            let name = head.trim();
            if !is_identifier(name) {
                return Err(ScenarioError::at(line, format!("invalid block name '{name}'")));
            }
            stack.push(Block {
                name: name.into(),
                line,
                assigns: Vec::new(),
                blocks: Vec::new(),
            });
        } else if let Some((key, value)) = content.split_once('=') {
            let key = key.trim();
            if !is_identifier(key) {
                return Err(ScenarioError::at(line, format!("invalid key '{key}'")));
            }
            let value = value.trim();
            if value.is_empty() {
                return Err(ScenarioError::at(line, format!("missing value for '{key}'")));
            }
            stack.last_mut().expect("root").assigns.push(Assign {
                key: key.into(),
                value: value.into(),
                line,
            });
        } else {
            return Err(ScenarioError::at(
                line,
                format!("expected 'key = value', 'name {{' or '}}', found '{content}'"),
            ));
        }
    }
    if stack.len() > 1 {
        let open = stack.last().expect("non-empty");
        return Err(ScenarioError::at(open.line, format!("block '{}' is never closed", open.name)));
    }
    Ok(stack.pop().expect("root"))
}

impl Block {
    /// Rejects keys and sub-blocks outside the allowed lists.
    fn check_known(&self, keys: &[&str], blocks: &[&str]) -> Parsed<()> {
        for a in &self.assigns {
            let repeatable = a.key == "row";
            if !keys.contains(&a.key.as_str()) {
                return Err(ScenarioError::at(
                    a.line,
                    format!("unknown key '{}' in {} block", a.key, self.name),
                ));
            }
            if !repeatable && self.assigns.iter().filter(|b| b.key == a.key).count() > 1 {
                return Err(ScenarioError::at(a.line, format!("duplicate key '{}'", a.key)));
            }
        }
        for b in &self.blocks {
            if !blocks.contains(&b.name.as_str()) {
                return Err(ScenarioError::at(
                    b.line,
                    format!("unknown block '{}' in {} block", b.name, self.name),
                ));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Assign> {
        self.assigns.iter().find(|a| a.key == key)
    }

    fn require(&self, key: &str) -> Parsed<&Assign> {
        self.get(key)
            .ok_or_else(|| ScenarioError::at(self.line, format!("{} block needs '{key}'", self.name)))
    }

    fn number<T: FromStr>(&self, key: &str) -> Parsed<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(a) => a.value.parse().map(Some).map_err(|_| {
                ScenarioError::at(a.line, format!("'{}' is not a valid value for '{key}'", a.value))
            }),
        }
    }

    fn single_block(&self, name: &str) -> Parsed<Option<&Block>> {
        let mut found = self.blocks.iter().filter(|b| b.name == name);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(ScenarioError::at(dup.line, format!("duplicate '{name}' block")));
        }
        Ok(first)
    }
}

// ---------------------------------------------------------------------------
// values

/// Parses `re,im`, `a+bi`, `a-bi`, `bi`, `i` or a plain real.
pub fn parse_complex(token: &str) -> Option<Complex64> {
    let t = token.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((re, im)) = t.split_once(',') {
        return Some(Complex64::new(re.trim().parse().ok()?, im.trim().parse().ok()?));
    }
    if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (body[..k].parse::<f64>().ok()?, &body[k..]),
            None => (0.0, body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => s.parse::<f64>().ok()?,
        };
        return Some(Complex64::new(re, im));
    }
    t.parse::<f64>().ok().map(|x| Complex64::new(x, 0.0))
}

fn complex_list(a: &Assign) -> Parsed<Vec<Complex64>> {
    a.value
        .split_whitespace()
        .map(|tok| {
            parse_complex(tok)
                .ok_or_else(|| ScenarioError::at(a.line, format!("cannot parse '{tok}' as a complex number")))
        })
        .collect()
}

fn real_list(a: &Assign) -> Parsed<Vec<f64>> {
    a.value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| ScenarioError::at(a.line, format!("cannot parse '{tok}' as a number")))
        })
        .collect()
}

/// Matrix given by `row = ...` lines.
fn matrix_rows(block: &Block) -> Parsed<ComplexMatrix> {
    let rows: Vec<Vec<Complex64>> = block
        .assigns
        .iter()
        .filter(|a| a.key == "row")
        .map(complex_list)
        .collect::<Parsed<_>>()?;
    if rows.is_empty() {
        return Err(ScenarioError::at(block.line, format!("{} block has no rows", block.name)));
    }
    let cols = rows[0].len();
    if let Some(bad) = block
        .assigns
        .iter()
        .filter(|a| a.key == "row")
        .zip(&rows)
        .find(|(_, r)| r.len() != cols)
    {
        return Err(ScenarioError::at(
            bad.0.line,
            format!("row has {} entries, expected {cols}", bad.1.len()),
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn lib_error(line: usize, what: &str, e: crate::Error) -> ScenarioError {
    ScenarioError::at(line, format!("{what}: {e}"))
}

// ---------------------------------------------------------------------------
// channels

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    Identity,
    Depolarizing,
    AmplitudeDamping,
    PhaseDamping,
    Unitary(ComplexMatrix),
    Kraus(Vec<ComplexMatrix>),
}

/// A channel description that can be rebuilt with one parameter changed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub params: BTreeMap<String, f64>,
    pub line: usize,
}

impl ChannelSpec {
    fn numeric_keys(kind: &ChannelKind) -> &'static [&'static str] {
        match kind {
            ChannelKind::Identity => &["dim"],
            ChannelKind::Depolarizing => &["p", "dim"],
            ChannelKind::AmplitudeDamping => &["gamma"],
            ChannelKind::PhaseDamping => &["lambda"],
            ChannelKind::Unitary(_) | ChannelKind::Kraus(_) => &[],
        }
    }

    fn name(&self) -> &'static str {
        match self.kind {
            ChannelKind::Identity => "identity",
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::AmplitudeDamping => "amplitude_damping",
            ChannelKind::PhaseDamping => "phase_damping",
            ChannelKind::Unitary(_) => "unitary",
            ChannelKind::Kraus(_) => "kraus",
        }
    }

    fn param(&self, key: &str) -> Parsed<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| ScenarioError::at(self.line, format!("{} channel needs '{key}'", self.name())))
    }

    fn dim(&self) -> Parsed<usize> {
        let d = self.params.get("dim").copied().unwrap_or(2.0);
        if d.fract() != 0.0 || d < 1.0 {
            return Err(ScenarioError::at(self.line, format!("dim = {d} is not a positive integer")));
        }
        Ok(d as usize)
    }

    pub fn build(&self) -> Parsed<QuantumChannel> {
        let built = match &self.kind {
            ChannelKind::Identity => identity_channel(self.dim()?),
            ChannelKind::Depolarizing => depolarizing(self.param("p")?, self.dim()?),
            ChannelKind::AmplitudeDamping => amplitude_damping(self.param("gamma")?),
            ChannelKind::PhaseDamping => phase_damping(self.param("lambda")?),
            ChannelKind::Unitary(u) => unitary_channel(u),
            ChannelKind::Kraus(k) => QuantumChannel::new(k.clone()),
        };
        built.map_err(|e| lib_error(self.line, "invalid channel", e))
    }

    /// Copy with the numeric parameter `key` set to `value`.
    pub fn with_param(&self, key: &str, value: f64) -> Parsed<ChannelSpec> {
        if !Self::numeric_keys(&self.kind).contains(&key) {
            return Err(ScenarioError::at(
                self.line,
                format!("{} channel has no numeric parameter '{key}'", self.name()),
            ));
        }
        let mut out = self.clone();
        out.params.insert(key.into(), value);
        Ok(out)
    }

    /// Short human-readable description, e.g. `depolarizing p=0.25 dim=2`.
    pub fn describe(&self) -> String {
        let mut s = self.name().to_string();
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={}", format_sig(*v)));
        }
        match &self.kind {
            ChannelKind::Unitary(u) => s.push_str(&format!(" dim={}", u.nrows())),
            ChannelKind::Kraus(k) => s.push_str(&format!(" operators={}", k.len())),
            _ => {}
        }
        s
    }
}

fn parse_channel(block: &Block) -> Parsed<ChannelSpec> {
    let kind_assign = block.require("kind")?;
    let mut kind = match kind_assign.value.as_str() {
        "identity" => ChannelKind::Identity,
        "depolarizing" => ChannelKind::Depolarizing,
        "amplitude_damping" => ChannelKind::AmplitudeDamping,
        "phase_damping" => ChannelKind::PhaseDamping,
        "unitary" => ChannelKind::Unitary(DMatrix::zeros(0, 0)),
        "kraus" => ChannelKind::Kraus(Vec::new()),
        other => {
            return Err(ScenarioError::at(
                kind_assign.line,
                format!(
                    "unknown channel '{other}' (expected identity, depolarizing, amplitude_damping, \
                     phase_damping, unitary or kraus)"
                ),
            ))
        }
    };
    let numeric = ChannelSpec::numeric_keys(&kind);
    let mut keys = vec!["kind"];
    keys.extend_from_slice(numeric);
    let sub: &[&str] = match kind {
        ChannelKind::Unitary(_) => &["matrix"],
        ChannelKind::Kraus(_) => &["operator"],
        _ => &[],
    };
    block.check_known(&keys, sub)?;
    let mut params = BTreeMap::new();
    for key in numeric {
        if let Some(v) = block.number::<f64>(key)? {
            params.insert(key.to_string(), v);
        }
    }
    match &mut kind {
        ChannelKind::Unitary(u) => {
            let m = block
                .single_block("matrix")?
                .ok_or_else(|| ScenarioError::at(block.line, "unitary channel needs a 'matrix' block"))?;
            m.check_known(&["row"], &[])?;
            *u = matrix_rows(m)?;
        }
        ChannelKind::Kraus(ops) => {
            for b in &block.blocks {
                b.check_known(&["row"], &[])?;
                ops.push(matrix_rows(b)?);
            }
            if ops.is_empty() {
                return Err(ScenarioError::at(block.line, "kraus channel needs 'operator' blocks"));
            }
        }
        _ => {}
    }
    let spec = ChannelSpec {
        kind,
        params,
        line: block.line,
    };
    spec.build()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// states, ensembles, measurements

fn named_qubit(name: &str) -> Option<ComplexVector> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: Complex64, b: Complex64| ComplexVector::from_vec(vec![a, b]);
    let r = |x: f64| Complex64::new(x, 0.0);
    Some(match name {
        "zero" => v(r(1.0), r(0.0)),
        "one" => v(r(0.0), r(1.0)),
        "plus" => v(r(h), r(h)),
        "minus" => v(r(h), r(-h)),
        "plus_i" => v(r(h), Complex64::new(0.0, h)),
        "minus_i" => v(r(h), Complex64::new(0.0, -h)),
        _ => return None,
    })
}

fn parse_state(block: &Block, default_dim: usize) -> Parsed<DensityMatrix> {
    let kind = block.require("kind")?;
    let line = block.line;
    let dim = block.number::<usize>("dim")?.unwrap_or(default_dim);
    let state = match kind.value.as_str() {
        "maximally_mixed" => {
            block.check_known(&["kind", "dim"], &[])?;
            if dim == 0 {
                return Err(ScenarioError::at(line, "dim must be positive"));
            }
            Ok(DensityMatrix::maximally_mixed(dim))
        }
        "basis" => {
            block.check_known(&["kind", "dim", "index"], &[])?;
            let index = block
                .number::<usize>("index")?
                .ok_or_else(|| ScenarioError::at(line, "basis state needs 'index'"))?;
            if index >= dim {
                return Err(ScenarioError::at(line, format!("index {index} outside dimension {dim}")));
            }
            Ok(DensityMatrix::basis_state(dim, index))
        }
        "pure" => {
            block.check_known(&["kind", "vector"], &[])?;
            let v = complex_list(block.require("vector")?)?;
            DensityMatrix::from_pure(&ComplexVector::from_vec(v))
        }
        "named" => {
            block.check_known(&["kind", "name"], &[])?;
            let a = block.require("name")?;
            let v = named_qubit(&a.value).ok_or_else(|| {
                ScenarioError::at(
                    a.line,
                    format!("unknown state name '{}' (zero, one, plus, minus, plus_i, minus_i)", a.value),
                )
            })?;
            DensityMatrix::from_pure(&v)
        }
        "diagonal" => {
            block.check_known(&["kind", "values"], &[])?;
            DensityMatrix::from_diagonal(&real_list(block.require("values")?)?)
        }
        "matrix" => {
            block.check_known(&["kind", "row"], &[])?;
            DensityMatrix::new(matrix_rows(block)?)
        }
        other => {
            return Err(ScenarioError::at(
                kind.line,
                format!(
                    "unknown state kind '{other}' (maximally_mixed, basis, pure, named, diagonal, matrix)"
                ),
            ))
        }
    };
    state.map_err(|e| lib_error(line, "invalid state", e))
}

fn parse_ensemble(block: &Block, default_dim: usize) -> Parsed<Ensemble> {
    block.check_known(&["weights"], &["state"])?;
    let weights_assign = block.require("weights")?;
    let weights = real_list(weights_assign)?;
    let states = block
        .blocks
        .iter()
        .map(|b| parse_state(b, default_dim))
        .collect::<Parsed<Vec<_>>>()?;
    if states.len() != weights.len() {
        return Err(ScenarioError::at(
            weights_assign.line,
            format!("{} weights for {} states", weights.len(), states.len()),
        ));
    }
    Ensemble::new(weights, states).map_err(|e| lib_error(weights_assign.line, "invalid ensemble", e))
}

/// Discrete Fourier basis (the Hadamard basis for `d = 2`).
fn fourier_basis(d: usize) -> ComplexMatrix {
    let norm = (d as f64).sqrt();
    DMatrix::from_fn(d, d, |j, k| {
        Complex64::from_polar(1.0 / norm, 2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64)
    })
}

fn parse_measurement(block: &Block, default_dim: usize) -> Parsed<ProjectiveMeasurement> {
    block.check_known(&["basis", "dim"], &["projector"])?;
    let dim = block.number::<usize>("dim")?.unwrap_or(default_dim);
    match (block.get("basis"), block.blocks.is_empty()) {
        (Some(a), true) => match a.value.as_str() {
            "computational" => Ok(ProjectiveMeasurement::computational(dim)),
            "fourier" | "hadamard" => ProjectiveMeasurement::from_basis(&fourier_basis(dim))
                .map_err(|e| lib_error(a.line, "invalid measurement", e)),
            "trivial" => Ok(ProjectiveMeasurement::trivial(dim)),
            other => Err(ScenarioError::at(
                a.line,
                format!("unknown basis '{other}' (computational, fourier, hadamard, trivial)"),
            )),
        },
        (None, false) => {
            let projectors = block
                .blocks
                .iter()
                .map(|b| {
                    b.check_known(&["row"], &[])?;
                    matrix_rows(b)
                })
                .collect::<Parsed<Vec<_>>>()?;
            ProjectiveMeasurement::new(projectors).map_err(|e| lib_error(block.line, "invalid measurement", e))
        }
        _ => Err(ScenarioError::at(
            block.line,
            "measurement needs either 'basis' or 'projector' blocks",
        )),
    }
}

// ---------------------------------------------------------------------------
// capacity and sweep settings

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateChoice {
    All,
    RankAtMost(usize),
    /// The states of the scenario's ensemble.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CapacitySettings {
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub components: Option<usize>,
    pub states: Option<StateChoice>,
}

fn parse_capacity(block: &Block) -> Parsed<CapacitySettings> {
    block.check_known(&["restarts", "max_iterations", "components", "states", "rank"], &[])?;
    let states = match block.get("states") {
        None => None,
        Some(a) => Some(match a.value.as_str() {
            "all" => StateChoice::All,
            "explicit" => StateChoice::Explicit,
            "rank" => StateChoice::RankAtMost(
                block
                    .number::<usize>("rank")?
                    .ok_or_else(|| ScenarioError::at(a.line, "states = rank needs 'rank'"))?,
            ),
            other => {
                return Err(ScenarioError::at(
                    a.line,
                    format!("unknown state set '{other}' (all, rank, explicit)"),
                ))
            }
        }),
    };
    let settings = CapacitySettings {
        restarts: block.number("restarts")?,
        max_iterations: block.number("max_iterations")?,
        components: block.number("components")?,
        states,
    };
    if settings.restarts == Some(0) {
        return Err(ScenarioError::at(block.line, "restarts must be at least 1"));
    }
    if settings.components == Some(0) {
        return Err(ScenarioError::at(block.line, "components must be at least 1"));
    }
    Ok(settings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub line: usize,
}

impl SweepSpec {
    /// Grid points `from, from + step, ..., to`, endpoints exact.
    pub fn grid(&self) -> Parsed<Vec<f64>> {
        if !(self.step > 0.0) || !(self.to >= self.from) {
            return Err(ScenarioError::at(self.line, "sweep needs step > 0 and to >= from"));
        }
        let intervals = (self.to - self.from) / self.step;
        let n = intervals.round();
        if (intervals - n).abs() > 1e-9 * n.max(1.0) {
            return Err(ScenarioError::at(self.line, "step does not divide the sweep range"));
        }
        let n = n as usize;
        if n == 0 {
            return Ok(vec![self.from]);
        }
        Ok((0..=n)
            .map(|i| {
                if i == n {
                    self.to
                } else {
                    self.from + (self.to - self.from) * i as f64 / n as f64
                }
            })
            .collect())
    }
}

fn parse_sweep(block: &Block) -> Parsed<SweepSpec> {
    block.check_known(&["parameter", "from", "to", "step"], &[])?;
    let need = |k: &str| -> Parsed<f64> {
        block
            .number::<f64>(k)?
            .ok_or_else(|| ScenarioError::at(block.line, format!("sweep block needs '{k}'")))
    };
    let spec = SweepSpec {
        parameter: block.require("parameter")?.value.clone(),
        from: need("from")?,
        to: need("to")?,
        step: need("step")?,
        line: block.line,
    };
    spec.grid()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// scenario

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    pub unit: Option<Unit>,
    pub dim: Option<usize>,
    pub channel: Option<ChannelSpec>,
    pub state: Option<DensityMatrix>,
    pub ensemble: Option<Ensemble>,
    pub measurement: Option<ProjectiveMeasurement>,
    pub capacity: CapacitySettings,
    pub sweep: Option<SweepSpec>,
}

/// Parses and validates a scenario, including dimension consistency
/// between every block present.
pub fn parse_scenario(text: &str) -> Parsed<Scenario> {
    let root = parse_tree(text)?;
    root.check_known(
        &["task", "seed", "unit", "dim"],
        &["channel", "state", "ensemble", "measurement", "capacity", "sweep"],
    )?;
    let task = match root.get("task") {
        Some(a) => Some(a.value.parse::<Task>().map_err(|e| ScenarioError::at(a.line, e))?),
        None => None,
    };
    let unit = match root.get("unit") {
        Some(a) => Some(a.value.parse::<Unit>().map_err(|e| ScenarioError::at(a.line, e))?),
        None => None,
    };
    let seed = root.number::<u64>("seed")?;
    let dim = root.number::<usize>("dim")?;
    if dim == Some(0) {
        return Err(ScenarioError::at(root.get("dim").expect("present").line, "dim must be positive"));
    }

    let channel = match root.single_block("channel")? {
        Some(b) => {
            let mut spec = parse_channel(b)?;
            // identity and depolarizing take their size from the top-level dim
            if let (Some(d), true) = (
                dim,
                matches!(spec.kind, ChannelKind::Identity | ChannelKind::Depolarizing),
            ) {
                spec.params.entry("dim".into()).or_insert(d as f64);
            }
            Some(spec)
        }
        None => None,
    };
    let built = channel.as_ref().map(|c| c.build()).transpose()?;
    let input_dim = dim.or(built.as_ref().map(|c| c.dim_in())).unwrap_or(2);
    let output_dim = built.as_ref().map(|c| c.dim_out()).unwrap_or(input_dim);

    if let (Some(d), Some(ch), Some(spec)) = (dim, &built, &channel) {
        if ch.dim_in() != d {
            return Err(ScenarioError::at(
                spec.line,
                format!("channel input dimension {} differs from dim = {d}", ch.dim_in()),
            ));
        }
    }

    let state = match root.single_block("state")? {
        Some(b) => {
            let s = parse_state(b, input_dim)?;
            if s.dim() != input_dim {
                return Err(ScenarioError::at(
                    b.line,
                    format!("state has dimension {}, expected {input_dim}", s.dim()),
                ));
            }
            Some(s)
        }
        None => None,
    };
    let ensemble = match root.single_block("ensemble")? {
        Some(b) => {
            let e = parse_ensemble(b, input_dim)?;
            if e.dim() != input_dim {
                return Err(ScenarioError::at(
                    b.line,
                    format!("ensemble states have dimension {}, expected {input_dim}", e.dim()),
                ));
            }
            Some(e)
        }
        None => None,
    };
    let measurement = match root.single_block("measurement")? {
        Some(b) => {
            let m = parse_measurement(b, output_dim)?;
            if m.dim() != output_dim {
                return Err(ScenarioError::at(
                    b.line,
                    format!("measurement has dimension {}, expected {output_dim}", m.dim()),
                ));
            }
            Some(m)
        }
        None => None,
    };
    let capacity = match root.single_block("capacity")? {
        Some(b) => parse_capacity(b)?,
        None => CapacitySettings::default(),
    };
    if let (Some(StateChoice::RankAtMost(r)), true) = (capacity.states, built.is_some()) {
        if r == 0 || r > input_dim {
            return Err(ScenarioError::general(format!("rank {r} outside 1..={input_dim}")));
        }
    }
    let sweep = match root.single_block("sweep")? {
        Some(b) => {
            let s = parse_sweep(b)?;
            if let Some(spec) = &channel {
                for v in s.grid()? {
                    spec.with_param(&s.parameter, v)?.build()?;
                }
            }
            Some(s)
        }
        None => None,
    };
    Ok(Scenario {
        task,
        seed,
        unit,
        dim,
        channel,
        state,
        ensemble,
        measurement,
        capacity,
        sweep,
    })
}

impl Scenario {
    /// Checks that the blocks `task` needs are present.
    pub fn check_task(&self, task: Task) -> Parsed<()> {
        let missing = |what: &str| {
            Err(ScenarioError::general(format!(
                "task {} needs a '{what}' block",
                task.as_str()
            )))
        };
        let need_channel = !matches!(task, Task::Entropy);
        if need_channel && self.channel.is_none() {
            return missing("channel");
        }
        match task {
            Task::Entropy | Task::Mutual if self.state.is_none() => missing("state"),
            Task::Chi | Task::Bounds | Task::Cqc if self.ensemble.is_none() => missing("ensemble"),
            Task::Bounds | Task::Cqc if self.measurement.is_none() => missing("measurement"),
            Task::Sweep if self.sweep.is_none() => missing("sweep"),
            Task::Capacity | Task::Sweep
                if self.capacity.states == Some(StateChoice::Explicit) && self.ensemble.is_none() =>
            {
                missing("ensemble")
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_tokens() {
        let c = |re, im| Some(Complex64::new(re, im));
        assert_eq!(parse_complex("0.5"), c(0.5, 0.0));
        assert_eq!(parse_complex("0.5,-0.25"), c(0.5, -0.25));
        assert_eq!(parse_complex("1+2i"), c(1.0, 2.0));
        assert_eq!(parse_complex("1-2i"), c(1.0, -2.0));
        assert_eq!(parse_complex("-i"), c(0.0, -1.0));
        assert_eq!(parse_complex("i"), c(0.0, 1.0));
        assert_eq!(parse_complex("2.5i"), c(0.0, 2.5));
        assert_eq!(parse_complex("1e-3+1e-3i"), c(1e-3, 1e-3));
        assert_eq!(parse_complex("-1e-3-2E+1i"), c(-1e-3, -20.0));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("1+xi"), None);
    }

    #[test]
    fn minimal_scenario() {
        let s = parse_scenario(
            "task = entropy\nchannel {\n  kind = identity\n}\nstate {\n  kind = maximally_mixed\n}\n",
        )
        .unwrap();
        assert_eq!(s.task, Some(Task::Entropy));
        assert_eq!(s.state.unwrap().dim(), 2);
    }

    #[test]
    fn bad_weights_are_reported() {
        let text = "ensemble {\n weights = 0.6 0.5\n state {\n kind = basis\n index = 0\n }\n state {\n kind = basis\n index = 1\n }\n}\n";
        let e = parse_scenario(text).unwrap_err();
        assert!(e.to_string().contains("weights must sum to 1"), "{e}");
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn bad_kraus_names_residual() {
        let text = "channel {\n kind = kraus\n operator {\n  row = 1 0\n  row = 0 0.5\n }\n}\n";
        let e = parse_scenario(text).unwrap_err();
        assert!(e.to_string().contains("residual norm"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = parse_scenario("task = entropy\nchannel {\n kind = identity\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_scenario("task = entropy\nthis is wrong\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_scenario("}\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse_scenario("channel {\n kind = teleporter\n}\n").unwrap_err();
        assert!(e.message.contains("unknown channel"));
        let e = parse_scenario("channel {\n kind = identity\n colour = red\n}\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = "dim = 3\nchannel {\n kind = amplitude_damping\n gamma = 0.2\n}\n";
        assert!(parse_scenario(text).is_err());
        let text = "channel {\n kind = identity\n dim = 2\n}\nstate {\n kind = maximally_mixed\n dim = 3\n}\n";
        assert!(parse_scenario(text).is_err());
        let text = "channel {\n kind = identity\n dim = 2\n}\nmeasurement {\n basis = computational\n dim = 3\n}\n";
        assert!(parse_scenario(text).is_err());
    }

    #[test]
    fn explicit_matrices() {
        let text = "channel {\n kind = unitary\n matrix {\n  row = 0 1\n  row = 1 0\n }\n}\n\
                    state {\n kind = matrix\n row = 0.5 0.25,0.1\n row = 0.25-0.1i 0.5\n}\n\
                    measurement {\n projector {\n  row = 1 0\n  row = 0 0\n }\n projector {\n  row = 0 0\n  row = 0 1\n }\n}\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.measurement.unwrap().outcomes(), 2);
        assert_eq!(s.state.unwrap().matrix()[(0, 1)], Complex64::new(0.25, 0.1));
    }

    #[test]
    fn sweep_grid_has_exact_endpoints() {
        let s = SweepSpec {
            parameter: "p".into(),
            from: 0.0,
            to: 1.0,
            step: 0.1,
            line: 1,
        };
        let g = s.grid().unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[10], 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let bad = SweepSpec { step: 0.3, ..s };
        assert!(bad.grid().is_err());
    }
}
