//! Dispatches a validated scenario to the library and collects records.

use std::time::Instant;

use rayon::prelude::*;

use crate::capacity::{
    cqc_chain, cqc_mutual_entropy, holevo_chi, holevo_chi_relative_form, quantum_chain, theorem1_bounds,
    capacity_quantum, CapacityEstimate, InputDistributions, StateSet,
};
use crate::channels::QuantumChannel;
use crate::entropy::{shannon_entropy, von_neumann_entropy, ExtendedReal};
use crate::mutual::{mutual_entropy_compound_form, mutual_entropy_with, pseudo_mutual_entropy_with};
use crate::optim::SearchOptions;

use super::emit::{BoundFields, Diagnostics, Flag, InputField, ResultRecord, Scalar};
use super::scenario::{Scenario, StateChoice, Task, Unit};
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub unit: Unit,
    /// Adds wall-clock runtime to the diagnostics (makes output non-reproducible).
    pub timing: bool,
}

struct Builder {
    task: Task,
    unit: Unit,
    inputs: Vec<InputField>,
    scalars: Vec<Scalar>,
    bounds: Option<BoundFields>,
    flags: Vec<Flag>,
    diagnostics: Diagnostics,
}

impl Builder {
    fn new(task: Task, unit: Unit) -> Self {
        Self {
            task,
            unit,
            inputs: Vec::new(),
            scalars: Vec::new(),
            bounds: None,
            flags: Vec::new(),
            diagnostics: Diagnostics {
                restarts: 0,
                converged: true,
                evaluations: 0,
                runtime_ms: None,
            },
        }
    }

    fn input(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.inputs.push(InputField {
            name: name.into(),
            value: value.to_string(),
        });
        self
    }

    /// Records a value given in nats, converted once to the record's unit.
    fn nats(&mut self, name: &str, nats: f64) -> &mut Self {
        self.scalars.push(Scalar {
            name: name.into(),
            value: self.unit.from_nats(nats),
            unit: self.unit,
        });
        self
    }

    fn flag(&mut self, name: &str, value: bool) -> &mut Self {
        self.flags.push(Flag {
            name: name.into(),
            value,
        });
        self
    }

    fn diagnose(&mut self, estimates: &[&CapacityEstimate]) -> &mut Self {
        for e in estimates {
            self.diagnostics.restarts += e.restarts_used;
            self.diagnostics.converged &= e.converged;
            self.diagnostics.evaluations += e.evaluations;
        }
        self
    }

    fn finish(self) -> ResultRecord {
        ResultRecord {
            task: self.task.as_str().into(),
            unit: self.unit,
            inputs: self.inputs,
            scalars: self.scalars,
            bounds: self.bounds,
            flags: self.flags,
            diagnostics: self.diagnostics,
        }
    }
}

fn computation(task: Task, e: crate::Error) -> CliError {
    CliError::Computation(format!("task {}: {e}", task.as_str()))
}

fn search_options(s: &Scenario, seed: u64) -> SearchOptions {
    let mut opts = SearchOptions::capacity_default().with_seed(seed);
    if let Some(r) = s.capacity.restarts {
        opts.restarts = r;
    }
    if let Some(m) = s.capacity.max_iterations {
        opts.max_iterations = m;
    }
    opts
}

fn state_set(s: &Scenario, channel: &QuantumChannel) -> StateSet {
    let dim = channel.dim_in();
    match s.capacity.states.unwrap_or(StateChoice::All) {
        StateChoice::All => StateSet::All { dim },
        StateChoice::RankAtMost(rank) => StateSet::RankAtMost { dim, rank },
        StateChoice::Explicit => StateSet::Explicit(
            s.ensemble
                .as_ref()
                .map(|e| e.states().to_vec())
                .unwrap_or_default(),
        ),
    }
}

fn state_set_name(s: &Scenario) -> String {
    match s.capacity.states.unwrap_or(StateChoice::All) {
        StateChoice::All => "all".into(),
        StateChoice::RankAtMost(r) => format!("rank<={r}"),
        StateChoice::Explicit => "explicit".into(),
    }
}

fn extended(x: ExtendedReal) -> f64 {
    x.to_f64()
}

/// Runs `task` on the scenario; sweeps return one record per grid point.
pub fn run(scenario: &Scenario, task: Task, opts: &RunOptions) -> Result<Vec<ResultRecord>, CliError> {
    scenario.check_task(task).map_err(|e| CliError::Validation(e.to_string()))?;
    let start = Instant::now();
    let mut records = match task {
        Task::Sweep => run_sweep(scenario, opts)?,
        _ => vec![run_single(scenario, task, opts)?],
    };
    if opts.timing {
        let ms = start.elapsed().as_secs_f64() * 1e3;
        for r in &mut records {
            r.diagnostics.runtime_ms = Some(ms);
        }
    }
    Ok(records)
}

fn build_channel(s: &Scenario) -> Result<Option<QuantumChannel>, CliError> {
    s.channel
        .as_ref()
        .map(|c| c.build())
        .transpose()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn run_single(s: &Scenario, task: Task, opts: &RunOptions) -> Result<ResultRecord, CliError> {
    let channel = build_channel(s)?;
    let mut b = Builder::new(task, opts.unit);
    let err = |e| computation(task, e);
    let inner = SearchOptions::decomposition_default().with_seed(opts.seed);
    if let Some(spec) = &s.channel {
        b.input("channel", spec.describe());
    }
    b.input("seed", opts.seed);
    match task {
        Task::Entropy => {
            let rho = s.state.as_ref().expect("checked");
            b.input("dim", rho.dim());
            b.nats("entropy", von_neumann_entropy(rho));
            b.nats("max_entropy", (rho.dim() as f64).ln());
            if let Some(ch) = &channel {
                b.nats("output_entropy", von_neumann_entropy(&ch.apply(rho).map_err(err)?));
            }
        }
        Task::Mutual => {
            let rho = s.state.as_ref().expect("checked");
            let ch = channel.as_ref().expect("checked");
            let n = s.capacity.components.unwrap_or(rho.dim());
            b.input("dim", rho.dim()).input("components", n);
            let m = mutual_entropy_with(rho, ch, &inner).map_err(err)?;
            let compound = mutual_entropy_compound_form(rho, ch, &m.decomposition).map_err(err)?;
            let pseudo =
                pseudo_mutual_entropy_with(rho, ch, n, &inner, Some(&m.decomposition)).map_err(err)?;
            b.nats("mutual_entropy", m.value)
                .nats("compound_form", extended(compound))
                .nats("pseudo_mutual_entropy", pseudo.value)
                .nats("input_entropy", von_neumann_entropy(rho))
                .nats("output_entropy", von_neumann_entropy(&ch.apply(rho).map_err(err)?));
            b.diagnostics.restarts = m.restarts_used + pseudo.restarts_used;
            b.diagnostics.converged = m.converged && pseudo.converged;
            b.diagnostics.evaluations = m.evaluations;
        }
        Task::Chi => {
            let ens = s.ensemble.as_ref().expect("checked");
            let ch = channel.as_ref().expect("checked");
            b.input("ensemble_size", ens.len());
            b.nats("holevo_chi", holevo_chi(ens, ch).map_err(err)?)
                .nats("holevo_chi_relative_form", holevo_chi_relative_form(ens, ch).map_err(err)?)
                .nats("shannon_entropy_weights", shannon_entropy(ens.weights()));
        }
        Task::Bounds => {
            let ens = s.ensemble.as_ref().expect("checked");
            let ch = channel.as_ref().expect("checked");
            let e = s.measurement.as_ref().expect("checked");
            b.input("ensemble_size", ens.len()).input("outcomes", e.outcomes());
            let report = theorem1_bounds(ens, ch, e).map_err(err)?;
            b.nats("holevo_chi", holevo_chi(ens, ch).map_err(err)?);
            let u = opts.unit;
            b.bounds = Some(BoundFields {
                upper: u.from_nats(extended(report.upper)),
                middle: u.from_nats(extended(report.middle)),
                lower: u.from_nats(report.lower),
                slack_upper: u.from_nats(report.slack_upper),
                slack_lower: u.from_nats(report.slack_lower),
                chain_ok: report.chain_ok,
            });
        }
        Task::Capacity => {
            let ch = channel.as_ref().expect("checked");
            let search = search_options(s, opts.seed);
            let n = s.capacity.components.unwrap_or(ch.dim_in());
            b.input("states", state_set_name(s))
                .input("components", n)
                .input("restarts_requested", search.restarts);
            let chain = quantum_chain(ch, &state_set(s, ch), n, &search).map_err(err)?;
            b.nats("capacity", chain.quantum.value)
                .nats("capacity_pseudo", chain.pseudo.value)
                .nats("max_input_entropy", chain.max_entropy)
                .flag("chain_ok", chain.chain_ok)
                .diagnose(&[&chain.quantum, &chain.pseudo]);
        }
        Task::Cqc => {
            let ens = s.ensemble.as_ref().expect("checked");
            let ch = channel.as_ref().expect("checked");
            let e = s.measurement.as_ref().expect("checked");
            let search = search_options(s, opts.seed);
            b.input("codewords", ens.len())
                .input("outcomes", e.outcomes())
                .input("restarts_requested", search.restarts);
            let at_weights = cqc_mutual_entropy(ens.weights(), ens.states(), ch, e).map_err(err)?;
            let inputs = InputDistributions::All { len: ens.len() };
            let chain = cqc_chain(&inputs, ens.states(), ch, e, &search).map_err(err)?;
            b.nats("cqc_mutual_entropy", at_weights)
                .nats("capacity_cqc", chain.fixed.value)
                .nats("capacity_coding_free", chain.coding_free.value)
                .nats("capacity_decoding_free", chain.decoding_free.value)
                .nats("capacity_coding_decoding_free", chain.coding_decoding_free.value)
                .nats("shannon_bound", chain.shannon_bound)
                .flag("chain_ok", chain.chain_ok)
                .diagnose(&[
                    &chain.fixed,
                    &chain.coding_free,
                    &chain.decoding_free,
                    &chain.coding_decoding_free,
                ]);
        }
        Task::Sweep => unreachable!("sweeps are handled by run_sweep"),
    }
    Ok(b.finish())
}

fn run_sweep(s: &Scenario, opts: &RunOptions) -> Result<Vec<ResultRecord>, CliError> {
    let sweep = s.sweep.as_ref().expect("checked");
    let spec = s.channel.as_ref().expect("checked");
    let grid = sweep.grid().map_err(|e| CliError::Validation(e.to_string()))?;
    let search = search_options(s, opts.seed);
    let results: Vec<Result<ResultRecord, CliError>> = grid
        .par_iter()
        .map(|&value| {
            let point = spec
                .with_param(&sweep.parameter, value)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let ch = point.build().map_err(|e| CliError::Validation(e.to_string()))?;
            let estimate = capacity_quantum(&ch, &state_set(s, &ch), &search)
                .map_err(|e| computation(Task::Sweep, e))?;
            let mut b = Builder::new(Task::Sweep, opts.unit);
            b.input("channel", point.describe())
                .input("seed", opts.seed)
                .input("parameter", &sweep.parameter)
                .input("value", super::emit::format_sig(value))
                .nats("capacity", estimate.value)
                .diagnose(&[&estimate]);
            Ok(b.finish())
        })
        .collect();
    results.into_iter().collect()
}
