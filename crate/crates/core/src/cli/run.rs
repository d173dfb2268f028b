//! Simulation runs, verification reports and scenario listing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cli::config::{Format, RunConfig};
use crate::dynamics::{simulate, Observer, State, Trajectory};
use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, GroupElement, GroupKind};
use crate::scenarios::{self, verify_scenario, Mode, Scenario, VerificationReport};
use crate::virtual_constraints::ON_CONSTRAINT_TOLERANCE;

pub const CONSTRAINT_BUDGET: f64 = 1e-6;
pub const VERTICAL_BUDGET: f64 = 1e-7;
pub const ORTHONORMALITY_BUDGET: f64 = 1e-10;
pub const ENERGY_BUDGET: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Statistic {
    pub max: f64,
    pub mean: f64,
}

impl Statistic {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut max, mut sum, mut n) = (f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            max = max.max(v);
            sum += v;
            n += 1;
        }
        if n == 0 {
            return Statistic { max: 0.0, mean: 0.0 };
        }
        Statistic {
            max,
            mean: sum / n as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticSummary {
    pub energy: Statistic,
    pub energy_relative_drift: f64,
    pub kinetic_energy: Statistic,
    pub vertical_residual: Statistic,
    /// Largest `|μᵃ(ξ)|` per sample.
    pub constraint_residual: Statistic,
    pub orthonormality_defect: Statistic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetCheck {
    pub name: &'static str,
    pub limit: f64,
    pub value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalState {
    pub t: f64,
    pub xi: Vec<f64>,
    pub g: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub version: &'static str,
    pub scenario: String,
    pub mode: Mode,
    pub scheme: &'static str,
    pub steps: usize,
    pub final_state: FinalState,
    pub diagnostics: DiagnosticSummary,
    pub budgets: Vec<BudgetCheck>,
    pub within_budgets: bool,
    pub config: RunConfig,
    /// Kept out of the serialized summary so identical runs produce identical files.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunSummary {
    pub fn violations(&self) -> impl Iterator<Item = &BudgetCheck> {
        self.budgets.iter().filter(|b| !b.pass)
    }
}

/// Initial state from the configuration, falling back to the scenario default.
pub fn initial_state(scenario: &Scenario, config: &RunConfig) -> Result<State> {
    let sig = scenario.signature();
    let g = match &config.initial.g {
        Some(flat) => GroupElement::from_flat(sig, flat).map_err(|e| Error::config("initial.g", e.to_string()))?,
        None => scenario.initial.g.clone(),
    };
    let xi = match &config.initial.xi {
        Some(c) => AlgebraVector::from_slice(sig, c).map_err(|e| Error::config("initial.xi", e.to_string()))?,
        None => scenario.initial.xi.clone(),
    };
    let state = State::new(0.0, g, xi)?;
    if matches!(config.mode, Mode::Nonholonomic | Mode::ClosedLoop) {
        let spec = scenario
            .constraint
            .as_ref()
            .ok_or_else(|| Error::config("mode", "scenario has no constraint"))?;
        let d = spec.subspace(&state)?;
        let residual = d.distance(scenario.metric(), &state.xi);
        if residual > ON_CONSTRAINT_TOLERANCE * scenario.metric().norm(&state.xi).max(1.0) {
            return Err(Error::config(
                "initial.xi",
                format!("velocity is not on the constraint subspace (residual {residual:e})"),
            ));
        }
    }
    Ok(state)
}

fn column_names(scenario: &Scenario, trajectory: &Trajectory) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..scenario.signature().dim()).map(|i| format!("xi_{i}")));
    for (f, &kind) in scenario.signature().kinds().iter().enumerate() {
        let n = match kind {
            GroupKind::So3 => 9,
            GroupKind::Se3 => 12,
            GroupKind::Circle => 1,
        };
        cols.extend((0..n).map(|i| format!("g_{f}_{i}")));
    }
    if let Some(first) = trajectory.samples.first() {
        for (f, pf) in first.q.factors().iter().enumerate() {
            cols.extend((0..pf.flat_len()).map(|i| format!("q_{f}_{i}")));
        }
        cols.push("energy".into());
        cols.push("vertical_residual".into());
        cols.extend((0..first.diagnostics.constraint_residuals.len()).map(|i| format!("mu_{i}")));
    }
    cols
}

fn rows(trajectory: &Trajectory) -> Vec<Vec<f64>> {
    trajectory
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![s.state.t];
            row.extend_from_slice(s.state.xi.as_slice());
            row.extend(s.state.g.to_flat());
            row.extend(s.q.to_flat());
            row.push(s.diagnostics.energy);
            row.push(s.diagnostics.vertical_residual);
            row.extend_from_slice(&s.diagnostics.constraint_residuals);
            row
        })
        .collect()
}

fn write_csv(path: &Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * columns.len() * 24);
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    scenario: &'a str,
    mode: Mode,
    scheme: &'a str,
    step: f64,
    columns: &'a [String],
    rows: &'a [Vec<f64>],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn summarize(scenario: &Scenario, config: &RunConfig, trajectory: &Trajectory, wall_time: Duration) -> RunSummary {
    let samples = &trajectory.samples;
    let last = samples.last().expect("trajectory has the initial sample");
    let diag = |f: fn(&crate::dynamics::Diagnostics) -> f64| Statistic::of(samples.iter().map(|s| f(&s.diagnostics)));
    let diagnostics = DiagnosticSummary {
        energy: diag(|d| d.energy),
        energy_relative_drift: trajectory.relative_energy_drift(),
        kinetic_energy: diag(|d| d.kinetic_energy),
        vertical_residual: diag(|d| d.vertical_residual),
        constraint_residual: diag(|d| d.max_constraint_residual()),
        orthonormality_defect: diag(|d| d.orthonormality_defect),
    };
    let mut budgets = Vec::new();
    let mut check = |name, limit, value: f64| {
        budgets.push(BudgetCheck {
            name,
            limit,
            value,
            pass: value <= limit,
        })
    };
    if matches!(config.mode, Mode::Nonholonomic | Mode::ClosedLoop) {
        check(
            "constraint_residual",
            CONSTRAINT_BUDGET,
            diagnostics.constraint_residual.max,
        );
    }
    check("vertical_residual", VERTICAL_BUDGET, diagnostics.vertical_residual.max);
    check(
        "orthonormality_defect",
        ORTHONORMALITY_BUDGET,
        diagnostics.orthonormality_defect.max,
    );
    if config.mode.is_conservative() {
        check(
            "energy_relative_drift",
            ENERGY_BUDGET,
            diagnostics.energy_relative_drift,
        );
    }
    let within_budgets = budgets.iter().all(|b| b.pass);
    RunSummary {
        version: env!("CARGO_PKG_VERSION"),
        scenario: scenario.name.clone(),
        mode: config.mode,
        scheme: trajectory.scheme,
        steps: samples.len() - 1,
        final_state: FinalState {
            t: last.state.t,
            xi: last.state.xi.as_slice().to_vec(),
            g: last.state.g.to_flat(),
            q: last.q.to_flat(),
        },
        diagnostics,
        budgets,
        within_budgets,
        config: config.clone(),
        wall_time,
    }
}

/// Simulates the configured run and writes its artifacts into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    let scenario = scenarios::build(&config.scenario, &config.parameters)?;
    let initial = initial_state(&scenario, config)?;
    let rhs = scenario.rhs(config.mode, &initial)?;
    let tracked = if matches!(config.mode, Mode::Nonholonomic | Mode::ClosedLoop) {
        scenario.constraint_map(config.mode, &initial)?
    } else {
        None
    };
    let mut observer = Observer::new(&scenario.structure).with_potential(scenario.potential.as_ref());
    if let Some(d) = &tracked {
        observer = observer.with_constraint(d.as_ref());
    }
    let started = Instant::now();
    let trajectory = simulate(&observer, &rhs, &initial, config.horizon, config.h)?;
    let wall_time = started.elapsed();

    fs::create_dir_all(out)?;
    let columns = column_names(&scenario, &trajectory);
    let data = rows(&trajectory);
    if config.formats.contains(&Format::Csv) {
        write_csv(&out.join("trajectory.csv"), &columns, &data)?;
    }
    if config.formats.contains(&Format::Json) {
        write_json(
            &out.join("trajectory.json"),
            &TrajectoryJson {
                scenario: &scenario.name,
                mode: config.mode,
                scheme: trajectory.scheme,
                step: trajectory.step,
                columns: &columns,
                rows: &data,
            },
        )?;
    }
    let summary = summarize(&scenario, config, &trajectory, wall_time);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Runs the property suite on a named scenario with default parameters and
/// writes `verification.json` into `out`.
pub fn verify(name: &str, seed: u64, samples: usize, out: &Path) -> Result<VerificationReport> {
    if samples == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    let scenario = scenarios::build(name, &Default::default())?;
    let report = verify_scenario(&scenario, samples, seed);
    fs::create_dir_all(out)?;
    write_json(&out.join("verification.json"), &report)?;
    Ok(report)
}

/// Scenario names and parameter schemas as JSON.
pub fn list_scenarios() -> serde_json::Value {
    serde_json::to_value(scenarios::list()).expect("scenario list serializes")
}
