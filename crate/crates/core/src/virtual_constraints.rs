//! Feedback laws that turn a subspace `𝔡 ⊂ 𝔥` into a virtual nonholonomic
//! constraint of the controlled system
//! `ξ̇ = −∇^𝔤_ξ ξ − T_gL_{g⁻¹}(grad Ṽ) + uᵃ f_a`.
//!
//! The annihilator covectors are `μᵃ = ♭(P⊥ f_a)`, with `P⊥` the orthogonal
//! projector onto `(𝔡 ⊕ 𝔰)^⊥`. They vanish on `𝔡 ⊕ 𝔰`, depend smoothly on the
//! state, and make `[μᵃ(f_b)]` a Gram matrix. The control solves
//! `[μᵃ(f_b)] u = μᵃ(∇^𝔤_ξ ξ + grad) − μ̇ᵃ(ξ)`, which forces
//! `d/dt μᵃ(ξ) = 0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::connections::{g_connection, min_singular_value, project, Subspace, RANK_TOLERANCE};
use crate::dynamics::{controlled_rhs, State, Trajectory};
use crate::error::{Error, Result};
use crate::homogeneous::{trivialized_gradient, HomogeneousStructure, Potential, FD_STEP};
use crate::lie::AlgebraVector;

/// Tolerance on `ξ ∈ 𝔡` for [`solve_control`].
pub const ON_CONSTRAINT_TOLERANCE: f64 = 1e-8;

/// Threshold for the transversality report.
pub const TRANSVERSALITY_TOLERANCE: f64 = 1e-8;

pub type SubspaceMap = Arc<dyn Fn(&State) -> Result<Subspace> + Send + Sync>;
pub type InputMap = Arc<dyn Fn(&State) -> Vec<AlgebraVector> + Send + Sync>;
/// Rows are `μ̇ᵃ` as covector coefficients.
pub type MuRateMap = Arc<dyn Fn(&State) -> DMatrix<f64> + Send + Sync>;

/// Time derivative of the annihilator covectors along `ġ = gξ`.
#[derive(Clone)]
pub enum MuRate {
    /// State-independent constraint.
    Zero,
    Analytic(MuRateMap),
    /// Central differences along `g·exp(±εξ)`.
    FiniteDifference,
}

impl fmt::Debug for MuRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MuRate::Zero => "Zero",
            MuRate::Analytic(_) => "Analytic",
            MuRate::FiniteDifference => "FiniteDifference",
        })
    }
}

/// Constraint subspace `𝔡` and raw input vectors `f_a`, both state dependent.
#[derive(Clone)]
pub struct ConstraintSpec {
    pub d: SubspaceMap,
    pub inputs: InputMap,
    pub mu_rate: MuRate,
}

impl fmt::Debug for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("mu_rate", &self.mu_rate)
            .finish_non_exhaustive()
    }
}

impl ConstraintSpec {
    pub fn fixed(d: Subspace, inputs: Vec<AlgebraVector>) -> Self {
        ConstraintSpec {
            d: Arc::new(move |_: &State| Ok(d.clone())),
            inputs: Arc::new(move |_: &State| inputs.clone()),
            mu_rate: MuRate::Zero,
        }
    }

    pub fn subspace(&self, state: &State) -> Result<Subspace> {
        (self.d)(state)
    }

    pub fn input_vectors(&self, state: &State) -> Vec<AlgebraVector> {
        (self.inputs)(state)
    }

    pub fn input_dim(&self, state: &State) -> usize {
        self.input_vectors(state).len()
    }

    /// Same constraint with every `f_a` multiplied by `c`.
    pub fn with_scaled_inputs(&self, c: f64) -> Self {
        let inputs = self.inputs.clone();
        let mu_rate = match &self.mu_rate {
            MuRate::Analytic(rate) => {
                let rate = rate.clone();
                MuRate::Analytic(Arc::new(move |s: &State| rate(s) * c))
            }
            other => other.clone(),
        };
        ConstraintSpec {
            d: self.d.clone(),
            inputs: Arc::new(move |s: &State| inputs(s).into_iter().map(|f| f * c).collect()),
            mu_rate,
        }
    }
}

fn columns(vectors: &[AlgebraVector], n: usize) -> DMatrix<f64> {
    if vectors.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&vectors.iter().map(|v| v.coeffs().clone()).collect::<Vec<_>>())
    }
}

/// Annihilator covectors `μᵃ = ♭(P⊥ f_a)` as the rows of an `m × n` matrix.
pub fn annihilator(structure: &HomogeneousStructure, spec: &ConstraintSpec, state: &State) -> Result<DMatrix<f64>> {
    let metric = structure.metric();
    let ds = spec.subspace(state)?.direct_sum(structure.vertical(), metric)?;
    let f = spec.input_vectors(state);
    let n = structure.signature().dim();
    let mut mu = DMatrix::zeros(f.len(), n);
    for (a, fa) in f.iter().enumerate() {
        let perp = fa - &project(&ds, metric, fa);
        mu.row_mut(a).copy_from(&metric.flat(&perp).coeffs().transpose());
    }
    Ok(mu)
}

/// `μ̇ᵃ` along the flow through `state`.
pub fn mu_rate(structure: &HomogeneousStructure, spec: &ConstraintSpec, state: &State) -> Result<DMatrix<f64>> {
    match &spec.mu_rate {
        MuRate::Zero => Ok(DMatrix::zeros(spec.input_dim(state), structure.signature().dim())),
        MuRate::Analytic(rate) => Ok(rate(state)),
        MuRate::FiniteDifference => {
            let shifted = |eps: f64| -> Result<DMatrix<f64>> {
                let s = State {
                    t: state.t + eps,
                    g: state.g.right_exp(&(&state.xi * eps))?,
                    xi: state.xi.clone(),
                };
                annihilator(structure, spec, &s)
            };
            Ok((shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP))
        }
    }
}

/// Rank report for the hypothesis `𝔥 = 𝔡 ⊕ 𝔣`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransversalityReport {
    pub dim_d: usize,
    pub dim_f: usize,
    pub dim_h: usize,
    /// Smallest singular value of the metric-weighted stacked bases `[D F]`.
    pub stacked_sigma: f64,
    /// Smallest singular value of `[μᵃ(f_b)]`.
    pub decoupling_sigma: f64,
    pub pass: bool,
}

pub fn check_transversality(
    structure: &HomogeneousStructure,
    spec: &ConstraintSpec,
    state: &State,
) -> Result<TransversalityReport> {
    let metric = structure.metric();
    let d = spec.subspace(state)?;
    let f = spec.input_vectors(state);
    let n = structure.signature().dim();
    let mut stacked = DMatrix::zeros(n, d.dim() + f.len());
    stacked.view_mut((0, 0), (n, d.dim())).copy_from(d.basis());
    stacked.view_mut((0, d.dim()), (n, f.len())).copy_from(&columns(&f, n));
    let stacked_sigma = min_singular_value(&metric.weighted(&stacked));
    let decoupling_sigma = match annihilator(structure, spec, state) {
        Ok(mu) => min_singular_value(&(mu * columns(&f, n))),
        Err(_) => 0.0,
    };
    let dim_h = structure.horizontal().dim();
    let pass = d.dim() + f.len() == dim_h
        && stacked_sigma > TRANSVERSALITY_TOLERANCE
        && decoupling_sigma > TRANSVERSALITY_TOLERANCE;
    Ok(TransversalityReport {
        dim_d: d.dim(),
        dim_f: f.len(),
        dim_h,
        stacked_sigma,
        decoupling_sigma,
        pass,
    })
}

/// Unique splitting `v = η + τᵇ f_b + σ`, with `η ∈ 𝔡` and `σ ∈ 𝔰`.
/// Returns `(η, τ)`; for `v ∈ 𝔥` the vertical part `σ` vanishes.
pub fn decompose_drift(
    structure: &HomogeneousStructure,
    spec: &ConstraintSpec,
    state: &State,
    v: &AlgebraVector,
) -> Result<(AlgebraVector, DVector<f64>)> {
    let d = spec.subspace(state)?;
    let f = spec.input_vectors(state);
    let s = structure.vertical();
    let n = structure.signature().dim();
    let (dd, m, ds) = (d.dim(), f.len(), s.dim());
    if dd + m + ds != n {
        return Err(Error::NotComplementary { sigma: 0.0 });
    }
    let mut stacked = DMatrix::zeros(n, n);
    stacked.view_mut((0, 0), (n, dd)).copy_from(d.basis());
    stacked.view_mut((0, dd), (n, m)).copy_from(&columns(&f, n));
    stacked.view_mut((0, dd + m), (n, ds)).copy_from(s.basis());
    let svd = stacked.svd(true, true);
    let sigma = svd.singular_values.min();
    if !(sigma > RANK_TOLERANCE) {
        return Err(Error::NotComplementary { sigma });
    }
    let c = svd
        .solve(v.coeffs(), 0.0)
        .map_err(|e| Error::InvalidArgument(e.into()))?;
    let eta = AlgebraVector::new(v.signature().clone(), d.basis() * c.rows(0, dd))?;
    Ok((eta, c.rows(dd, m).into_owned()))
}

/// Control law without the on-constraint precondition. Runge–Kutta stages
/// leave a state-dependent `𝔡` by `O(h²)`, so the closed loop evaluates it there.
pub fn control_law(
    structure: &HomogeneousStructure,
    potential: Option<&Potential>,
    spec: &ConstraintSpec,
    state: &State,
) -> Result<DVector<f64>> {
    Ok(control_parts(structure, potential, spec, state)?.u)
}

struct ControlParts {
    u: DVector<f64>,
    mu: DMatrix<f64>,
    mu_dot: DMatrix<f64>,
    drift: AlgebraVector,
    inputs: Vec<AlgebraVector>,
    sigma: f64,
}

fn control_parts(
    structure: &HomogeneousStructure,
    potential: Option<&Potential>,
    spec: &ConstraintSpec,
    state: &State,
) -> Result<ControlParts> {
    let n = structure.signature().dim();
    let inputs = spec.input_vectors(state);
    let mu = annihilator(structure, spec, state)?;
    let mu_dot = mu_rate(structure, spec, state)?;
    let decoupling = &mu * columns(&inputs, n);
    let drift =
        g_connection(structure.metric(), &state.xi, &state.xi)? + trivialized_gradient(structure, potential, &state.g)?;
    if inputs.is_empty() {
        return Ok(ControlParts {
            u: DVector::zeros(0),
            mu,
            mu_dot,
            drift,
            inputs,
            sigma: f64::INFINITY,
        });
    }
    let svd = decoupling.svd(true, true);
    let sigma = svd.singular_values.min();
    if !(sigma > RANK_TOLERANCE) {
        return Err(Error::SingularDecoupling { sigma });
    }
    let rhs = &mu * drift.coeffs() - &mu_dot * state.xi.coeffs();
    let u = svd.solve(&rhs, 0.0).map_err(|e| Error::InvalidArgument(e.into()))?;
    Ok(ControlParts {
        u,
        mu,
        mu_dot,
        drift,
        inputs,
        sigma,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: DVector<f64>,
    /// `max_a |μᵃ(ξ̇) + μ̇ᵃ(ξ)|` under the closed loop at this state.
    pub residual: f64,
    /// `𝔡` component of the drift `∇^𝔤_ξ ξ + grad`.
    pub eta: AlgebraVector,
    /// Input coordinates of the drift.
    pub tau: DVector<f64>,
    /// Smallest singular value of `[μᵃ(f_b)]`.
    pub decoupling_sigma: f64,
}

/// The unique `u` keeping `ξ` in `𝔡` to first order.
pub fn solve_control(
    structure: &HomogeneousStructure,
    potential: Option<&Potential>,
    spec: &ConstraintSpec,
    state: &State,
) -> Result<ControlOutput> {
    let metric = structure.metric();
    let d = spec.subspace(state)?;
    let residual = d.distance(metric, &state.xi);
    if residual > ON_CONSTRAINT_TOLERANCE * metric.norm(&state.xi).max(1.0) {
        return Err(Error::NotOnConstraint { residual });
    }
    let parts = control_parts(structure, potential, spec, state)?;
    let mut xi_dot = -parts.drift.clone();
    for (ua, fa) in parts.u.iter().zip(&parts.inputs) {
        xi_dot = xi_dot + fa * *ua;
    }
    let rate = &parts.mu * xi_dot.coeffs() + &parts.mu_dot * state.xi.coeffs();
    let (eta, tau) = decompose_drift(structure, spec, state, &parts.drift)?;
    Ok(ControlOutput {
        u: parts.u,
        residual: rate.amax(),
        eta,
        tau,
        decoupling_sigma: parts.sigma,
    })
}

/// Controlled system with `u` from [`control_law`].
pub fn closed_loop_rhs<'a>(
    structure: &'a HomogeneousStructure,
    potential: Option<&'a Potential>,
    spec: &'a ConstraintSpec,
) -> impl Fn(&State) -> Result<AlgebraVector> + Send + Sync + 'a {
    controlled_rhs(
        structure,
        potential,
        move |s: &State| spec.input_vectors(s),
        move |s: &State| control_law(structure, potential, spec, s),
    )
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReconstructionReport {
    pub samples: usize,
    /// Largest metric norm of the vertical part of `ξ`.
    pub max_vertical: f64,
    /// Largest distance of `q̇ = T_gπ(gξ)` from `T_gπ(g𝔡)`.
    pub max_constraint: f64,
}

/// Checks that the projected curve `q = π(g)` satisfies the constraint on `H`
/// and that `g` stays horizontal.
pub fn reconstruction_check(
    trajectory: &Trajectory,
    structure: &HomogeneousStructure,
    d_of_state: &dyn Fn(&State) -> Result<Subspace>,
) -> ReconstructionReport {
    let mut report = ReconstructionReport::default();
    for sample in &trajectory.samples {
        let s = &sample.state;
        report.samples += 1;
        report.max_vertical = report.max_vertical.max(structure.vertical_residual(&s.xi));
        let residual = (|| -> Result<f64> {
            let d = d_of_state(s)?;
            let qdot = structure.pushforward(&s.g, &s.xi)?;
            if d.dim() == 0 {
                return Ok(qdot.norm());
            }
            let cols = d
                .vectors()
                .iter()
                .map(|v| structure.pushforward(&s.g, v))
                .collect::<Result<Vec<_>>>()?;
            let p = DMatrix::from_columns(&cols);
            let c = p
                .clone()
                .svd(true, true)
                .solve(&qdot, RANK_TOLERANCE)
                .map_err(|e| Error::InvalidArgument(e.into()))?;
            Ok((qdot - p * c).norm())
        })()
        .unwrap_or(f64::INFINITY);
        report.max_constraint = report.max_constraint.max(residual);
    }
    report
}
