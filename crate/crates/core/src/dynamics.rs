//! Algebra-level equations of motion and a Runge–Kutta–Munthe-Kaas integrator.
//!
//! Every right-hand side maps a state `(g, ξ)` to `ξ̇`; the group part always
//! follows `ġ = T_eL_g ξ`.

use nalgebra::DVector;

use crate::connections::{g_connection, project, Subspace};
use crate::error::{Error, Result};
use crate::homogeneous::{trivialized_gradient, HomogeneousPoint, HomogeneousStructure, Potential};
use crate::lie::{ad, AlgebraVector, GroupElement};

/// Tolerance on `ξ ∈ 𝔡` for the nonholonomic equations.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;

pub const SCHEME: &str = "RKMK4";

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub g: GroupElement,
    pub xi: AlgebraVector,
}

impl State {
    pub fn new(t: f64, g: GroupElement, xi: AlgebraVector) -> Result<Self> {
        g.signature().ensure_eq(xi.signature())?;
        Ok(State { t, g, xi })
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.g.is_finite() && self.xi.is_finite()
    }
}

/// Boxed right-hand side `(g, ξ) ↦ ξ̇`.
pub type Rhs<'a> = Box<dyn Fn(&State) -> Result<AlgebraVector> + Send + Sync + 'a>;

/// Euler–Poincaré equations `ξ̇ = −∇^𝔤_ξ ξ`.
pub fn geodesic_rhs(structure: &HomogeneousStructure) -> impl Fn(&State) -> Result<AlgebraVector> + Send + Sync + '_ {
    move |s: &State| Ok(-g_connection(structure.metric(), &s.xi, &s.xi)?)
}

/// `ξ̇ = −∇^𝔤_ξ ξ − T_gL_{g⁻¹}(grad Ṽ)`.
pub fn mechanical_rhs<'a>(
    structure: &'a HomogeneousStructure,
    potential: Option<&'a Potential>,
) -> impl Fn(&State) -> Result<AlgebraVector> + Send + Sync + 'a {
    move |s: &State| {
        let nabla = g_connection(structure.metric(), &s.xi, &s.xi)?;
        let grad = trivialized_gradient(structure, potential, &s.g)?;
        Ok(-(nabla + grad))
    }
}

/// Nonholonomic equations for a fixed constraint subspace `𝔡`:
/// `ξ̇ = −𝔓(∇^𝔤_ξ ξ) − 𝔓(T_gL_{g⁻¹} grad Ṽ)`.
pub fn nonholonomic_rhs<'a>(
    structure: &'a HomogeneousStructure,
    potential: Option<&'a Potential>,
    d: &'a Subspace,
) -> impl Fn(&State) -> Result<AlgebraVector> + Send + Sync + 'a {
    move |s: &State| {
        let metric = structure.metric();
        let residual = d.distance(metric, &s.xi);
        if residual > CONSTRAINT_TOLERANCE * metric.norm(&s.xi).max(1.0) {
            return Err(Error::NotInSubspace { residual });
        }
        let nabla = g_connection(metric, &s.xi, &s.xi)?;
        let grad = trivialized_gradient(structure, potential, &s.g)?;
        Ok(-project(d, metric, &(nabla + grad)))
    }
}

/// `ξ̇ = −∇^𝔤_ξ ξ − T_gL_{g⁻¹}(grad Ṽ) + ũᵃ f_a`.
pub fn controlled_rhs<'a, F, C>(
    structure: &'a HomogeneousStructure,
    potential: Option<&'a Potential>,
    inputs: F,
    controller: C,
) -> impl Fn(&State) -> Result<AlgebraVector> + Send + Sync + 'a
where
    F: Fn(&State) -> Vec<AlgebraVector> + Send + Sync + 'a,
    C: Fn(&State) -> Result<DVector<f64>> + Send + Sync + 'a,
{
    let drift = mechanical_rhs(structure, potential);
    move |s: &State| {
        let mut out = drift(s)?;
        let f = inputs(s);
        let u = controller(s)?;
        if u.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                found: u.len(),
            });
        }
        for (ua, fa) in u.iter().zip(&f) {
            out = out + fa * *ua;
        }
        Ok(out)
    }
}

/// One step of the four-stage Runge–Kutta–Munthe-Kaas method.
///
/// Stages are evaluated at `g·exp(Θᵢ)`, with `Θ̇ = dexp⁻¹_{−Θ}(ξ)` truncated
/// after the second bracket, `ξ + ½[Θ, ξ] + (1/12)[Θ, [Θ, ξ]]`.
pub fn step<F>(rhs: &F, state: &State, h: f64) -> Result<State>
where
    F: Fn(&State) -> Result<AlgebraVector> + ?Sized,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let dexpinv = |theta: &AlgebraVector, xi: &AlgebraVector| -> Result<AlgebraVector> {
        let b1 = ad(theta, xi)?;
        let b2 = ad(theta, &b1)?;
        Ok(xi + &(b1 * 0.5) + b2 * (1.0 / 12.0))
    };
    let stage = |theta: &AlgebraVector, xi: AlgebraVector, dt: f64| -> Result<State> {
        Ok(State {
            t: state.t + dt,
            g: state.g.right_exp(theta)?,
            xi,
        })
    };

    let k1 = state.xi.clone();
    let l1 = rhs(state)?;

    let theta2 = &k1 * (0.5 * h);
    let s2 = stage(&theta2, &state.xi + &(&l1 * (0.5 * h)), 0.5 * h)?;
    let k2 = dexpinv(&theta2, &s2.xi)?;
    let l2 = rhs(&s2)?;

    let theta3 = &k2 * (0.5 * h);
    let s3 = stage(&theta3, &state.xi + &(&l2 * (0.5 * h)), 0.5 * h)?;
    let k3 = dexpinv(&theta3, &s3.xi)?;
    let l3 = rhs(&s3)?;

    let theta4 = &k3 * h;
    let s4 = stage(&theta4, &state.xi + &(&l3 * h), h)?;
    let k4 = dexpinv(&theta4, &s4.xi)?;
    let l4 = rhs(&s4)?;

    let theta = (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    let xi = &state.xi + &((l1 + (l2 + l3) * 2.0 + l4) * (h / 6.0));
    Ok(State {
        t: state.t + h,
        g: state.g.right_exp(&theta)?,
        xi,
    })
}

/// Per-sample diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub kinetic_energy: f64,
    /// Kinetic plus potential energy.
    pub energy: f64,
    /// Metric norm of the vertical part of `ξ`.
    pub vertical_residual: f64,
    /// `μᵃ(ξ)` for an orthonormal basis of the annihilator of `𝔡 ⊕ 𝔰`.
    pub constraint_residuals: Vec<f64>,
    pub orthonormality_defect: f64,
}

impl Diagnostics {
    pub fn max_constraint_residual(&self) -> f64 {
        self.constraint_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn is_finite(&self) -> bool {
        self.energy.is_finite()
            && self.vertical_residual.is_finite()
            && self.orthonormality_defect.is_finite()
            && self.constraint_residuals.iter().all(|r| r.is_finite())
    }
}

/// Pairings of `ξ` with a metric-orthonormal basis of the annihilator of
/// `𝔡 ⊕ 𝔰`, i.e. of `𝔡` within `𝔥`.
pub fn constraint_residuals(structure: &HomogeneousStructure, d: &Subspace, xi: &AlgebraVector) -> Result<Vec<f64>> {
    let ds = d.direct_sum(structure.vertical(), structure.metric())?;
    Ok(ds.annihilator_residuals(xi).iter().copied().collect())
}

pub type ConstraintFn<'a> = &'a (dyn Fn(&State) -> Result<Subspace> + Send + Sync);

/// What `simulate` records at each sample.
#[derive(Clone, Copy)]
pub struct Observer<'a> {
    pub structure: &'a HomogeneousStructure,
    pub potential: Option<&'a Potential>,
    pub constraint: Option<ConstraintFn<'a>>,
}

impl<'a> Observer<'a> {
    pub fn new(structure: &'a HomogeneousStructure) -> Self {
        Observer {
            structure,
            potential: None,
            constraint: None,
        }
    }

    pub fn with_potential(mut self, potential: Option<&'a Potential>) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_constraint(mut self, constraint: ConstraintFn<'a>) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn observe(&self, state: &State) -> Result<(HomogeneousPoint, Diagnostics)> {
        let q = self.structure.pi(&state.g)?;
        let kinetic = 0.5 * self.structure.metric().inner(&state.xi, &state.xi);
        let potential = self.potential.map_or(0.0, |p| p.value_at(&q));
        let constraint_residuals = match self.constraint {
            Some(d) => constraint_residuals(self.structure, &d(state)?, &state.xi)?,
            None => Vec::new(),
        };
        let diagnostics = Diagnostics {
            kinetic_energy: kinetic,
            energy: kinetic + potential,
            vertical_residual: self.structure.vertical_residual(&state.xi),
            constraint_residuals,
            orthonormality_defect: state.g.orthonormality_defect(),
        };
        Ok((q, diagnostics))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: State,
    pub q: HomogeneousPoint,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub step: f64,
    pub scheme: &'static str,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&State> {
        self.samples.last().map(|s| &s.state)
    }

    /// Largest `|E(t) − E(0)| / |E(0)|` (absolute when `E(0) = 0`).
    pub fn relative_energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let e0 = first.diagnostics.energy;
        let scale = if e0 == 0.0 { 1.0 } else { e0.abs() };
        self.samples
            .iter()
            .map(|s| (s.diagnostics.energy - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn max_vertical_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.diagnostics.vertical_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_constraint_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.diagnostics.max_constraint_residual())
            .fold(0.0, f64::max)
    }

    pub fn max_orthonormality_defect(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.diagnostics.orthonormality_defect)
            .fold(0.0, f64::max)
    }
}

fn step_count(horizon: f64, h: f64) -> Result<usize> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(h > 0.0 && h <= horizon) {
        return Err(Error::InvalidArgument(format!(
            "step size must satisfy 0 < h <= T, got h = {h}, T = {horizon}"
        )));
    }
    Ok(((horizon / h) - 1e-9).ceil().max(1.0) as usize)
}

/// Integrates over `[t₀, t₀ + T]` with `ceil(T/h)` steps, the last one
/// shortened to land on `t₀ + T`, recording every step.
pub fn simulate<F>(observer: &Observer<'_>, rhs: &F, initial: &State, horizon: f64, h: f64) -> Result<Trajectory>
where
    F: Fn(&State) -> Result<AlgebraVector> + ?Sized,
{
    let n = step_count(horizon, h)?;
    let mut samples = Vec::with_capacity(n + 1);
    let record = |state: State, samples: &mut Vec<Sample>, k: usize| -> Result<()> {
        let (q, diagnostics) = observer.observe(&state)?;
        if !state.is_finite() || !diagnostics.is_finite() {
            return Err(Error::NonFinite { step: k });
        }
        samples.push(Sample { state, q, diagnostics });
        Ok(())
    };
    record(initial.clone(), &mut samples, 0)?;
    let mut state = initial.clone();
    for k in 0..n {
        let hk = if k + 1 == n { horizon - (n - 1) as f64 * h } else { h };
        state = step(rhs, &state, hk).map_err(|e| non_finite_or(e, k + 1))?;
        state.t = initial.t + if k + 1 == n { horizon } else { (k + 1) as f64 * h };
        record(state.clone(), &mut samples, k + 1)?;
    }
    Ok(Trajectory {
        samples,
        step: h,
        scheme: SCHEME,
    })
}

/// Same stepping as [`simulate`] without recording; returns the final state.
pub fn integrate<F>(rhs: &F, initial: &State, horizon: f64, h: f64) -> Result<State>
where
    F: Fn(&State) -> Result<AlgebraVector> + ?Sized,
{
    let n = step_count(horizon, h)?;
    let mut state = initial.clone();
    for k in 0..n {
        let hk = if k + 1 == n { horizon - (n - 1) as f64 * h } else { h };
        state = step(rhs, &state, hk).map_err(|e| non_finite_or(e, k + 1))?;
        state.t = initial.t + if k + 1 == n { horizon } else { (k + 1) as f64 * h };
        if !state.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
    }
    Ok(state)
}

fn non_finite_or(e: Error, step: usize) -> Error {
    match e {
        Error::NotRotation { .. } => Error::NonFinite { step },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::Metric;
    use crate::homogeneous::FactorProjection;
    use crate::lie::{Factor, Signature, Vec3};
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn sphere_structure(j: [f64; 3]) -> HomogeneousStructure {
        HomogeneousStructure::new(
            Signature::so3_so3(),
            vec![
                FactorProjection::RotationToSphere { base: Vec3::z() },
                FactorProjection::RotationToRotation,
            ],
            Metric::from_diagonal(&[1.0, 1.0, 1.0, j[0], j[1], j[2]]).unwrap(),
        )
        .unwrap()
    }

    fn se3_structure() -> HomogeneousStructure {
        HomogeneousStructure::new(
            Signature::se3(),
            vec![FactorProjection::RigidToPoint],
            Metric::identity(6),
        )
        .unwrap()
    }

    fn v(sig: &Signature, c: &[f64]) -> AlgebraVector {
        AlgebraVector::from_slice(sig, c).unwrap()
    }

    fn at_identity(xi: AlgebraVector) -> State {
        State::new(0.0, GroupElement::identity(xi.signature()), xi).unwrap()
    }

    #[test]
    fn geodesic_rhs_examples() {
        let s = se3_structure();
        let rhs = geodesic_rhs(&s);
        let out = rhs(&at_identity(v(&Signature::se3(), &[0.3, -1.0, 2.0, 0.0, 0.0, 0.0]))).unwrap();
        assert_eq!(out.norm(), 0.0);

        let j = [1.0, 2.0, 3.0];
        let s = sphere_structure(j);
        let rhs = geodesic_rhs(&s);
        let xi = v(&Signature::so3_so3(), &[0.4, -0.3, 0.0, 0.1, 0.2, 0.3]);
        let out = rhs(&at_identity(xi)).unwrap();
        let w = Vec3::new(0.1, 0.2, 0.3);
        let jm = Matrix3::from_diagonal(&Vec3::from(j));
        let euler = jm.try_inverse().unwrap() * (jm * w).cross(&w);
        assert!(Vec3::from_column_slice(out.block(0)).norm() <= 1e-16);
        assert!((Vec3::from_column_slice(out.block(1)) - euler).norm() <= 1e-15);

        let iso = sphere_structure([1.0, 1.0, 1.0]);
        let rhs = geodesic_rhs(&iso);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..50 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(rhs(&at_identity(v(&Signature::so3_so3(), &c))).unwrap().norm() <= 1e-15);
        }
    }

    fn oscillator(k: f64) -> Potential {
        Potential {
            value: Some(Arc::new(move |q: &HomogeneousPoint| match q.factors()[0] {
                crate::homogeneous::PointFactor::Point(r) => 0.5 * k * r.norm_squared(),
                _ => f64::NAN,
            })),
            differential: None,
        }
    }

    #[test]
    fn mechanical_rhs_oscillator() {
        let s = se3_structure();
        let p = oscillator(2.0);
        let rhs = mechanical_rhs(&s, Some(&p));
        let r = crate::lie::Rot3::exp(&Vec3::new(0.2, 0.5, -0.3));
        let pos = Vec3::new(1.0, -0.5, 0.25);
        let g = GroupElement::new(
            Signature::se3(),
            vec![Factor::Rigid {
                rotation: r,
                translation: pos,
            }],
        )
        .unwrap();
        let state = State::new(0.0, g, v(&Signature::se3(), &[0.1, 0.2, 0.3, 0.0, 0.0, 0.0])).unwrap();
        let out = rhs(&state).unwrap();
        let expected = -(r.transpose().apply(&pos) * 2.0);
        assert!((Vec3::from_column_slice(&out.as_slice()[0..3]) - expected).norm() <= 1e-8);
        assert!(Vec3::from_column_slice(&out.as_slice()[3..6]).norm() <= 1e-8);

        let free = mechanical_rhs(&s, None);
        let geo = geodesic_rhs(&s);
        assert_eq!(free(&state).unwrap(), geo(&state).unwrap());
    }

    #[test]
    fn nonholonomic_rhs_properties() {
        let s = sphere_structure([1.0, 2.0, 3.0]);
        let sig = Signature::so3_so3();
        let m = s.metric();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let raw: Vec<_> = (0..3)
            .map(|_| {
                let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
                s.horizontal_part(&v(&sig, &c))
            })
            .collect();
        let d = Subspace::orthonormalize(m, &raw).unwrap();
        let rhs = nonholonomic_rhs(&s, None, &d);
        for _ in 0..200 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xi = AlgebraVector::new(sig.clone(), d.basis() * DVector::from_vec(c)).unwrap();
            let out = rhs(&at_identity(xi.clone())).unwrap();
            assert!(d.distance(m, &out) <= 1e-12);
            assert!(m.inner(&out, &xi).abs() <= 1e-12);
        }
        let off = v(&sig, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(rhs(&at_identity(off)), Err(Error::NotInSubspace { .. })));

        let full = Subspace::full(&sig, m);
        let rhs = nonholonomic_rhs(&s, None, &full);
        let geo = geodesic_rhs(&s);
        let xi = v(&sig, &[0.3, 0.1, -0.2, 0.5, -0.7, 0.2]);
        assert!((rhs(&at_identity(xi.clone())).unwrap() - geo(&at_identity(xi)).unwrap()).norm() <= 1e-14);
    }

    #[test]
    fn frozen_flow_is_exact_exponential() {
        let sig = Signature::so3_so3();
        let xi = v(&sig, &[0.3, -0.2, 0.9, 1.1, 0.4, -0.6]);
        let zero = |_: &State| Ok(AlgebraVector::zeros(&Signature::so3_so3()));
        let g0 = GroupElement::exp(&v(&sig, &[0.5, 0.5, 0.0, -1.0, 0.2, 0.3]));
        let mut s = State::new(0.0, g0.clone(), xi.clone()).unwrap();
        for k in 1..=20 {
            s = step(&zero, &s, 0.05).unwrap();
            let exact = g0.right_exp(&(&xi * (0.05 * k as f64))).unwrap();
            assert!(s.g.distance(&exact) <= 1e-12 * k as f64);
        }
    }

    #[test]
    fn se3_geodesic_is_straight_line() {
        let s = se3_structure();
        let rhs = geodesic_rhs(&s);
        let vel = Vec3::new(1.0, -0.5, 0.25);
        let init = at_identity(v(&Signature::se3(), &[vel.x, vel.y, vel.z, 0.0, 0.0, 0.0]));
        let end = integrate(&rhs, &init, 3.0, 0.01).unwrap();
        match end.g.factor(0) {
            Factor::Rigid { translation, rotation } => {
                assert!((translation - vel * 3.0).norm() <= 1e-12);
                assert!((rotation.matrix() - Matrix3::identity()).norm() <= 1e-15);
            }
            _ => unreachable!(),
        }
        assert!((end.t - 3.0).abs() <= 1e-15);
    }

    #[test]
    fn simulate_step_bookkeeping() {
        let s = se3_structure();
        let rhs = geodesic_rhs(&s);
        let init = at_identity(v(&Signature::se3(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let obs = Observer::new(&s);
        let traj = simulate(&obs, &rhs, &init, 0.1, 0.1).unwrap();
        assert_eq!(traj.samples.len(), 2);

        let traj = simulate(&obs, &rhs, &init, 1.0, 0.3).unwrap();
        assert_eq!(traj.samples.len(), 5);
        assert_eq!(traj.samples.last().unwrap().state.t, 1.0);
        assert!(traj.samples.windows(2).all(|w| w[1].state.t > w[0].state.t));

        assert!(simulate(&obs, &rhs, &init, 0.1, 0.2).is_err());
        assert!(simulate(&obs, &rhs, &init, 0.0, 0.1).is_err());
    }

    #[test]
    fn simulate_reports_blow_up() {
        let s = se3_structure();
        let blow = |st: &State| Ok(&st.xi * (st.xi.norm() * 1e3));
        let init = at_identity(v(&Signature::se3(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let obs = Observer::new(&s);
        match simulate(&obs, &blow, &init, 10.0, 0.1) {
            Err(Error::NonFinite { step }) => assert!(step >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geodesic_conserves_energy_and_horizontality() {
        let s = sphere_structure([1.0, 2.0, 3.0]);
        let rhs = geodesic_rhs(&s);
        let init = at_identity(v(&Signature::so3_so3(), &[-0.1, -0.2, 0.0, 0.1, 0.2, 0.3]));
        let obs = Observer::new(&s);
        let traj = simulate(&obs, &rhs, &init, 2.0, 1e-3).unwrap();
        assert!(traj.relative_energy_drift() <= 1e-10);
        assert!(traj.max_vertical_residual() <= 1e-10);
        assert!(traj.max_orthonormality_defect() <= 1e-12);
    }

    fn order_error(h: f64, reference: &State, init: &State, rhs: &dyn Fn(&State) -> Result<AlgebraVector>) -> f64 {
        let end = integrate(rhs, init, 2.0, h).unwrap();
        (end.xi.clone() - reference.xi.clone()).norm() + end.g.distance(&reference.g)
    }

    #[test]
    fn fourth_order_convergence() {
        let s = sphere_structure([1.0, 2.0, 3.0]);
        let rhs = geodesic_rhs(&s);
        let init = at_identity(v(&Signature::so3_so3(), &[0.5, -0.4, 0.0, 1.0, 2.0, 3.0]));
        let reference = integrate(&rhs, &init, 2.0, 2.5e-3 / 64.0).unwrap();
        let e: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&h| order_error(h, &reference, &init, &rhs))
            .collect();
        let p1 = (e[0] / e[1]).log2();
        let p2 = (e[1] / e[2]).log2();
        assert!(p1 >= 3.8 && p2 >= 3.8, "orders {p1} {p2} errors {e:?}");
    }
}
