//! Concrete systems: Euclidean space as `SE(3)/SO(3)`, a sphere rolling on a
//! sphere, and a blade moving on a sphere.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connections::{g_connection, min_singular_value, project, Metric, Subspace};
use crate::dynamics::{geodesic_rhs, mechanical_rhs, nonholonomic_rhs, simulate, Observer, Rhs, State};
use crate::error::{Error, Result};
use crate::homogeneous::{
    left_trivialize, tangent_from_algebra, trivialized_gradient, FactorProjection, HomogeneousPoint,
    HomogeneousStructure, PointFactor, Potential, FD_STEP,
};
use crate::lie::{ad, ad_star, hat, vee, AlgebraVector, CoAlgebraVector, Factor, GroupElement, Signature, Vec3};
use crate::virtual_constraints::{
    check_transversality, closed_loop_rhs, decompose_drift, mu_rate, solve_control, ConstraintSpec, MuRate,
};

pub const SE3_R3: &str = "se3_r3";
pub const SPHERE_ON_SPHERE: &str = "sphere_on_sphere";
pub const BLADE_ON_SPHERE: &str = "blade_on_sphere";

pub const SCENARIO_NAMES: [&str; 3] = [SE3_R3, SPHERE_ON_SPHERE, BLADE_ON_SPHERE];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Geodesic,
    Mechanical,
    Nonholonomic,
    ClosedLoop,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Geodesic => "geodesic",
            Mode::Mechanical => "mechanical",
            Mode::Nonholonomic => "nonholonomic",
            Mode::ClosedLoop => "closed_loop",
        }
    }

    /// Modes whose flow conserves total energy.
    pub fn is_conservative(self) -> bool {
        !matches!(self, Mode::ClosedLoop)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Owned constraint-subspace map of a mode.
pub type SubspaceFn<'a> = Box<dyn Fn(&State) -> Result<Subspace> + Send + Sync + 'a>;

pub type ClosedFormControl = Arc<dyn Fn(&State) -> DVector<f64> + Send + Sync>;

/// A fully wired system.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub structure: HomogeneousStructure,
    pub potential: Option<Potential>,
    pub constraint: Option<ConstraintSpec>,
    pub closed_form_control: Option<ClosedFormControl>,
    pub parameters: BTreeMap<String, f64>,
    /// Default initial state, on the constraint when there is one.
    pub initial: State,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("signature", &self.structure.signature().to_string())
            .field("parameters", &self.parameters)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn signature(&self) -> &Signature {
        self.structure.signature()
    }

    pub fn metric(&self) -> &Metric {
        self.structure.metric()
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut m = vec![Mode::Geodesic, Mode::Mechanical];
        if self.constraint.is_some() {
            m.extend([Mode::Nonholonomic, Mode::ClosedLoop]);
        }
        m
    }

    pub fn supports(&self, mode: Mode) -> bool {
        self.modes().contains(&mode)
    }

    fn require_constraint(&self, mode: Mode) -> Result<&ConstraintSpec> {
        self.constraint.as_ref().ok_or_else(|| {
            Error::config(
                "mode",
                format!(
                    "mode `{mode}` needs a constraint, which `{}` does not define",
                    self.name
                ),
            )
        })
    }

    /// Right-hand side for a mode. Nonholonomic runs freeze `𝔡` at `initial`.
    pub fn rhs(&self, mode: Mode, initial: &State) -> Result<Rhs<'_>> {
        let potential = self.potential.as_ref();
        Ok(match mode {
            Mode::Geodesic => Box::new(geodesic_rhs(&self.structure)),
            Mode::Mechanical => Box::new(mechanical_rhs(&self.structure, potential)),
            Mode::Nonholonomic => {
                let d = self.require_constraint(mode)?.subspace(initial)?;
                let structure = &self.structure;
                Box::new(move |s: &State| nonholonomic_rhs(structure, potential, &d)(s))
            }
            Mode::ClosedLoop => {
                let spec = self.require_constraint(mode)?;
                Box::new(closed_loop_rhs(&self.structure, potential, spec))
            }
        })
    }

    /// Constraint subspace tracked by the diagnostics of a mode, if any.
    pub fn constraint_map(&self, mode: Mode, initial: &State) -> Result<Option<SubspaceFn<'_>>> {
        let Some(spec) = &self.constraint else {
            return Ok(None);
        };
        Ok(Some(match mode {
            Mode::Nonholonomic => {
                let d = spec.subspace(initial)?;
                Box::new(move |_: &State| Ok(d.clone()))
            }
            _ => Box::new(move |s: &State| spec.subspace(s)),
        }))
    }

    /// Random group element and a velocity in `𝔡` (or in `𝔥` without a constraint).
    pub fn sample_state(&self, rng: &mut ChaCha8Rng) -> Result<State> {
        let sig = self.signature();
        let c: Vec<f64> = (0..sig.dim()).map(|_| rng.gen_range(-PI..PI)).collect();
        let g = GroupElement::exp(&AlgebraVector::from_slice(sig, &c)?);
        let probe = State::new(0.0, g.clone(), AlgebraVector::zeros(sig))?;
        let basis = match &self.constraint {
            Some(spec) => spec.subspace(&probe)?,
            None => self.structure.horizontal().clone(),
        };
        let c: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xi = AlgebraVector::new(sig.clone(), basis.basis() * DVector::from_vec(c))?;
        State::new(0.0, g, xi)
    }
}

/// `‖𝕁Ω‖` for the rolling-sphere body velocity (second factor).
pub fn rigid_body_casimir(j: [f64; 3], xi: &AlgebraVector) -> f64 {
    let w = xi.block(1);
    ((j[0] * w[0]).powi(2) + (j[1] * w[1]).powi(2) + (j[2] * w[2]).powi(2)).sqrt()
}

fn param(params: &BTreeMap<String, f64>, key: &str) -> f64 {
    params[key]
}

/// Euclidean 3-space as `SE(3)/SO(3)` with the identity metric and
/// potential `½k‖r‖²`.
pub fn build_se3_r3(k: f64) -> Result<Scenario> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "stiffness k must be finite and >= 0, got {k}"
        )));
    }
    let sig = Signature::se3();
    let structure = HomogeneousStructure::new(sig.clone(), vec![FactorProjection::RigidToPoint], Metric::identity(6))?;
    let potential = (k > 0.0).then(|| Potential {
        value: Some(Arc::new(move |q: &HomogeneousPoint| match q.factors()[0] {
            PointFactor::Point(r) => 0.5 * k * r.norm_squared(),
            _ => f64::NAN,
        })),
        differential: Some(Arc::new(move |g: &GroupElement| {
            let d = match g.factor(0) {
                Factor::Rigid { rotation, translation } => rotation.transpose().apply(translation) * k,
                _ => Vec3::repeat(f64::NAN),
            };
            CoAlgebraVector::from_slice(g.signature(), &[d.x, d.y, d.z, 0.0, 0.0, 0.0]).expect("six coefficients")
        })),
    });
    let initial = State::new(
        0.0,
        GroupElement::identity(&sig),
        AlgebraVector::from_slice(&sig, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])?,
    )?;
    Ok(Scenario {
        name: SE3_R3.into(),
        structure,
        potential,
        constraint: None,
        closed_form_control: None,
        parameters: BTreeMap::from([("k".into(), k)]),
        initial,
    })
}

/// Closed-form control for the rolling sphere:
/// `u₁ = (J₃−J₂)/(J₁+1)·Ω₂Ω₃`, `u₂ = (J₁−J₃)/(J₂+1)·Ω₁Ω₃`.
pub fn sphere_on_sphere_control(j: [f64; 3], omega: &[f64]) -> [f64; 2] {
    [
        (j[2] - j[1]) / (j[0] + 1.0) * omega[1] * omega[2],
        (j[0] - j[2]) / (j[1] + 1.0) * omega[0] * omega[2],
    ]
}

/// Sphere rolling without slipping on a sphere of radius `rho`.
/// `G = SO(3)×SO(3)`, `H = 𝕊²×SO(3)`, metric `(I, 𝕁)`.
pub fn build_sphere_on_sphere(j: [f64; 3], rho: f64) -> Result<Scenario> {
    if !j.iter().all(|x| *x > 0.0 && x.is_finite()) {
        return Err(Error::NonPositiveInertia(j));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "radius ratio rho must be positive, got {rho}"
        )));
    }
    let sig = Signature::so3_so3();
    let metric = Metric::from_diagonal(&[1.0, 1.0, 1.0, j[0], j[1], j[2]])?;
    let structure = HomogeneousStructure::new(
        sig.clone(),
        vec![
            FactorProjection::RotationToSphere { base: Vec3::z() },
            FactorProjection::RotationToRotation,
        ],
        metric.clone(),
    )?;
    let v = |c: [f64; 6]| AlgebraVector::from_slice(&sig, &c);
    let d = Subspace::orthonormalize(
        &metric,
        &[
            v([-1.0, 0.0, 0.0, 1.0, 0.0, 0.0])?,
            v([0.0, -1.0, 0.0, 0.0, 1.0, 0.0])?,
            v([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])?,
        ],
    )?;
    // f_a = ♯(ê_a, ê_a)
    let inputs = (0..2)
        .map(|a| {
            let mut c = [0.0; 6];
            c[a] = 1.0;
            c[3 + a] = 1.0;
            Ok(metric.sharp(&CoAlgebraVector::from_slice(&sig, &c)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let closed_form: ClosedFormControl = Arc::new(move |s: &State| {
        let u = sphere_on_sphere_control(j, s.xi.block(1));
        DVector::from_column_slice(&u)
    });
    let omega = [0.1, 0.2, 0.3];
    let initial = State::new(
        0.0,
        GroupElement::identity(&sig),
        v([-omega[0], -omega[1], 0.0, omega[0], omega[1], omega[2]])?,
    )?;
    Ok(Scenario {
        name: SPHERE_ON_SPHERE.into(),
        structure,
        potential: None,
        constraint: Some(ConstraintSpec::fixed(d, inputs)),
        closed_form_control: Some(closed_form),
        parameters: BTreeMap::from([
            ("J1".into(), j[0]),
            ("J2".into(), j[1]),
            ("J3".into(), j[2]),
            ("rho".into(), rho),
        ]),
        initial,
    })
}

/// Heading angle `ϑ` of the blade, the circle factor of `g`.
pub fn blade_heading(g: &GroupElement) -> f64 {
    match g.factor(1) {
        Factor::Angle(a) => *a,
        _ => f64::NAN,
    }
}

/// Closed-form control for the blade: `u = ω(Π₁ sinϑ − Π₂ cosϑ)`.
pub fn blade_control(theta: f64, pi: &[f64], omega: f64) -> f64 {
    omega * (pi[0] * theta.sin() - pi[1] * theta.cos())
}

/// Blade moving on the unit sphere. `G = SO(3)×S¹`, `H = 𝕊²×S¹`, identity
/// metric, heading-dependent knife-edge constraint.
pub fn build_blade_on_sphere() -> Result<Scenario> {
    let sig = Signature::so3_circle();
    let metric = Metric::identity(4);
    let structure = HomogeneousStructure::new(
        sig.clone(),
        vec![
            FactorProjection::RotationToSphere { base: Vec3::z() },
            FactorProjection::AngleToAngle,
        ],
        metric.clone(),
    )?;
    let d_sig = sig.clone();
    let d_metric = metric.clone();
    let d = Arc::new(move |s: &State| {
        let t = blade_heading(&s.g);
        Subspace::orthonormalize(
            &d_metric,
            &[
                AlgebraVector::from_slice(&d_sig, &[-t.sin(), t.cos(), 0.0, 0.0])?,
                AlgebraVector::from_slice(&d_sig, &[0.0, 0.0, 0.0, 1.0])?,
            ],
        )
    });
    let f_sig = sig.clone();
    let inputs = Arc::new(move |s: &State| {
        let t = blade_heading(&s.g);
        vec![AlgebraVector::from_slice(&f_sig, &[t.cos(), t.sin(), 0.0, 0.0]).expect("four coefficients")]
    });
    // μ = (cosϑ, sinϑ, 0, 0), ϑ̇ = ω
    let rate = Arc::new(|s: &State| {
        let t = blade_heading(&s.g);
        let w = s.xi.as_slice()[3];
        DMatrix::from_row_slice(1, 4, &[-w * t.sin(), w * t.cos(), 0.0, 0.0])
    });
    let closed_form: ClosedFormControl = Arc::new(|s: &State| {
        DVector::from_element(1, blade_control(blade_heading(&s.g), s.xi.block(0), s.xi.as_slice()[3]))
    });
    let theta0: f64 = 0.0;
    let initial = State::new(
        0.0,
        GroupElement::new(
            sig.clone(),
            vec![Factor::identity(crate::lie::GroupKind::So3), Factor::Angle(theta0)],
        )?,
        AlgebraVector::from_slice(&sig, &[-0.3 * theta0.sin(), 0.3 * theta0.cos(), 0.0, 1.0])?,
    )?;
    Ok(Scenario {
        name: BLADE_ON_SPHERE.into(),
        structure,
        potential: None,
        constraint: Some(ConstraintSpec {
            d,
            inputs,
            mu_rate: MuRate::Analytic(rate),
        }),
        closed_form_control: Some(closed_form),
        parameters: BTreeMap::new(),
        initial,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ParameterInfo {
    pub name: &'static str,
    pub default: f64,
    pub description: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub group: &'static str,
    pub space: &'static str,
    pub modes: Vec<Mode>,
    pub parameters: Vec<ParameterInfo>,
    /// Length of `initial.xi`.
    pub algebra_dim: usize,
    /// Length of `initial.g` (rotations row-major, translations, angles).
    pub group_flat_len: usize,
}

pub fn default_parameters(name: &str) -> Result<Vec<ParameterInfo>> {
    Ok(match name {
        SE3_R3 => vec![ParameterInfo {
            name: "k",
            default: 0.0,
            description: "stiffness of the potential k|r|^2/2",
        }],
        SPHERE_ON_SPHERE => vec![
            ParameterInfo {
                name: "J1",
                default: 1.0,
                description: "principal inertia 1",
            },
            ParameterInfo {
                name: "J2",
                default: 2.0,
                description: "principal inertia 2",
            },
            ParameterInfo {
                name: "J3",
                default: 3.0,
                description: "principal inertia 3",
            },
            ParameterInfo {
                name: "rho",
                default: 2.0,
                description: "radius of the fixed sphere (stored, not used by the reduced dynamics)",
            },
        ],
        BLADE_ON_SPHERE => Vec::new(),
        other => return Err(Error::UnknownScenario(other.into())),
    })
}

/// Builds a scenario by name, with parameter overrides on top of the defaults.
pub fn build(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario> {
    let defaults = default_parameters(name)?;
    let mut params: BTreeMap<String, f64> = defaults.iter().map(|p| (p.name.to_string(), p.default)).collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::config(
                format!("parameters.{k}"),
                format!("unknown parameter for scenario `{name}`"),
            ));
        }
        params.insert(k.clone(), *v);
    }
    match name {
        SE3_R3 => build_se3_r3(param(&params, "k")),
        SPHERE_ON_SPHERE => build_sphere_on_sphere(
            [param(&params, "J1"), param(&params, "J2"), param(&params, "J3")],
            param(&params, "rho"),
        ),
        BLADE_ON_SPHERE => build_blade_on_sphere(),
        other => Err(Error::UnknownScenario(other.into())),
    }
}

pub fn list() -> Vec<ScenarioInfo> {
    SCENARIO_NAMES
        .iter()
        .map(|&name| {
            let s = build(name, &BTreeMap::new()).expect("defaults build");
            let (group, space) = match name {
                SE3_R3 => ("SE(3)", "R3"),
                SPHERE_ON_SPHERE => ("SO(3)xSO(3)", "S2xSO(3)"),
                _ => ("SO(3)xS1", "S2xS1"),
            };
            ScenarioInfo {
                name,
                group,
                space,
                modes: s.modes(),
                parameters: default_parameters(name).expect("known name"),
                algebra_dim: s.signature().dim(),
                group_flat_len: s.initial.g.to_flat().len(),
            }
        })
        .collect()
}

/// One property checked by [`verify_scenario`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub comparison: &'static str,
    pub tolerance: f64,
    pub worst: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub pass: bool,
    pub properties: Vec<PropertyResult>,
}

impl VerificationReport {
    pub fn property(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

struct Collector {
    properties: Vec<PropertyResult>,
}

impl Collector {
    fn at_most(&mut self, name: &str, tolerance: f64, worst: f64) {
        self.properties.push(PropertyResult {
            name: name.into(),
            comparison: "<=",
            tolerance,
            worst,
            pass: worst <= tolerance,
        });
    }

    fn above(&mut self, name: &str, tolerance: f64, worst: f64) {
        self.properties.push(PropertyResult {
            name: name.into(),
            comparison: ">",
            tolerance,
            worst,
            pass: worst > tolerance,
        });
    }

    /// Runs `f` over samples, tracking the largest value; errors count as `∞`.
    fn max_over(&mut self, name: &str, tolerance: f64, n: usize, mut f: impl FnMut() -> Result<f64>) {
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            worst = worst.max(f().unwrap_or(f64::INFINITY));
        }
        self.at_most(name, tolerance, worst);
    }
}

fn random_algebra(rng: &mut ChaCha8Rng, sig: &Signature, scale: f64) -> AlgebraVector {
    let c: Vec<f64> = (0..sig.dim()).map(|_| rng.gen_range(-scale..scale)).collect();
    AlgebraVector::from_slice(sig, &c).expect("length matches signature")
}

fn random_group(rng: &mut ChaCha8Rng, sig: &Signature) -> GroupElement {
    GroupElement::exp(&random_algebra(rng, sig, PI))
}

/// Runs the property suite against one scenario. Deterministic given `seed`.
pub fn verify_scenario(scenario: &Scenario, n_samples: usize, seed: u64) -> VerificationReport {
    let n = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Collector { properties: Vec::new() };
    let s = &scenario.structure;
    let metric = s.metric();
    let sig = s.signature().clone();

    c.above(
        "metric positive definite (min eigenvalue)",
        0.0,
        metric.min_eigenvalue(),
    );
    c.at_most("metric symmetry", 1e-12, metric.symmetry_defect());
    if !c.properties.iter().all(|p| p.pass) {
        return finish(scenario, seed, n, c);
    }

    // algebra identities
    c.max_over("hat/vee round trip", 1e-11, n, || {
        let v = Vec3::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        Ok((vee(&hat(&v))? - v).norm())
    });
    c.max_over("Jacobi identity", 1e-11, n, || {
        let (x, y, z) = (
            random_algebra(&mut rng, &sig, 1.0),
            random_algebra(&mut rng, &sig, 1.0),
            random_algebra(&mut rng, &sig, 1.0),
        );
        let j = ad(&x, &ad(&y, &z)?)? + ad(&y, &ad(&z, &x)?)? + ad(&z, &ad(&x, &y)?)?;
        Ok(j.norm())
    });
    c.max_over("ad/ad* duality", 1e-11, n, || {
        let (x, y) = (random_algebra(&mut rng, &sig, 1.0), random_algebra(&mut rng, &sig, 1.0));
        let mu = CoAlgebraVector::new(sig.clone(), random_algebra(&mut rng, &sig, 1.0).coeffs().clone())?;
        Ok((ad_star(&x, &mu)?.pair(&y) - mu.pair(&ad(&x, &y)?)).abs())
    });
    c.max_over("connection metric compatibility", 1e-11, n, || {
        let (x, y, z) = (
            random_algebra(&mut rng, &sig, 1.0),
            random_algebra(&mut rng, &sig, 1.0),
            random_algebra(&mut rng, &sig, 1.0),
        );
        Ok((metric.inner(&g_connection(metric, &x, &y)?, &z) + metric.inner(&y, &g_connection(metric, &x, &z)?)).abs())
    });
    c.max_over("connection torsion-free", 1e-11, n, || {
        let (x, y) = (random_algebra(&mut rng, &sig, 1.0), random_algebra(&mut rng, &sig, 1.0));
        Ok((g_connection(metric, &x, &y)? - g_connection(metric, &y, &x)? - ad(&x, &y)?).norm())
    });
    c.max_over("projector idempotence", 1e-11, n, || {
        let x = random_algebra(&mut rng, &sig, 1.0);
        let p = project(s.horizontal(), metric, &x);
        Ok((project(s.horizontal(), metric, &p) - p).norm())
    });
    c.max_over("projector self-adjointness", 1e-11, n, || {
        let (x, y) = (random_algebra(&mut rng, &sig, 1.0), random_algebra(&mut rng, &sig, 1.0));
        let h = s.horizontal();
        Ok((metric.inner(&project(h, metric, &x), &y) - metric.inner(&x, &project(h, metric, &y))).abs())
    });

    // homogeneous structure
    let e = GroupElement::identity(&sig);
    let kernel = s
        .vertical()
        .vectors()
        .iter()
        .map(|v| s.pushforward_fd(&e, v, FD_STEP).map(|d| d.amax()))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    c.at_most(
        "vertical subspace is the kernel of the projection differential",
        1e-6,
        kernel,
    );
    let injective = s
        .horizontal()
        .vectors()
        .iter()
        .map(|h| s.pushforward_fd(&e, h, FD_STEP))
        .collect::<Result<Vec<_>>>()
        .map(|cols| min_singular_value(&DMatrix::from_columns(&cols)))
        .unwrap_or(0.0);
    c.above(
        "projection differential injective on horizontal subspace",
        1e-6,
        injective,
    );
    c.max_over("equivariance of the projection", 1e-12, n, || {
        let (a, g) = (random_group(&mut rng, &sig), random_group(&mut rng, &sig));
        Ok(s.pi(&a.compose(&g)?)?.distance(&s.action(&a, &s.pi(&g)?)?))
    });
    c.max_over("action composition", 1e-12, n, || {
        let (a, b, g) = (
            random_group(&mut rng, &sig),
            random_group(&mut rng, &sig),
            random_group(&mut rng, &sig),
        );
        let q = s.pi(&g)?;
        Ok(s.action(&a.compose(&b)?, &q)?
            .distance(&s.action(&a, &s.action(&b, &q)?)?))
    });
    c.max_over("action identity", 1e-12, n, || {
        let q = s.pi(&random_group(&mut rng, &sig))?;
        Ok(s.action(&e, &q)?.distance(&q))
    });
    c.max_over("left-trivialization round trip", 1e-12, n, || {
        let g = random_group(&mut rng, &sig);
        let xi = random_algebra(&mut rng, &sig, 2.0);
        Ok((left_trivialize(&g, &tangent_from_algebra(&g, &xi)?)? - xi).norm())
    });
    let horizontal_run = (|| -> Result<f64> {
        let mut probe = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let start = scenario.sample_state(&mut probe)?;
        let rhs = mechanical_rhs(s, scenario.potential.as_ref());
        let obs = Observer::new(s);
        Ok(simulate(&obs, &rhs, &start, 1.0, 1e-2)?.max_vertical_residual())
    })()
    .unwrap_or(f64::INFINITY);
    c.at_most("horizontal trajectories stay horizontal", 1e-7, horizontal_run);

    if let Some(p) = &scenario.potential {
        let numeric = Potential {
            value: p.value.clone(),
            differential: None,
        };
        c.max_over("gradient horizontality", 1e-8, n, || {
            let g = random_group(&mut rng, &sig);
            Ok(s.vertical_residual(&trivialized_gradient(s, Some(p), &g)?))
        });
        if p.value.is_some() && p.differential.is_some() {
            c.max_over("gradient finite-difference agreement", 1e-6, n, || {
                let g = random_group(&mut rng, &sig);
                Ok((trivialized_gradient(s, Some(p), &g)? - trivialized_gradient(s, Some(&numeric), &g)?).norm())
            });
        }
    }

    if let Some(spec) = &scenario.constraint {
        let states: Vec<State> = (0..n).filter_map(|_| scenario.sample_state(&mut rng).ok()).collect();
        let potential = scenario.potential.as_ref();
        let over_states = |f: &dyn Fn(&State) -> Result<f64>, max: bool| -> f64 {
            let init = if max { 0.0 } else { f64::INFINITY };
            states.iter().fold(init, |acc: f64, st| {
                let v = f(st).unwrap_or(if max { f64::INFINITY } else { 0.0 });
                if max {
                    acc.max(v)
                } else {
                    acc.min(v)
                }
            })
        };
        let transversal = over_states(
            &|st| {
                let r = check_transversality(s, spec, st)?;
                Ok(if r.pass {
                    r.stacked_sigma.min(r.decoupling_sigma)
                } else {
                    0.0
                })
            },
            false,
        );
        c.above("transversality", 1e-8, transversal);
        if let Some(cf) = &scenario.closed_form_control {
            let agreement = over_states(
                &|st| Ok((solve_control(s, potential, spec, st)?.u - cf(st)).amax()),
                true,
            );
            c.at_most("closed-form control agreement", 1e-10, agreement);
        }
        let invariance = over_states(&|st| Ok(solve_control(s, potential, spec, st)?.residual), true);
        c.at_most("instantaneous constraint invariance", 1e-11, invariance);
        let probes: Vec<AlgebraVector> = states
            .iter()
            .map(|_| s.horizontal_part(&random_algebra(&mut rng, &sig, 1.0)))
            .collect();
        let reconstruction = states.iter().zip(&probes).fold(0.0_f64, |acc, (st, v)| {
            let r = (|| -> Result<f64> {
                let (eta, tau) = decompose_drift(s, spec, st, v)?;
                let mut rebuilt = eta;
                for (t, f) in tau.iter().zip(spec.input_vectors(st)) {
                    rebuilt = rebuilt + f * *t;
                }
                Ok((rebuilt - v.clone()).norm())
            })();
            acc.max(r.unwrap_or(f64::INFINITY))
        });
        c.at_most("drift decomposition reconstruction", 1e-11, reconstruction);
        let scaled = spec.with_scaled_inputs(2.5);
        let rhs = closed_loop_rhs(s, potential, spec);
        let rhs_scaled = closed_loop_rhs(s, potential, &scaled);
        let covariance = over_states(
            &|st| {
                let u = solve_control(s, potential, spec, st)?.u;
                let us = solve_control(s, potential, &scaled, st)?.u;
                Ok((u / 2.5 - us).amax().max((rhs(st)? - rhs_scaled(st)?).norm()))
            },
            true,
        );
        c.at_most("scaling covariance", 1e-12, covariance);
        if let MuRate::Analytic(_) = spec.mu_rate {
            let fd = ConstraintSpec {
                mu_rate: MuRate::FiniteDifference,
                ..spec.clone()
            };
            let rate = over_states(&|st| Ok((mu_rate(s, spec, st)? - mu_rate(s, &fd, st)?).amax()), true);
            c.at_most("constraint rate finite-difference agreement", 1e-6, rate);
        }
    }
    finish(scenario, seed, n, c)
}

fn finish(scenario: &Scenario, seed: u64, n: usize, c: Collector) -> VerificationReport {
    VerificationReport {
        scenario: scenario.name.clone(),
        seed,
        samples: n,
        pass: c.properties.iter().all(|p| p.pass),
        properties: c.properties,
    }
}

/// Replaces the metric of a scenario without any checks, for exercising the
/// diagnostics on a broken model.
pub fn with_corrupted_metric(mut scenario: Scenario, gram: DMatrix<f64>) -> Scenario {
    scenario.structure = scenario
        .structure
        .with_metric_unchecked(Metric::from_gram_unchecked(gram));
    scenario
}

/// `𝕁` as a matrix, for the rolling-sphere scenario.
pub fn inertia_matrix(scenario: &Scenario) -> Matrix3<f64> {
    let p = &scenario.parameters;
    Matrix3::from_diagonal(&Vec3::new(p["J1"], p["J2"], p["J3"]))
}
