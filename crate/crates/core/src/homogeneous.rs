//! Homogeneous spaces `H = G/K`: the projection `π`, the action of `G` on
//! `H`, the vertical/horizontal splitting `𝔤 = 𝔰 ⊕ 𝔥`, left-trivialization of
//! group velocities and left-trivialized potential gradients.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::connections::{project, Metric, Subspace};
use crate::error::{Error, Result};
use crate::lie::{
    angle_difference, hat, normalize_angle, vee, AlgebraVector, CoAlgebraVector, Factor, GroupElement, GroupKind, Rot3,
    Signature, Vec3,
};

/// Finite-difference step used in exponential coordinates.
pub const FD_STEP: f64 = 1e-6;

/// Default tolerance for horizontality checks.
pub const HORIZONTAL_TOLERANCE: f64 = 1e-8;

const UNIT_TOLERANCE: f64 = 1e-10;

/// One factor of a point of `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointFactor {
    /// Unit vector on the 2-sphere.
    Sphere(Vec3),
    /// Point of Euclidean 3-space.
    Point(Vec3),
    Rotation(Rot3),
    /// Angle in `[0, 2π)`.
    Angle(f64),
}

impl PointFactor {
    pub fn flat_len(&self) -> usize {
        match self {
            PointFactor::Sphere(_) | PointFactor::Point(_) => 3,
            PointFactor::Rotation(_) => 9,
            PointFactor::Angle(_) => 1,
        }
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            PointFactor::Sphere(v) | PointFactor::Point(v) => out.extend_from_slice(v.as_slice()),
            PointFactor::Rotation(r) => out.extend_from_slice(&r.to_row_major()),
            PointFactor::Angle(a) => out.push(*a),
        }
    }
}

/// Point of a homogeneous space, as an ordered list of factor values.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousPoint {
    factors: Vec<PointFactor>,
}

impl HomogeneousPoint {
    pub fn new(factors: Vec<PointFactor>) -> Result<Self> {
        for f in &factors {
            if let PointFactor::Sphere(v) = f {
                let defect = (v.norm() - 1.0).abs();
                if !(defect <= UNIT_TOLERANCE) {
                    return Err(Error::InvalidArgument(format!(
                        "sphere factor is not a unit vector (|‖v‖ − 1| = {defect:e})"
                    )));
                }
            }
        }
        Ok(HomogeneousPoint { factors })
    }

    pub fn factors(&self) -> &[PointFactor] {
        &self.factors
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in &self.factors {
            f.write_flat(&mut out);
        }
        out
    }

    /// Sum of factor-wise distances (Euclidean, Frobenius, wrapped angle).
    pub fn distance(&self, other: &HomogeneousPoint) -> f64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| match (a, b) {
                (PointFactor::Sphere(x), PointFactor::Sphere(y)) | (PointFactor::Point(x), PointFactor::Point(y)) => {
                    (x - y).norm()
                }
                (PointFactor::Rotation(x), PointFactor::Rotation(y)) => (x.matrix() - y.matrix()).norm(),
                (PointFactor::Angle(x), PointFactor::Angle(y)) => angle_difference(*x, *y).abs(),
                _ => f64::INFINITY,
            })
            .sum()
    }
}

/// Local tangent coordinates of `a` relative to `b`: ambient differences for
/// sphere and Euclidean factors, body log `log(bᵀa)` for rotations and
/// wrapped difference for angles.
pub fn point_difference(a: &HomogeneousPoint, b: &HomogeneousPoint) -> Vec<f64> {
    let mut out = Vec::new();
    for (x, y) in a.factors.iter().zip(&b.factors) {
        match (x, y) {
            (PointFactor::Sphere(x), PointFactor::Sphere(y)) | (PointFactor::Point(x), PointFactor::Point(y)) => {
                out.extend_from_slice((x - y).as_slice())
            }
            (PointFactor::Rotation(x), PointFactor::Rotation(y)) => {
                out.extend_from_slice((y.transpose() * *x).log().as_slice())
            }
            (PointFactor::Angle(x), PointFactor::Angle(y)) => out.push(angle_difference(*y, *x)),
            _ => out.push(f64::NAN),
        }
    }
    out
}

/// How one group factor projects to one factor of `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactorProjection {
    /// `SE(3) → ℝ³`, `(R, r) ↦ r`.
    RigidToPoint,
    /// `SO(3) → 𝕊²`, `S ↦ S·base`.
    RotationToSphere { base: Vec3 },
    /// `SO(3) → SO(3)`, identity.
    RotationToRotation,
    /// `S¹ → S¹`, identity.
    AngleToAngle,
}

impl FactorProjection {
    fn kind(&self) -> GroupKind {
        match self {
            FactorProjection::RigidToPoint => GroupKind::Se3,
            FactorProjection::RotationToSphere { .. } | FactorProjection::RotationToRotation => GroupKind::So3,
            FactorProjection::AngleToAngle => GroupKind::Circle,
        }
    }

    fn tangent_dim(&self) -> usize {
        match self {
            FactorProjection::AngleToAngle => 1,
            _ => 3,
        }
    }

    fn project(&self, f: &Factor) -> Result<PointFactor> {
        Ok(match (self, f) {
            (FactorProjection::RigidToPoint, Factor::Rigid { translation, .. }) => PointFactor::Point(*translation),
            (FactorProjection::RotationToSphere { base }, Factor::Rotation(s)) => PointFactor::Sphere(s.apply(base)),
            (FactorProjection::RotationToRotation, Factor::Rotation(r)) => PointFactor::Rotation(*r),
            (FactorProjection::AngleToAngle, Factor::Angle(a)) => PointFactor::Angle(*a),
            _ => {
                return Err(Error::SignatureMismatch {
                    expected: self.kind().name().into(),
                    found: f.kind().name().into(),
                })
            }
        })
    }

    fn act(&self, f: &Factor, q: &PointFactor) -> Result<PointFactor> {
        Ok(match (self, f, q) {
            (FactorProjection::RigidToPoint, Factor::Rigid { rotation, translation }, PointFactor::Point(x)) => {
                PointFactor::Point(rotation.apply(x) + translation)
            }
            (FactorProjection::RotationToSphere { .. }, Factor::Rotation(s), PointFactor::Sphere(r)) => {
                PointFactor::Sphere(s.apply(r))
            }
            (FactorProjection::RotationToRotation, Factor::Rotation(r), PointFactor::Rotation(t)) => {
                PointFactor::Rotation(*r * *t)
            }
            (FactorProjection::AngleToAngle, Factor::Angle(phi), PointFactor::Angle(theta)) => {
                PointFactor::Angle(normalize_angle(phi + theta))
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "point does not match the homogeneous space".into(),
                ))
            }
        })
    }

    /// `T_gπ(g·ξ)` for one factor, in the coordinates of [`point_difference`].
    fn pushforward(&self, f: &Factor, xi: &[f64]) -> Vec<f64> {
        match (self, f) {
            (FactorProjection::RigidToPoint, Factor::Rigid { rotation, .. }) => {
                rotation.apply(&Vec3::new(xi[0], xi[1], xi[2])).as_slice().to_vec()
            }
            (FactorProjection::RotationToSphere { base }, Factor::Rotation(s)) => {
                s.apply(&Vec3::new(xi[0], xi[1], xi[2]).cross(base)).as_slice().to_vec()
            }
            (FactorProjection::RotationToRotation, Factor::Rotation(_)) => xi.to_vec(),
            (FactorProjection::AngleToAngle, Factor::Angle(_)) => xi.to_vec(),
            _ => vec![f64::NAN; self.tangent_dim()],
        }
    }

    /// Algebra coordinates (within the factor block) spanning `ker T_eπ`.
    fn kernel(&self) -> Vec<Vec<f64>> {
        match self {
            FactorProjection::RigidToPoint => (3..6)
                .map(|i| {
                    let mut v = vec![0.0; 6];
                    v[i] = 1.0;
                    v
                })
                .collect(),
            FactorProjection::RotationToSphere { base } => vec![base.normalize().as_slice().to_vec()],
            FactorProjection::RotationToRotation | FactorProjection::AngleToAngle => Vec::new(),
        }
    }
}

/// Result of a horizontality check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Horizontality {
    /// Metric norm of the vertical component.
    pub residual: f64,
    pub horizontal: bool,
}

/// Projection `π: G → H`, action, and the splitting `𝔤 = 𝔰 ⊕ 𝔥`.
#[derive(Clone, Debug)]
pub struct HomogeneousStructure {
    signature: Signature,
    projections: Vec<FactorProjection>,
    metric: Metric,
    vertical: Subspace,
    horizontal: Subspace,
}

impl HomogeneousStructure {
    pub fn new(signature: Signature, projections: Vec<FactorProjection>, metric: Metric) -> Result<Self> {
        if projections.len() != signature.len() {
            return Err(Error::DimensionMismatch {
                expected: signature.len(),
                found: projections.len(),
            });
        }
        for (p, &k) in projections.iter().zip(signature.kinds()) {
            if p.kind() != k {
                return Err(Error::SignatureMismatch {
                    expected: k.name().into(),
                    found: p.kind().name().into(),
                });
            }
        }
        if metric.dim() != signature.dim() {
            return Err(Error::DimensionMismatch {
                expected: signature.dim(),
                found: metric.dim(),
            });
        }
        metric.validate()?;
        let mut kernel = Vec::new();
        for ((_, off), p) in signature.blocks().zip(&projections) {
            for local in p.kernel() {
                let mut c = vec![0.0; signature.dim()];
                c[off..off + local.len()].copy_from_slice(&local);
                kernel.push(AlgebraVector::from_slice(&signature, &c)?);
            }
        }
        let vertical = if kernel.is_empty() {
            Subspace::zero(&signature, &metric)
        } else {
            Subspace::orthonormalize(&metric, &kernel)?
        };
        let horizontal = vertical.complement(&metric);
        Ok(HomogeneousStructure {
            signature,
            projections,
            metric,
            vertical,
            horizontal,
        })
    }

    /// Replaces the metric without validation or rebuilding the splitting.
    /// Only meant for exercising diagnostics on broken input.
    pub fn with_metric_unchecked(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn projections(&self) -> &[FactorProjection] {
        &self.projections
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn vertical(&self) -> &Subspace {
        &self.vertical
    }

    pub fn horizontal(&self) -> &Subspace {
        &self.horizontal
    }

    /// Dimension of `H`.
    pub fn dim(&self) -> usize {
        self.horizontal.dim()
    }

    /// Length of the tangent coordinates produced by [`Self::pushforward`].
    pub fn tangent_len(&self) -> usize {
        self.projections.iter().map(FactorProjection::tangent_dim).sum()
    }

    pub fn pi(&self, g: &GroupElement) -> Result<HomogeneousPoint> {
        self.signature.ensure_eq(g.signature())?;
        let factors = self
            .projections
            .iter()
            .zip(g.factors())
            .map(|(p, f)| p.project(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(HomogeneousPoint { factors })
    }

    pub fn base_point(&self) -> HomogeneousPoint {
        self.pi(&GroupElement::identity(&self.signature))
            .expect("identity matches its own signature")
    }

    /// `Φ_a(q)`.
    pub fn action(&self, a: &GroupElement, q: &HomogeneousPoint) -> Result<HomogeneousPoint> {
        self.signature.ensure_eq(a.signature())?;
        if q.factors.len() != self.projections.len() {
            return Err(Error::DimensionMismatch {
                expected: self.projections.len(),
                found: q.factors.len(),
            });
        }
        let factors = self
            .projections
            .iter()
            .zip(a.factors())
            .zip(&q.factors)
            .map(|((p, f), x)| p.act(f, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(HomogeneousPoint { factors })
    }

    /// `T_gπ(T_eL_g ξ)` in the local coordinates of [`point_difference`].
    pub fn pushforward(&self, g: &GroupElement, xi: &AlgebraVector) -> Result<DVector<f64>> {
        self.signature.ensure_eq(g.signature())?;
        self.signature.ensure_eq(xi.signature())?;
        let mut out = Vec::with_capacity(self.tangent_len());
        for (((_, off), p), f) in self.signature.blocks().zip(&self.projections).zip(g.factors()) {
            let k = f.kind().dim();
            out.extend(p.pushforward(f, &xi.as_slice()[off..off + k]));
        }
        Ok(DVector::from_vec(out))
    }

    /// Central-difference approximation of [`Self::pushforward`].
    pub fn pushforward_fd(&self, g: &GroupElement, xi: &AlgebraVector, eps: f64) -> Result<DVector<f64>> {
        let plus = self.pi(&g.right_exp(&(xi * eps))?)?;
        let minus = self.pi(&g.right_exp(&(xi * -eps))?)?;
        let d = point_difference(&plus, &minus);
        Ok(DVector::from_iterator(d.len(), d.into_iter().map(|x| x / (2.0 * eps))))
    }

    pub fn is_horizontal(&self, xi: &AlgebraVector, tol: f64) -> Horizontality {
        let residual = self.metric.norm(&project(&self.vertical, &self.metric, xi));
        Horizontality {
            residual,
            horizontal: residual <= tol,
        }
    }

    pub fn vertical_residual(&self, xi: &AlgebraVector) -> f64 {
        self.is_horizontal(xi, HORIZONTAL_TOLERANCE).residual
    }

    pub fn horizontal_part(&self, xi: &AlgebraVector) -> AlgebraVector {
        project(&self.horizontal, &self.metric, xi)
    }
}

/// Tangent vector at one group factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactorTangent {
    Rotation(Matrix3<f64>),
    Rigid { rotation: Matrix3<f64>, translation: Vec3 },
    Angle(f64),
}

/// Tangent vector `ġ ∈ T_gG` of a product group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupTangent {
    pub factors: Vec<FactorTangent>,
}

/// `ξ = T_gL_{g⁻¹}(ġ)`.
pub fn left_trivialize(g: &GroupElement, gdot: &GroupTangent) -> Result<AlgebraVector> {
    if gdot.factors.len() != g.factors().len() {
        return Err(Error::DimensionMismatch {
            expected: g.factors().len(),
            found: gdot.factors.len(),
        });
    }
    let skew_part = |r: &Rot3, rdot: &Matrix3<f64>| -> Result<Vec3> {
        vee(&(r.matrix().transpose() * rdot)).map_err(|e| match e {
            Error::NotSkew { residual } => Error::NotTangent { residual },
            other => other,
        })
    };
    let mut coeffs = Vec::with_capacity(g.signature().dim());
    for (f, t) in g.factors().iter().zip(&gdot.factors) {
        match (f, t) {
            (Factor::Rotation(r), FactorTangent::Rotation(rdot)) => {
                coeffs.extend_from_slice(skew_part(r, rdot)?.as_slice())
            }
            (
                Factor::Rigid { rotation, .. },
                FactorTangent::Rigid {
                    rotation: rdot,
                    translation: tdot,
                },
            ) => {
                let w = skew_part(rotation, rdot)?;
                coeffs.extend_from_slice(rotation.transpose().apply(tdot).as_slice());
                coeffs.extend_from_slice(w.as_slice());
            }
            (Factor::Angle(_), FactorTangent::Angle(a)) => coeffs.push(*a),
            _ => {
                return Err(Error::SignatureMismatch {
                    expected: f.kind().name().into(),
                    found: "mismatched tangent factor".into(),
                })
            }
        }
    }
    AlgebraVector::from_slice(g.signature(), &coeffs)
}

/// `ġ = T_eL_g(ξ)`, the inverse of [`left_trivialize`].
pub fn tangent_from_algebra(g: &GroupElement, xi: &AlgebraVector) -> Result<GroupTangent> {
    g.signature().ensure_eq(xi.signature())?;
    let mut factors = Vec::with_capacity(g.factors().len());
    for ((_, off), f) in g.signature().blocks().zip(g.factors()) {
        let c = &xi.as_slice()[off..];
        factors.push(match f {
            Factor::Rotation(r) => FactorTangent::Rotation(r.matrix() * hat(&Vec3::new(c[0], c[1], c[2]))),
            Factor::Rigid { rotation, .. } => FactorTangent::Rigid {
                rotation: rotation.matrix() * hat(&Vec3::new(c[3], c[4], c[5])),
                translation: rotation.apply(&Vec3::new(c[0], c[1], c[2])),
            },
            Factor::Angle(_) => FactorTangent::Angle(c[0]),
        });
    }
    Ok(GroupTangent { factors })
}

pub type PotentialValueFn = Arc<dyn Fn(&HomogeneousPoint) -> f64 + Send + Sync>;

/// Left-trivialized differential `d(V∘π)(g)∘T_eL_g` as a covector.
pub type PotentialDifferentialFn = Arc<dyn Fn(&GroupElement) -> CoAlgebraVector + Send + Sync>;

/// Potential `V: H → ℝ`, given by its value, its left-trivialized
/// differential, or both.
#[derive(Clone, Default)]
pub struct Potential {
    pub value: Option<PotentialValueFn>,
    pub differential: Option<PotentialDifferentialFn>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("value", &self.value.is_some())
            .field("differential", &self.differential.is_some())
            .finish()
    }
}

impl Potential {
    pub fn value_at(&self, q: &HomogeneousPoint) -> f64 {
        self.value.as_ref().map_or(0.0, |v| v(q))
    }

    /// Differential by central differences of `V(π(g·exp(±ε eᵢ)))`.
    pub fn differential_fd(&self, structure: &HomogeneousStructure, g: &GroupElement) -> Result<CoAlgebraVector> {
        let sig = structure.signature();
        let Some(value) = &self.value else {
            return Ok(CoAlgebraVector::zeros(sig));
        };
        let mut c = DVector::zeros(sig.dim());
        for i in 0..sig.dim() {
            let e = AlgebraVector::basis(sig, i);
            let plus = value(&structure.pi(&g.right_exp(&(&e * FD_STEP))?)?);
            let minus = value(&structure.pi(&g.right_exp(&(&e * -FD_STEP))?)?);
            c[i] = (plus - minus) / (2.0 * FD_STEP);
        }
        CoAlgebraVector::new(sig.clone(), c)
    }
}

/// `T_gL_{g⁻¹}(grad Ṽ)` for `Ṽ = V∘π`. Uses the analytic differential when
/// available and central differences of the value otherwise.
pub fn trivialized_gradient(
    structure: &HomogeneousStructure,
    potential: Option<&Potential>,
    g: &GroupElement,
) -> Result<AlgebraVector> {
    let sig = structure.signature();
    let Some(p) = potential else {
        return Ok(AlgebraVector::zeros(sig));
    };
    let dv = match &p.differential {
        Some(d) => d(g),
        None => p.differential_fd(structure, g)?,
    };
    sig.ensure_eq(dv.signature())?;
    Ok(structure.metric().sharp(&dv))
}

/// Matrix of `T_eπ` in local coordinates, columns indexed by algebra basis.
pub fn projection_jacobian(structure: &HomogeneousStructure, g: &GroupElement) -> Result<DMatrix<f64>> {
    let sig = structure.signature();
    let cols = (0..sig.dim())
        .map(|i| structure.pushforward(g, &AlgebraVector::basis(sig, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}
