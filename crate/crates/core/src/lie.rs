//! Matrix Lie group primitives for products of SO(3), SE(3) and S¹ factors.
//!
//! A [`GroupElement`] is an ordered product of primitive factors described by a
//! [`Signature`]. Lie algebra elements are flat coefficient vectors in a fixed
//! ordered basis; each factor contributes a contiguous block:
//!
//! | factor  | coefficients                                  |
//! |---------|-----------------------------------------------|
//! | `So3`   | `[ω₁, ω₂, ω₃]` (hat-map coordinates)           |
//! | `Se3`   | `[v₁, v₂, v₃, ω₁, ω₂, ω₃]` (translation first) |
//! | `Circle`| `[ω]`                                          |
//!
//! The hat map follows `hat(x) y = x × y`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Below this rotation angle the Rodrigues coefficients switch to their Taylor series.
const SMALL_ANGLE: f64 = 1e-4;

pub fn hat(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects inputs whose symmetric part exceeds `1e-9` in
/// Frobenius norm; otherwise reads off the skew part.
pub fn vee(a: &Matrix3<f64>) -> Result<Vec3> {
    let residual = (a + a.transpose()).norm();
    if !(residual <= 1e-9) {
        return Err(Error::NotSkew { residual });
    }
    Ok(vee_skew_part(a))
}

pub(crate) fn vee_skew_part(a: &Matrix3<f64>) -> Vec3 {
    Vec3::new(
        0.5 * (a[(2, 1)] - a[(1, 2)]),
        0.5 * (a[(0, 2)] - a[(2, 0)]),
        0.5 * (a[(1, 0)] - a[(0, 1)]),
    )
}

/// Maps an angle to its canonical representative in `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `b - a` of two angles, wrapped into `(-π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Coefficients `(sin θ / θ, (1 - cos θ) / θ², (θ - sin θ) / θ³)`.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        (
            s / theta,
            (1.0 - c) / (theta * theta),
            (theta - s) / (theta * theta * theta),
        )
    }
}

/// Left Jacobian of SO(3); the translational block of the SE(3) exponential.
fn so3_left_jacobian(w: &Vec3) -> Matrix3<f64> {
    let (_, b, c) = rodrigues_coefficients(w.norm());
    let k = hat(w);
    Matrix3::identity() + k * b + k * k * c
}

/// A 3×3 rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot3(Matrix3<f64>);

impl Rot3 {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn identity() -> Self {
        Rot3(Matrix3::identity())
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let defect = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if !(defect <= Self::TOLERANCE) || !((det - 1.0).abs() <= Self::TOLERANCE) {
            return Err(Error::NotRotation { defect, det });
        }
        Ok(Rot3(m))
    }

    /// Rotation by `angle` about the unit direction of `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self::exp(&(axis.normalize() * angle))
    }

    /// Rodrigues formula; falls back to the Taylor series for tiny angles.
    pub fn exp(v: &Vec3) -> Self {
        let (a, b, _) = rodrigues_coefficients(v.norm());
        let k = hat(v);
        Rot3(Matrix3::identity() + k * a + k * k * b)
    }

    /// Rotation vector with angle in `[0, π]`.
    pub fn log(&self) -> Vec3 {
        let r = &self.0;
        let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let theta = cos_theta.acos();
        let skew = vee_skew_part(r);
        if theta < SMALL_ANGLE {
            // vee(R - Rᵀ)/2 = sin θ · n
            return skew * (1.0 + theta * theta / 6.0);
        }
        if PI - theta < 1e-3 {
            // (R + Rᵀ)/2 = cos θ I + (1 - cos θ) n nᵀ
            let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
            let sym = sym / (1.0 - cos_theta);
            let (mut best, mut best_val) = (0, sym[(0, 0)]);
            for i in 1..3 {
                if sym[(i, i)] > best_val {
                    best = i;
                    best_val = sym[(i, i)];
                }
            }
            let mut n: Vec3 = sym.column(best).into();
            n /= n.norm();
            if n.dot(&skew) < 0.0 {
                n = -n;
            }
            return n * theta;
        }
        skew * (theta / theta.sin())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rot3(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::DimensionMismatch {
                expected: 9,
                found: v.len(),
            });
        }
        Self::from_matrix(Matrix3::from_row_slice(v))
    }
}

impl Mul for Rot3 {
    type Output = Rot3;
    fn mul(self, rhs: Rot3) -> Rot3 {
        Rot3(self.0 * rhs.0)
    }
}

/// Primitive factor kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    So3,
    /// Semidirect product SO(3) ⋉ ℝ³ acting on ℝ³ by `x ↦ Rx + r`.
    Se3,
    Circle,
}

impl GroupKind {
    pub fn dim(self) -> usize {
        match self {
            GroupKind::So3 => 3,
            GroupKind::Se3 => 6,
            GroupKind::Circle => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::So3 => "SO(3)",
            GroupKind::Se3 => "SE(3)",
            GroupKind::Circle => "S1",
        }
    }
}

/// Ordered list of factor kinds. Cheap to clone.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature(Arc<[GroupKind]>);

impl Signature {
    pub fn new(kinds: &[GroupKind]) -> Self {
        Signature(kinds.into())
    }

    pub fn se3() -> Self {
        Self::new(&[GroupKind::Se3])
    }

    pub fn so3_so3() -> Self {
        Self::new(&[GroupKind::So3, GroupKind::So3])
    }

    pub fn so3_circle() -> Self {
        Self::new(&[GroupKind::So3, GroupKind::Circle])
    }

    pub fn kinds(&self) -> &[GroupKind] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Dimension of the Lie algebra.
    pub fn dim(&self) -> usize {
        self.0.iter().map(|k| k.dim()).sum()
    }

    /// `(kind, offset)` of each factor's coefficient block.
    pub fn blocks(&self) -> impl Iterator<Item = (GroupKind, usize)> + '_ {
        self.0.iter().scan(0usize, |off, &k| {
            let start = *off;
            *off += k.dim();
            Some((k, start))
        })
    }

    pub(crate) fn ensure_eq(&self, other: &Signature) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SignatureMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|k| k.name()).collect();
        write!(f, "{}", names.join("x"))
    }
}

/// Value of one group factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Factor {
    Rotation(Rot3),
    Rigid {
        rotation: Rot3,
        translation: Vec3,
    },
    /// Angle in `[0, 2π)`.
    Angle(f64),
}

impl Factor {
    pub fn kind(&self) -> GroupKind {
        match self {
            Factor::Rotation(_) => GroupKind::So3,
            Factor::Rigid { .. } => GroupKind::Se3,
            Factor::Angle(_) => GroupKind::Circle,
        }
    }

    pub fn identity(kind: GroupKind) -> Self {
        match kind {
            GroupKind::So3 => Factor::Rotation(Rot3::identity()),
            GroupKind::Se3 => Factor::Rigid {
                rotation: Rot3::identity(),
                translation: Vec3::zeros(),
            },
            GroupKind::Circle => Factor::Angle(0.0),
        }
    }

    /// Group exponential of one coefficient block.
    pub fn exp(kind: GroupKind, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != kind.dim() {
            return Err(Error::DimensionMismatch {
                expected: kind.dim(),
                found: coeffs.len(),
            });
        }
        Ok(match kind {
            GroupKind::So3 => Factor::Rotation(Rot3::exp(&Vec3::from_column_slice(coeffs))),
            GroupKind::Se3 => {
                let v = Vec3::from_column_slice(&coeffs[0..3]);
                let w = Vec3::from_column_slice(&coeffs[3..6]);
                Factor::Rigid {
                    rotation: Rot3::exp(&w),
                    translation: so3_left_jacobian(&w) * v,
                }
            }
            GroupKind::Circle => Factor::Angle(normalize_angle(coeffs[0])),
        })
    }

    /// Principal logarithm, as a coefficient block.
    pub fn log(&self) -> Vec<f64> {
        match self {
            Factor::Rotation(r) => r.log().as_slice().to_vec(),
            Factor::Rigid { rotation, translation } => {
                let w = rotation.log();
                let v = so3_left_jacobian(&w).lu().solve(translation).unwrap_or(*translation);
                vec![v.x, v.y, v.z, w.x, w.y, w.z]
            }
            Factor::Angle(a) => vec![angle_difference(0.0, *a)],
        }
    }

    fn compose(&self, other: &Factor) -> Result<Factor> {
        Ok(match (self, other) {
            (Factor::Rotation(a), Factor::Rotation(b)) => Factor::Rotation(*a * *b),
            (
                Factor::Rigid {
                    rotation: r1,
                    translation: t1,
                },
                Factor::Rigid {
                    rotation: r2,
                    translation: t2,
                },
            ) => Factor::Rigid {
                rotation: *r1 * *r2,
                translation: r1.apply(t2) + t1,
            },
            (Factor::Angle(a), Factor::Angle(b)) => Factor::Angle(normalize_angle(a + b)),
            _ => {
                return Err(Error::SignatureMismatch {
                    expected: self.kind().name().into(),
                    found: other.kind().name().into(),
                })
            }
        })
    }

    fn inverse(&self) -> Factor {
        match self {
            Factor::Rotation(r) => Factor::Rotation(r.transpose()),
            Factor::Rigid { rotation, translation } => {
                let rt = rotation.transpose();
                Factor::Rigid {
                    rotation: rt,
                    translation: -rt.apply(translation),
                }
            }
            Factor::Angle(a) => Factor::Angle(normalize_angle(-a)),
        }
    }

    fn orthonormality_defect(&self) -> f64 {
        match self {
            Factor::Rotation(r) | Factor::Rigid { rotation: r, .. } => r.orthonormality_defect(),
            Factor::Angle(_) => 0.0,
        }
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            Factor::Rotation(r) => out.extend_from_slice(&r.to_row_major()),
            Factor::Rigid { rotation, translation } => {
                out.extend_from_slice(&rotation.to_row_major());
                out.extend_from_slice(translation.as_slice());
            }
            Factor::Angle(a) => out.push(*a),
        }
    }

    /// Number of floats in the flat serialization of a factor of this kind.
    pub fn flat_len(kind: GroupKind) -> usize {
        match kind {
            GroupKind::So3 => 9,
            GroupKind::Se3 => 12,
            GroupKind::Circle => 1,
        }
    }
}

/// Element of a product group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    signature: Signature,
    factors: Vec<Factor>,
}

impl GroupElement {
    pub fn new(signature: Signature, factors: Vec<Factor>) -> Result<Self> {
        let kinds: Vec<GroupKind> = factors.iter().map(|f| f.kind()).collect();
        if kinds.as_slice() != signature.kinds() {
            return Err(Error::SignatureMismatch {
                expected: signature.to_string(),
                found: Signature::new(&kinds).to_string(),
            });
        }
        for f in &factors {
            match f {
                Factor::Rotation(r) | Factor::Rigid { rotation: r, .. } => {
                    Rot3::from_matrix(*r.matrix())?;
                }
                Factor::Angle(a) => {
                    if !(0.0..TAU).contains(a) {
                        return Err(Error::InvalidArgument(format!("angle {a} outside [0, 2π)")));
                    }
                }
            }
        }
        Ok(GroupElement { signature, factors })
    }

    pub fn identity(signature: &Signature) -> Self {
        GroupElement {
            signature: signature.clone(),
            factors: signature.kinds().iter().map(|&k| Factor::identity(k)).collect(),
        }
    }

    /// Group exponential of an algebra element.
    pub fn exp(xi: &AlgebraVector) -> Self {
        let factors = xi
            .signature
            .blocks()
            .map(|(k, off)| {
                Factor::exp(k, &xi.coeffs.as_slice()[off..off + k.dim()]).expect("block length matches signature")
            })
            .collect();
        GroupElement {
            signature: xi.signature.clone(),
            factors,
        }
    }

    /// Factor-wise principal logarithm.
    pub fn log(&self) -> AlgebraVector {
        let mut coeffs = Vec::with_capacity(self.signature.dim());
        for f in &self.factors {
            coeffs.extend(f.log());
        }
        AlgebraVector {
            signature: self.signature.clone(),
            coeffs: DVector::from_vec(coeffs),
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &Factor {
        &self.factors[i]
    }

    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        self.signature.ensure_eq(&other.signature)?;
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupElement {
            signature: self.signature.clone(),
            factors,
        })
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            signature: self.signature.clone(),
            factors: self.factors.iter().map(Factor::inverse).collect(),
        }
    }

    /// `g · exp(xi)`.
    pub fn right_exp(&self, xi: &AlgebraVector) -> Result<GroupElement> {
        self.compose(&GroupElement::exp(xi))
    }

    /// Largest `‖RᵀR − I‖_F` over rotation factors.
    pub fn orthonormality_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(Factor::orthonormality_defect)
            .fold(0.0, f64::max)
    }

    /// Rotations row-major (9), translations (3), angles (1), in factor order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in &self.factors {
            f.write_flat(&mut out);
        }
        out
    }

    pub fn from_flat(signature: &Signature, values: &[f64]) -> Result<Self> {
        let expected: usize = signature.kinds().iter().map(|&k| Factor::flat_len(k)).sum();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        let mut factors = Vec::with_capacity(signature.len());
        let mut off = 0;
        for &k in signature.kinds() {
            let chunk = &values[off..off + Factor::flat_len(k)];
            off += Factor::flat_len(k);
            factors.push(match k {
                GroupKind::So3 => Factor::Rotation(Rot3::from_row_major(chunk)?),
                GroupKind::Se3 => Factor::Rigid {
                    rotation: Rot3::from_row_major(&chunk[..9])?,
                    translation: Vec3::from_column_slice(&chunk[9..12]),
                },
                GroupKind::Circle => Factor::Angle(normalize_angle(chunk[0])),
            });
        }
        Ok(GroupElement {
            signature: signature.clone(),
            factors,
        })
    }

    /// Sum of factor-wise distances: Frobenius for matrices, Euclidean for
    /// translations, wrapped difference for angles.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| match (a, b) {
                (Factor::Rotation(r1), Factor::Rotation(r2)) => (r1.matrix() - r2.matrix()).norm(),
                (
                    Factor::Rigid {
                        rotation: r1,
                        translation: t1,
                    },
                    Factor::Rigid {
                        rotation: r2,
                        translation: t2,
                    },
                ) => (r1.matrix() - r2.matrix()).norm() + (t1 - t2).norm(),
                (Factor::Angle(x), Factor::Angle(y)) => angle_difference(*x, *y).abs(),
                _ => f64::INFINITY,
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Lie algebra element as coefficients in the fixed ordered basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector {
    signature: Signature,
    coeffs: DVector<f64>,
}

/// Dual element; pairs with [`AlgebraVector`] by the coefficient dot product.
#[derive(Clone, Debug, PartialEq)]
pub struct CoAlgebraVector {
    signature: Signature,
    coeffs: DVector<f64>,
}

macro_rules! coefficient_vector {
    ($ty:ident) => {
        impl $ty {
            pub fn new(signature: Signature, coeffs: DVector<f64>) -> Result<Self> {
                if coeffs.len() != signature.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: signature.dim(),
                        found: coeffs.len(),
                    });
                }
                Ok($ty { signature, coeffs })
            }

            pub fn from_slice(signature: &Signature, coeffs: &[f64]) -> Result<Self> {
                Self::new(signature.clone(), DVector::from_column_slice(coeffs))
            }

            pub fn zeros(signature: &Signature) -> Self {
                $ty {
                    signature: signature.clone(),
                    coeffs: DVector::zeros(signature.dim()),
                }
            }

            /// `i`-th basis element.
            pub fn basis(signature: &Signature, i: usize) -> Self {
                let mut v = Self::zeros(signature);
                v.coeffs[i] = 1.0;
                v
            }

            pub(crate) fn from_parts(signature: Signature, coeffs: DVector<f64>) -> Self {
                debug_assert_eq!(coeffs.len(), signature.dim());
                $ty { signature, coeffs }
            }

            pub fn signature(&self) -> &Signature {
                &self.signature
            }

            pub fn coeffs(&self) -> &DVector<f64> {
                &self.coeffs
            }

            pub fn as_slice(&self) -> &[f64] {
                self.coeffs.as_slice()
            }

            pub fn len(&self) -> usize {
                self.coeffs.len()
            }

            pub fn is_empty(&self) -> bool {
                self.coeffs.is_empty()
            }

            /// Coefficient block of factor `i`.
            pub fn block(&self, i: usize) -> &[f64] {
                let (k, off) = self.signature.blocks().nth(i).expect("factor index");
                &self.coeffs.as_slice()[off..off + k.dim()]
            }

            /// Euclidean norm of the coefficients.
            pub fn norm(&self) -> f64 {
                self.coeffs.norm()
            }

            pub fn is_finite(&self) -> bool {
                self.coeffs.iter().all(|v| v.is_finite())
            }
        }

        impl Add<&$ty> for &$ty {
            type Output = $ty;
            fn add(self, rhs: &$ty) -> $ty {
                debug_assert_eq!(self.signature, rhs.signature);
                $ty::from_parts(self.signature.clone(), &self.coeffs + &rhs.coeffs)
            }
        }

        impl Add for $ty {
            type Output = $ty;
            fn add(self, rhs: $ty) -> $ty {
                &self + &rhs
            }
        }

        impl Sub<&$ty> for &$ty {
            type Output = $ty;
            fn sub(self, rhs: &$ty) -> $ty {
                debug_assert_eq!(self.signature, rhs.signature);
                $ty::from_parts(self.signature.clone(), &self.coeffs - &rhs.coeffs)
            }
        }

        impl Sub for $ty {
            type Output = $ty;
            fn sub(self, rhs: $ty) -> $ty {
                &self - &rhs
            }
        }

        impl Neg for &$ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                $ty::from_parts(self.signature.clone(), -&self.coeffs)
            }
        }

        impl Neg for $ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                -&self
            }
        }

        impl Mul<f64> for &$ty {
            type Output = $ty;
            fn mul(self, s: f64) -> $ty {
                $ty::from_parts(self.signature.clone(), &self.coeffs * s)
            }
        }

        impl Mul<f64> for $ty {
            type Output = $ty;
            fn mul(self, s: f64) -> $ty {
                &self * s
            }
        }
    };
}

coefficient_vector!(AlgebraVector);
coefficient_vector!(CoAlgebraVector);

impl CoAlgebraVector {
    /// Dual pairing `⟨μ, ξ⟩`.
    pub fn pair(&self, xi: &AlgebraVector) -> f64 {
        debug_assert_eq!(self.signature, xi.signature);
        self.coeffs.dot(&xi.coeffs)
    }
}

fn v3(s: &[f64], off: usize) -> Vec3 {
    Vec3::new(s[off], s[off + 1], s[off + 2])
}

fn put3(out: &mut DVector<f64>, off: usize, v: &Vec3) {
    out[off] = v.x;
    out[off + 1] = v.y;
    out[off + 2] = v.z;
}

/// Lie bracket `ad_ξ η = [ξ, η]`.
pub fn ad(xi: &AlgebraVector, eta: &AlgebraVector) -> Result<AlgebraVector> {
    xi.signature.ensure_eq(&eta.signature)?;
    let (a, b) = (xi.as_slice(), eta.as_slice());
    let mut out = DVector::zeros(a.len());
    for (kind, off) in xi.signature.blocks() {
        match kind {
            GroupKind::So3 => put3(&mut out, off, &v3(a, off).cross(&v3(b, off))),
            GroupKind::Se3 => {
                let (v1, w1) = (v3(a, off), v3(a, off + 3));
                let (v2, w2) = (v3(b, off), v3(b, off + 3));
                put3(&mut out, off, &(w1.cross(&v2) - w2.cross(&v1)));
                put3(&mut out, off + 3, &w1.cross(&w2));
            }
            GroupKind::Circle => {}
        }
    }
    Ok(AlgebraVector::from_parts(xi.signature.clone(), out))
}

/// Coadjoint operator, defined by `⟨ad*_ξ μ, η⟩ = ⟨μ, ad_ξ η⟩`.
pub fn ad_star(xi: &AlgebraVector, mu: &CoAlgebraVector) -> Result<CoAlgebraVector> {
    xi.signature.ensure_eq(&mu.signature)?;
    let (a, m) = (xi.as_slice(), mu.as_slice());
    let mut out = DVector::zeros(a.len());
    for (kind, off) in xi.signature.blocks() {
        match kind {
            GroupKind::So3 => put3(&mut out, off, &v3(m, off).cross(&v3(a, off))),
            GroupKind::Se3 => {
                let (v, w) = (v3(a, off), v3(a, off + 3));
                let (mv, mw) = (v3(m, off), v3(m, off + 3));
                put3(&mut out, off, &mv.cross(&w));
                put3(&mut out, off + 3, &(mv.cross(&v) + mw.cross(&w)));
            }
            GroupKind::Circle => {}
        }
    }
    Ok(CoAlgebraVector::from_parts(xi.signature.clone(), out))
}
