//! Metric structure on the Lie algebra and the algebra-level connections.
//!
//! Subspaces are always stored with a metric-orthonormal basis, together with
//! covectors spanning their annihilator. The three connections are
//!
//! * `∇^𝔤_ξ η = ½([ξ,η] − ♯ad*_ξ ♭η − ♯ad*_η ♭ξ)` for a left-invariant metric,
//! * `∇^𝔡_ξ η = 𝔓(∇^𝔤_ξ η)` for `ξ, η ∈ 𝔡`, with `𝔓` the orthogonal projector,
//! * `∇^{𝔡,𝔣}_ξ η = ∇^𝔤_ξ η + (∇^𝔤_ξ 𝔭_𝔣)(η)` for the oblique splitting
//!   `𝔤 = 𝔡 ⊕ (𝔣 ⊕ 𝔰)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lie::{ad, ad_star, AlgebraVector, CoAlgebraVector, Signature};

/// Singular-value threshold for rank and complementarity decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Relative tolerance for "vector lies in subspace" preconditions.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;

/// Inner product on the Lie algebra, given by its Gram matrix in the fixed basis.
#[derive(Clone, Debug)]
pub struct Metric {
    gram: DMatrix<f64>,
    inverse: DMatrix<f64>,
    /// Upper Cholesky factor `Lᵀ` with `gram = L Lᵀ`, when positive definite.
    sqrt: Option<DMatrix<f64>>,
}

impl Metric {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let metric = Self::from_gram_unchecked(gram);
        metric.validate()?;
        Ok(metric)
    }

    /// Builds a metric without checking symmetry or definiteness.
    /// Used to exercise diagnostics on deliberately broken input.
    pub fn from_gram_unchecked(gram: DMatrix<f64>) -> Self {
        let inverse = gram
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::from_element(gram.nrows(), gram.ncols(), f64::NAN));
        let sqrt = gram.clone().cholesky().map(|c| c.l().transpose());
        Metric { gram, inverse, sqrt }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is a metric")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.gram.nrows() != self.gram.ncols() {
            return Err(Error::InvalidMetric {
                reason: "Gram matrix is not square".into(),
            });
        }
        let asym = self.symmetry_defect();
        if !(asym <= 1e-12) {
            return Err(Error::InvalidMetric {
                reason: format!("Gram matrix is not symmetric (defect {asym:e})"),
            });
        }
        let min = self.min_eigenvalue();
        if !(min > 0.0) || self.sqrt.is_none() {
            return Err(Error::InvalidMetric {
                reason: format!("Gram matrix is not positive definite (min eigenvalue {min:e})"),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.gram - self.gram.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.gram + self.gram.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn inner(&self, a: &AlgebraVector, b: &AlgebraVector) -> f64 {
        a.coeffs().dot(&(&self.gram * b.coeffs()))
    }

    pub fn norm(&self, a: &AlgebraVector) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn flat(&self, xi: &AlgebraVector) -> CoAlgebraVector {
        CoAlgebraVector::from_parts(xi.signature().clone(), &self.gram * xi.coeffs())
    }

    pub fn sharp(&self, mu: &CoAlgebraVector) -> AlgebraVector {
        AlgebraVector::from_parts(mu.signature().clone(), &self.inverse * mu.coeffs())
    }

    /// Metric-weighted image `Lᵀ B` of column vectors, used for rank decisions.
    pub fn weighted(&self, cols: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.sqrt {
            Some(s) => s * cols,
            None => cols.clone(),
        }
    }

    fn inner_cols(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.gram * b))
    }
}

/// Smallest singular value of a matrix; zero for matrices without columns.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return if m.ncols() == 0 { f64::INFINITY } else { 0.0 };
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Linear subspace of the algebra with a metric-orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    signature: Signature,
    /// `n × k`, columns metric-orthonormal.
    basis: DMatrix<f64>,
    /// `(n − k) × n`, rows are covectors vanishing on the subspace.
    annihilator: DMatrix<f64>,
}

/// Appends to `cols` the metric-orthogonal projection of coordinate vectors,
/// greedily by largest residual, until `cols` spans the whole space.
fn complete_basis(metric: &Metric, cols: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = metric.dim();
    let mut all: Vec<DVector<f64>> = cols.to_vec();
    let mut extra = Vec::new();
    while all.len() < n {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            for _ in 0..2 {
                for q in &all {
                    let c = metric.inner_cols(q, &v);
                    v -= q * c;
                }
            }
            let norm = metric.inner_cols(&v, &v).max(0.0).sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        let v = v / norm;
        all.push(v.clone());
        extra.push(v);
    }
    extra
}

fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

impl Subspace {
    /// Gram–Schmidt in the metric. Fails with `RankDeficient` when the
    /// metric-weighted spanning set has a singular value below `1e-10`.
    pub fn orthonormalize(metric: &Metric, raw: &[AlgebraVector]) -> Result<Self> {
        let first = raw
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty spanning set; use Subspace::zero".into()))?;
        let signature = first.signature().clone();
        let n = signature.dim();
        if metric.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: metric.dim(),
            });
        }
        for v in raw {
            signature.ensure_eq(v.signature())?;
        }
        let raw_cols = DMatrix::from_columns(&raw.iter().map(|v| v.coeffs().clone()).collect::<Vec<_>>());
        let sigma = min_singular_value(&metric.weighted(&raw_cols));
        if !(sigma > RANK_TOLERANCE) {
            return Err(Error::RankDeficient { sigma });
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(raw.len());
        for v in raw {
            let mut w = v.coeffs().clone();
            for _ in 0..2 {
                for q in &basis {
                    let c = metric.inner_cols(q, &w);
                    w -= q * c;
                }
            }
            let norm = metric.inner_cols(&w, &w).sqrt();
            basis.push(w / norm);
        }
        Ok(Self::from_orthonormal(metric, signature, basis))
    }

    fn from_orthonormal(metric: &Metric, signature: Signature, basis: Vec<DVector<f64>>) -> Self {
        let n = signature.dim();
        let complement = complete_basis(metric, &basis);
        let basis_m = if basis.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&basis)
        };
        let annihilator = if complement.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            (metric.gram() * DMatrix::from_columns(&complement)).transpose()
        };
        Subspace {
            signature,
            basis: basis_m,
            annihilator,
        }
    }

    pub fn zero(signature: &Signature, metric: &Metric) -> Self {
        Self::from_orthonormal(metric, signature.clone(), Vec::new())
    }

    pub fn full(signature: &Signature, metric: &Metric) -> Self {
        let basis = complete_basis(metric, &[]);
        Self::from_orthonormal(metric, signature.clone(), basis)
    }

    /// Metric-orthogonal complement.
    pub fn complement(&self, metric: &Metric) -> Subspace {
        let basis = complete_basis(metric, &columns(&self.basis));
        Self::from_orthonormal(metric, self.signature.clone(), basis)
    }

    /// Direct sum; `RankDeficient` when the summands intersect.
    pub fn direct_sum(&self, other: &Subspace, metric: &Metric) -> Result<Subspace> {
        self.signature.ensure_eq(&other.signature)?;
        let raw: Vec<AlgebraVector> = self.vectors().into_iter().chain(other.vectors()).collect();
        if raw.is_empty() {
            return Ok(Subspace::zero(&self.signature, metric));
        }
        Subspace::orthonormalize(metric, &raw)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn annihilator(&self) -> &DMatrix<f64> {
        &self.annihilator
    }

    pub fn vector(&self, i: usize) -> AlgebraVector {
        AlgebraVector::from_parts(self.signature.clone(), self.basis.column(i).into_owned())
    }

    pub fn vectors(&self) -> Vec<AlgebraVector> {
        (0..self.dim()).map(|i| self.vector(i)).collect()
    }

    pub fn annihilator_covectors(&self) -> Vec<CoAlgebraVector> {
        self.annihilator
            .row_iter()
            .map(|r| CoAlgebraVector::from_parts(self.signature.clone(), r.transpose()))
            .collect()
    }

    /// Pairings `μᵃ(ξ)` with the annihilator covectors.
    pub fn annihilator_residuals(&self, xi: &AlgebraVector) -> DVector<f64> {
        &self.annihilator * xi.coeffs()
    }

    /// Metric norm of the component of `xi` orthogonal to the subspace.
    pub fn distance(&self, metric: &Metric, xi: &AlgebraVector) -> f64 {
        metric.norm(&(xi - &project(self, metric, xi)))
    }

    pub(crate) fn ensure_contains(&self, metric: &Metric, xi: &AlgebraVector) -> Result<()> {
        let residual = self.distance(metric, xi);
        if residual <= MEMBERSHIP_TOLERANCE * metric.norm(xi).max(1.0) {
            Ok(())
        } else {
            Err(Error::NotInSubspace { residual })
        }
    }
}

/// Metric-orthogonal projection onto `sub`.
pub fn project(sub: &Subspace, metric: &Metric, xi: &AlgebraVector) -> AlgebraVector {
    let coords = sub.basis.transpose() * (metric.gram() * xi.coeffs());
    AlgebraVector::from_parts(xi.signature().clone(), &sub.basis * coords)
}

/// Projection onto `onto` along `along`. `xi` must lie in `onto ⊕ along`.
pub fn oblique_project(onto: &Subspace, along: &Subspace, xi: &AlgebraVector) -> Result<AlgebraVector> {
    onto.signature.ensure_eq(&along.signature)?;
    onto.signature.ensure_eq(xi.signature())?;
    let (a, b) = (onto.dim(), along.dim());
    let n = onto.ambient_dim();
    if a + b > n {
        return Err(Error::NotComplementary { sigma: 0.0 });
    }
    if a == 0 {
        return Ok(AlgebraVector::zeros(xi.signature()));
    }
    let mut stacked = DMatrix::zeros(n, a + b);
    stacked.view_mut((0, 0), (n, a)).copy_from(&onto.basis);
    stacked.view_mut((0, a), (n, b)).copy_from(&along.basis);
    let svd = stacked.clone().svd(true, true);
    let sigma = svd.singular_values.min();
    if !(sigma > RANK_TOLERANCE) {
        return Err(Error::NotComplementary { sigma });
    }
    let coords = svd
        .solve(xi.coeffs(), 0.0)
        .map_err(|e| Error::InvalidArgument(e.into()))?;
    let onto_part = &onto.basis * coords.rows(0, a);
    Ok(AlgebraVector::from_parts(xi.signature().clone(), onto_part))
}

/// Riemannian 𝔤-connection of a left-invariant metric.
pub fn g_connection(metric: &Metric, xi: &AlgebraVector, eta: &AlgebraVector) -> Result<AlgebraVector> {
    let bracket = ad(xi, eta)?;
    let a = metric.sharp(&ad_star(xi, &metric.flat(eta))?);
    let b = metric.sharp(&ad_star(eta, &metric.flat(xi))?);
    Ok((bracket - a - b) * 0.5)
}

/// Nonholonomic 𝔡-connection, for `ξ, η ∈ 𝔡`.
pub fn d_connection(metric: &Metric, d: &Subspace, xi: &AlgebraVector, eta: &AlgebraVector) -> Result<AlgebraVector> {
    d.ensure_contains(metric, xi)?;
    d.ensure_contains(metric, eta)?;
    Ok(project(d, metric, &g_connection(metric, xi, eta)?))
}

/// (𝔡,𝔣)-connection for the splitting `𝔤 = 𝔡 ⊕ (𝔣 ⊕ 𝔰)`, with
/// `(∇^𝔤_ξ 𝔭)(η) = ∇^𝔤_ξ(𝔭η) − 𝔭(∇^𝔤_ξ η)` and `𝔭` the projection onto
/// `𝔣 ⊕ 𝔰` along `𝔡`.
pub fn df_connection(
    metric: &Metric,
    d: &Subspace,
    f_plus_s: &Subspace,
    xi: &AlgebraVector,
    eta: &AlgebraVector,
) -> Result<AlgebraVector> {
    if d.dim() + f_plus_s.dim() != d.ambient_dim() {
        return Err(Error::NotComplementary { sigma: 0.0 });
    }
    let nabla = g_connection(metric, xi, eta)?;
    let both_in_d = d.ensure_contains(metric, xi).is_ok() && d.ensure_contains(metric, eta).is_ok();
    if both_in_d {
        return oblique_project(d, f_plus_s, &nabla);
    }
    let p_eta = oblique_project(f_plus_s, d, eta)?;
    let p_nabla = oblique_project(f_plus_s, d, &nabla)?;
    Ok(nabla + g_connection(metric, xi, &p_eta)? - p_nabla)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_algebra(rng: &mut ChaCha8Rng, sig: &Signature) -> AlgebraVector {
        let c: Vec<f64> = (0..sig.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        AlgebraVector::from_slice(sig, &c).unwrap()
    }

    fn rand_metric(rng: &mut ChaCha8Rng, n: usize) -> Metric {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let g = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let g = (&g + g.transpose()) * 0.5;
        Metric::new(g).unwrap()
    }

    fn v(sig: &Signature, c: &[f64]) -> AlgebraVector {
        AlgebraVector::from_slice(sig, c).unwrap()
    }

    fn sphere_metric(j: [f64; 3]) -> Metric {
        Metric::from_diagonal(&[1.0, 1.0, 1.0, j[0], j[1], j[2]]).unwrap()
    }

    #[test]
    fn metric_validation() {
        assert!(Metric::from_diagonal(&[1.0, -1.0]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(Metric::new(asym), Err(Error::InvalidMetric { .. })));
        let bad = Metric::from_gram_unchecked(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0])));
        assert!(bad.min_eigenvalue() < 0.0);
    }

    #[test]
    fn flat_sharp_examples() {
        let sig = Signature::so3_so3();
        let xi = v(&sig, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(Metric::identity(6).flat(&xi).as_slice(), xi.as_slice());
        let m = sphere_metric([1.0, 2.0, 3.0]);
        assert_eq!(m.flat(&xi).as_slice(), &[1.0, 2.0, 3.0, 4.0, 10.0, 18.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = rand_metric(&mut rng, 6);
        for _ in 0..1000 {
            let a = rand_algebra(&mut rng, &sig);
            let b = rand_algebra(&mut rng, &sig);
            assert!((m.sharp(&m.flat(&a)) - a.clone()).norm() <= 1e-12);
            let lhs = m.flat(&a).pair(&b);
            let rhs = a.coeffs().dot(&(m.gram() * b.coeffs()));
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn orthonormalize_invariants() {
        let sig = Signature::so3_so3();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = rand_metric(&mut rng, 6);
        let raw: Vec<_> = (0..3).map(|_| rand_algebra(&mut rng, &sig)).collect();
        let s = Subspace::orthonormalize(&m, &raw).unwrap();
        let gram = s.basis().transpose() * m.gram() * s.basis();
        assert!((gram - DMatrix::identity(3, 3)).amax() <= 1e-10);
        assert!((s.annihilator() * s.basis()).amax() <= 1e-10);
        assert_eq!(s.annihilator().nrows(), 3);
        for r in &raw {
            assert!(s.distance(&m, r) <= 1e-10);
        }

        // fixed point
        let again = Subspace::orthonormalize(&m, &s.vectors()).unwrap();
        assert!((again.basis() - s.basis()).amax() <= 1e-10);

        let dup = vec![raw[0].clone(), raw[0].clone()];
        assert!(matches!(
            Subspace::orthonormalize(&m, &dup),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn rolling_constraint_annihilator_within_horizontal() {
        // 𝔡 = span{(−ê1,ê1), (−ê2,ê2), (0,ê3)} with 𝕁 = I. Null-space oracle: the
        // annihilator of 𝔡 within 𝔥 is spanned by flats of (ê1,ê1), (ê2,ê2).
        let sig = Signature::so3_so3();
        let m = Metric::identity(6);
        let d = Subspace::orthonormalize(
            &m,
            &[
                v(&sig, &[-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
                v(&sig, &[0.0, -1.0, 0.0, 0.0, 1.0, 0.0]),
                v(&sig, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        assert_eq!(d.dim(), 3);
        let vertical = Subspace::orthonormalize(&m, &[v(&sig, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0])]).unwrap();
        let d_plus_s = d.direct_sum(&vertical, &m).unwrap();
        let ann = d_plus_s.annihilator();
        assert_eq!(ann.nrows(), 2);
        // the annihilator rows span the same space as (ê1,ê1), (ê2,ê2)
        let expected = DMatrix::from_row_slice(2, 6, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let mut stacked = DMatrix::zeros(4, 6);
        stacked.view_mut((0, 0), (2, 6)).copy_from(ann);
        stacked.view_mut((2, 0), (2, 6)).copy_from(&expected);
        let sv = stacked.svd(false, false).singular_values;
        let rank = sv.iter().filter(|s| **s > 1e-10).count();
        assert_eq!(rank, 2);
    }

    #[test]
    fn projector_properties() {
        let sig = Signature::so3_circle();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = rand_metric(&mut rng, 4);
        let s = Subspace::orthonormalize(&m, &[rand_algebra(&mut rng, &sig), rand_algebra(&mut rng, &sig)]).unwrap();
        let c = s.complement(&m);
        assert_eq!(c.dim(), 2);
        for _ in 0..200 {
            let x = rand_algebra(&mut rng, &sig);
            let y = rand_algebra(&mut rng, &sig);
            let px = project(&s, &m, &x);
            assert!((project(&s, &m, &px) - px.clone()).norm() <= 1e-12);
            assert!((m.inner(&px, &y) - m.inner(&x, &project(&s, &m, &y))).abs() <= 1e-12);
            let sum = px.clone() + project(&c, &m, &x);
            assert!((sum - x.clone()).norm() <= 1e-12);
            for w in s.vectors() {
                assert!(m.inner(&(x.clone() - px.clone()), &w).abs() <= 1e-12);
            }
        }
        let w = s.vector(0);
        assert!((project(&s, &m, &w) - w).norm() <= 1e-12);
    }

    #[test]
    fn sphere_horizontal_projection_kills_vertical_axis() {
        let sig = Signature::so3_so3();
        let m = sphere_metric([1.0, 2.0, 3.0]);
        let vertical = Subspace::orthonormalize(&m, &[v(&sig, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0])]).unwrap();
        let h = vertical.complement(&m);
        let xi = v(&sig, &[0.4, -0.2, 0.9, 1.0, 2.0, 3.0]);
        let p = project(&h, &m, &xi);
        let expected = [0.4, -0.2, 0.0, 1.0, 2.0, 3.0];
        for (a, b) in p.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn oblique_projection() {
        let sig = Signature::so3_so3();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = rand_metric(&mut rng, 6);
        let a =
            Subspace::orthonormalize(&m, &(0..2).map(|_| rand_algebra(&mut rng, &sig)).collect::<Vec<_>>()).unwrap();
        let b =
            Subspace::orthonormalize(&m, &(0..4).map(|_| rand_algebra(&mut rng, &sig)).collect::<Vec<_>>()).unwrap();
        for _ in 0..200 {
            let x = rand_algebra(&mut rng, &sig);
            let pa = oblique_project(&a, &b, &x).unwrap();
            let pb = oblique_project(&b, &a, &x).unwrap();
            // independent oracle: solve the stacked linear system with LU
            let mut stacked = DMatrix::zeros(6, 6);
            stacked.view_mut((0, 0), (6, 2)).copy_from(a.basis());
            stacked.view_mut((0, 2), (6, 4)).copy_from(b.basis());
            let c = stacked.clone().lu().solve(x.coeffs()).unwrap();
            let oracle = a.basis() * c.rows(0, 2);
            assert!((pa.coeffs() - oracle).amax() <= 1e-11);
            assert!((x.clone() - pa.clone() - pb.clone()).norm() <= 1e-12);
            assert!((oblique_project(&a, &b, &pa).unwrap() - pa.clone()).norm() <= 1e-12);
            assert!(oblique_project(&a, &b, &pb).unwrap().norm() <= 1e-12);
        }
        let w = a.vector(0);
        assert!((oblique_project(&a, &b, &w).unwrap() - w).norm() <= 1e-12);
        let overlap = Subspace::orthonormalize(&m, &[a.vector(0), rand_algebra(&mut rng, &sig)]).unwrap();
        assert!(matches!(
            oblique_project(&a, &overlap, &a.vector(1)),
            Err(Error::NotComplementary { .. })
        ));
    }

    #[test]
    fn g_connection_sphere_first_factor_and_euler_term() {
        let sig = Signature::so3_so3();
        let j = [1.0, 2.0, 3.0];
        let m = sphere_metric(j);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let a = rand_algebra(&mut rng, &sig);
            let b = rand_algebra(&mut rng, &sig);
            let n = g_connection(&m, &a, &b).unwrap();
            let p1 = nalgebra::Vector3::from_column_slice(a.block(0));
            let p2 = nalgebra::Vector3::from_column_slice(b.block(0));
            let first = p1.cross(&p2) * 0.5;
            assert!((nalgebra::Vector3::from_column_slice(n.block(0)) - first).norm() < 1e-14);

            // second factor from the general formula with ad*_Ω ν = ν × Ω
            let o1 = nalgebra::Vector3::from_column_slice(a.block(1));
            let o2 = nalgebra::Vector3::from_column_slice(b.block(1));
            let jm = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::from(j));
            let jinv = jm.try_inverse().unwrap();
            let second = (o1.cross(&o2) - jinv * ((jm * o2).cross(&o1) + (jm * o1).cross(&o2))) * 0.5;
            assert!((nalgebra::Vector3::from_column_slice(n.block(1)) - second).norm() < 1e-13);

            // ∇_ξ ξ reduces to the rigid-body Euler term −𝕁⁻¹(𝕁Ω × Ω)
            let nn = g_connection(&m, &a, &a).unwrap();
            let euler = -(jinv * (jm * o1).cross(&o1));
            assert!((nalgebra::Vector3::from_column_slice(nn.block(1)) - euler).norm() < 1e-14);
        }
    }

    #[test]
    fn g_connection_blade_and_bi_invariant() {
        let sig = Signature::so3_circle();
        let m = Metric::identity(4);
        let a = v(&sig, &[0.1, 0.2, 0.3, 4.0]);
        let b = v(&sig, &[-1.0, 0.5, 2.0, -3.0]);
        let n = g_connection(&m, &a, &b).unwrap();
        let p = nalgebra::Vector3::new(0.1, 0.2, 0.3).cross(&nalgebra::Vector3::new(-1.0, 0.5, 2.0)) * 0.5;
        assert!((n.as_slice()[0] - p.x).abs() < 1e-15);
        assert!((n.as_slice()[1] - p.y).abs() < 1e-15);
        assert!((n.as_slice()[2] - p.z).abs() < 1e-15);
        assert_eq!(n.as_slice()[3], 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for sig in [Signature::so3_so3(), Signature::so3_circle()] {
            let m = Metric::identity(sig.dim());
            for _ in 0..100 {
                let x = rand_algebra(&mut rng, &sig);
                assert!(g_connection(&m, &x, &x).unwrap().norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn g_connection_is_metric_and_torsion_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for sig in [Signature::se3(), Signature::so3_so3(), Signature::so3_circle()] {
            let m = rand_metric(&mut rng, sig.dim());
            for _ in 0..1000 {
                let x = rand_algebra(&mut rng, &sig);
                let y = rand_algebra(&mut rng, &sig);
                let z = rand_algebra(&mut rng, &sig);
                let compat =
                    m.inner(&g_connection(&m, &x, &y).unwrap(), &z) + m.inner(&y, &g_connection(&m, &x, &z).unwrap());
                assert!(compat.abs() <= 1e-11);
                let torsion =
                    g_connection(&m, &x, &y).unwrap() - g_connection(&m, &y, &x).unwrap() - ad(&x, &y).unwrap();
                assert!(torsion.norm() <= 1e-11);
            }
        }
    }

    #[test]
    fn d_connection_properties() {
        let sig = Signature::so3_so3();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = sphere_metric([1.0, 2.0, 3.0]);
        let d =
            Subspace::orthonormalize(&m, &(0..3).map(|_| rand_algebra(&mut rng, &sig)).collect::<Vec<_>>()).unwrap();
        for _ in 0..200 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = AlgebraVector::from_parts(sig.clone(), d.basis() * DVector::from_vec(c));
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = AlgebraVector::from_parts(sig.clone(), d.basis() * DVector::from_vec(c));
            let r = d_connection(&m, &d, &x, &y).unwrap();
            assert!(d.distance(&m, &r) <= 1e-12);
            let composed = project(&d, &m, &g_connection(&m, &x, &y).unwrap());
            assert!((r - composed).norm() <= 1e-14);
            assert!(m.inner(&d_connection(&m, &d, &x, &x).unwrap(), &x).abs() <= 1e-11);
        }
        let outside = rand_algebra(&mut rng, &sig);
        assert!(matches!(
            d_connection(&m, &d, &outside, &outside),
            Err(Error::NotInSubspace { .. })
        ));
        let full = Subspace::full(&sig, &m);
        let x = rand_algebra(&mut rng, &sig);
        let y = rand_algebra(&mut rng, &sig);
        assert!((d_connection(&m, &full, &x, &y).unwrap() - g_connection(&m, &x, &y).unwrap()).norm() <= 1e-13);

        let iso = Metric::identity(6);
        let d_iso = Subspace::orthonormalize(&iso, &d.vectors()).unwrap();
        let x = d_iso.vector(0) * 0.7 + d_iso.vector(2) * -0.3;
        assert!(d_connection(&iso, &d_iso, &x, &x).unwrap().norm() <= 1e-15);
    }

    #[test]
    fn df_connection_properties() {
        let sig = Signature::so3_so3();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let m = sphere_metric([1.0, 2.0, 3.0]);
        let d =
            Subspace::orthonormalize(&m, &(0..3).map(|_| rand_algebra(&mut rng, &sig)).collect::<Vec<_>>()).unwrap();
        let fs =
            Subspace::orthonormalize(&m, &(0..3).map(|_| rand_algebra(&mut rng, &sig)).collect::<Vec<_>>()).unwrap();
        for _ in 0..100 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = AlgebraVector::from_parts(sig.clone(), d.basis() * DVector::from_vec(c));
            let r = df_connection(&m, &d, &fs, &x, &x).unwrap();
            let expected = oblique_project(&d, &fs, &g_connection(&m, &x, &x).unwrap()).unwrap();
            assert!((r - expected).norm() <= 1e-12);

            // η ∈ 𝔣⊕𝔰: expand the definition with 𝔭η = η
            let eta = fs.vector(1) * 0.8;
            let xi = rand_algebra(&mut rng, &sig);
            let nabla = g_connection(&m, &xi, &eta).unwrap();
            let expected = nabla.clone() + nabla.clone() - oblique_project(&fs, &d, &nabla).unwrap();
            let r = df_connection(&m, &d, &fs, &xi, &eta).unwrap();
            assert!((r - expected).norm() <= 1e-12);
        }

        // trivial splitting reduces to ∇^𝔤
        let full = Subspace::full(&sig, &m);
        let zero = Subspace::zero(&sig, &m);
        let x = rand_algebra(&mut rng, &sig);
        let y = rand_algebra(&mut rng, &sig);
        let r = df_connection(&m, &full, &zero, &x, &y).unwrap();
        assert!((r - g_connection(&m, &x, &y).unwrap()).norm() <= 1e-13);

        let too_small = Subspace::orthonormalize(&m, &[rand_algebra(&mut rng, &sig)]).unwrap();
        assert!(matches!(
            df_connection(&m, &d, &too_small, &x, &y),
            Err(Error::NotComplementary { .. })
        ));
    }
}
