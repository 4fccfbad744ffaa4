//! Hilbertian modules with admissible inner products, equivariant morphisms
//! between them and the fiberwise spectral toolkit.
//!
//! A module is `l^2(A)^n` with an inner product given by a positive gram
//! operator `G`: `<x, y>' = <G x, y>`. Every spectral question is answered
//! fiber by fiber after whitening, `D -> G_t^{1/2} D G_s^{-1/2}`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{
    fk::{generic_ranks, log_det_many, singular_values},
    AlgebraModel, FkDeterminant, FkOptions, GroupRingMatrix, Realization,
};
use crate::error::{Error, Result};

pub type Fiber = DMatrix<Complex64>;

/// Tolerance for structural identities (`d^2 = 0`, self-adjointness).
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct HilbertianModule {
    model: Arc<AlgebraModel>,
    rank: usize,
    gram: Option<GroupRingMatrix>,
    label: String,
}

impl HilbertianModule {
    /// `l^2(A)^rank` with the standard inner product.
    pub fn free(model: Arc<AlgebraModel>, rank: usize, label: impl Into<String>) -> Self {
        HilbertianModule { model, rank, gram: None, label: label.into() }
    }

    /// Replaces the inner product by `<G x, y>`; `G` must be self-adjoint and positive.
    pub fn with_gram(mut self, gram: GroupRingMatrix) -> Result<Self> {
        if gram.shape() != (self.rank, self.rank) {
            return Err(Error::ShapeMismatch(format!(
                "gram of shape {:?} on a module of rank {}",
                gram.shape(),
                self.rank
            )));
        }
        if gram.model() != &self.model {
            return Err(Error::ModelMismatch("gram lives over another algebra".into()));
        }
        let asym = gram.star_transpose().sub(&gram)?.max_abs();
        if asym > STRUCTURE_TOL * (1.0 + gram.max_abs()) {
            return Err(Error::NotPositive(format!("gram is not self-adjoint (defect {asym:e})")));
        }
        check_positive(&gram)?;
        self.gram = Some(gram);
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn model(&self) -> &Arc<AlgebraModel> {
        &self.model
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gram(&self) -> Option<&GroupRingMatrix> {
        self.gram.as_ref()
    }

    /// The gram operator, identity when the standard inner product is used.
    pub fn gram_matrix(&self) -> GroupRingMatrix {
        self.gram.clone().unwrap_or_else(|| GroupRingMatrix::identity(self.model.clone(), self.rank))
    }

    /// Von Neumann dimension of a free module is its rank.
    pub fn vn_dim(&self) -> f64 {
        self.rank as f64
    }

    /// Size of the fiber of the realization.
    pub fn fiber_dim(&self) -> usize {
        self.rank * self.model.group_order()
    }

    /// Whitening factors `(G^{1/2}, G^{-1/2})` at `theta`; `None` for the standard product.
    pub fn whitening(&self, theta: &[f64]) -> Option<(Fiber, Fiber)> {
        self.gram.as_ref().map(|g| hermitian_sqrt_pair(&g.realize().at(theta)))
    }

    pub fn direct_sum(&self, other: &Self, label: impl Into<String>) -> Result<Self> {
        if self.model != other.model {
            return Err(Error::ModelMismatch("direct sum over different algebras".into()));
        }
        let out = HilbertianModule::free(self.model.clone(), self.rank + other.rank, label);
        if self.gram.is_none() && other.gram.is_none() {
            return Ok(out);
        }
        let g = self.gram_matrix().block_diag(&other.gram_matrix())?;
        Ok(HilbertianModule { gram: Some(g), ..out })
    }

    /// Hilbert tensor product over `A1 (x) A2`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let model = Arc::new(self.model.tensor(&other.model)?);
        let label = format!("{}(x){}", self.label, other.label);
        let gram = if self.gram.is_none() && other.gram.is_none() {
            None
        } else {
            Some(self.gram_matrix().kron(&other.gram_matrix())?)
        };
        Ok(HilbertianModule { model, rank: self.rank * other.rank, gram, label })
    }
}

fn check_positive(gram: &GroupRingMatrix) -> Result<()> {
    if gram.nrows() == 0 {
        return Ok(());
    }
    let real = gram.realize();
    let k = if real.is_constant() { 0 } else { gram.model().torus_rank() };
    let points = if k == 0 { vec![Vec::new()] } else { crate::algebra::fk::generic_points(k) };
    for p in points {
        let eig = real.at(&p).symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(0.0, f64::max);
        if min <= 1e-12 * max.max(1.0) {
            return Err(Error::NotPositive(format!("gram has eigenvalue {min:e}")));
        }
    }
    Ok(())
}

/// `(H^{1/2}, H^{-1/2})` for a positive definite Hermitian matrix.
pub fn hermitian_sqrt_pair(h: &Fiber) -> (Fiber, Fiber) {
    if h.nrows() == 0 {
        return (h.clone(), h.clone());
    }
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let sq = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let isq = eig.eigenvalues.map(|l| Complex64::new(1.0 / l.max(f64::MIN_POSITIVE).sqrt(), 0.0));
    let vt = v.adjoint();
    (v * DMatrix::from_diagonal(&sq) * &vt, v * DMatrix::from_diagonal(&isq) * vt)
}

/// An equivariant bounded map between Hilbertian modules, given by a
/// `target.rank x source.rank` group-ring matrix acting on column vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Morphism {
    source: HilbertianModule,
    target: HilbertianModule,
    matrix: GroupRingMatrix,
}

impl Morphism {
    pub fn new(source: HilbertianModule, target: HilbertianModule, matrix: GroupRingMatrix) -> Result<Self> {
        if matrix.shape() != (target.rank, source.rank) {
            return Err(Error::ShapeMismatch(format!(
                "matrix {:?} for a map rank {} -> rank {}",
                matrix.shape(),
                source.rank,
                target.rank
            )));
        }
        if matrix.model() != source.model() || matrix.model() != target.model() {
            return Err(Error::ModelMismatch("morphism matrix over another algebra".into()));
        }
        Ok(Morphism { source, target, matrix })
    }

    pub fn zero(source: HilbertianModule, target: HilbertianModule) -> Self {
        let matrix = GroupRingMatrix::zeros(source.model.clone(), target.rank, source.rank);
        Morphism { source, target, matrix }
    }

    pub fn identity(module: HilbertianModule) -> Self {
        let matrix = GroupRingMatrix::identity(module.model.clone(), module.rank);
        Morphism { source: module.clone(), target: module, matrix }
    }

    pub fn source(&self) -> &HilbertianModule {
        &self.source
    }

    pub fn target(&self) -> &HilbertianModule {
        &self.target
    }

    pub fn matrix(&self) -> &GroupRingMatrix {
        &self.matrix
    }

    pub fn model(&self) -> &Arc<AlgebraModel> {
        self.matrix.model()
    }

    /// `other . self`.
    pub fn then(&self, other: &Morphism) -> Result<Morphism> {
        if other.source.rank != self.target.rank {
            return Err(Error::ShapeMismatch("composition of incompatible morphisms".into()));
        }
        Morphism::new(self.source.clone(), other.target.clone(), other.matrix.mul(&self.matrix)?)
    }

    /// Adjoint with respect to the modules' inner products: `G_s^{-1} A* G_t`.
    pub fn adjoint(&self) -> Result<Morphism> {
        let mut m = self.matrix.star_transpose();
        if let Some(gt) = &self.target.gram {
            m = m.mul(gt)?;
        }
        if let Some(gs) = &self.source.gram {
            m = gs.inverse()?.mul(&m)?;
        }
        Morphism::new(self.target.clone(), self.source.clone(), m)
    }

    /// Fiber of the matrix in orthonormal coordinates at `theta`.
    pub fn fiber(&self, theta: &[f64]) -> Fiber {
        let raw = self.matrix.realize().at(theta);
        whiten(&raw, self.target.whitening(theta).map(|w| w.0), self.source.whitening(theta).map(|w| w.1))
    }

    /// Whether the fibers depend on `theta`.
    pub fn is_constant(&self) -> bool {
        self.matrix.realize().is_constant()
            && self.source.gram.as_ref().is_none_or(|g| g.realize().is_constant())
            && self.target.gram.as_ref().is_none_or(|g| g.realize().is_constant())
    }

    /// Torus rank to integrate over (0 when every fiber is the same).
    pub fn quadrature_rank(&self) -> usize {
        if self.is_constant() { 0 } else { self.model().torus_rank() }
    }

    /// `ln Det'` with respect to the modules' inner products.
    pub fn log_det(&self, opts: &FkOptions) -> Result<FkDeterminant> {
        if self.matrix.is_zero() {
            return Ok(zero_det(self.source.rank == 0 && self.target.rank == 0));
        }
        let plan = FiberPlan::new(std::slice::from_ref(self));
        let mut d = log_det_many(self.model().group_order(), plan.k, 1, opts, |t| plan.fibers(t))?;
        Ok(d.remove(0))
    }

    /// Kronecker product over `A1 (x) A2`.
    pub fn tensor(&self, other: &Morphism) -> Result<Morphism> {
        Morphism::new(
            self.source.tensor(&other.source)?,
            self.target.tensor(&other.target)?,
            self.matrix.kron(&other.matrix)?,
        )
    }

    pub fn direct_sum(&self, other: &Morphism) -> Result<Morphism> {
        Morphism::new(
            self.source.direct_sum(&other.source, format!("{}+{}", self.source.label, other.source.label))?,
            self.target.direct_sum(&other.target, format!("{}+{}", self.target.label, other.target.label))?,
            self.matrix.block_diag(&other.matrix)?,
        )
    }
}

fn zero_det(invertible: bool) -> FkDeterminant {
    FkDeterminant {
        log_det: 0.0,
        rank: 0.0,
        error: 0.0,
        resolution: 1,
        det_class: true,
        invertible,
        ladder: [0.0; 3],
    }
}

/// `left * m * right` with `None` meaning identity.
pub fn whiten(m: &Fiber, left: Option<Fiber>, right: Option<Fiber>) -> Fiber {
    let mut out = match left {
        Some(l) => l * m,
        None => m.clone(),
    };
    if let Some(r) = right {
        out *= r;
    }
    out
}

/// Precomputed realizations of a family of morphisms over a common model,
/// evaluated together at each quadrature point.
pub struct FiberPlan {
    parts: Vec<PlanPart>,
    pub k: usize,
}

struct PlanPart {
    matrix: Realization,
    target_gram: Option<Realization>,
    source_gram: Option<Realization>,
}

impl FiberPlan {
    pub fn new(maps: &[Morphism]) -> Self {
        let parts = maps
            .iter()
            .map(|m| PlanPart {
                matrix: m.matrix.realize(),
                target_gram: m.target.gram.as_ref().map(GroupRingMatrix::realize),
                source_gram: m.source.gram.as_ref().map(GroupRingMatrix::realize),
            })
            .collect();
        let k = maps.iter().map(Morphism::quadrature_rank).max().unwrap_or(0);
        FiberPlan { parts, k }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn fibers(&self, theta: &[f64]) -> Vec<Fiber> {
        self.parts
            .iter()
            .map(|p| {
                let raw = p.matrix.at(theta);
                let left = p.target_gram.as_ref().map(|g| hermitian_sqrt_pair(&g.at(theta)).0);
                let right = p.source_gram.as_ref().map(|g| hermitian_sqrt_pair(&g.at(theta)).1);
                whiten(&raw, left, right)
            })
            .collect()
    }
}

/// An object of the extended category: a morphism `alpha: A' -> A`.
#[derive(Clone, Debug)]
pub struct ExtendedObject {
    pub alpha: Morphism,
}

/// Torsion/projective decomposition `0 -> T X -> X -> P X -> 0`.
#[derive(Clone, Debug, Serialize)]
pub struct TpDecomposition {
    /// Von Neumann dimension of `P X`, the complement of the closure of the image.
    pub projective_dim: f64,
    /// Von Neumann dimension of the closure of the image, where `T X` lives.
    pub image_dim: f64,
    /// Spectral data of `alpha` corestricted to the closure of its image.
    pub torsion: FkDeterminant,
    /// `T X` vanishes exactly when `alpha` is onto its (closed) image with
    /// spectrum bounded away from zero on it.
    pub torsion_trivial: bool,
}

impl ExtendedObject {
    pub fn new(alpha: Morphism) -> Self {
        ExtendedObject { alpha }
    }

    pub fn tp_decompose(&self, opts: &FkOptions) -> Result<TpDecomposition> {
        let det = self.alpha.log_det(opts)?;
        let projective_dim = self.alpha.target.vn_dim() - det.rank;
        let torsion_trivial = det.rank == 0.0 || closed_range(&self.alpha, &det, opts)?;
        Ok(TpDecomposition { projective_dim: projective_dim.max(0.0), image_dim: det.rank, torsion: det, torsion_trivial })
    }
}

/// Closed range test: the smallest generic-rank singular value stays away from 0.
fn closed_range(alpha: &Morphism, det: &FkDeterminant, opts: &FkOptions) -> Result<bool> {
    let k = alpha.quadrature_rank();
    if k == 0 {
        return Ok(true);
    }
    let maps = [alpha.clone()];
    let plan = FiberPlan::new(&maps);
    let r = (det.rank * alpha.model().group_order() as f64).round() as usize;
    let min_at = |m: usize| -> f64 {
        let total = m.pow(k as u32);
        (0..total)
            .map(|idx| {
                let mut rest = idx;
                let theta: Vec<f64> = (0..k)
                    .map(|_| {
                        let j = rest % m;
                        rest /= m;
                        std::f64::consts::TAU * (j as f64 + 0.5) / m as f64
                    })
                    .collect();
                singular_values(&plan.fibers(&theta)[0])[r - 1]
            })
            .fold(f64::INFINITY, f64::min)
    };
    let _ = opts;
    Ok(min_at(64) > 0.75 * min_at(32))
}

/// Harmonic data at one degree of a complex: `ker (d_in d_in* + d_out* d_out)`.
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicData {
    /// Von Neumann dimension of the harmonic space (the L2-Betti number).
    pub betti: f64,
    /// Generic fiber rank of the incoming differential.
    pub rank_in: usize,
    /// Generic fiber rank of the outgoing differential.
    pub rank_out: usize,
    /// Fiber size of the module.
    pub fiber_dim: usize,
    pub order: usize,
}

/// Checks `d_out . d_in = 0` on the group-ring coefficients.
pub fn check_composable_zero(d_in: &Morphism, d_out: &Morphism) -> Result<()> {
    if d_in.target.rank != d_out.source.rank {
        return Err(Error::ShapeMismatch("differentials do not compose".into()));
    }
    let comp = d_out.matrix.mul(&d_in.matrix)?;
    let scale = 1.0 + d_in.matrix.max_abs() * d_out.matrix.max_abs();
    let defect = comp.max_abs();
    if defect > STRUCTURE_TOL * scale {
        return Err(Error::NotComplex(format!("d^2 has coefficient of size {defect:e}")));
    }
    Ok(())
}

pub fn harmonic_projection(d_in: &Morphism, d_out: &Morphism, opts: &FkOptions) -> Result<HarmonicData> {
    check_composable_zero(d_in, d_out)?;
    let maps = [d_in.clone(), d_out.clone()];
    let plan = FiberPlan::new(&maps);
    let ranks = generic_ranks(plan.k, 2, opts, &|t: &[f64]| plan.fibers(t))?;
    let order = d_in.model().group_order();
    let fiber_dim = d_in.target.fiber_dim();
    let harmonic = fiber_dim as i64 - ranks[0] as i64 - ranks[1] as i64;
    if harmonic < 0 {
        return Err(Error::NotComplex("image ranks exceed the module dimension".into()));
    }
    Ok(HarmonicData {
        betti: harmonic as f64 / order as f64,
        rank_in: ranks[0],
        rank_out: ranks[1],
        fiber_dim,
        order,
    })
}

/// Orthonormal basis (columns) of the harmonic space at one fiber, given the
/// whitened incoming and outgoing fibers and their generic ranks.
pub fn harmonic_basis(d_in: &Fiber, d_out: &Fiber, r_in: usize, r_out: usize) -> Fiber {
    let n = d_in.nrows();
    let mut p = Fiber::identity(n, n);
    if r_in > 0 {
        let u = top_left_singular(d_in, r_in);
        p -= &u * u.adjoint();
    }
    if r_out > 0 {
        let v = top_left_singular(&d_out.adjoint(), r_out);
        p -= &v * v.adjoint();
    }
    let h = n - r_in - r_out;
    if h == 0 {
        return Fiber::zeros(n, 0);
    }
    top_left_singular(&p, h)
}

pub use crate::algebra::dense::top_left_singular;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{FiniteGroupTable, GroupRingElement, Key};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn circle() -> (HilbertianModule, Morphism) {
        let m = Arc::new(AlgebraModel::torus(1));
        let h = HilbertianModule::free(m.clone(), 1, "C");
        let e = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-1.0))]);
        let d = Morphism::new(h.clone(), h.clone(), GroupRingMatrix::single(m, e).unwrap()).unwrap();
        (h, d)
    }

    #[test]
    fn translation_adjoint_is_inverse_translation() {
        let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(5).unwrap()));
        let h = HilbertianModule::free(m.clone(), 1, "H");
        let lg = GroupRingMatrix::single(m.clone(), GroupRingElement::monomial(Key::group(2), c(1.0))).unwrap();
        let f = Morphism::new(h.clone(), h, lg).unwrap();
        let adj = f.adjoint().unwrap();
        assert_eq!(adj.matrix().get(0, 0), &GroupRingElement::monomial(Key::group(3), c(1.0)));
    }

    #[test]
    fn tensor_of_scalars_has_determinant_six() {
        let z2 = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(2).unwrap()));
        let z3 = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap()));
        let a = Morphism::identity(HilbertianModule::free(z2.clone(), 1, "A"));
        let a = Morphism::new(a.source.clone(), a.target.clone(), GroupRingMatrix::scalar_identity(z2, 1, c(2.0))).unwrap();
        let b = Morphism::identity(HilbertianModule::free(z3.clone(), 1, "B"));
        let b = Morphism::new(b.source.clone(), b.target.clone(), GroupRingMatrix::scalar_identity(z3, 1, c(3.0))).unwrap();
        let t = a.tensor(&b).unwrap();
        assert_eq!(t.model().group_order(), 6);
        let d = t.log_det(&FkOptions::default()).unwrap();
        assert!((d.value() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn circle_is_dense_but_not_surjective() {
        let (_, d) = circle();
        let tp = ExtendedObject::new(d.clone()).tp_decompose(&FkOptions::default()).unwrap();
        assert_eq!(tp.projective_dim, 0.0);
        assert!(!tp.torsion_trivial);
        let h = harmonic_projection(&Morphism::zero(d.source().clone(), d.source().clone()), &d, &FkOptions::default())
            .unwrap();
        assert_eq!(h.betti, 0.0);
    }

    #[test]
    fn zero_and_invertible_decompositions() {
        let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap()));
        let h = HilbertianModule::free(m, 2, "A");
        let z = ExtendedObject::new(Morphism::zero(h.clone(), h.clone())).tp_decompose(&FkOptions::default()).unwrap();
        assert_eq!(z.projective_dim, 2.0);
        let id = ExtendedObject::new(Morphism::identity(h)).tp_decompose(&FkOptions::default()).unwrap();
        assert_eq!(id.projective_dim, 0.0);
        assert!(id.torsion_trivial);
    }

    #[test]
    fn adjoint_respects_gram() {
        let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap()));
        let g = GroupRingMatrix::single(
            m.clone(),
            GroupRingElement::from_terms([(Key::group(0), c(3.0)), (Key::group(1), c(1.0)), (Key::group(2), c(1.0))]),
        )
        .unwrap();
        let s = HilbertianModule::free(m.clone(), 1, "S").with_gram(g).unwrap();
        let t = HilbertianModule::free(m.clone(), 1, "T");
        let a = GroupRingMatrix::single(
            m,
            GroupRingElement::from_terms([(Key::group(1), Complex64::new(1.0, 2.0)), (Key::group(0), c(0.5))]),
        )
        .unwrap();
        let f = Morphism::new(s.clone(), t.clone(), a).unwrap();
        let adj = f.adjoint().unwrap();
        // <f x, y>_T = <x, f* y>_S  <=>  A* = G_S F*
        let lhs = f.matrix().star_transpose();
        let rhs = s.gram_matrix().mul(adj.matrix()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
        assert!(adj.adjoint().unwrap().matrix().sub(f.matrix()).unwrap().max_abs() < 1e-12);
    }
}
