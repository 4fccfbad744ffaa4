use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::cw::EquivariantCWComplex;
use super::group::{Group, IntElement, IntMatrix, ProductGroup, Word};
use crate::algebra::{AlgebraModel, FkOptions, GroupRingElement, GroupRingMatrix, Key};
use crate::complex::{CochainComplex, TorsionReport};
use crate::error::{Error, Result};

/// Image `scale * key` of one generator of `pi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorImage {
    pub scale: Complex64,
    pub key: Key,
}

impl GeneratorImage {
    pub fn key(key: Key) -> Self {
        GeneratorImage { scale: Complex64::new(1.0, 0.0), key }
    }
}

/// The bimodule `H = l^2(target)^m` with `pi` acting through a homomorphism
/// `phi: pi -> target` given on generators; `m` is the multiplicity.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSystem {
    group: Group,
    target: Arc<AlgebraModel>,
    images: Vec<GeneratorImage>,
    multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnimodularityReport {
    pub unimodular: bool,
    /// `ln Det(L_{phi(g)})` per generator.
    pub log_dets: Vec<f64>,
}

const HOM_TOL: f64 = 1e-12;

impl CoefficientSystem {
    /// Validates that the generator images define a homomorphism.
    pub fn new(group: Group, target: Arc<AlgebraModel>, images: Vec<GeneratorImage>) -> Result<Self> {
        let h = CoefficientSystem { group, target, images, multiplicity: 1 };
        h.validate()?;
        Ok(h)
    }

    /// `l^2(pi)` with `phi` the identity; needs normal forms.
    pub fn regular(group: &Group) -> Result<Self> {
        let model = group
            .regular_model()
            .ok_or_else(|| Error::HomomorphismInvalid("a presented group has no regular representation here".into()))?;
        let images = (0..group.generator_count())
            .map(|g| GeneratorImage::key(group.normal_form(&Word::gen(g)).expect("normal form exists")))
            .collect();
        CoefficientSystem::new(group.clone(), Arc::new(model), images)
    }

    /// `H = C` with trivial action.
    pub fn trivial(group: &Group) -> Self {
        let images = vec![GeneratorImage::key(Key::group(0)); group.generator_count()];
        CoefficientSystem { group: group.clone(), target: Arc::new(AlgebraModel::scalars()), images, multiplicity: 1 }
    }

    pub fn with_multiplicity(mut self, m: usize) -> Self {
        self.multiplicity = m.max(1);
        self
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn target(&self) -> &Arc<AlgebraModel> {
        &self.target
    }

    pub fn images(&self) -> &[GeneratorImage] {
        &self.images
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    /// Von Neumann dimension of `H` over the target algebra.
    pub fn vn_dim(&self) -> f64 {
        self.multiplicity as f64
    }

    fn validate(&self) -> Result<()> {
        if self.images.len() != self.group.generator_count() {
            return Err(Error::HomomorphismInvalid(format!(
                "{} generator images for {} generators",
                self.images.len(),
                self.group.generator_count()
            )));
        }
        for im in &self.images {
            self.target.check_key(&im.key).map_err(|e| Error::HomomorphismInvalid(e.to_string()))?;
            if im.scale.norm() == 0.0 || !im.scale.is_finite() {
                return Err(Error::HomomorphismInvalid("generator sent to a non-invertible scalar".into()));
            }
        }
        self.check_relations(&self.group, 0)
    }

    fn check_relations(&self, group: &Group, offset: usize) -> Result<()> {
        let n = group.generator_count();
        let word = |w: &Word| w.map_gens(|g| g + offset);
        match group {
            Group::Finite { table } => {
                let id = self.evaluate(&word(&Word::gen(0)));
                self.expect_identity(&id, "identity element")?;
                for a in 0..n {
                    for b in 0..n {
                        let lhs = self.evaluate(&word(&Word::from_pairs(&[(a, 1), (b, 1)])));
                        let rhs = self.evaluate(&word(&Word::gen(table.mul(a, b))));
                        if lhs.1 != rhs.1 || (lhs.0 - rhs.0).norm() > HOM_TOL * (1.0 + rhs.0.norm()) {
                            return Err(Error::HomomorphismInvalid(format!("phi({a})phi({b}) != phi({a}{b})")));
                        }
                    }
                }
            }
            Group::FreeAbelian { .. } => self.check_commuting(offset..offset + n, offset..offset + n)?,
            Group::Presented(p) => {
                for r in &p.relators {
                    self.group_check(group, r)?;
                    let v = self.evaluate(&word(r));
                    self.expect_identity(&v, "relator")?;
                }
            }
            Group::Product { left, right } => {
                let nl = left.generator_count();
                self.check_relations(left, offset)?;
                self.check_relations(right, offset + nl)?;
                self.check_commuting(offset..offset + nl, offset + nl..offset + n)?;
            }
        }
        Ok(())
    }

    fn group_check(&self, group: &Group, w: &Word) -> Result<()> {
        group.check_word(w).map_err(|e| Error::HomomorphismInvalid(e.to_string()))
    }

    fn check_commuting(&self, a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> Result<()> {
        for i in a {
            for j in b.clone() {
                let ij = self.evaluate(&Word::from_pairs(&[(i, 1), (j, 1)]));
                let ji = self.evaluate(&Word::from_pairs(&[(j, 1), (i, 1)]));
                if ij.1 != ji.1 {
                    return Err(Error::HomomorphismInvalid(format!("images of generators {i} and {j} do not commute")));
                }
            }
        }
        Ok(())
    }

    fn expect_identity(&self, v: &(Complex64, Key), what: &str) -> Result<()> {
        if v.1 != self.target.identity_key() || (v.0 - 1.0).norm() > HOM_TOL {
            return Err(Error::HomomorphismInvalid(format!("{what} is not sent to the identity")));
        }
        Ok(())
    }

    /// `phi(w)` as `scale * key`.
    pub fn evaluate(&self, w: &Word) -> (Complex64, Key) {
        let mut scale = Complex64::new(1.0, 0.0);
        let mut key = self.target.identity_key();
        for l in &w.0 {
            let im = &self.images[l.gen];
            let (s, k) = if l.power >= 0 { (im.scale, im.key.clone()) } else { (im.scale.inv(), self.target.inv_key(&im.key)) };
            for _ in 0..l.power.unsigned_abs() {
                scale *= s;
                key = self.target.mul_keys(&key, &k);
            }
        }
        (scale, key)
    }

    /// Exact image key when the scale is one.
    pub fn exact_key(&self, w: &Word) -> Option<Key> {
        let (s, k) = self.evaluate(w);
        (s == Complex64::new(1.0, 0.0)).then_some(k)
    }

    pub fn element(&self, e: &IntElement) -> GroupRingElement {
        let mut out = GroupRingElement::zero();
        for (w, n) in &e.terms {
            let (s, k) = self.evaluate(w);
            out.add_term(k, s * *n as f64);
        }
        out.normalize(0.0);
        out
    }

    /// `phi` applied entrywise.
    pub fn matrix(&self, m: &IntMatrix) -> GroupRingMatrix {
        let mut out = GroupRingMatrix::zeros(self.target.clone(), m.rows, m.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                out.set(i, j, self.element(m.get(i, j)));
            }
        }
        out
    }

    /// `Hom_{Z pi}(-, H)` on a cellular map: `phi(F)^T`, tensored with `I_m`.
    pub fn cochain_matrix(&self, m: &IntMatrix) -> GroupRingMatrix {
        let t = self.matrix(m).transpose();
        if self.multiplicity == 1 {
            return t;
        }
        let id = GroupRingMatrix::identity(Arc::new(AlgebraModel::scalars()), self.multiplicity);
        t.kron(&id).expect("tensoring with scalars is always supported")
    }

    /// `H_1 (x) H_2` over `pi_1 x pi_2`.
    pub fn product(h1: &CoefficientSystem, h2: &CoefficientSystem) -> Result<(ProductGroup, CoefficientSystem)> {
        let pg = ProductGroup::new(&h1.group, &h2.group);
        let target = Arc::new(h1.target.tensor(&h2.target)?);
        let images = (0..pg.group.generator_count())
            .map(|g| {
                let (w1, w2) = pg.split_generator(g);
                let (s1, k1) = h1.evaluate(&w1);
                let (s2, k2) = h2.evaluate(&w2);
                GeneratorImage { scale: s1 * s2, key: h1.target.tensor_keys(&h2.target, &k1, &k2) }
            })
            .collect();
        let h = CoefficientSystem::new(pg.group.clone(), target, images)?.with_multiplicity(h1.multiplicity * h2.multiplicity);
        Ok((pg, h))
    }
}

/// `ln Det(L_{phi(g)})` for each generator. Each image is a scalar times a
/// unitary (a permutation of the group times torus phases), so its
/// determinant is the modulus of the scalar.
pub fn unimodularity_check(h: &CoefficientSystem) -> UnimodularityReport {
    let log_dets: Vec<f64> = h.images.iter().map(|im| im.scale.norm().ln()).collect();
    UnimodularityReport { unimodular: log_dets.iter().all(|d| d.abs() <= 1e-12), log_dets }
}

/// `C^*(X; H) = Hom_{Z pi}(C_*(X~), H)`: rank `m #c_k` in degree `k` and
/// `d^{k-1} = phi(d_k)^T`.
pub fn cochain_with_coefficients(x: &EquivariantCWComplex, h: &CoefficientSystem) -> Result<CochainComplex> {
    if x.group != h.group {
        return Err(Error::HomomorphismInvalid(format!("coefficients are not over the group of {}", x.name)));
    }
    if let Some(false) = x.boundaries_vanish(&|w| h.exact_key(w)) {
        return Err(Error::NotComplex(format!("{}: boundary of a boundary is not zero", x.name)));
    }
    let ranks: Vec<usize> = x.cells.iter().map(|c| c * h.multiplicity).collect();
    let mats = x.boundaries.iter().map(|b| h.cochain_matrix(b)).collect();
    CochainComplex::from_matrices(h.target.clone(), x.name.clone(), 0, &ranks, mats)
}

/// `rho(X; H)` for the designated generator `sigma = e^{sigma_log}` times the
/// standard inner product of `H`.
pub fn l2_torsion(x: &EquivariantCWComplex, h: &CoefficientSystem, sigma_log: f64, opts: &FkOptions) -> Result<TorsionReport> {
    let u = unimodularity_check(h);
    if !u.unimodular {
        return Err(Error::NotUnimodular(format!("generator determinants {:?}", u.log_dets)));
    }
    let c = cochain_with_coefficients(x, h)?;
    let mut report = c.torsion(opts)?;
    if sigma_log != 0.0 {
        report.log_value += x.euler_char() as f64 * sigma_log;
        report.trivialization = format!("{}; sigma rescaled by e^{sigma_log}", report.trivialization);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FiniteGroupTable;
    use crate::spaces::builtin;

    #[test]
    fn circle_gives_z_minus_one() {
        let b = builtin::circle_z();
        let c = cochain_with_coefficients(&b.space, &b.coefficients).unwrap();
        let d = c.differentials()[0].matrix().get(0, 0).clone();
        let expect = GroupRingElement::from_terms([
            (Key::monomial(vec![1]), Complex64::new(1.0, 0.0)),
            (Key::monomial(vec![0]), Complex64::new(-1.0, 0.0)),
        ]);
        assert_eq!(d, expect);
    }

    #[test]
    fn ranks_follow_cells() {
        let b = builtin::lens(5, 2).unwrap();
        let c = cochain_with_coefficients(&b.space, &b.coefficients).unwrap();
        assert_eq!(c.ranks(), b.space.cells);
        let c = cochain_with_coefficients(&b.space, &b.coefficients.clone().with_multiplicity(2)).unwrap();
        assert_eq!(c.ranks(), vec![2; 4]);
    }

    #[test]
    fn unimodularity() {
        let z3 = Group::finite(FiniteGroupTable::cyclic(3).unwrap());
        assert!(unimodularity_check(&CoefficientSystem::regular(&z3).unwrap()).unimodular);
        let z = Group::free_abelian(1);
        assert!(unimodularity_check(&CoefficientSystem::regular(&z).unwrap()).unimodular);
        let scaled = CoefficientSystem::new(
            z,
            Arc::new(AlgebraModel::torus(1)),
            vec![GeneratorImage { scale: Complex64::new(2.0, 0.0), key: Key::monomial(vec![1]) }],
        )
        .unwrap();
        let r = unimodularity_check(&scaled);
        assert!(!r.unimodular);
        assert!((r.log_dets[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn relations_are_checked() {
        let z3 = Group::finite(FiniteGroupTable::cyclic(3).unwrap());
        let target = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(2).unwrap()));
        let images = (0..3).map(|g| GeneratorImage::key(Key::group(g % 2))).collect();
        assert!(matches!(CoefficientSystem::new(z3, target, images), Err(Error::HomomorphismInvalid(_))));
    }

    #[test]
    fn basic_torsions() {
        let opts = FkOptions::default();
        let p = builtin::point();
        let h = CoefficientSystem::trivial(&p.group);
        assert_eq!(l2_torsion(&p, &h, 0.0, &opts).unwrap().log_value, 0.0);
        let c = builtin::circle_z();
        let r = l2_torsion(&c.space, &c.coefficients, 0.0, &opts).unwrap();
        assert!(r.log_value.abs() < 1e-8, "{}", r.log_value);
        let s2 = builtin::sphere(2).unwrap().space;
        let r = l2_torsion(&s2, &CoefficientSystem::trivial(&s2.group), 0.0, &opts).unwrap();
        assert_eq!(r.log_value, 0.0);
        assert_eq!(r.betti, vec![1.0, 0.0, 1.0]);
    }
}
