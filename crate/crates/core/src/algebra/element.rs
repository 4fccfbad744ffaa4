use std::collections::BTreeMap;

use num_complex::Complex64;

use super::model::{AlgebraModel, Key};

/// Coefficients below this magnitude are dropped by [`GroupRingElement::normalize`].
const DROP: f64 = 1e-300;

/// A finitely supported element `sum c_k k` of the group ring of `G x Z^k`.
///
/// Elements do not carry their model; operations that need the group law take
/// it as an argument.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupRingElement {
    terms: BTreeMap<Key, Complex64>,
}

impl GroupRingElement {
    pub fn zero() -> Self {
        GroupRingElement { terms: BTreeMap::new() }
    }

    pub fn one(model: &AlgebraModel) -> Self {
        Self::scalar(model, Complex64::new(1.0, 0.0))
    }

    pub fn scalar(model: &AlgebraModel, c: Complex64) -> Self {
        Self::monomial(model.identity_key(), c)
    }

    pub fn monomial(key: Key, c: Complex64) -> Self {
        let mut e = Self::zero();
        e.add_term(key, c);
        e
    }

    pub fn from_terms<I: IntoIterator<Item = (Key, Complex64)>>(terms: I) -> Self {
        let mut e = Self::zero();
        for (k, c) in terms {
            e.add_term(k, c);
        }
        e
    }

    pub fn add_term(&mut self, key: Key, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let slot = self.terms.entry(key.clone()).or_default();
        *slot += c;
        if slot.norm() <= DROP {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Key, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, key: &Key) -> Complex64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    /// Drops coefficients smaller than `tol` in absolute value.
    pub fn normalize(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol.max(DROP));
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), -*c);
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(k, c)| (k.clone(), c * s)))
    }

    pub fn mul(&self, other: &Self, model: &AlgebraModel) -> Self {
        let mut out = Self::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(model.mul_keys(a, b), ca * cb);
            }
        }
        out
    }

    /// The involution `sum c_k k -> sum conj(c_k) k^{-1}`.
    pub fn involute(&self, model: &AlgebraModel) -> Self {
        Self::from_terms(self.terms.iter().map(|(k, c)| (model.inv_key(k), c.conj())))
    }

    /// The standard trace: the coefficient of the identity.
    pub fn trace(&self, model: &AlgebraModel) -> Complex64 {
        self.coefficient(&model.identity_key())
    }

    /// `a (x) b` in the tensor product model `m1 (x) m2`.
    pub fn tensor(&self, m1: &AlgebraModel, other: &Self, m2: &AlgebraModel) -> Self {
        let mut out = Self::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(m1.tensor_keys(m2, a, b), ca * cb);
            }
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sum of absolute coefficients, an upper bound for the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FiniteGroupTable;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn trace_of_square_in_z3() {
        let m = AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap());
        let x = GroupRingElement::from_terms([(Key::group(0), c(1.0)), (Key::group(1), c(1.0))]);
        // (e + t)^2 = e + 2t + t^2
        let sq = x.mul(&x, &m);
        assert_eq!(sq.trace(&m), c(1.0));
        assert_eq!(sq.coefficient(&Key::group(1)), c(2.0));
    }

    #[test]
    fn involution_reverses_products() {
        let m = AlgebraModel::mixed(FiniteGroupTable::symmetric(3).unwrap(), 1);
        let a = GroupRingElement::from_terms([
            (Key { g: 1, exp: vec![2] }, Complex64::new(1.0, 2.0)),
            (Key { g: 3, exp: vec![-1] }, c(0.5)),
        ]);
        let b = GroupRingElement::from_terms([(Key { g: 4, exp: vec![1] }, Complex64::new(0.0, 1.0))]);
        let lhs = a.mul(&b, &m).involute(&m);
        let rhs = b.involute(&m).mul(&a.involute(&m), &m);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = GroupRingElement::monomial(Key::group(2), c(1.5));
        assert!(x.sub(&x).is_zero());
    }
}
