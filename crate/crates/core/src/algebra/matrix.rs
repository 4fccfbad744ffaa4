use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::element::GroupRingElement;
use super::model::{AlgebraModel, Key, ModelKind};
use super::realize::Realization;
use crate::error::{Error, Result};

/// An `m x n` matrix over the group ring of a model.
///
/// Matrices act on column vectors; realization is a homomorphism, so
/// `realize(a * b) = realize(a) * realize(b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRingMatrix {
    model: Arc<AlgebraModel>,
    rows: usize,
    cols: usize,
    entries: Vec<GroupRingElement>,
}

impl GroupRingMatrix {
    pub fn zeros(model: Arc<AlgebraModel>, rows: usize, cols: usize) -> Self {
        GroupRingMatrix { model, rows, cols, entries: vec![GroupRingElement::zero(); rows * cols] }
    }

    pub fn identity(model: Arc<AlgebraModel>, n: usize) -> Self {
        Self::scalar_identity(model, n, Complex64::new(1.0, 0.0))
    }

    pub fn scalar_identity(model: Arc<AlgebraModel>, n: usize, c: Complex64) -> Self {
        let mut m = Self::zeros(model.clone(), n, n);
        for i in 0..n {
            m.set(i, i, GroupRingElement::scalar(&model, c));
        }
        m
    }

    /// Builds a matrix from row-major entries, checking every key against the model.
    pub fn from_rows(model: Arc<AlgebraModel>, rows: Vec<Vec<GroupRingElement>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(m * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::ShapeMismatch(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            entries.extend(row);
        }
        Self::from_entries(model, m, n, entries)
    }

    pub fn from_entries(
        model: Arc<AlgebraModel>,
        rows: usize,
        cols: usize,
        entries: Vec<GroupRingElement>,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        for e in &entries {
            for (k, _) in e.terms() {
                model.check_key(k)?;
            }
        }
        Ok(GroupRingMatrix { model, rows, cols, entries })
    }

    /// A matrix of complex scalars (multiples of the identity element).
    pub fn from_scalars(model: Arc<AlgebraModel>, m: &DMatrix<Complex64>) -> Self {
        let mut out = Self::zeros(model.clone(), m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, GroupRingElement::scalar(&model, m[(i, j)]));
            }
        }
        out
    }

    /// A 1x1 matrix.
    pub fn single(model: Arc<AlgebraModel>, e: GroupRingElement) -> Result<Self> {
        Self::from_entries(model, 1, 1, vec![e])
    }

    pub fn model(&self) -> &Arc<AlgebraModel> {
        &self.model
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &GroupRingElement {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: GroupRingElement) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn entries(&self) -> &[GroupRingElement] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(GroupRingElement::is_zero)
    }

    fn same_model(&self, other: &Self) -> Result<()> {
        if self.model != other.model {
            return Err(Error::ModelMismatch(format!("{} vs {}", self.model, other.model)));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&GroupRingElement) -> GroupRingElement) -> Self {
        GroupRingMatrix {
            model: self.model.clone(),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!("{:?} + {:?}", self.shape(), other.shape())));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect();
        Ok(GroupRingMatrix { entries, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|e| e.scale(s))
    }

    /// Left multiplication of every entry by a ring element.
    pub fn left_mul_element(&self, x: &GroupRingElement) -> Self {
        self.map(|e| x.mul(e, &self.model))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!("{:?} * {:?}", self.shape(), other.shape())));
        }
        let mut out = Self::zeros(self.model.clone(), self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..other.cols {
                let mut acc = GroupRingElement::zero();
                for j in 0..self.cols {
                    let a = self.get(i, j);
                    let b = other.get(j, l);
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b, &self.model));
                    }
                }
                out.set(i, l, acc);
            }
        }
        Ok(out)
    }

    /// Plain transpose, entries untouched.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.model.clone(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Transpose with the involution applied entrywise; realizes to the conjugate transpose.
    pub fn star_transpose(&self) -> Self {
        let mut out = Self::zeros(self.model.clone(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).involute(&self.model));
            }
        }
        out
    }

    /// Sum of the traces of the diagonal entries, so `trace(id_n) = n`.
    pub fn trace(&self) -> Result<Complex64> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch("trace of a non-square matrix".into()));
        }
        Ok((0..self.rows).map(|i| self.get(i, i).trace(&self.model)).sum())
    }

    /// Kronecker product over the tensor product model.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let model = Arc::new(self.model.tensor(&other.model)?);
        let (m1, m2) = (&self.model, &other.model);
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(model, rows, cols);
        for i1 in 0..self.rows {
            for j1 in 0..self.cols {
                let a = self.get(i1, j1);
                if a.is_zero() {
                    continue;
                }
                for i2 in 0..other.rows {
                    for j2 in 0..other.cols {
                        let b = other.get(i2, j2);
                        out.set(i1 * other.rows + i2, j1 * other.cols + j2, a.tensor(m1, b, m2));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Embeds a matrix over a factor model into the tensor model `self.model (x) other`
    /// as `a (x) 1`.
    pub fn extend_right(&self, other: &Arc<AlgebraModel>) -> Result<Self> {
        self.kron(&GroupRingMatrix::identity(other.clone(), 1))
    }

    /// Embeds as `1 (x) a` in `other (x) self.model`.
    pub fn extend_left(&self, other: &Arc<AlgebraModel>) -> Result<Self> {
        GroupRingMatrix::identity(other.clone(), 1).kron(self)
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!("hstack {:?} {:?}", self.shape(), other.shape())));
        }
        let mut out = Self::zeros(self.model.clone(), self.rows, self.cols + other.cols);
        out.paste(0, 0, self);
        out.paste(0, self.cols, other);
        Ok(out)
    }

    /// `[self ; other]`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!("vstack {:?} {:?}", self.shape(), other.shape())));
        }
        let mut out = Self::zeros(self.model.clone(), self.rows + other.rows, self.cols);
        out.paste(0, 0, self);
        out.paste(self.rows, 0, other);
        Ok(out)
    }

    pub fn block_diag(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        let mut out =
            Self::zeros(self.model.clone(), self.rows + other.rows, self.cols + other.cols);
        out.paste(0, 0, self);
        out.paste(self.rows, self.cols, other);
        Ok(out)
    }

    /// Overwrites the block starting at `(r, c)` with `block`.
    pub fn paste(&mut self, r: usize, c: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r + i, c + j, block.get(i, j).clone());
            }
        }
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.model.clone(), rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j).clone());
            }
        }
        out
    }

    /// Upper bound for the operator norm of any realization.
    pub fn norm_bound(&self) -> f64 {
        let frob: f64 = self.entries.iter().map(|e| e.l1_norm().powi(2)).sum();
        frob.sqrt()
    }

    /// Largest absolute coefficient among all entries.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(GroupRingElement::max_abs).fold(0.0, f64::max)
    }

    pub fn normalize(&mut self, tol: f64) {
        for e in &mut self.entries {
            e.normalize(tol);
        }
    }

    pub fn realize(&self) -> Realization {
        Realization::new(self)
    }

    /// Inverse in the finite model, computed through the regular realization.
    ///
    /// The torus model only inverts matrices with monomial entries forming a
    /// generalized permutation matrix.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotInvertible("non-square matrix".into()));
        }
        match self.model.kind() {
            ModelKind::FiniteGroup => {
                let dense = self.realize().at(&[]);
                let n = dense.nrows();
                let lu = dense.lu();
                let inv = lu
                    .try_inverse()
                    .ok_or_else(|| Error::NotInvertible("singular realization".into()))?;
                let scale = inv.iter().map(|c| c.norm()).fold(0.0, f64::max);
                if !scale.is_finite() || n > 0 && scale > 1e14 {
                    return Err(Error::NotInvertible("realization is numerically singular".into()));
                }
                Ok(Self::from_realization(self.model.clone(), &inv))
            }
            _ => self.monomial_inverse(),
        }
    }

    fn monomial_inverse(&self) -> Result<Self> {
        let n = self.rows;
        let mut out = Self::zeros(self.model.clone(), n, n);
        let mut used = vec![false; n];
        for i in 0..n {
            let mut found = None;
            for j in 0..n {
                let e = self.get(i, j);
                if e.is_zero() {
                    continue;
                }
                if found.is_some() || e.len() != 1 || used[j] {
                    return Err(Error::NotInvertible(
                        "only generalized permutation matrices of monomials are invertible over Z^k".into(),
                    ));
                }
                found = Some(j);
            }
            let j = found.ok_or_else(|| Error::NotInvertible(format!("row {i} is zero")))?;
            used[j] = true;
            let (k, c) = self.get(i, j).terms().next().map(|(k, c)| (k.clone(), *c)).unwrap();
            out.set(j, i, GroupRingElement::monomial(self.model.inv_key(&k), c.inv()));
        }
        Ok(out)
    }

    /// Recovers a finite-model matrix from a regular realization by reading the
    /// first column of each `N x N` block.
    pub fn from_realization(model: Arc<AlgebraModel>, dense: &DMatrix<Complex64>) -> Self {
        let n = model.group_order();
        let rows = dense.nrows() / n;
        let cols = dense.ncols() / n;
        let mut out = Self::zeros(model.clone(), rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = GroupRingElement::from_terms(
                    (0..n).map(|g| (Key::group(g), dense[(i * n + g, j * n)])),
                );
                out.set(i, j, e);
            }
        }
        out.normalize(1e-15);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FiniteGroupTable;

    fn z(n: usize) -> Arc<AlgebraModel> {
        Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(n).unwrap()))
    }

    fn el(terms: &[(usize, f64)]) -> GroupRingElement {
        GroupRingElement::from_terms(terms.iter().map(|&(g, c)| (Key::group(g), Complex64::new(c, 0.0))))
    }

    #[test]
    fn star_transpose_is_involution() {
        let m = z(4);
        let a = GroupRingMatrix::from_rows(
            m,
            vec![vec![el(&[(1, 2.0)]), el(&[(0, 1.0), (3, -1.0)])], vec![el(&[]), el(&[(2, 0.5)])]],
        )
        .unwrap();
        assert_eq!(a.star_transpose().star_transpose(), a);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = z(3);
        let a = GroupRingMatrix::from_rows(m.clone(), vec![vec![el(&[(0, 2.0), (1, 1.0)])]]).unwrap();
        let inv = a.inverse().unwrap();
        let prod = a.mul(&inv).unwrap();
        let id = GroupRingMatrix::identity(m, 1);
        assert!(prod.sub(&id).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn monomial_inverse_on_torus() {
        let m = Arc::new(AlgebraModel::torus(2));
        let a = GroupRingMatrix::single(
            m.clone(),
            GroupRingElement::monomial(Key::monomial(vec![1, -2]), Complex64::new(0.0, 2.0)),
        )
        .unwrap();
        let prod = a.mul(&a.inverse().unwrap()).unwrap();
        assert_eq!(prod, GroupRingMatrix::identity(m, 1));
    }

    #[test]
    fn trace_of_identity_is_rank() {
        assert_eq!(GroupRingMatrix::identity(z(5), 3).trace().unwrap(), Complex64::new(3.0, 0.0));
    }
}
