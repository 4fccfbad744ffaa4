use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::GroupRingMatrix;

#[derive(Clone, Debug)]
struct Term {
    row: usize,
    col: usize,
    g: usize,
    exp: Vec<f64>,
    coeff: Complex64,
}

/// Concrete realization of a group-ring matrix: an `(m N) x (n N)` complex
/// matrix valued function on the torus `T^k` (constant when `k = 0`).
///
/// Each entry `sum c g z^v` becomes `sum c e^{i <v, theta>} L_g`, where `L_g`
/// is the left regular permutation matrix with `L_g[g h][h] = 1`.
#[derive(Clone, Debug)]
pub struct Realization {
    rows: usize,
    cols: usize,
    order: usize,
    torus_rank: usize,
    mult: Vec<usize>,
    terms: Vec<Term>,
}

impl Realization {
    pub fn new(m: &GroupRingMatrix) -> Self {
        let model = m.model();
        let order = model.group_order();
        let group = model.group();
        let mult = (0..order * order).map(|i| group.mul(i / order, i % order)).collect();
        let mut terms = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                for (k, c) in m.get(i, j).terms() {
                    terms.push(Term {
                        row: i,
                        col: j,
                        g: k.g,
                        exp: k.exp.iter().map(|&e| e as f64).collect(),
                        coeff: *c,
                    });
                }
            }
        }
        Realization {
            rows: m.nrows(),
            cols: m.ncols(),
            order,
            torus_rank: model.torus_rank(),
            mult,
            terms,
        }
    }

    /// Dimensions of the fiber matrices.
    pub fn fiber_shape(&self) -> (usize, usize) {
        (self.rows * self.order, self.cols * self.order)
    }

    pub fn torus_rank(&self) -> usize {
        self.torus_rank
    }

    pub fn is_constant(&self) -> bool {
        self.torus_rank == 0 || self.terms.iter().all(|t| t.exp.iter().all(|&e| e == 0.0))
    }

    /// The fiber matrix at `theta` (ignored in the finite model).
    pub fn at(&self, theta: &[f64]) -> DMatrix<Complex64> {
        let (r, c) = self.fiber_shape();
        let mut out = DMatrix::zeros(r, c);
        self.fill(theta, &mut out);
        out
    }

    /// Writes the fiber at `theta` into `out`, which must have the fiber shape.
    pub fn fill(&self, theta: &[f64], out: &mut DMatrix<Complex64>) {
        out.fill(Complex64::new(0.0, 0.0));
        let n = self.order;
        for t in &self.terms {
            let phase: f64 = t.exp.iter().zip(theta).map(|(v, th)| v * th).sum();
            let c = if phase == 0.0 { t.coeff } else { t.coeff * Complex64::from_polar(1.0, phase) };
            for h in 0..n {
                let gh = self.mult[t.g * n + h];
                out[(t.row * n + gh, t.col * n + h)] += c;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::{AlgebraModel, FiniteGroupTable, GroupRingElement, Key};

    #[test]
    fn z2_sum_realizes_to_all_ones() {
        let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(2).unwrap()));
        let e = GroupRingElement::from_terms([
            (Key::group(0), Complex64::new(1.0, 0.0)),
            (Key::group(1), Complex64::new(1.0, 0.0)),
        ]);
        let r = GroupRingMatrix::single(m, e).unwrap().realize().at(&[]);
        assert_eq!(r, DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn torus_symbol_vanishes_at_zero() {
        let m = Arc::new(AlgebraModel::torus(1));
        let e = GroupRingElement::from_terms([
            (Key::monomial(vec![1]), Complex64::new(1.0, 0.0)),
            (Key::monomial(vec![0]), Complex64::new(-1.0, 0.0)),
        ]);
        let r = GroupRingMatrix::single(m, e).unwrap().realize();
        assert!(r.at(&[0.0])[(0, 0)].norm() < 1e-15);
        assert!((r.at(&[std::f64::consts::PI])[(0, 0)] - Complex64::new(-2.0, 0.0)).norm() < 1e-15);
    }
}
