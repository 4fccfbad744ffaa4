//! Seeded generators of random algebraic data for property suites and the
//! self-test.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{AlgebraModel, GroupRingElement, GroupRingMatrix, Key};
use crate::complex::CochainComplex;
use crate::error::Result;

/// Random element with about `terms` terms; exponents in `-2..=2` for torus factors.
pub fn element<R: Rng>(rng: &mut R, model: &AlgebraModel, terms: usize, complex: bool) -> GroupRingElement {
    let mut e = GroupRingElement::zero();
    for _ in 0..terms {
        let key = Key {
            g: rng.random_range(0..model.group_order()),
            exp: (0..model.torus_rank()).map(|_| rng.random_range(-2..=2)).collect(),
        };
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        e.add_term(key, Complex64::new(rng.random_range(-1.0..1.0), im));
    }
    e
}

/// Random element with small integer coefficients.
pub fn integral_element<R: Rng>(rng: &mut R, model: &AlgebraModel, terms: usize) -> GroupRingElement {
    let mut e = GroupRingElement::zero();
    for _ in 0..terms {
        let key = Key {
            g: rng.random_range(0..model.group_order()),
            exp: (0..model.torus_rank()).map(|_| rng.random_range(-1..=1)).collect(),
        };
        e.add_term(key, Complex64::new(rng.random_range(-2..=2) as f64, 0.0));
    }
    e
}

pub fn matrix<R: Rng>(rng: &mut R, model: &Arc<AlgebraModel>, rows: usize, cols: usize, terms: usize) -> GroupRingMatrix {
    let mut m = GroupRingMatrix::zeros(model.clone(), rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, element(rng, model, terms, true));
        }
    }
    m
}

/// A matrix that is invertible in every model: a dominant scalar diagonal plus
/// a perturbation of operator norm below it.
pub fn invertible<R: Rng>(rng: &mut R, model: &Arc<AlgebraModel>, n: usize) -> GroupRingMatrix {
    let noise = matrix(rng, model, n, n, 2);
    let bound = noise.norm_bound();
    let diag: f64 = rng.random_range(1.2..2.5) * (bound + 0.1);
    GroupRingMatrix::scalar_identity(model.clone(), n, Complex64::new(diag, 0.0)).add(&noise).expect("same shape")
}

/// A random change of basis `g = D (I + U)` with `D` a positive scalar
/// diagonal and `U` strictly upper triangular, together with its exact inverse.
pub fn unipotent<R: Rng>(rng: &mut R, model: &Arc<AlgebraModel>, n: usize) -> (GroupRingMatrix, GroupRingMatrix) {
    let mut u = GroupRingMatrix::zeros(model.clone(), n, n);
    for i in 0..n {
        for j in i + 1..n {
            u.set(i, j, element(rng, model, 2, true));
        }
    }
    let id = GroupRingMatrix::identity(model.clone(), n);
    // (I + U)^{-1} = sum_k (-U)^k, a finite sum since U is nilpotent
    let mut inv = id.clone();
    let mut power = id.clone();
    let neg = u.scale(Complex64::new(-1.0, 0.0));
    for _ in 1..n {
        power = power.mul(&neg).expect("square");
        inv = inv.add(&power).expect("square");
    }
    let scales: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut d = GroupRingMatrix::zeros(model.clone(), n, n);
    let mut d_inv = GroupRingMatrix::zeros(model.clone(), n, n);
    for (i, s) in scales.iter().enumerate() {
        d.set(i, i, GroupRingElement::scalar(model, Complex64::new(*s, 0.0)));
        d_inv.set(i, i, GroupRingElement::scalar(model, Complex64::new(1.0 / s, 0.0)));
    }
    let g = d.mul(&id.add(&u).expect("square")).expect("square");
    let g_inv = inv.mul(&d_inv).expect("square");
    (g, g_inv)
}

/// One summand of a random complex.
#[derive(Clone, Copy, Debug)]
enum Piece {
    /// Rank-one modules in degrees `j` and `j + 1` joined by a random element.
    Pair(usize),
    /// A rank-one module in degree `j` with zero differentials: cohomology.
    Single(usize),
}

/// Random cochain complex over `model` with `len` degrees and total rank at
/// most `max_total`. With `acyclic` every summand is an elementary pair with a
/// generically invertible element; otherwise some summands carry cohomology.
/// The summands are mixed by random invertible changes of basis.
pub fn complex<R: Rng>(
    rng: &mut R,
    model: &Arc<AlgebraModel>,
    name: &str,
    len: usize,
    max_total: usize,
    acyclic: bool,
) -> Result<CochainComplex> {
    let len = len.max(2);
    let mut pieces = Vec::new();
    let mut total = 0;
    let target = rng.random_range(2..=max_total.max(2));
    while total + 2 <= target {
        if !acyclic && rng.random_bool(0.3) {
            pieces.push(Piece::Single(rng.random_range(0..len)));
            total += 1;
        } else {
            pieces.push(Piece::Pair(rng.random_range(0..len - 1)));
            total += 2;
        }
    }
    let mut ranks = vec![0usize; len];
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); pieces.len()];
    for (p, piece) in pieces.iter().enumerate() {
        let degs = match *piece {
            Piece::Pair(j) => vec![j, j + 1],
            Piece::Single(j) => vec![j],
        };
        for d in degs {
            slots[p].push(ranks[d]);
            ranks[d] += 1;
        }
    }
    let mut diffs: Vec<GroupRingMatrix> =
        (0..len - 1).map(|j| GroupRingMatrix::zeros(model.clone(), ranks[j + 1], ranks[j])).collect();
    for (p, piece) in pieces.iter().enumerate() {
        if let Piece::Pair(j) = *piece {
            let mut e = element(rng, model, 3, true);
            if e.is_zero() {
                e = GroupRingElement::one(model);
            }
            diffs[j].set(slots[p][1], slots[p][0], e);
        }
    }
    let mut mixed = Vec::new();
    let bases: Vec<(GroupRingMatrix, GroupRingMatrix)> = ranks.iter().map(|&r| unipotent(rng, model, r)).collect();
    for j in 0..len - 1 {
        let mut d = bases[j + 1].0.mul(&diffs[j])?.mul(&bases[j].1)?;
        d.normalize(1e-14);
        mixed.push(d);
    }
    CochainComplex::from_matrices(model.clone(), name, 0, &ranks, mixed)
}

/// Twists `T^j = d_L h^j - h^{j+1} d_N` from random `h^j: N^j -> L^j`, which
/// always satisfy the cocycle condition of a twisted sum.
pub fn twist<R: Rng>(rng: &mut R, l: &CochainComplex, n: &CochainComplex) -> Result<Vec<GroupRingMatrix>> {
    let model = l.model().clone();
    let h: Vec<GroupRingMatrix> =
        (0..l.len()).map(|j| matrix(rng, &model, l.ranks()[j], n.ranks()[j], 2)).collect();
    (0..l.len() - 1)
        .map(|j| {
            let a = l.differentials()[j].matrix().mul(&h[j])?;
            let b = h[j + 1].mul(n.differentials()[j].matrix())?;
            a.sub(&b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::algebra::{FiniteGroupTable, FkOptions};

    #[test]
    fn random_complexes_are_complexes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::dihedral(3).unwrap()));
        for i in 0..10 {
            let c = complex(&mut rng, &model, "R", 3 + i % 2, 6, i % 2 == 0).unwrap();
            c.validate().unwrap();
            let h = c.cohomology(&FkOptions::default()).unwrap();
            if i % 2 == 0 {
                assert!(h.weakly_acyclic);
            }
        }
    }
}
