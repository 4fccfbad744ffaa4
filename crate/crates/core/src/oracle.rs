//! Brute-force reference computations used to certify the main pipeline.
//!
//! Nothing here goes through the spectral machinery of [`crate::algebra::fk`]:
//! the oracles read fibers through [`Realization`] and then use Hermitian
//! eigenvalues, column-pivoted QR and their own grid refinement.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::algebra::{GroupRingElement, ModelKind, Realization};
use crate::complex::{sign, CochainComplex};
use crate::error::{Error, Result};

type Dense = DMatrix<Complex64>;

/// Eigenvalues of a Laplacian below `LAPLACIAN_CUTOFF * lambda_max` are zero.
const LAPLACIAN_CUTOFF: f64 = 1e-12;
/// `|R_ii| <= QR_CUTOFF * |R_00|` ends the numerical rank.
const QR_CUTOFF: f64 = 1e-10;

/// Doubling differences below this, relative to the value, are rounding noise.
const ROUNDING_FLOOR: f64 = 1e-13;

/// A value with an honest error bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Refined {
    pub value: f64,
    pub bound: f64,
    /// Final grid resolution per circle factor.
    pub resolution: usize,
}

/// `(G^{1/2}, G^{-1/2})` of a positive Hermitian matrix.
fn sqrt_pair(g: &Dense) -> (Dense, Dense) {
    let e = SymmetricEigen::new(g.clone());
    let v = &e.eigenvectors;
    let d = |f: fn(f64) -> f64| Dense::from_diagonal(&e.eigenvalues.map(|l| Complex64::new(f(l), 0.0)));
    (v * d(f64::sqrt) * v.adjoint(), v * d(|l| 1.0 / l.sqrt()) * v.adjoint())
}

/// Differentials of `c` at `theta` in orthonormal coordinates.
struct Fibers {
    maps: Vec<Realization>,
    grams: Vec<Option<Realization>>,
    dims: Vec<usize>,
}

impl Fibers {
    fn new(c: &CochainComplex) -> Self {
        let order = c.model().group_order();
        Fibers {
            maps: c.differentials().iter().map(|d| d.matrix().realize()).collect(),
            grams: c.modules().iter().map(|m| m.gram().map(|g| g.realize())).collect(),
            dims: c.modules().iter().map(|m| m.rank() * order).collect(),
        }
    }

    fn is_constant(&self) -> bool {
        self.maps.iter().all(Realization::is_constant) && self.grams.iter().flatten().all(Realization::is_constant)
    }

    fn at(&self, theta: &[f64]) -> Vec<Dense> {
        let roots: Vec<Option<(Dense, Dense)>> = self.grams.iter().map(|g| g.as_ref().map(|g| sqrt_pair(&g.at(theta)))).collect();
        self.maps
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let mut d = m.at(theta);
                if let Some((_, inv)) = &roots[j] {
                    d *= inv;
                }
                if let Some((sq, _)) = &roots[j + 1] {
                    d = sq * d;
                }
                d
            })
            .collect()
    }

    /// `Delta_j = d_j^* d_j + d_{j-1} d_{j-1}^*` on the `j`-th module.
    fn laplacians(&self, theta: &[f64]) -> Vec<Dense> {
        let d = self.at(theta);
        (0..self.dims.len())
            .map(|j| {
                let mut l = Dense::zeros(self.dims[j], self.dims[j]);
                if j < d.len() {
                    l += d[j].adjoint() * &d[j];
                }
                if j > 0 {
                    l += &d[j - 1] * d[j - 1].adjoint();
                }
                l
            })
            .collect()
    }
}

/// `sum ln lambda` over the nonzero eigenvalues of a positive matrix.
fn log_det_prime_psd(m: &Dense) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let top = ev.iter().cloned().fold(0.0, f64::max);
    let cut = (LAPLACIAN_CUTOFF * top).max(1e-300);
    ev.iter().filter(|&&l| l > cut).map(|l| l.ln()).sum()
}

fn laplacian_integrand(f: &Fibers, offset: i64, theta: &[f64]) -> f64 {
    f.laplacians(theta)
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let i = offset + j as i64;
            -(sign(i) as f64) * i as f64 * log_det_prime_psd(l)
        })
        .sum::<f64>()
        / 2.0
}

/// `(1/2) sum_i (-1)^{i+1} i ln Det'(Delta_i)`.
///
/// Exact in the finite model; on the torus the fiberwise integrand is
/// refined by grid doubling to `tol`.
pub fn torsion_via_laplacian(c: &CochainComplex, tol: f64) -> Result<f64> {
    let f = Fibers::new(c);
    let order = c.model().group_order() as f64;
    let k = c.model().torus_rank();
    if k == 0 || f.is_constant() {
        let theta = vec![0.0; k];
        return Ok(laplacian_integrand(&f, c.offset(), &theta) / order);
    }
    let r = refine(k, tol, 1 << 22, |t| laplacian_integrand(&f, c.offset(), t))?;
    Ok(r.value / order)
}

/// `ln Det'` of a dense matrix from two QR factorizations: a pivoted one of
/// `d^*` spans the coimage `Q`, and `|det R|` of `d Q` is `Det'(d)`.
fn log_det_prime_qr(d: &Dense) -> f64 {
    if d.is_empty() || d.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    let qr = d.adjoint().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect();
    let rank = diag.iter().take_while(|&&x| x > QR_CUTOFF * diag[0]).count();
    let q = qr.q().columns(0, rank).into_owned();
    let a = d * q;
    let ra = a.qr().r();
    (0..rank).map(|i| ra[(i, i)].norm().ln()).sum()
}

/// Classical torsion of the realized complex, `sum (-1)^i ln Det'(d^i)` in
/// harmonic bases, divided by `|G|`. Finite models only.
pub fn torsion_via_dense(c: &CochainComplex) -> Result<f64> {
    if c.model().kind() != ModelKind::FiniteGroup {
        return Err(Error::ModelMismatch("the dense oracle needs a finite group model".into()));
    }
    let f = Fibers::new(c);
    let order = c.model().group_order() as f64;
    let total: f64 = f
        .at(&[])
        .iter()
        .enumerate()
        .map(|(j, d)| sign(c.degree(j)) as f64 * log_det_prime_qr(d))
        .sum();
    Ok(total / order)
}

/// Mean of `f` over the midpoint grid with `m` points per circle factor.
fn grid_mean(k: usize, m: usize, f: &(impl Fn(&[f64]) -> f64 + Sync)) -> f64 {
    let total = m.pow(k as u32);
    let h = TAU / m as f64;
    let sum: f64 = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut theta = vec![0.0; k];
            for t in theta.iter_mut() {
                *t = h * ((idx % m) as f64 + 0.5);
                idx /= m;
            }
            f(&theta)
        })
        .sum();
    sum / total as f64
}

/// Grid doubling with a Richardson-style tail estimate: with successive
/// differences `delta` shrinking by a ratio `r`, `|r| < 1`, the remaining
/// error is about `|delta r / (1 - r)|`. The ratio keeps its sign, since
/// midpoint grids crossing a zero set overshoot alternately. The extrapolated
/// value is returned with the smaller of that estimate and twice the last move
/// of the extrapolated sequence as its bound. Three successive differences at
/// rounding level also settle it. Refuses to certify when the differences stop
/// shrinking before the point budget runs out.
pub fn refine(k: usize, tol: f64, max_points: usize, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Refined> {
    let mut m = 16usize;
    let mut values = vec![grid_mean(k, m, &f)];
    let mut steps: Vec<f64> = Vec::new();
    let mut extrapolated: Vec<f64> = Vec::new();
    loop {
        if (2 * m).checked_pow(k as u32).is_none_or(|p| p > max_points) {
            return Err(Error::NonConvergent(format!(
                "grid doubling reached {m} points per circle with last difference {:.3e}",
                steps.last().map_or(f64::NAN, |s| s.abs())
            )));
        }
        m *= 2;
        values.push(grid_mean(k, m, &f));
        let n = values.len();
        let step = values[n - 1] - values[n - 2];
        steps.push(step);
        if step == 0.0 {
            return Ok(Refined { value: values[n - 1], bound: 0.0, resolution: m });
        }
        let l = steps.len();
        if l < 2 {
            continue;
        }
        let r = step / steps[l - 2];
        let ahead = |r: f64| if r.abs() < 1.0 { values[n - 1] + step * r / (1.0 - r) } else { values[n - 1] };
        extrapolated.push(ahead(r));
        if l < 3 {
            continue;
        }
        let floor = ROUNDING_FLOOR * values[n - 1].abs().max(1.0);
        let recent = steps[l - 3..].iter().fold(0.0, |a: f64, s| a.max(s.abs()));
        if recent < floor.min(tol) {
            return Ok(Refined { value: values[n - 1], bound: recent, resolution: m });
        }
        let ratio = r.abs().max((steps[l - 2] / steps[l - 3]).abs());
        if ratio >= 1.0 {
            if l >= 5 && step.abs() >= steps[l - 4].abs() {
                return Err(Error::NonConvergent("doubling differences do not decrease".into()));
            }
            continue;
        }
        let e = extrapolated.len();
        let tail = (step * ratio / (1.0 - ratio)).abs();
        let moved = 2.0 * (extrapolated[e - 1] - extrapolated[e - 2]).abs();
        if tail.min(moved) < tol {
            return Ok(Refined { value: extrapolated[e - 1], bound: tail.min(moved), resolution: m });
        }
    }
}

/// Logarithmic Mahler measure `mean over T^k of ln |p|` of a Laurent
/// polynomial in the torus model, certified to `target_tol`.
pub fn mahler_refine(p: &GroupRingElement, k: usize, target_tol: f64) -> Result<Refined> {
    if p.is_zero() {
        return Err(Error::NotDeterminantClass("the zero polynomial".into()));
    }
    let terms: Vec<(Vec<f64>, Complex64)> = p
        .terms()
        .map(|(key, c)| {
            if key.g != 0 {
                return Err(Error::ModelMismatch("Mahler measure of a polynomial with group part".into()));
            }
            let mut exp: Vec<f64> = key.exp.iter().map(|&e| e as f64).collect();
            exp.resize(k, 0.0);
            Ok((exp, *c))
        })
        .collect::<Result<_>>()?;
    let eval = |theta: &[f64]| -> f64 {
        let z: Complex64 = terms
            .iter()
            .map(|(v, c)| c * Complex64::from_polar(1.0, v.iter().zip(theta).map(|(a, b)| a * b).sum()))
            .sum();
        z.norm().ln()
    };
    if k == 0 || terms.iter().all(|(v, _)| v.iter().all(|&e| e == 0.0)) {
        return Ok(Refined { value: eval(&vec![0.0; k]), bound: 0.0, resolution: 1 });
    }
    refine(k, target_tol, 1 << 24, eval)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::{AlgebraModel, FiniteGroupTable, FkOptions, GroupRingMatrix, Key};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn multiplication_by_three() {
        let m = Arc::new(AlgebraModel::scalars());
        let d = GroupRingMatrix::scalar_identity(m.clone(), 1, c(3.0));
        let cx = CochainComplex::from_matrices(m, "x3", 0, &[1, 1], vec![d]).unwrap();
        assert!((torsion_via_laplacian(&cx, 1e-10).unwrap() - 3f64.ln()).abs() < 1e-13);
        assert!((torsion_via_dense(&cx).unwrap() - 3f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn zero_differentials() {
        let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap()));
        let cx = CochainComplex::from_matrices(m.clone(), "z", 0, &[2, 1], vec![GroupRingMatrix::zeros(m, 1, 2)]).unwrap();
        assert_eq!(torsion_via_laplacian(&cx, 1e-10).unwrap(), 0.0);
        assert_eq!(torsion_via_dense(&cx).unwrap(), 0.0);
    }

    #[test]
    fn cyclic_difference_operator() {
        for p in [2usize, 3, 5, 7] {
            let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(p).unwrap()));
            let e = GroupRingElement::from_terms([(Key::group(1), c(1.0)), (Key::group(0), c(-1.0))]);
            let cx = CochainComplex::from_matrices(m.clone(), "t-1", 0, &[1, 1], vec![GroupRingMatrix::single(m, e).unwrap()]).unwrap();
            let main = cx.torsion(&FkOptions::default()).unwrap().log_value;
            let expect = (p as f64).ln() / p as f64;
            assert!((main - expect).abs() < 1e-12);
            assert!((torsion_via_dense(&cx).unwrap() - expect).abs() < 1e-12);
            assert!((torsion_via_laplacian(&cx, 1e-10).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn jensen() {
        let p = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-2.0))]);
        let r = mahler_refine(&p, 1, 1e-9).unwrap();
        assert!((r.value - 2f64.ln()).abs() < 1e-9 && r.bound < 1e-9);
        let p = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-1.0))]);
        let r = mahler_refine(&p, 1, 1e-6).unwrap();
        assert!(r.value.abs() < 1e-6, "{r:?}");
    }

    /// A root on the circle makes the raw grid error decay like `1/m`; the
    /// extrapolated value still lands within the bound it reports.
    #[test]
    fn roots_on_the_circle() {
        let p = GroupRingElement::from_terms([(Key::monomial(vec![2]), c(3.0)), (Key::monomial(vec![0]), c(-3.0))]);
        for tol in [1e-6, 1e-9, 1e-11] {
            let r = mahler_refine(&p, 1, tol).unwrap();
            assert!(r.bound < tol && (r.value - 3f64.ln()).abs() <= r.bound + 1e-13, "{r:?}");
        }
    }

    #[test]
    fn torus_laplacian_matches_jensen() {
        let m = Arc::new(AlgebraModel::torus(1));
        let e = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-0.5))]);
        let cx = CochainComplex::from_matrices(m.clone(), "z-1/2", 0, &[1, 1], vec![GroupRingMatrix::single(m, e).unwrap()]).unwrap();
        assert!(torsion_via_laplacian(&cx, 1e-10).unwrap().abs() < 1e-9);
        assert!(matches!(torsion_via_dense(&cx), Err(Error::ModelMismatch(_))));
    }
}
