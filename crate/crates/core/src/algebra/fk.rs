use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::matrix::GroupRingMatrix;
use super::quadrature::{integrate, GridOptions};
use crate::error::{Error, Result};

/// Floors of the determinant-class ladder.
pub const LADDER: [f64; 3] = [1e-4, 1e-6, 1e-8];

/// Stand-in for zero inside logarithms.
const LOG_FLOOR: f64 = 1e-300;

/// Numerical knobs shared by every spectral computation.
#[derive(Clone, Debug)]
pub struct FkOptions {
    /// Quadrature tolerance (log scale).
    pub tolerance: f64,
    /// Starting grid resolution per circle factor.
    pub grid: usize,
    /// Absolute spectral cutoff; overrides the relative rule when set.
    pub epsilon: Option<f64>,
    /// Relative cutoff: singular values below `relative_cutoff * sigma_max` are zero.
    pub relative_cutoff: f64,
    /// Singular values below this are always zero, whatever the scale.
    pub absolute_floor: f64,
    /// Point budget for one quadrature level, in units of 1x1 fibers.
    pub work_budget: usize,
}

impl Default for FkOptions {
    fn default() -> Self {
        FkOptions {
            tolerance: 1e-8,
            grid: 256,
            epsilon: None,
            relative_cutoff: 1e-10,
            absolute_floor: 1e-12,
            work_budget: 1 << 24,
        }
    }
}

impl FkOptions {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_epsilon(mut self, eps: Option<f64>) -> Self {
        self.epsilon = eps;
        self
    }

    /// Cutoff separating zero from nonzero singular values for a fiber whose
    /// largest singular value is `sigma_max`.
    pub fn cutoff(&self, sigma_max: f64) -> f64 {
        self.epsilon.unwrap_or_else(|| (self.relative_cutoff * sigma_max).max(self.absolute_floor))
    }

    /// Number of singular values above the cutoff. Fails when a singular
    /// value lies within a decade of the cutoff.
    pub fn rank_of(&self, sv: &[f64]) -> Result<usize> {
        let top = sv.first().copied().unwrap_or(0.0);
        let eps = self.cutoff(top);
        if let Some(&s) = sv.iter().find(|&&s| s >= eps / 10.0 && s <= eps * 10.0) {
            return Err(Error::IllConditioned { value: s, cutoff: eps });
        }
        Ok(sv.iter().filter(|&&s| s > eps).count())
    }

    fn grid_options(&self, fiber_work: usize) -> GridOptions {
        GridOptions {
            start: self.grid,
            tolerance: self.tolerance,
            max_points: (self.work_budget / fiber_work.max(1)).max(1 << 12),
        }
    }
}

/// Fuglede-Kadison determinant `Det'` of a morphism, with diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct FkDeterminant {
    /// `ln Det'`.
    pub log_det: f64,
    /// Von Neumann dimension of the closure of the image.
    pub rank: f64,
    /// Quadrature error estimate (0 in the finite model).
    pub error: f64,
    /// Final grid resolution per circle factor (1 in the finite model).
    pub resolution: usize,
    /// Whether the truncated log-determinants settle as the floor is lowered.
    pub det_class: bool,
    /// Whether the morphism is invertible (square, full rank, spectrum bounded away from 0).
    pub invertible: bool,
    /// Truncated log-determinants at the floors of [`LADDER`].
    pub ladder: [f64; 3],
}

impl FkDeterminant {
    pub fn value(&self) -> f64 {
        self.log_det.exp()
    }

    fn trivial() -> Self {
        FkDeterminant {
            log_det: 0.0,
            rank: 0.0,
            error: 0.0,
            resolution: 1,
            det_class: true,
            invertible: true,
            ladder: [0.0; 3],
        }
    }
}

pub use super::dense::singular_values;

/// Deterministic points of the torus used to decide generic ranks.
pub fn generic_points(k: usize) -> Vec<Vec<f64>> {
    const ALPHA: [f64; 3] = [0.618_033_988_749_894_9, 0.754_877_666_246_692_7, 0.569_840_290_998_053_3];
    (1..=3)
        .map(|j| {
            (0..k)
                .map(|i| {
                    let a = ALPHA[j - 1] * (i as f64 + 1.0).sqrt() + 0.1 * i as f64;
                    std::f64::consts::TAU * ((j as f64 * a).fract())
                })
                .collect()
        })
        .collect()
}

/// Generic fiber ranks of a family of fiber matrices `theta -> [M_0(theta), ...]`.
///
/// In the finite model (`k = 0`) the single fiber decides; otherwise the
/// maximum over [`generic_points`] is taken.
pub fn generic_ranks<F>(k: usize, count: usize, opts: &FkOptions, fiber: &F) -> Result<Vec<usize>>
where
    F: Fn(&[f64]) -> Vec<DMatrix<Complex64>> + Sync,
{
    let points = if k == 0 { vec![Vec::new()] } else { generic_points(k) };
    let mut ranks = vec![0usize; count];
    for p in &points {
        let mats = fiber(p);
        for (r, m) in ranks.iter_mut().zip(&mats) {
            *r = (*r).max(opts.rank_of(&singular_values(m))?);
        }
    }
    Ok(ranks)
}

/// `ln Det'` of several fiberwise-defined morphisms at once, sharing one
/// quadrature. `order` is the finite group order `N` used for the `1/N`
/// normalization of the regular representation.
pub fn log_det_many<F>(
    order: usize,
    k: usize,
    count: usize,
    opts: &FkOptions,
    fiber: F,
) -> Result<Vec<FkDeterminant>>
where
    F: Fn(&[f64]) -> Vec<DMatrix<Complex64>> + Sync,
{
    if count == 0 {
        return Ok(Vec::new());
    }
    let ranks = generic_ranks(k, count, opts, &fiber)?;
    let sample = fiber(&generic_points(k.max(1))[0][..k]);
    let shapes: Vec<(usize, usize)> = sample.iter().map(|m| m.shape()).collect();
    let work: usize = shapes.iter().map(|(r, c)| (r * c).max(1) * (*r).min(*c).max(1)).sum();
    let norm = 1.0 / order as f64;

    if k == 0 {
        let mats = fiber(&[]);
        return Ok(mats
            .iter()
            .zip(&ranks)
            .zip(&shapes)
            .map(|((m, &r), &(rows, cols))| {
                let sv = singular_values(m);
                let log_det = norm * sv[..r].iter().map(|s| s.ln()).sum::<f64>();
                let ladder = LADDER.map(|f| norm * sv[..r].iter().map(|s| s.max(f).ln()).sum::<f64>());
                FkDeterminant {
                    log_det,
                    rank: r as f64 * norm,
                    error: 0.0,
                    resolution: 1,
                    det_class: true,
                    invertible: rows == cols && r == rows,
                    ladder,
                }
            })
            .collect());
    }

    // Outputs: count raw values, then 3 ladder values per morphism.
    let outputs = count * 4;
    let integrand = |theta: &[f64], out: &mut [f64]| {
        let mats = fiber(theta);
        for (i, (m, &r)) in mats.iter().zip(&ranks).enumerate() {
            let sv = singular_values(m);
            let top = &sv[..r.min(sv.len())];
            out[i] = norm * top.iter().map(|s| s.max(LOG_FLOOR).ln()).sum::<f64>();
            for (l, f) in LADDER.iter().enumerate() {
                out[count + 3 * i + l] = norm * top.iter().map(|s| s.max(*f).ln()).sum::<f64>();
            }
        }
    };
    let grid = integrate(k, outputs, count, &opts.grid_options(work), integrand);
    if !grid.converged {
        let worst = grid.errors[..count].iter().copied().fold(0.0, f64::max);
        return Err(Error::NonConvergent(format!(
            "log-determinant still moves by {worst:e} at resolution {} per circle",
            grid.resolution
        )));
    }
    let min_sv = |m: usize| -> Vec<f64> { min_top_singular(k, m, &ranks, &fiber) };
    let coarse = min_sv(32);
    let fine = min_sv(64);

    Ok((0..count)
        .map(|i| {
            let ladder = [grid.values[count + 3 * i], grid.values[count + 3 * i + 1], grid.values[count + 3 * i + 2]];
            let d1 = ladder[1] - ladder[0];
            let d2 = ladder[2] - ladder[1];
            let det_class = d2.abs() <= opts.tolerance || d2.abs() <= 0.5 * d1.abs();
            let (rows, cols) = shapes[i];
            let full = rows == cols && ranks[i] == rows;
            FkDeterminant {
                log_det: grid.values[i],
                rank: ranks[i] as f64 * norm,
                error: grid.errors[i],
                resolution: grid.resolution,
                det_class,
                invertible: full && (ranks[i] == 0 || fine[i] > 0.75 * coarse[i]),
                ladder,
            }
        })
        .collect())
}

/// Smallest generic-rank singular value over a coarse grid, per morphism.
fn min_top_singular<F>(k: usize, m: usize, ranks: &[usize], fiber: &F) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<DMatrix<Complex64>> + Sync,
{
    let total = m.pow(k as u32);
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rest = idx;
            let theta: Vec<f64> = (0..k)
                .map(|_| {
                    let j = rest % m;
                    rest /= m;
                    std::f64::consts::TAU * (j as f64 + 0.5) / m as f64
                })
                .collect();
            fiber(&theta)
                .iter()
                .zip(ranks)
                .map(|(mat, &r)| if r == 0 { f64::INFINITY } else { singular_values(mat)[r - 1] })
                .collect::<Vec<f64>>()
        })
        .reduce(
            || vec![f64::INFINITY; ranks.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(),
        )
}

/// `ln Det'` of a single group-ring matrix (square or not; `Det'(A) = Det(A*A)^{1/2}`
/// restricted to the orthogonal complement of the kernel).
pub fn fk_det(m: &GroupRingMatrix, opts: &FkOptions) -> Result<FkDeterminant> {
    if m.nrows() == 0 || m.ncols() == 0 || m.is_zero() {
        let mut d = FkDeterminant::trivial();
        d.invertible = m.nrows() == 0 && m.ncols() == 0;
        return Ok(d);
    }
    let model = m.model();
    let real = m.realize();
    let (k, order) = if real.is_constant() { (0, model.group_order()) } else { (model.torus_rank(), model.group_order()) };
    let mut out = log_det_many(order, k, 1, opts, |theta| vec![real.at(theta)])?;
    Ok(out.remove(0))
}

/// Von Neumann dimension (trace) of a projection given as a group-ring matrix.
pub fn vn_dim(p: &GroupRingMatrix, tol: f64) -> Result<f64> {
    if !p.is_square() {
        return Err(Error::NotProjection("non-square matrix".into()));
    }
    let sq = p.mul(p)?;
    let idem = sq.sub(p)?.max_abs();
    let herm = p.star_transpose().sub(p)?.max_abs();
    if idem > tol || herm > tol {
        return Err(Error::NotProjection(format!(
            "|p^2 - p| = {idem:e}, |p* - p| = {herm:e}"
        )));
    }
    Ok(p.trace()?.re)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::{AlgebraModel, FiniteGroupTable, GroupRingElement, Key};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn cyclic(p: usize) -> Arc<AlgebraModel> {
        Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(p).unwrap()))
    }

    #[test]
    fn t_minus_one_on_z3() {
        let m = cyclic(3);
        let a = GroupRingMatrix::single(
            m,
            GroupRingElement::from_terms([(Key::group(1), c(1.0)), (Key::group(0), c(-1.0))]),
        )
        .unwrap();
        let d = fk_det(&a, &FkOptions::default()).unwrap();
        assert!((d.value() - 3f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((d.rank - 2.0 / 3.0).abs() < 1e-15);
        assert!(!d.invertible);
    }

    #[test]
    fn scalar_two_on_z3() {
        let a = GroupRingMatrix::scalar_identity(cyclic(3), 1, c(2.0));
        let d = fk_det(&a, &FkOptions::default()).unwrap();
        assert!((d.value() - 2.0).abs() < 1e-12);
        assert!(d.invertible);
    }

    #[test]
    fn jensen_on_the_circle() {
        let m = Arc::new(AlgebraModel::torus(1));
        for a in [0.5, 2.0] {
            let e = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-a))]);
            let d = fk_det(&GroupRingMatrix::single(m.clone(), e).unwrap(), &FkOptions::default()).unwrap();
            assert!((d.value() - f64::max(1.0, a)).abs() < 1e-10, "{a}: {}", d.value());
            assert!(d.invertible && d.det_class);
        }
    }

    #[test]
    fn z_minus_one_is_not_invertible() {
        let m = Arc::new(AlgebraModel::torus(1));
        let e = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-1.0))]);
        let d = fk_det(&GroupRingMatrix::single(m, e).unwrap(), &FkOptions::default()).unwrap();
        assert!(d.log_det.abs() < 1e-8);
        assert!(!d.invertible);
        assert!(d.det_class);
        assert_eq!(d.rank, 1.0);
    }

    #[test]
    fn zero_morphism_has_determinant_one() {
        let d = fk_det(&GroupRingMatrix::zeros(cyclic(4), 2, 3), &FkOptions::default()).unwrap();
        assert_eq!(d.log_det, 0.0);
        assert_eq!(d.rank, 0.0);
    }

    #[test]
    fn half_sum_projection_in_z2() {
        let p = GroupRingMatrix::single(
            cyclic(2),
            GroupRingElement::from_terms([(Key::group(0), c(0.5)), (Key::group(1), c(0.5))]),
        )
        .unwrap();
        assert!((vn_dim(&p, 1e-12).unwrap() - 0.5).abs() < 1e-15);
        let not = p.scale(c(2.0));
        assert!(matches!(vn_dim(&not, 1e-12), Err(Error::NotProjection(_))));
    }

    #[test]
    fn ill_conditioned_rank_is_rejected() {
        let opts = FkOptions::default();
        assert!(matches!(opts.rank_of(&[1.0, 2e-10]), Err(Error::IllConditioned { .. })));
        assert_eq!(opts.rank_of(&[1.0, 1e-14]).unwrap(), 1);
    }
}
