//! Dense singular value decompositions of fibers.
//!
//! Delegated to faer rather than nalgebra: nalgebra's SVD loses accuracy on
//! rank-deficient inputs, which are exactly the matrices a torsion
//! computation feeds it.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{Mat, MatRef, Par};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn view(m: &DMatrix<Complex64>) -> MatRef<'_, Complex64> {
    // nalgebra stores columns contiguously
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn decompose(m: &DMatrix<Complex64>, want_u: bool) -> (Vec<f64>, Option<Mat<Complex64>>) {
    let (r, c) = m.shape();
    let size = r.min(c);
    let mut s = Diag::<Complex64>::zeros(size);
    let mut u = want_u.then(|| Mat::<Complex64>::zeros(r, size));
    let compute_u = if want_u { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let scratch = svd::svd_scratch::<Complex64>(r, c, compute_u, ComputeSvdVectors::No, Par::Seq, Default::default());
    let mut buf = MemBuffer::new(scratch);
    svd::svd(
        view(m),
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        None,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .expect("the svd iteration converges on finite input");
    (s.column_vector().iter().map(|x| x.re).collect(), u)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    match m.shape() {
        (0, _) | (_, 0) => Vec::new(),
        (1, _) | (_, 1) => vec![m.norm()],
        _ => decompose(m, false).0,
    }
}

/// The `r` leading left singular vectors as columns.
pub fn top_left_singular(m: &DMatrix<Complex64>, r: usize) -> DMatrix<Complex64> {
    if r == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let (_, u) = decompose(m, true);
    let u = u.expect("vectors requested");
    DMatrix::from_fn(m.nrows(), r, |i, j| u[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn projector_has_unit_singular_value() {
        // rank-one projector on which nalgebra's decomposition reports 1.0014
        let a = c(0.2254285474048551, -0.2872700063867843);
        let b = c(0.7031465775502717, 0.41181069708707696);
        let d = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), a, c(0.0, 0.0), b]);
        let u = top_left_singular(&d, 1);
        let p = DMatrix::identity(2, 2) - &u * u.adjoint();
        let s = singular_values(&p);
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-14, "{s:?}");
        let h = top_left_singular(&p, 1);
        assert!((h.adjoint() * &d).norm() < 1e-14);
    }

    #[test]
    fn wide_and_tall_agree() {
        let m = DMatrix::from_fn(2, 5, |i, j| c((i * 5 + j) as f64 - 3.0, (i + 2 * j) as f64 * 0.25));
        let s1 = singular_values(&m);
        let s2 = singular_values(&m.adjoint());
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(s1[0] >= s1[1]);
    }
}
