//! Formal determinant lines.
//!
//! A line is a word in labelled atoms (`det H^i`, `det C^i`, ...) with integer
//! exponents. An element is a positive multiple of the canonical generator,
//! the tensor product of the atoms' designated inner products, and is stored
//! as the logarithm of that multiple together with an orientation sign.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::fk::{generic_ranks, log_det_many};
use crate::algebra::FkOptions;
use crate::error::{Error, Result};
use crate::hilbmod::{check_composable_zero, FiberPlan, Fiber, Morphism, STRUCTURE_TOL};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineExpr {
    atoms: Vec<(String, i64)>,
}

impl LineExpr {
    pub fn trivial() -> Self {
        LineExpr::default()
    }

    pub fn atom(label: impl Into<String>) -> Self {
        LineExpr { atoms: vec![(label.into(), 1)] }
    }

    pub fn from_atoms<I: IntoIterator<Item = (String, i64)>>(atoms: I) -> Self {
        let mut out = LineExpr::trivial();
        for (l, e) in atoms {
            out.push(l, e);
        }
        out
    }

    fn push(&mut self, label: String, exp: i64) {
        if let Some(slot) = self.atoms.iter_mut().find(|(l, _)| *l == label) {
            slot.1 += exp;
        } else {
            self.atoms.push((label, exp));
        }
        self.atoms.retain(|(_, e)| *e != 0);
    }

    pub fn atoms(&self) -> &[(String, i64)] {
        &self.atoms
    }

    pub fn is_trivial(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn tensor(&self, other: &LineExpr) -> LineExpr {
        let mut out = self.clone();
        for (l, e) in &other.atoms {
            out.push(l.clone(), *e);
        }
        out
    }

    pub fn dual(&self) -> LineExpr {
        LineExpr { atoms: self.atoms.iter().map(|(l, e)| (l.clone(), -e)).collect() }
    }

    pub fn pow(&self, n: i64) -> LineExpr {
        LineExpr::from_atoms(self.atoms.iter().map(|(l, e)| (l.clone(), e * n)))
    }

    /// Equality up to the order of atoms.
    pub fn same_line(&self, other: &LineExpr) -> bool {
        let a: BTreeMap<_, _> = self.atoms.iter().cloned().collect();
        let b: BTreeMap<_, _> = other.atoms.iter().cloned().collect();
        a == b
    }
}

impl fmt::Display for LineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "R");
        }
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|(l, e)| if *e == 1 { format!("det {l}") } else { format!("(det {l})^{e}") })
            .collect();
        write!(f, "{}", parts.join(" (x) "))
    }
}

/// `(x)_i (lines_i)^{(-1)^i}`.
pub fn graded_alternating(lines: &[LineExpr]) -> LineExpr {
    lines
        .iter()
        .enumerate()
        .fold(LineExpr::trivial(), |acc, (i, l)| acc.tensor(&if i % 2 == 0 { l.clone() } else { l.dual() }))
}

/// A nonzero element of a determinant line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineElement {
    pub line: LineExpr,
    /// Logarithm of the absolute value of the scalar relative to the canonical generator.
    pub log_scalar: f64,
    /// Orientation; elements built from inner products are always positive.
    pub positive: bool,
}

impl LineElement {
    /// The canonical generator of a line.
    pub fn canonical(line: LineExpr) -> Self {
        LineElement { line, log_scalar: 0.0, positive: true }
    }

    pub fn new(line: LineExpr, log_scalar: f64) -> Self {
        LineElement { line, log_scalar, positive: true }
    }

    pub fn scalar(&self) -> f64 {
        let s = self.log_scalar.exp();
        if self.positive { s } else { -s }
    }

    pub fn tensor(&self, other: &LineElement) -> LineElement {
        LineElement {
            line: self.line.tensor(&other.line),
            log_scalar: self.log_scalar + other.log_scalar,
            positive: self.positive == other.positive,
        }
    }

    pub fn dual(&self) -> LineElement {
        LineElement { line: self.line.dual(), log_scalar: -self.log_scalar, positive: self.positive }
    }

    pub fn pow(&self, n: i64) -> LineElement {
        LineElement {
            line: self.line.pow(n),
            log_scalar: self.log_scalar * n as f64,
            positive: self.positive || n % 2 == 0,
        }
    }
}

/// A canonical isomorphism between lines, acting by a positive scalar.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineIso {
    pub source: LineExpr,
    pub target: LineExpr,
    pub log_factor: f64,
}

impl LineIso {
    pub fn factor(&self) -> f64 {
        self.log_factor.exp()
    }

    pub fn apply(&self, e: &LineElement) -> Result<LineElement> {
        if !e.line.same_line(&self.source) {
            return Err(Error::UnresolvedAtom(format!("{} is not the source line {}", e.line, self.source)));
        }
        Ok(LineElement { line: self.target.clone(), log_scalar: e.log_scalar + self.log_factor, positive: e.positive })
    }

    /// `other . self`.
    pub fn then(&self, other: &LineIso) -> Result<LineIso> {
        if !self.target.same_line(&other.source) {
            return Err(Error::UnresolvedAtom(format!("cannot compose {} with {}", self.target, other.source)));
        }
        Ok(LineIso { source: self.source.clone(), target: other.target.clone(), log_factor: self.log_factor + other.log_factor })
    }

    pub fn inverse(&self) -> LineIso {
        LineIso { source: self.target.clone(), target: self.source.clone(), log_factor: -self.log_factor }
    }
}

/// Replaces the designated inner product of `e`'s atom by `<alpha x, y>`:
/// the element is multiplied by `Det(alpha)^{-1/2}`.
pub fn rescale_inner_product(e: &LineElement, alpha: &Morphism, opts: &FkOptions) -> Result<LineElement> {
    let log_det = positive_log_det(alpha, opts)?;
    Ok(LineElement { log_scalar: e.log_scalar - 0.5 * log_det, ..e.clone() })
}

/// `ln Det(alpha)` for a positive invertible endomorphism.
pub fn positive_log_det(alpha: &Morphism, opts: &FkOptions) -> Result<f64> {
    if alpha.source().rank() != alpha.target().rank() {
        return Err(Error::NotPositive("not an endomorphism".into()));
    }
    if alpha.source().rank() == 0 {
        return Ok(0.0);
    }
    let m = alpha.matrix();
    let asym = m.star_transpose().sub(m)?.max_abs();
    if asym > STRUCTURE_TOL * (1.0 + m.max_abs()) {
        return Err(Error::NotPositive(format!("operator is not self-adjoint (defect {asym:e})")));
    }
    let maps = [alpha.clone()];
    let plan = FiberPlan::new(&maps);
    for p in sample_points(plan.k) {
        let eig = plan.fibers(&p)[0].clone().symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::NotPositive(format!("eigenvalue {min:e}")));
        }
    }
    let d = alpha.log_det(opts)?;
    if !d.invertible {
        return Err(Error::NotPositive("operator is not invertible".into()));
    }
    Ok(d.log_det)
}

fn sample_points(k: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        vec![Vec::new()]
    } else {
        crate::algebra::fk::generic_points(k)
    }
}

/// Scalar of the isomorphism `det H' (x) det H'' -> det H` for an exact
/// sequence `0 -> H' -> H -> H'' -> 0`: `Det [alpha | beta* (beta beta*)^{-1}]`.
pub fn ses_iso(alpha: &Morphism, beta: &Morphism, opts: &FkOptions) -> Result<LineIso> {
    check_composable_zero(alpha, beta).map_err(|e| Error::NotExact(e.to_string()))?;
    let maps = [alpha.clone(), beta.clone()];
    let plan = FiberPlan::new(&maps);
    let ranks = generic_ranks(plan.k, 2, opts, &|t: &[f64]| plan.fibers(t))?;
    let (n1, n, n2) = (alpha.source().fiber_dim(), alpha.target().fiber_dim(), beta.target().fiber_dim());
    if ranks[0] != n1 || ranks[1] != n2 || n1 + n2 != n {
        return Err(Error::NotExact(format!(
            "ranks {}+{} against dimensions {n1}+{n2} = {n}",
            ranks[0], ranks[1]
        )));
    }
    let order = alpha.model().group_order();
    let det = log_det_many(order, plan.k, 1, opts, |t| {
        let f = plan.fibers(t);
        vec![split_matrix(&f[0], &f[1])]
    })?;
    let d = &det[0];
    if !d.invertible && plan.k == 0 {
        return Err(Error::NotExact("assembled splitting is singular".into()));
    }
    let source = LineExpr::atom(alpha.source().label()).tensor(&LineExpr::atom(beta.target().label()));
    Ok(LineIso { source, target: LineExpr::atom(alpha.target().label()), log_factor: d.log_det })
}

/// `[a | b* (b b*)^{-1}]` for fibers in orthonormal coordinates.
pub fn split_matrix(a: &Fiber, b: &Fiber) -> Fiber {
    let bbt = b * b.adjoint();
    let inv = bbt.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(bbt.nrows(), bbt.ncols()));
    let right = b.adjoint() * inv;
    let mut out = DMatrix::<Complex64>::zeros(a.nrows(), a.ncols() + right.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), right.shape()).copy_from(&right);
    out
}

/// `det A -> det B` induced by an isomorphism `f`, with scalar `Det(f)`.
pub fn pushforward(f: &Morphism, opts: &FkOptions) -> Result<LineIso> {
    let d = f.log_det(opts)?;
    if !d.invertible {
        return Err(Error::NotInvertible(format!("{} -> {}", f.source().label(), f.target().label())));
    }
    Ok(LineIso {
        source: LineExpr::atom(f.source().label()),
        target: LineExpr::atom(f.target().label()),
        log_factor: d.log_det,
    })
}

/// Expresses the canonical generator of each atom relative to a reference
/// trivialization: atom `a` contributes `exp(log_generator[a])`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TrivializationContext {
    pub log_generator: BTreeMap<String, f64>,
    pub det_class: bool,
    pub description: String,
}

impl TrivializationContext {
    /// Every atom's designated inner product is the reference.
    pub fn harmonic<I: IntoIterator<Item = String>>(labels: I, det_class: bool) -> Self {
        TrivializationContext {
            log_generator: labels.into_iter().map(|l| (l, 0.0)).collect(),
            det_class,
            description: "inner products induced on harmonic representatives".into(),
        }
    }

    pub fn with(mut self, label: impl Into<String>, log_value: f64) -> Self {
        self.log_generator.insert(label.into(), log_value);
        self
    }
}

/// Log of the real number represented by `e` under `ctx`.
pub fn trivialize_log(e: &LineElement, ctx: &TrivializationContext) -> Result<f64> {
    if !ctx.det_class {
        return Err(Error::NotDeterminantClass(ctx.description.clone()));
    }
    let mut acc = e.log_scalar;
    for (label, exp) in e.line.atoms() {
        let g = ctx.log_generator.get(label).ok_or_else(|| Error::UnresolvedAtom(label.clone()))?;
        acc += *exp as f64 * g;
    }
    Ok(acc)
}

/// The real number represented by `e` under `ctx`.
pub fn trivialize(e: &LineElement, ctx: &TrivializationContext) -> Result<f64> {
    let l = trivialize_log(e, ctx)?;
    Ok(if e.positive { l.exp() } else { -l.exp() })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::{AlgebraModel, GroupRingMatrix};
    use crate::hilbmod::HilbertianModule;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn scalars() -> Arc<AlgebraModel> {
        Arc::new(AlgebraModel::scalars())
    }

    fn map(src: &HilbertianModule, dst: &HilbertianModule, rows: &[&[f64]]) -> Morphism {
        let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j]));
        Morphism::new(src.clone(), dst.clone(), GroupRingMatrix::from_scalars(scalars(), &m)).unwrap()
    }

    #[test]
    fn alternating_cancels() {
        let a = LineExpr::atom("H");
        assert!(graded_alternating(&[a.clone(), a.clone()]).is_trivial());
        assert_eq!(graded_alternating(std::slice::from_ref(&a)), a);
    }

    #[test]
    fn rescale_by_four_halves() {
        let h = HilbertianModule::free(scalars(), 1, "H");
        let four = map(&h, &h, &[&[4.0]]);
        let e = LineElement::canonical(LineExpr::atom("H"));
        let r = rescale_inner_product(&e, &four, &FkOptions::default()).unwrap();
        assert!((r.scalar() - 0.5).abs() < 1e-15);
        let neg = map(&h, &h, &[&[-1.0]]);
        assert!(matches!(rescale_inner_product(&e, &neg, &FkOptions::default()), Err(Error::NotPositive(_))));
    }

    #[test]
    fn direct_sum_splitting_has_factor_one() {
        let a = HilbertianModule::free(scalars(), 1, "A");
        let ab = HilbertianModule::free(scalars(), 2, "AB");
        let b = HilbertianModule::free(scalars(), 1, "B");
        let inc = map(&a, &ab, &[&[1.0], &[0.0]]);
        let proj = map(&ab, &b, &[&[0.0, 1.0]]);
        let iso = ses_iso(&inc, &proj, &FkOptions::default()).unwrap();
        assert!(iso.log_factor.abs() < 1e-15);
    }

    #[test]
    fn diagonal_and_antidiagonal() {
        // [[1, 1/2], [1, -1/2]] has |det| = 1
        let a = HilbertianModule::free(scalars(), 1, "A");
        let aa = HilbertianModule::free(scalars(), 2, "AA");
        let diag = map(&a, &aa, &[&[1.0], &[1.0]]);
        let diff = map(&aa, &a, &[&[1.0, -1.0]]);
        let iso = ses_iso(&diag, &diff, &FkOptions::default()).unwrap();
        assert!((iso.factor() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_exact_sequence_is_rejected() {
        let a = HilbertianModule::free(scalars(), 1, "A");
        let aa = HilbertianModule::free(scalars(), 2, "AA");
        let diag = map(&a, &aa, &[&[1.0], &[1.0]]);
        let sum = map(&aa, &a, &[&[1.0, 1.0]]);
        assert!(matches!(ses_iso(&diag, &sum, &FkOptions::default()), Err(Error::NotExact(_))));
    }

    #[test]
    fn pushforward_of_scalar() {
        let a = HilbertianModule::free(scalars(), 1, "A");
        let b = HilbertianModule::free(scalars(), 1, "B");
        let f = map(&a, &b, &[&[-3.0]]);
        assert!((pushforward(&f, &FkOptions::default()).unwrap().factor() - 3.0).abs() < 1e-14);
        let z = map(&a, &b, &[&[0.0]]);
        assert!(pushforward(&z, &FkOptions::default()).is_err());
    }

    #[test]
    fn trivialize_resolves_atoms() {
        let e = LineElement::new(LineExpr::atom("H0").tensor(&LineExpr::atom("H1").dual()), 2.0);
        let ctx = TrivializationContext::harmonic(["H0".to_string()], true).with("H1", 0.5);
        assert!((trivialize_log(&e, &ctx).unwrap() - 1.5).abs() < 1e-15);
        let partial = TrivializationContext::harmonic(["H0".to_string()], true);
        assert!(matches!(trivialize_log(&e, &partial), Err(Error::UnresolvedAtom(_))));
        assert!(trivialize(&LineElement::new(LineExpr::trivial(), 0.3), &TrivializationContext { det_class: true, ..Default::default() }).unwrap() > 1.3);
    }
}
