//! Drivers that evaluate both sides of the sum, product and fibration
//! formulas and report log-scale residuals.
//!
//! Every identity is checked twice where possible: once in the determinant
//! lines, transporting torsions along the long exact cohomology sequence (the
//! correction `tau - sum (-1)^i ln psi_i` of [`LesCorrection`]), and once as
//! plain real numbers when all complexes involved are weakly acyclic.

use serde::Serialize;

use crate::algebra::FkOptions;
use crate::complex::{LesCorrection, TorsionReport};
use crate::detline::LineExpr;
use crate::error::{Error, Result};
use crate::hilbmod::Morphism;
use crate::spaces::builtin::{disk, point, sphere};
use crate::spaces::coeff::{l2_torsion, unimodularity_check, CoefficientSystem};
use crate::spaces::cw::{product_index, product_space, Bundle, ChainMap, EquivariantCWComplex, Transport};
use crate::spaces::group::{IntElement, IntMatrix};
use crate::spaces::pushout::{mayer_vietoris, pushout_assemble, Pushout, Subcomplex};

/// One torsion entering a formula, with the power it is raised to.
#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub name: String,
    pub exponent: i64,
    pub log_value: f64,
    pub line: LineExpr,
    pub weakly_acyclic: bool,
}

/// Both sides of the real-number identity, available when every complex is
/// weakly acyclic and of determinant class.
#[derive(Clone, Debug, Serialize)]
pub struct RealCheck {
    pub lhs_log: f64,
    pub rhs_log: f64,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormulaReport {
    pub formula: String,
    /// `ln` of the left-hand side.
    pub lhs_log: f64,
    /// `ln` of the right-hand side, before transport.
    pub rhs_log: f64,
    /// Log of the factor by which the canonical line isomorphism moves the
    /// right-hand side, in the harmonic trivializations.
    pub correction: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub lhs_line: LineExpr,
    pub rhs_line: LineExpr,
    pub terms: Vec<Term>,
    pub real: Option<RealCheck>,
    pub steps: Vec<FormulaReport>,
    pub notes: Vec<String>,
}

impl FormulaReport {
    fn new(formula: &str, lhs_log: f64, rhs_log: f64, correction: f64, tol: f64) -> Self {
        let residual = (lhs_log - rhs_log - correction).abs();
        FormulaReport {
            formula: formula.into(),
            lhs_log,
            rhs_log,
            correction,
            residual,
            tolerance: tol,
            passed: residual < tol,
            lhs_line: LineExpr::trivial(),
            rhs_line: LineExpr::trivial(),
            terms: Vec::new(),
            real: None,
            steps: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Whether this report, its real-number check and all sub-steps pass.
    pub fn all_passed(&self) -> bool {
        self.passed && self.real.as_ref().is_none_or(|r| r.passed) && self.steps.iter().all(FormulaReport::all_passed)
    }
}

fn term(name: &str, exponent: i64, r: &TorsionReport) -> Result<Term> {
    Ok(Term {
        name: name.into(),
        exponent,
        log_value: r.real_log()?,
        line: r.line.clone(),
        weakly_acyclic: r.weakly_acyclic,
    })
}

fn require_unimodular(h: &CoefficientSystem) -> Result<()> {
    let u = unimodularity_check(h);
    if !u.unimodular {
        return Err(Error::NotUnimodular(format!("generator determinants {:?}", u.log_dets)));
    }
    Ok(())
}

/// `rho(X) = rho(X_1) rho(X_2) rho(X_0)^{-1}` for a pushout.
///
/// The canonical isomorphism `det H(X) (x) det H(X_0) = det H(X_1) (x) det H(X_2)`
/// comes from the Mayer-Vietoris sequence; in harmonic trivializations it
/// multiplies by `exp(-correction)`.
pub fn verify_sum(p: &Pushout, h: &CoefficientSystem, sigma_log: f64, tol: f64, opts: &FkOptions) -> Result<FormulaReport> {
    require_unimodular(h)?;
    let mv = mayer_vietoris(p, h)?;
    let corr: LesCorrection = mv.ses.correction(opts)?;
    let tor = |c: &crate::complex::CochainComplex, x: &EquivariantCWComplex| -> Result<TorsionReport> {
        let mut r = c.torsion(opts)?;
        r.log_value += x.euler_char() as f64 * sigma_log;
        Ok(r)
    };
    let (rx, r0, r1, r2) = (tor(&mv.x, &p.x)?, tor(&mv.x0, &p.x0)?, tor(&mv.x1, &p.x1)?, tor(&mv.x2, &p.x2)?);
    let terms = vec![term("X", 1, &rx)?, term("X1", 1, &r1)?, term("X2", 1, &r2)?, term("X0", -1, &r0)?];
    let lhs = terms[0].log_value;
    let rhs = terms[1].log_value + terms[2].log_value - terms[3].log_value;
    let mut rep = FormulaReport::new("sum", lhs, rhs, -corr.total(), tol);
    rep.lhs_line = rx.line.tensor(&r0.line);
    rep.rhs_line = r1.line.tensor(&r2.line);
    if terms.iter().all(|t| t.weakly_acyclic) {
        let residual = (lhs - rhs).abs();
        rep.real = Some(RealCheck { lhs_log: lhs, rhs_log: rhs, residual, passed: residual < tol });
    }
    rep.notes.push(format!("Mayer-Vietoris: tau = {:.3e}, sum (-1)^i ln psi_i = {:.3e}", corr.tau_les, corr.alternating_psi));
    rep.terms = terms;
    Ok(rep)
}

/// `rho(X_1 x X_2) = rho(X_1)^{chi(X_2)} rho(X_2)^{chi(X_1)}` for coefficient
/// modules of von Neumann dimension one, with `sigma = sigma_1 sigma_2`.
pub fn verify_product(
    x1: &EquivariantCWComplex,
    h1: &CoefficientSystem,
    x2: &EquivariantCWComplex,
    h2: &CoefficientSystem,
    tol: f64,
    opts: &FkOptions,
) -> Result<FormulaReport> {
    for h in [h1, h2] {
        if h.vn_dim() != 1.0 {
            return Err(Error::DimensionNotOne(h.vn_dim()));
        }
        require_unimodular(h)?;
    }
    let (_, h) = CoefficientSystem::product(h1, h2)?;
    let x = product_space(x1, x2)?;
    let (r, r1, r2) = (l2_torsion(&x, &h, 0.0, opts)?, l2_torsion(x1, h1, 0.0, opts)?, l2_torsion(x2, h2, 0.0, opts)?);
    let (c1, c2) = (x1.euler_char(), x2.euler_char());
    let terms = vec![term(&x.name, 1, &r)?, term(&x1.name, c2, &r1)?, term(&x2.name, c1, &r2)?];
    let rhs = c2 as f64 * terms[1].log_value + c1 as f64 * terms[2].log_value;
    let mut rep = FormulaReport::new("product", terms[0].log_value, rhs, 0.0, tol);
    rep.lhs_line = r.line.clone();
    rep.rhs_line = r1.line.pow(c2).tensor(&r2.line.pow(c1));
    if terms.iter().all(|t| t.weakly_acyclic) {
        let residual = rep.residual;
        rep.real = Some(RealCheck { lhs_log: rep.lhs_log, rhs_log: rhs, residual, passed: residual < tol });
    }
    rep.notes.push("lines identified by the Kunneth isomorphism of harmonic representatives".into());
    rep.terms = terms;
    Ok(rep)
}

/// `Det(a_1 (x) a_2) = Det(a_1)^{dim H_2} Det(a_2)^{dim H_1}` for invertible
/// endomorphisms.
pub fn det_tensor_identity_check(a1: &Morphism, a2: &Morphism, tol: f64, opts: &FkOptions) -> Result<FormulaReport> {
    let d1 = a1.log_det(opts)?;
    let d2 = a2.log_det(opts)?;
    for (i, d) in [&d1, &d2].into_iter().enumerate() {
        if !d.invertible {
            return Err(Error::NotInvertible(format!("factor {} of the tensor product", i + 1)));
        }
    }
    let t = a1.tensor(a2)?.log_det(opts)?;
    let (n1, n2) = (a1.source().vn_dim(), a2.source().vn_dim());
    let rhs = n2 * d1.log_det + n1 * d2.log_det;
    let mut rep = FormulaReport::new("det_tensor", t.log_det, rhs, 0.0, tol);
    rep.notes.push(format!("dim H1 = {n1}, dim H2 = {n2}"));
    Ok(rep)
}

/// Restriction of a bundle to the first `count[k]` base cells in each degree.
fn restrict(b: &Bundle, count: &[usize]) -> Result<Bundle> {
    let top = count.iter().rposition(|&c| c > 0).unwrap_or(0);
    let cells: Vec<usize> = count[..=top].to_vec();
    let boundaries = (1..=top)
        .map(|k| {
            let full = b.base.boundary(k);
            let mut m = IntMatrix::zeros(cells[k - 1], cells[k]);
            for i in 0..cells[k - 1] {
                for j in 0..cells[k] {
                    m.set(i, j, full.get(i, j).clone());
                }
            }
            m
        })
        .collect();
    let base = EquivariantCWComplex::new(format!("{}|{:?}", b.base.name, cells), b.base.group.clone(), cells.clone(), boundaries)?;
    let transports = b
        .transports
        .iter()
        .filter(|t| t.dim <= top && t.cell < cells[t.dim])
        .cloned()
        .collect::<Vec<Transport>>();
    Bundle::new(base, b.fiber.clone(), transports)
}

fn empty_like(x: &EquivariantCWComplex) -> Result<EquivariantCWComplex> {
    EquivariantCWComplex::new("empty", x.group.clone(), vec![0], Vec::new())
}

/// One cell of the induction `E' = E u_{F x S^{n-1}} F x D^n` for base cell
/// `cell` of degree `n`; `prev` is the bundle over the cells attached so far.
fn peel(b: &Bundle, prev: &Bundle, n: usize, cell: usize) -> Result<Pushout> {
    let f = &b.fiber;
    let e_prev = if prev.base.total_cells() == 0 { empty_like(f)? } else { prev.total_space()? };
    let x1 = product_space(f, &disk(n)?.space)?;
    if n == 0 {
        let x0 = empty_like(f)?;
        let j1 = Subcomplex { cells: vec![Vec::new()] };
        return pushout_assemble(&x0, &x1, &j1, &e_prev, &ChainMap::zero(&x0, &e_prev));
    }
    let s = sphere(n - 1)?.space;
    let d = disk(n)?.space;
    let x0 = product_space(f, &s)?;
    let (fc, sc, dc, bc) = (&f.cells, &s.cells, &d.cells, &prev.base.cells);
    let bcell = |q: usize| bc.get(q).copied().unwrap_or(0);
    let mut j1 = Subcomplex { cells: x0.cells.iter().map(|&c| vec![0; c]).collect() };
    let mut j2 = ChainMap::zero(&x0, &e_prev);
    let add = |m: &mut IntMatrix, r: usize, c: usize, e: &IntElement| {
        let v = m.get(r, c).add(e);
        m.set(r, c, v);
    };
    for p in 0..fc.len() {
        for a in 0..fc[p] {
            for q in 0..sc.len() {
                for sb in 0..sc[q] {
                    let col = product_index(fc, sc, p, a, q, sb);
                    let k = p + q;
                    // the sphere sits inside the disk with the same cell indices
                    j1.cells[k][col] = product_index(fc, dc, p, a, q, sb);
                    let m = &mut j2.matrices[k];
                    let base_point = (n >= 2 && q == 0) || n == 1;
                    if base_point {
                        add(m, product_index(fc, bc, p, a, 0, 0), col, &IntElement::one());
                    }
                    let transported = if n == 1 { sb == 1 } else { q == n - 1 };
                    if transported {
                        for face in 0..bcell(n - 1) {
                            let t = b.transport(n, cell, face)?;
                            let tm = &t.matrices[p];
                            for a2 in 0..fc[p] {
                                let c = tm.get(a2, a);
                                if !c.is_zero() {
                                    add(m, product_index(fc, bc, p, a2, n - 1, face), col, c);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    pushout_assemble(&x0, &x1, &j1, &e_prev, &j2)
}

/// `rho(E) = rho(F)^{chi(B)}` for a bundle with `chi(F) = 0`, by attaching
/// the base cells one at a time. Each step checks the sum formula for
/// `E u_{F x S^{n-1}} F x D^n` and the product formula for `F x D^n` and
/// `F x S^{n-1}`; the final residual is
/// `|ln rho(E) + sum of step corrections - chi(B) ln rho(F)|`.
pub fn verify_fibration(b: &Bundle, h: &CoefficientSystem, sigma_log: f64, tol: f64, opts: &FkOptions) -> Result<FormulaReport> {
    let chi_f = b.fiber.euler_char();
    if chi_f != 0 {
        return Err(Error::EulerNotZero(chi_f));
    }
    require_unimodular(h)?;
    let trivial = CoefficientSystem::trivial(&point().group);
    let mut steps = Vec::new();
    let mut count = vec![0; b.base.cells.len()];
    let mut correction = 0.0;
    for n in 0..b.base.cells.len() {
        for cell in 0..b.base.cells[n] {
            let prev = restrict(b, &count)?;
            let p = peel(b, &prev, n, cell)?;
            let mut step = verify_sum(&p, h, sigma_log, tol, opts)?;
            step.formula = format!("sum (base cell {cell} of degree {n})");
            correction += step.correction;
            step.steps.push(verify_product(&b.fiber, h, &disk(n)?.space, &trivial, tol, opts)?);
            if n >= 1 {
                step.steps.push(verify_product(&b.fiber, h, &sphere(n - 1)?.space, &trivial, tol, opts)?);
            }
            steps.push(step);
            count[n] += 1;
        }
    }
    let e = b.total_space()?;
    let re = l2_torsion(&e, h, sigma_log, opts)?;
    let rf = l2_torsion(&b.fiber, h, sigma_log, opts)?;
    let chi_b = b.base.euler_char();
    let terms = vec![term(&e.name, 1, &re)?, term(&b.fiber.name, chi_b, &rf)?];
    let rhs = chi_b as f64 * terms[1].log_value;
    let mut rep = FormulaReport::new("fibration", terms[0].log_value, rhs, correction, tol);
    rep.lhs_line = re.line.clone();
    rep.rhs_line = rf.line.pow(chi_b);
    if terms.iter().all(|t| t.weakly_acyclic) {
        let residual = (terms[0].log_value - rhs).abs();
        rep.real = Some(RealCheck { lhs_log: terms[0].log_value, rhs_log: rhs, residual, passed: residual < tol });
    }
    rep.terms = terms;
    rep.steps = steps;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use num_complex::Complex64;

    use super::*;
    use crate::algebra::{AlgebraModel, FiniteGroupTable, GroupRingMatrix};
    use crate::hilbmod::HilbertianModule;
    use crate::spaces::builtin::{circle_z, klein_bundle, lens};

    const TOL: f64 = 1e-8;

    #[test]
    fn two_disks_make_a_sphere() {
        let d = disk(2).unwrap().space;
        let s1 = sphere(1).unwrap().space;
        let j = Subcomplex { cells: vec![vec![0], vec![0]] };
        let p = pushout_assemble(&s1, &d, &j, &d, &j.as_chain_map(&s1, &d)).unwrap();
        let h = CoefficientSystem::trivial(&p.x.group);
        let r = verify_sum(&p, &h, 0.0, TOL, &FkOptions::default()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn scaled_identities_tensor() {
        let m2 = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(2).unwrap()));
        let m3 = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap()));
        let endo = |m: &Arc<AlgebraModel>, c: f64| {
            let h = HilbertianModule::free(m.clone(), 1, "H");
            Morphism::new(h.clone(), h, GroupRingMatrix::scalar_identity(m.clone(), 1, Complex64::new(c, 0.0))).unwrap()
        };
        let r = det_tensor_identity_check(&endo(&m2, 2.0), &endo(&m3, 3.0), 1e-10, &FkOptions::default()).unwrap();
        assert!((r.lhs_log - 6f64.ln()).abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn lens_times_circle() {
        let l = lens(3, 1).unwrap();
        let c = circle_z();
        let r = verify_product(&l.space, &l.coefficients, &c.space, &c.coefficients, TOL, &FkOptions::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.rhs_log.abs() < 1e-15);
    }

    #[test]
    fn klein_bottle_fibration() {
        let (b, h) = klein_bundle().unwrap();
        let r = verify_fibration(&b, &h, 0.0, TOL, &FkOptions::default()).unwrap();
        assert!(r.all_passed(), "{r:#?}");
    }

    #[test]
    fn fiber_euler_characteristic_must_vanish() {
        let b = Bundle::trivial(sphere(0).unwrap().space.renamed("F"), sphere(1).unwrap().space).unwrap();
        assert!(matches!(verify_fibration(&b, &CoefficientSystem::trivial(&b.fiber.group), 0.0, TOL, &FkOptions::default()), Err(Error::EulerNotZero(2))));
    }
}
