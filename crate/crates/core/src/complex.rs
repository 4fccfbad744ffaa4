//! Finite cochain complexes of Hilbertian modules and their torsion.
//!
//! The torsion is `ln rho = sum_i (-1)^i ln Det'(d^i)`, read in the line
//! `det H^*(C)` trivialized by the inner products that the harmonic
//! representatives inherit from the preferred inner products of the `C^i`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::fk::{generic_ranks, log_det_many};
use crate::algebra::{AlgebraModel, FkDeterminant, FkOptions, GroupRingMatrix};
use crate::detline::{graded_alternating, split_matrix, LineElement, LineExpr, TrivializationContext};
use crate::error::{Error, Result};
use crate::hilbmod::{check_composable_zero, harmonic_basis, FiberPlan, Fiber, HilbertianModule, Morphism};

/// Betti numbers below this count as zero.
pub const BETTI_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CochainComplex {
    name: String,
    offset: i64,
    modules: Vec<HilbertianModule>,
    differentials: Vec<Morphism>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyData {
    pub degrees: Vec<i64>,
    pub betti: Vec<f64>,
    /// Spectral data of each differential (its torsion part).
    pub differentials: Vec<FkDeterminant>,
    pub det_class: bool,
    pub weakly_acyclic: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TorsionReport {
    pub log_value: f64,
    pub line: LineExpr,
    pub det_class: bool,
    pub weakly_acyclic: bool,
    pub degrees: Vec<i64>,
    pub betti: Vec<f64>,
    pub log_dets: Vec<f64>,
    /// Accumulated quadrature error estimate.
    pub error: f64,
    pub trivialization: String,
}

impl TorsionReport {
    /// `ln rho`, withheld when some differential is not of determinant class.
    pub fn real_log(&self) -> Result<f64> {
        if !self.det_class {
            return Err(Error::NotDeterminantClass("a differential fails the floor ladder".into()));
        }
        Ok(self.log_value)
    }

    pub fn real_value(&self) -> Result<f64> {
        self.real_log().map(f64::exp)
    }

    pub fn element(&self) -> LineElement {
        LineElement::new(self.line.clone(), self.log_value)
    }

    pub fn context(&self) -> TrivializationContext {
        TrivializationContext::harmonic(self.line.atoms().iter().map(|(l, _)| l.clone()), self.det_class)
    }
}

impl CochainComplex {
    pub fn new(
        name: impl Into<String>,
        offset: i64,
        modules: Vec<HilbertianModule>,
        differentials: Vec<Morphism>,
    ) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::ShapeMismatch("a complex needs at least one module".into()));
        }
        if differentials.len() + 1 != modules.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} modules but {} differentials",
                modules.len(),
                differentials.len()
            )));
        }
        let model = modules[0].model().clone();
        for m in &modules {
            if m.model() != &model {
                return Err(Error::ModelMismatch("modules over different algebras".into()));
            }
        }
        for (j, d) in differentials.iter().enumerate() {
            if d.source().rank() != modules[j].rank() || d.target().rank() != modules[j + 1].rank() {
                return Err(Error::ShapeMismatch(format!("differential {j} has the wrong shape")));
            }
        }
        let c = CochainComplex { name: name.into(), offset, modules, differentials };
        c.validate()?;
        Ok(c)
    }

    /// Complex `C^offset -> ... ` with standard inner products.
    pub fn from_matrices(
        model: Arc<AlgebraModel>,
        name: impl Into<String>,
        offset: i64,
        ranks: &[usize],
        matrices: Vec<GroupRingMatrix>,
    ) -> Result<Self> {
        let name = name.into();
        let modules: Vec<HilbertianModule> = ranks
            .iter()
            .enumerate()
            .map(|(j, &r)| HilbertianModule::free(model.clone(), r, format!("C^{}({name})", offset + j as i64)))
            .collect();
        if matrices.len() + 1 != modules.len() {
            return Err(Error::ShapeMismatch(format!("{} ranks but {} differentials", ranks.len(), matrices.len())));
        }
        let differentials = matrices
            .into_iter()
            .enumerate()
            .map(|(j, m)| Morphism::new(modules[j].clone(), modules[j + 1].clone(), m))
            .collect::<Result<Vec<_>>>()?;
        CochainComplex::new(name, offset, modules, differentials)
    }

    /// Replaces the preferred inner products; `None` keeps the standard one.
    pub fn with_grams(&self, grams: Vec<Option<GroupRingMatrix>>) -> Result<Self> {
        if grams.len() != self.modules.len() {
            return Err(Error::ShapeMismatch("one gram per degree expected".into()));
        }
        let modules = self
            .modules
            .iter()
            .zip(grams)
            .map(|(m, g)| {
                let base = HilbertianModule::free(m.model().clone(), m.rank(), m.label());
                match g {
                    Some(g) => base.with_gram(g),
                    None => Ok(base),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.rebuild(self.name.clone(), self.offset, modules)
    }

    fn rebuild(&self, name: String, offset: i64, modules: Vec<HilbertianModule>) -> Result<Self> {
        let differentials = self
            .differentials
            .iter()
            .enumerate()
            .map(|(j, d)| Morphism::new(modules[j].clone(), modules[j + 1].clone(), d.matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CochainComplex { name, offset, modules, differentials })
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        let name = name.into();
        let modules = self
            .modules
            .iter()
            .enumerate()
            .map(|(j, m)| m.clone().with_label(format!("C^{}({name})", self.degree(j))))
            .collect();
        self.rebuild(name, self.offset, modules).expect("renaming keeps shapes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self, j: usize) -> i64 {
        self.offset + j as i64
    }

    pub fn model(&self) -> &Arc<AlgebraModel> {
        self.modules[0].model()
    }

    pub fn modules(&self) -> &[HilbertianModule] {
        &self.modules
    }

    pub fn differentials(&self) -> &[Morphism] {
        &self.differentials
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.modules.iter().map(HilbertianModule::rank).collect()
    }

    /// Label of the cohomology atom in degree index `j`.
    pub fn cohomology_label(&self, j: usize) -> String {
        format!("H^{}({})", self.degree(j), self.name)
    }

    /// `d^{j+1} d^j` defects; fails with `NotComplex` beyond tolerance.
    pub fn validate(&self) -> Result<Vec<f64>> {
        let mut defects = Vec::new();
        for w in self.differentials.windows(2) {
            check_composable_zero(&w[0], &w[1]).map_err(|e| match e {
                Error::NotComplex(msg) => Error::NotComplex(format!("{msg} after {}", w[0].target().label())),
                other => other,
            })?;
            defects.push(w[1].matrix().mul(w[0].matrix())?.max_abs());
        }
        Ok(defects)
    }

    /// `sum_i (-1)^i rank C^i`.
    pub fn euler_char(&self) -> i64 {
        self.modules
            .iter()
            .enumerate()
            .map(|(j, m)| sign(self.degree(j)) * m.rank() as i64)
            .sum()
    }

    /// Torus rank over which fibers vary.
    pub fn quadrature_rank(&self) -> usize {
        self.differentials.iter().map(Morphism::quadrature_rank).max().unwrap_or(0)
    }

    fn spectral(&self, opts: &FkOptions) -> Result<(Vec<FkDeterminant>, Vec<usize>)> {
        let plan = FiberPlan::new(&self.differentials);
        let order = self.model().group_order();
        let dets = log_det_many(order, plan.k, self.differentials.len(), opts, |t| plan.fibers(t))?;
        let ranks = dets.iter().map(|d| (d.rank * order as f64).round() as usize).collect();
        Ok((dets, ranks))
    }

    pub fn cohomology(&self, opts: &FkOptions) -> Result<CohomologyData> {
        self.validate()?;
        let (dets, ranks) = self.spectral(opts)?;
        let betti = self.betti_from_ranks(&ranks);
        Ok(CohomologyData {
            degrees: (0..self.len()).map(|j| self.degree(j)).collect(),
            weakly_acyclic: betti.iter().all(|b| *b < BETTI_TOL),
            det_class: dets.iter().all(|d| d.det_class),
            betti,
            differentials: dets,
        })
    }

    fn betti_from_ranks(&self, ranks: &[usize]) -> Vec<f64> {
        let order = self.model().group_order() as f64;
        (0..self.len())
            .map(|j| {
                let r_out = ranks.get(j).copied().unwrap_or(0);
                let r_in = if j == 0 { 0 } else { ranks[j - 1] };
                (self.modules[j].fiber_dim() as f64 - r_out as f64 - r_in as f64) / order
            })
            .collect()
    }

    /// The line `det H^*(C)`, with an atom for every degree of nonzero Betti number.
    pub fn cohomology_line(&self, betti: &[f64]) -> LineExpr {
        let per_degree: Vec<LineExpr> = (0..self.len())
            .map(|j| if betti[j] >= BETTI_TOL { LineExpr::atom(self.cohomology_label(j)) } else { LineExpr::trivial() })
            .collect();
        let line = graded_alternating(&per_degree);
        if self.offset % 2 == 0 { line } else { line.dual() }
    }

    pub fn torsion(&self, opts: &FkOptions) -> Result<TorsionReport> {
        self.validate()?;
        let (dets, ranks) = self.spectral(opts)?;
        let betti = self.betti_from_ranks(&ranks);
        let log_value = dets.iter().enumerate().map(|(j, d)| sign(self.degree(j)) as f64 * d.log_det).sum();
        Ok(TorsionReport {
            log_value,
            line: self.cohomology_line(&betti),
            det_class: dets.iter().all(|d| d.det_class),
            weakly_acyclic: betti.iter().all(|b| *b < BETTI_TOL),
            degrees: (0..self.len()).map(|j| self.degree(j)).collect(),
            log_dets: dets.iter().map(|d| d.log_det).collect(),
            error: dets.iter().map(|d| d.error).sum(),
            betti,
            trivialization: "inner products induced on harmonic representatives".into(),
        })
    }

    /// The same complex one degree higher: `C[shift]^i = C^{i - shift}`.
    pub fn shift(&self, by: i64) -> Self {
        let offset = self.offset + by;
        let modules = self
            .modules
            .iter()
            .enumerate()
            .map(|(j, m)| m.clone().with_label(format!("C^{}({})", offset + j as i64, self.name)))
            .collect();
        self.rebuild(self.name.clone(), offset, modules).expect("shift keeps shapes")
    }

    /// Gram-orthogonal direct sum; degrees are aligned by padding with zero modules.
    pub fn direct_sum(&self, other: &Self, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let (a, b) = align(self, other)?;
        let modules = a
            .modules
            .iter()
            .zip(&b.modules)
            .enumerate()
            .map(|(j, (x, y))| x.direct_sum(y, format!("C^{}({name})", a.degree(j))))
            .collect::<Result<Vec<_>>>()?;
        let differentials = a
            .differentials
            .iter()
            .zip(&b.differentials)
            .enumerate()
            .map(|(j, (x, y))| {
                Morphism::new(modules[j].clone(), modules[j + 1].clone(), x.matrix().block_diag(y.matrix())?)
            })
            .collect::<Result<Vec<_>>>()?;
        CochainComplex::new(name, a.offset, modules, differentials)
    }

    /// Pads with zero modules so the complex spans degrees `lo..=hi`.
    pub fn pad(&self, lo: i64, hi: i64) -> Result<Self> {
        let top = self.degree(self.len() - 1);
        if lo > self.offset || hi < top {
            return Err(Error::ShapeMismatch("padding cannot shrink a complex".into()));
        }
        let model = self.model().clone();
        let mut modules = Vec::new();
        for deg in lo..=hi {
            if deg >= self.offset && deg <= top {
                modules.push(self.modules[(deg - self.offset) as usize].clone());
            } else {
                modules.push(HilbertianModule::free(model.clone(), 0, format!("C^{deg}({})", self.name)));
            }
        }
        let mut differentials = Vec::new();
        for j in 0..modules.len() - 1 {
            let deg = lo + j as i64;
            if deg >= self.offset && deg < top {
                differentials.push(self.differentials[(deg - self.offset) as usize].clone());
            } else {
                differentials.push(Morphism::zero(modules[j].clone(), modules[j + 1].clone()));
            }
        }
        CochainComplex::new(self.name.clone(), lo, modules, differentials)
    }

    /// Twisted sum `M = L (+) N` with `d_M = [[d_L, T], [0, d_N]]`, where
    /// `twist[j]: N^j -> L^{j+1}`. Inner products are the orthogonal sums.
    pub fn twisted_sum(l: &Self, n: &Self, twist: &[GroupRingMatrix], name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if l.offset != n.offset || l.len() != n.len() {
            return Err(Error::ShapeMismatch("twisted sum needs complexes over the same degrees".into()));
        }
        if twist.len() != l.differentials.len() {
            return Err(Error::ShapeMismatch(format!("{} twists for {} differentials", twist.len(), l.differentials.len())));
        }
        let modules = l
            .modules
            .iter()
            .zip(&n.modules)
            .enumerate()
            .map(|(j, (x, y))| x.direct_sum(y, format!("C^{}({name})", l.degree(j))))
            .collect::<Result<Vec<_>>>()?;
        let mut differentials = Vec::new();
        for (j, t) in twist.iter().enumerate() {
            let (dl, dn) = (l.differentials[j].matrix(), n.differentials[j].matrix());
            if t.shape() != (dl.nrows(), dn.ncols()) {
                return Err(Error::ShapeMismatch(format!("twist {j} has shape {:?}", t.shape())));
            }
            let zero = GroupRingMatrix::zeros(dl.model().clone(), dn.nrows(), dl.ncols());
            let top = dl.hstack(t)?;
            let bottom = zero.hstack(dn)?;
            differentials.push(Morphism::new(modules[j].clone(), modules[j + 1].clone(), top.vstack(&bottom)?)?);
        }
        CochainComplex::new(name, l.offset, modules, differentials)
    }

    /// Total complex of `C1 (x) C2` over `A1 (x) A2` with Koszul signs.
    pub fn tensor(c1: &Self, c2: &Self, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let model = Arc::new(c1.model().tensor(c2.model())?);
        let offset = c1.offset + c2.offset;
        let total = c1.len() + c2.len() - 1;
        // summands of total degree index t: pairs (a, b) with a + b = t
        let pairs: Vec<Vec<(usize, usize)>> = (0..total)
            .map(|t| (0..c1.len()).filter(|&a| t >= a && t - a < c2.len()).map(|a| (a, t - a)).collect())
            .collect();
        let mut modules = Vec::new();
        let mut blocks: Vec<Vec<HilbertianModule>> = Vec::new();
        for (t, ps) in pairs.iter().enumerate() {
            let parts: Vec<HilbertianModule> =
                ps.iter().map(|&(a, b)| c1.modules[a].tensor(&c2.modules[b])).collect::<Result<_>>()?;
            let mut m = HilbertianModule::free(model.clone(), 0, String::new());
            for p in &parts {
                m = m.direct_sum(p, String::new())?;
            }
            modules.push(m.with_label(format!("C^{}({name})", offset + t as i64)));
            blocks.push(parts);
        }
        let mut differentials = Vec::new();
        for t in 0..total - 1 {
            let mut mat = GroupRingMatrix::zeros(model.clone(), modules[t + 1].rank(), modules[t].rank());
            let col_start = starts(&blocks[t]);
            let row_start = starts(&blocks[t + 1]);
            for (s, &(a, b)) in pairs[t].iter().enumerate() {
                if a + 1 < c1.len() {
                    let id = GroupRingMatrix::identity(c2.model().clone(), c2.modules[b].rank());
                    let blk = c1.differentials[a].matrix().kron(&id)?;
                    let r = pairs[t + 1].iter().position(|&p| p == (a + 1, b)).expect("summand exists");
                    mat.paste(row_start[r], col_start[s], &blk);
                }
                if b + 1 < c2.len() {
                    let id = GroupRingMatrix::identity(c1.model().clone(), c1.modules[a].rank());
                    let mut blk = id.kron(c2.differentials[b].matrix())?;
                    if c1.degree(a) % 2 != 0 {
                        blk = blk.scale(Complex64::new(-1.0, 0.0));
                    }
                    let r = pairs[t + 1].iter().position(|&p| p == (a, b + 1)).expect("summand exists");
                    mat.paste(row_start[r], col_start[s], &blk);
                }
            }
            differentials.push(Morphism::new(modules[t].clone(), modules[t + 1].clone(), mat)?);
        }
        CochainComplex::new(name, offset, modules, differentials)
    }
}

fn starts(parts: &[HilbertianModule]) -> Vec<usize> {
    parts
        .iter()
        .scan(0, |acc, p| {
            let s = *acc;
            *acc += p.rank();
            Some(s)
        })
        .collect()
}

/// `(-1)^deg`.
pub fn sign(deg: i64) -> i64 {
    if deg.rem_euclid(2) == 0 { 1 } else { -1 }
}

fn align(a: &CochainComplex, b: &CochainComplex) -> Result<(CochainComplex, CochainComplex)> {
    let lo = a.offset.min(b.offset);
    let hi = a.degree(a.len() - 1).max(b.degree(b.len() - 1));
    Ok((a.pad(lo, hi)?, b.pad(lo, hi)?))
}

/// A short exact sequence `0 -> L -> M -> N -> 0` of cochain complexes given
/// by degreewise maps `alpha[j]: L^j -> M^j`, `beta[j]: M^j -> N^j`.
#[derive(Clone, Debug)]
pub struct ShortExactSequence {
    pub l: CochainComplex,
    pub m: CochainComplex,
    pub n: CochainComplex,
    pub alpha: Vec<GroupRingMatrix>,
    pub beta: Vec<GroupRingMatrix>,
}

/// Correction terms relating the torsions of a short exact sequence:
/// `ln rho_M = ln rho_L + ln rho_N + tau_les - sum_i (-1)^i ln psi_i`.
#[derive(Clone, Debug, Serialize)]
pub struct LesCorrection {
    /// Torsion of the long exact cohomology sequence in harmonic bases.
    pub tau_les: f64,
    /// `ln psi_i`, one per degree.
    pub log_psi: Vec<f64>,
    /// `sum_i (-1)^i ln psi_i`.
    pub alternating_psi: f64,
    /// Whether the long exact sequence is trivial (all three complexes weakly acyclic).
    pub les_trivial: bool,
}

impl LesCorrection {
    /// `tau_les - sum (-1)^i ln psi_i`.
    pub fn total(&self) -> f64 {
        self.tau_les - self.alternating_psi
    }
}

impl ShortExactSequence {
    pub fn validate(&self) -> Result<()> {
        let len = self.m.len();
        if self.l.len() != len || self.n.len() != len || self.l.offset != self.m.offset || self.n.offset != self.m.offset {
            return Err(Error::ShapeMismatch("short exact sequence over different degrees".into()));
        }
        if self.alpha.len() != len || self.beta.len() != len {
            return Err(Error::ShapeMismatch("one pair of maps per degree expected".into()));
        }
        for j in 0..len {
            let (a, b) = (&self.alpha[j], &self.beta[j]);
            let scale = 1.0 + a.max_abs() * b.max_abs();
            if b.mul(a)?.max_abs() > 1e-10 * scale {
                return Err(Error::NotExact(format!("beta . alpha != 0 in degree {}", self.m.degree(j))));
            }
            if j + 1 < len {
                // chain map conditions
                let lhs = self.m.differentials[j].matrix().mul(a)?;
                let rhs = self.alpha[j + 1].mul(self.l.differentials[j].matrix())?;
                let sc = 1.0 + lhs.max_abs();
                if lhs.sub(&rhs)?.max_abs() > 1e-10 * sc {
                    return Err(Error::NotExact(format!("alpha is not a cochain map in degree {}", self.m.degree(j))));
                }
                let lhs = self.n.differentials[j].matrix().mul(b)?;
                let rhs = self.beta[j + 1].mul(self.m.differentials[j].matrix())?;
                let sc = 1.0 + lhs.max_abs();
                if lhs.sub(&rhs)?.max_abs() > 1e-10 * sc {
                    return Err(Error::NotExact(format!("beta is not a cochain map in degree {}", self.m.degree(j))));
                }
            }
        }
        Ok(())
    }

    fn maps(&self) -> Result<(Vec<Morphism>, Vec<Morphism>)> {
        let alpha = (0..self.m.len())
            .map(|j| Morphism::new(self.l.modules[j].clone(), self.m.modules[j].clone(), self.alpha[j].clone()))
            .collect::<Result<Vec<_>>>()?;
        let beta = (0..self.m.len())
            .map(|j| Morphism::new(self.m.modules[j].clone(), self.n.modules[j].clone(), self.beta[j].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok((alpha, beta))
    }

    /// Computes the long-exact-sequence torsion and the splitting factors.
    pub fn correction(&self, opts: &FkOptions) -> Result<LesCorrection> {
        self.validate()?;
        let len = self.m.len();
        let nd = len - 1;
        let (alpha, beta) = self.maps()?;
        // plan layout: d_L, d_M, d_N, alpha, beta
        let mut all: Vec<Morphism> = Vec::new();
        all.extend(self.l.differentials.iter().cloned());
        all.extend(self.m.differentials.iter().cloned());
        all.extend(self.n.differentials.iter().cloned());
        all.extend(alpha.iter().cloned());
        all.extend(beta.iter().cloned());
        let plan = FiberPlan::new(&all);
        let k = plan.k;
        let dranks = generic_ranks(k, 3 * nd, opts, &|t: &[f64]| plan.fibers(t)[..3 * nd].to_vec())?;
        let rl = &dranks[..nd];
        let rm = &dranks[nd..2 * nd];
        let rn = &dranks[2 * nd..];
        let dims = |c: &CochainComplex| c.modules.iter().map(HilbertianModule::fiber_dim).collect::<Vec<_>>();
        let (nl, nm, nn) = (dims(&self.l), dims(&self.m), dims(&self.n));
        for j in 0..len {
            if nl[j] + nn[j] != nm[j] {
                return Err(Error::NotExact(format!("ranks do not add up in degree {}", self.m.degree(j))));
            }
        }
        let harm = |d: &[Fiber], r: &[usize], n: &[usize], j: usize| -> Fiber {
            let d_in = if j == 0 { Fiber::zeros(n[0], 0) } else { d[j - 1].clone() };
            let d_out = if j == nd { Fiber::zeros(0, n[j]) } else { d[j].clone() };
            let r_in = if j == 0 { 0 } else { r[j - 1] };
            let r_out = if j == nd { 0 } else { r[j] };
            harmonic_basis(&d_in, &d_out, r_in, r_out)
        };
        let betti_zero = |r: &[usize], n: &[usize]| {
            (0..len).all(|j| n[j] == if j == 0 { 0 } else { r[j - 1] } + if j == nd { 0 } else { r[j] })
        };
        let les_trivial = betti_zero(rl, &nl) && betti_zero(rm, &nm) && betti_zero(rn, &nn);

        let fiber = |t: &[f64]| -> Vec<Fiber> {
            let f = plan.fibers(t);
            let (dl, rest) = f.split_at(nd);
            let (dm, rest) = rest.split_at(nd);
            let (dn, rest) = rest.split_at(nd);
            let (a, b) = rest.split_at(len);
            let mut out = Vec::with_capacity(4 * len);
            let splits: Vec<Fiber> = (0..len).map(|j| split_matrix(&a[j], &b[j])).collect();
            if les_trivial {
                out.extend((0..3 * len).map(|_| Fiber::zeros(0, 0)));
            } else {
                let ul: Vec<Fiber> = (0..len).map(|j| harm(dl, rl, &nl, j)).collect();
                let um: Vec<Fiber> = (0..len).map(|j| harm(dm, rm, &nm, j)).collect();
                let un: Vec<Fiber> = (0..len).map(|j| harm(dn, rn, &nn, j)).collect();
                for j in 0..len {
                    out.push(um[j].adjoint() * &a[j] * &ul[j]);
                    out.push(un[j].adjoint() * &b[j] * &um[j]);
                    if j < nd {
                        let a_plus = left_inverse(&a[j + 1]);
                        let b_plus = splits[j].columns(nl[j], nn[j]).into_owned();
                        out.push(ul[j + 1].adjoint() * a_plus * &dm[j] * b_plus * &un[j]);
                    } else {
                        out.push(Fiber::zeros(0, un[j].ncols()));
                    }
                }
            }
            out.extend(splits);
            out
        };
        let order = self.m.model().group_order();
        let dets = log_det_many(order, k, 4 * len, opts, fiber)?;
        let mut tau = 0.0;
        for j in 0..len {
            for t in 0..3 {
                let deg = 3 * self.m.degree(j) + t as i64;
                tau += sign(deg) as f64 * dets[3 * j + t].log_det;
            }
        }
        let log_psi: Vec<f64> = (0..len).map(|j| dets[3 * len + j].log_det).collect();
        let alternating_psi = log_psi.iter().enumerate().map(|(j, p)| sign(self.m.degree(j)) as f64 * p).sum();
        Ok(LesCorrection { tau_les: tau, log_psi, alternating_psi, les_trivial })
    }
}

/// `(a* a)^{-1} a*` for an injective fiber.
fn left_inverse(a: &Fiber) -> Fiber {
    let ata = a.adjoint() * a;
    let inv = ata.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(ata.nrows(), ata.ncols()));
    inv * a.adjoint()
}

/// Context expressing the harmonic generators of `old` in terms of those of
/// `new`, for two complexes that differ only in their preferred inner
/// products. With it, `trivialize_log(rescaled element of old, ctx)` equals
/// the torsion of `new`.
pub fn gram_change_context(old: &CochainComplex, new: &CochainComplex, opts: &FkOptions) -> Result<TrivializationContext> {
    if old.ranks() != new.ranks() || old.offset != new.offset {
        return Err(Error::ShapeMismatch("gram change between different complexes".into()));
    }
    let len = old.len();
    let nd = len - 1;
    let mut all: Vec<Morphism> = old.differentials.to_vec();
    all.extend(new.differentials.iter().cloned());
    let plan = FiberPlan::new(&all);
    let k = plan.k.max(
        old.modules.iter().chain(&new.modules).filter_map(|m| m.gram()).map(|g| {
            if g.realize().is_constant() { 0 } else { g.model().torus_rank() }
        }).max().unwrap_or(0),
    );
    let ranks = generic_ranks(k, 2 * nd, opts, &|t: &[f64]| plan.fibers(t))?;
    let n: Vec<usize> = old.modules.iter().map(HilbertianModule::fiber_dim).collect();
    let harm = |d: &[Fiber], r: &[usize], j: usize| -> Fiber {
        let d_in = if j == 0 { Fiber::zeros(n[0], 0) } else { d[j - 1].clone() };
        let d_out = if j == nd { Fiber::zeros(0, n[j]) } else { d[j].clone() };
        harmonic_basis(&d_in, &d_out, if j == 0 { 0 } else { r[j - 1] }, if j == nd { 0 } else { r[j] })
    };
    let order = old.model().group_order();
    let dets = log_det_many(order, k, len, opts, |t| {
        let f = plan.fibers(t);
        let (dold, dnew) = f.split_at(nd);
        (0..len)
            .map(|j| {
                let h_old = harm(dold, &ranks[..nd], j);
                let h_new = harm(dnew, &ranks[nd..], j);
                let to_raw = old.modules[j].whitening(t).map(|w| w.1);
                let to_new = new.modules[j].whitening(t).map(|w| w.0);
                let mut y = match to_raw {
                    Some(w) => w * h_old,
                    None => h_old,
                };
                if let Some(w) = to_new {
                    y = w * y;
                }
                h_new.adjoint() * y
            })
            .collect()
    })?;
    let mut ctx = TrivializationContext {
        det_class: true,
        description: "harmonic inner products of the new preferred inner products".into(),
        ..Default::default()
    };
    for (j, d) in dets.iter().enumerate() {
        ctx.log_generator.insert(old.cohomology_label(j), d.log_det);
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{FiniteGroupTable, GroupRingElement, Key};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn scalar_complex(values: &[f64]) -> CochainComplex {
        let model = Arc::new(AlgebraModel::scalars());
        let mats = values
            .iter()
            .map(|v| GroupRingMatrix::scalar_identity(model.clone(), 1, c(*v)))
            .collect();
        CochainComplex::from_matrices(model, "S", 0, &vec![1; values.len() + 1], mats).unwrap()
    }

    fn circle() -> CochainComplex {
        let m = Arc::new(AlgebraModel::torus(1));
        let e = GroupRingElement::from_terms([(Key::monomial(vec![1]), c(1.0)), (Key::monomial(vec![0]), c(-1.0))]);
        CochainComplex::from_matrices(m.clone(), "S1", 0, &[1, 1], vec![GroupRingMatrix::single(m, e).unwrap()]).unwrap()
    }

    fn lens(p: usize) -> CochainComplex {
        let m = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(p).unwrap()));
        let t_minus_1 = GroupRingElement::from_terms([(Key::group(1), c(1.0)), (Key::group(0), c(-1.0))]);
        let norm = GroupRingElement::from_terms((0..p).map(|g| (Key::group(g), c(1.0))));
        let mats = vec![t_minus_1.clone(), norm, t_minus_1]
            .into_iter()
            .map(|e| GroupRingMatrix::single(m.clone(), e).unwrap())
            .collect();
        CochainComplex::from_matrices(m, "L", 0, &[1, 1, 1, 1], mats).unwrap()
    }

    #[test]
    fn times_three_has_torsion_three() {
        let r = scalar_complex(&[3.0]).torsion(&FkOptions::default()).unwrap();
        assert!((r.real_value().unwrap() - 3.0).abs() < 1e-14);
        assert!(r.weakly_acyclic);
    }

    #[test]
    fn circle_is_acyclic_with_trivial_torsion() {
        let c = circle();
        let h = c.cohomology(&FkOptions::default()).unwrap();
        assert_eq!(h.betti, vec![0.0, 0.0]);
        assert!(h.weakly_acyclic);
        assert!(c.torsion(&FkOptions::default()).unwrap().log_value.abs() < 1e-8);
    }

    #[test]
    fn lens_betti_numbers() {
        for p in [3, 5] {
            let h = lens(p).cohomology(&FkOptions::default()).unwrap();
            let q = 1.0 / p as f64;
            for (b, e) in h.betti.iter().zip([q, 0.0, 0.0, q]) {
                assert!((b - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bad_square_is_rejected() {
        let model = Arc::new(AlgebraModel::scalars());
        let one = GroupRingMatrix::identity(model.clone(), 1);
        let err = CochainComplex::from_matrices(model, "X", 0, &[1, 1, 1], vec![one.clone(), one]).unwrap_err();
        assert!(matches!(err, Error::NotComplex(_)));
    }

    #[test]
    fn shift_inverts_torsion() {
        let c = scalar_complex(&[3.0, 0.0]);
        let a = c.torsion(&FkOptions::default()).unwrap().log_value;
        let b = c.shift(1).torsion(&FkOptions::default()).unwrap().log_value;
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn scalar_twist_keeps_torsion_six() {
        let l = scalar_complex(&[2.0]);
        let n = scalar_complex(&[3.0]);
        let model = l.model().clone();
        for tw in [0.0, 1.0, -7.5] {
            let t = GroupRingMatrix::scalar_identity(model.clone(), 1, c(tw));
            let m = CochainComplex::twisted_sum(&l, &n, &[t], "M").unwrap();
            let r = m.torsion(&FkOptions::default()).unwrap();
            assert!((r.real_value().unwrap() - 6.0).abs() < 1e-12, "twist {tw}");
        }
    }

    #[test]
    fn tensor_with_point_is_identity() {
        let point = CochainComplex::from_matrices(Arc::new(AlgebraModel::scalars()), "pt", 0, &[1], vec![]).unwrap();
        let l = lens(3);
        let t = CochainComplex::tensor(&l, &point, "Lxpt").unwrap();
        assert_eq!(t.ranks(), l.ranks());
        let a = l.torsion(&FkOptions::default()).unwrap().log_value;
        let b = t.torsion(&FkOptions::default()).unwrap().log_value;
        assert!((a - b).abs() < 1e-14);
        assert_eq!(CochainComplex::tensor(&l, &circle(), "x").unwrap().euler_char(), 0);
    }

    fn ses_of_twisted_sum(l: &CochainComplex, n: &CochainComplex, m: &CochainComplex) -> ShortExactSequence {
        let model = l.model().clone();
        let alpha = (0..l.len())
            .map(|j| {
                let (a, b) = (l.ranks()[j], n.ranks()[j]);
                GroupRingMatrix::identity(model.clone(), a).vstack(&GroupRingMatrix::zeros(model.clone(), b, a)).unwrap()
            })
            .collect();
        let beta = (0..l.len())
            .map(|j| {
                let (a, b) = (l.ranks()[j], n.ranks()[j]);
                GroupRingMatrix::zeros(model.clone(), b, a).hstack(&GroupRingMatrix::identity(model.clone(), b)).unwrap()
            })
            .collect();
        ShortExactSequence { l: l.clone(), m: m.clone(), n: n.clone(), alpha, beta }
    }

    #[test]
    fn long_exact_sequence_correction() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let opts = FkOptions::default();
        for (i, model) in [
            AlgebraModel::scalars(),
            AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap()),
            AlgebraModel::finite_group(FiniteGroupTable::symmetric(3).unwrap()),
        ]
        .into_iter()
        .enumerate()
        {
            let model = Arc::new(model);
            for trial in 0..6 {
                let l = crate::random::complex(&mut rng, &model, "L", 3, 5, false).unwrap();
                let n = crate::random::complex(&mut rng, &model, "N", 3, 5, false).unwrap();
                let t = crate::random::twist(&mut rng, &l, &n).unwrap();
                let m = CochainComplex::twisted_sum(&l, &n, &t, "M").unwrap();
                let ses = ses_of_twisted_sum(&l, &n, &m);
                let corr = ses.correction(&opts).unwrap();
                let rl = l.torsion(&opts).unwrap().log_value;
                let rn = n.torsion(&opts).unwrap().log_value;
                let rm = m.torsion(&opts).unwrap().log_value;
                assert!(corr.alternating_psi.abs() < 1e-12);
                let residual = rm - (rl + rn + corr.total());
                assert!(residual.abs() < 1e-9, "model {i} trial {trial}: residual {residual:e}");
            }
        }
    }

    #[test]
    fn gram_change_is_tracked_by_the_context() {
        use crate::detline::{rescale_inner_product, trivialize_log};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let opts = FkOptions::default();
        let model = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(4).unwrap()));
        for _ in 0..5 {
            let old = crate::random::complex(&mut rng, &model, "C", 3, 6, false).unwrap();
            let grams: Vec<Option<GroupRingMatrix>> = old
                .ranks()
                .iter()
                .map(|&r| {
                    let a = crate::random::invertible(&mut rng, &model, r);
                    Some(a.star_transpose().mul(&a).unwrap())
                })
                .collect();
            let new = old.with_grams(grams.clone()).unwrap();
            let r_old = old.torsion(&opts).unwrap();
            let r_new = new.torsion(&opts).unwrap();
            let mut e = r_old.element();
            for (j, g) in grams.iter().enumerate() {
                let module = old.modules()[j].clone();
                let alpha = Morphism::new(module.clone(), module, g.clone().unwrap()).unwrap();
                let rescaled = rescale_inner_product(&LineElement::canonical(LineExpr::trivial()), &alpha, &opts).unwrap();
                e.log_scalar += sign(old.degree(j)) as f64 * rescaled.log_scalar;
            }
            let ctx = gram_change_context(&old, &new, &opts).unwrap();
            let via_context = trivialize_log(&e, &ctx).unwrap();
            assert!((via_context - r_new.log_value).abs() < 1e-9, "{via_context} vs {}", r_new.log_value);
        }
    }
}
