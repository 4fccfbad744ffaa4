//! The acceptance suites, shared by the `selftest` command and the test
//! target of the same name. Every suite is seeded, so reruns are identical.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{fk_det, AlgebraModel, FiniteGroupTable, FkOptions, GroupRingElement, GroupRingMatrix, Key};
use crate::complex::{gram_change_context, sign, CochainComplex};
use crate::detline::{rescale_inner_product, trivialize_log, LineElement, LineExpr};
use crate::error::Result;
use crate::formulas::{det_tensor_identity_check, verify_fibration, verify_product, verify_sum};
use crate::hilbmod::{HilbertianModule, Morphism};
use crate::oracle::{mahler_refine, torsion_via_dense, torsion_via_laplacian};
use crate::random;
use crate::spaces::builtin::{circle_z, disk, klein_bundle, lens, sphere, torus};
use crate::spaces::cw::product_index;
use crate::spaces::{
    builtin_space, l2_torsion, product_space, pushout_assemble, Bundle, CoefficientSystem, EquivariantCWComplex,
    GeneratorImage, Group, IntElement, IntMatrix, Pushout, Subcomplex, Word,
};
use crate::Error;

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    /// One line: `[PASS] 3 sum formula: ...`.
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

/// Largest value seen, with a count of failures against a bound.
#[derive(Default)]
struct Tally {
    cases: usize,
    worst: f64,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, label: impl FnOnce() -> String, value: f64, bound: f64) {
        self.cases += 1;
        if value.is_nan() || value >= bound {
            self.failures.push(format!("{}: {value:.3e}", label()));
        }
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
    }

    fn fail(&mut self, label: String) {
        self.cases += 1;
        self.failures.push(label);
    }

    fn summary(&self, what: &str) -> String {
        let mut s = format!("{} cases, max {what} {:.2e}", self.cases, self.worst);
        if let Some(f) = self.failures.first() {
            s.push_str(&format!("; {} failing, first {f}", self.failures.len()));
        }
        s
    }
}

fn finish(id: u8, title: &'static str, start: Instant, limit: Option<f64>, tally: &Tally, what: &str) -> Outcome {
    let seconds = start.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| seconds < l);
    let mut detail = tally.summary(what);
    if !in_time {
        detail.push_str(&format!("; over the {:.0} s budget", limit.unwrap_or(0.0)));
    }
    Outcome { id, title, passed: tally.failures.is_empty() && tally.cases > 0 && in_time, detail, seconds }
}

fn cyclic(p: usize) -> Arc<AlgebraModel> {
    Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(p).expect("small order")))
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `Det(a_1 (x) a_2) = Det(a_1)^{dim H_2} Det(a_2)^{dim H_1}` on random
/// invertible matrices over `Z/2` and `Z/3`.
pub fn tensor_determinant(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = FkOptions::default();
    let mut t = Tally::default();
    let morphism = |rng: &mut ChaCha8Rng| {
        let model = cyclic(rng.random_range(2..=3));
        let n = rng.random_range(1..=3);
        let m = HilbertianModule::free(model.clone(), n, "H");
        Morphism::new(m.clone(), m, random::invertible(rng, &model, n)).expect("square")
    };
    for i in 0..200 {
        let (a1, a2) = (morphism(&mut rng), morphism(&mut rng));
        match det_tensor_identity_check(&a1, &a2, 1e-10, &opts) {
            Ok(r) => t.check(|| format!("pair {i}"), r.residual, 1e-10),
            Err(e) => t.fail(format!("pair {i}: {e}")),
        }
    }
    finish(1, "tensor-determinant lemma", start, Some(5.0), &t, "|dlog|")
}

/// Closed-form determinants: cyclotomic, Jensen and the Mahler measure of
/// `1 + z + w`.
pub fn golden_determinants() -> Outcome {
    let start = Instant::now();
    let mut t = Tally::default();
    for p in 2..=50usize {
        let model = cyclic(p);
        let mut e = GroupRingElement::monomial(Key::group(1), c(1.0));
        e.add_term(Key::group(0), c(-1.0));
        let m = GroupRingMatrix::single(model, e).expect("1x1");
        // prod_{k=1}^{p-1} |1 - w^k| = p
        let cyclotomic: f64 = (1..p).map(|k| (2.0 * (PI * k as f64 / p as f64).sin()).ln()).sum::<f64>() / p as f64;
        match fk_det(&m, &FkOptions::default()) {
            Ok(d) => {
                let closed = (p as f64).ln() / p as f64;
                t.check(|| format!("p = {p}"), (d.log_det - closed).abs().max((cyclotomic - closed).abs()), 1e-10)
            }
            Err(e) => t.fail(format!("p = {p}: {e}")),
        }
    }
    let torus = Arc::new(AlgebraModel::torus(1));
    for a in [0.5_f64, 2.0] {
        let mut e = GroupRingElement::monomial(Key::monomial(vec![1]), c(1.0));
        e.add_term(Key::monomial(vec![0]), c(-a));
        let m = GroupRingMatrix::single(torus.clone(), e).expect("1x1");
        match fk_det(&m, &FkOptions::default()) {
            Ok(d) => t.check(|| format!("z - {a}"), (d.log_det - a.max(1.0).ln()).abs(), 1e-8),
            Err(e) => t.fail(format!("z - {a}: {e}")),
        }
    }
    const MAHLER: f64 = 0.3230659;
    let plane = Arc::new(AlgebraModel::torus(2));
    let p = GroupRingElement::from_terms([
        (Key::monomial(vec![0, 0]), c(1.0)),
        (Key::monomial(vec![1, 0]), c(1.0)),
        (Key::monomial(vec![0, 1]), c(1.0)),
    ]);
    let m = GroupRingMatrix::single(plane, p.clone()).expect("1x1");
    match fk_det(&m, &FkOptions::default().with_tolerance(1e-7)) {
        Ok(d) if d.resolution <= 4096 => t.check(|| "m(1+z+w)".into(), (d.log_det - MAHLER).abs(), 1e-6),
        Ok(d) => t.fail(format!("m(1+z+w) needed a {}-point grid", d.resolution)),
        Err(e) => t.fail(format!("m(1+z+w): {e}")),
    }
    match mahler_refine(&p, 2, 1e-7) {
        Ok(r) => t.check(|| "m(1+z+w) by refinement".into(), (r.value - MAHLER).abs(), 1e-6),
        Err(e) => t.fail(format!("m(1+z+w) by refinement: {e}")),
    }
    finish(2, "golden determinants", start, Some(30.0), &t, "error")
}

/// A random one-dimensional complex over `Z/p`: edges `g v_a - h v_b`.
fn random_graph(rng: &mut ChaCha8Rng, group: &Group, p: usize, extra: Option<&EquivariantCWComplex>) -> EquivariantCWComplex {
    let (base0, base1) = extra.map_or((0, 0), |x| (x.cells[0], x.cells.get(1).copied().unwrap_or(0)));
    let n0 = base0 + rng.random_range(usize::from(base0 == 0)..=2);
    let n1 = base1 + rng.random_range(usize::from(base1 == 0)..=2);
    let mut d = IntMatrix::zeros(n0, n1);
    if let Some(x) = extra.filter(|x| x.dim() >= 1) {
        for i in 0..base0 {
            for l in 0..base1 {
                d.set(i, l, x.boundary(1).get(i, l).clone());
            }
        }
    }
    for l in base1..n1 {
        let (a, b) = (rng.random_range(0..n0), rng.random_range(0..n0));
        let (g, h) = (rng.random_range(0..p), rng.random_range(0..p));
        let ea = d.get(a, l).add(&IntElement::word(Word::gen(g), 1));
        d.set(a, l, ea);
        let eb = d.get(b, l).add(&IntElement::word(Word::gen(h), -1));
        d.set(b, l, eb);
    }
    EquivariantCWComplex::new("graph", group.clone(), vec![n0, n1], vec![d]).expect("graphs are complexes")
}

/// `X_0 x {v}` inside `X_0 x Y`.
fn slice(x0: &EquivariantCWComplex, y: &EquivariantCWComplex, v: usize) -> Subcomplex {
    let right = &y.cells;
    Subcomplex {
        cells: (0..x0.cells.len())
            .map(|k| (0..x0.cells[k]).map(|a| product_index(&x0.cells, right, k, a, 0, v)).collect())
            .collect(),
    }
}

/// A random equivariant pushout over `Z/p`: `X_1` is `X_0 x D^k` or a graph
/// containing `X_0`, and `X_2` is one of those, `X_0 x S^1`, or `X_0` itself
/// mapped in by a group element.
pub fn random_pushout(rng: &mut ChaCha8Rng, p: usize) -> Result<Pushout> {
    let group = Group::finite(FiniteGroupTable::cyclic(p)?);
    let x0 = random_graph(rng, &group, p, None);
    let side = |rng: &mut ChaCha8Rng, allow_self: bool| -> Result<(EquivariantCWComplex, Subcomplex, bool)> {
        let choice = rng.random_range(0..if allow_self { 5 } else { 3 });
        Ok(match choice {
            0 | 1 => {
                let y = disk(choice + 1)?.space;
                let v = rng.random_range(0..y.cells[0]);
                (product_space(&x0, &y)?, slice(&x0, &y, v), false)
            }
            2 => (random_graph(rng, &group, p, Some(&x0)), Subcomplex::whole(&x0), false),
            3 => {
                let y = sphere(1)?.space;
                (product_space(&x0, &y)?, slice(&x0, &y, 0), false)
            }
            _ => (x0.clone(), Subcomplex::whole(&x0), true),
        })
    };
    let (x1, j1, _) = side(rng, false)?;
    let (x2, j2, shifted) = side(rng, true)?;
    let mut j2 = j2.as_chain_map(&x0, &x2);
    if shifted {
        // multiplication by a central element is a chain automorphism
        let g = Word::gen(rng.random_range(0..p));
        j2 = ChainMapExt::times(&j2, &g);
    }
    pushout_assemble(&x0, &x1, &j1, &x2, &j2)
}

trait ChainMapExt {
    fn times(&self, g: &Word) -> Self;
}

impl ChainMapExt for crate::spaces::ChainMap {
    fn times(&self, g: &Word) -> Self {
        let gm = IntElement::word(g.clone(), 1);
        crate::spaces::ChainMap { matrices: self.matrices.iter().map(|m| m.map(|e| gm.mul(e))).collect() }
    }
}

/// `C` with `Z/p` acting through `g -> exp(2 pi i g / p)`.
pub fn character(group: &Group, p: usize) -> Result<CoefficientSystem> {
    let images = (0..p)
        .map(|g| GeneratorImage { scale: Complex64::from_polar(1.0, 2.0 * PI * g as f64 / p as f64), key: Key::group(0) })
        .collect();
    CoefficientSystem::new(group.clone(), Arc::new(AlgebraModel::scalars()), images)
}

/// `S^2` from two disks, and random pushouts over `Z/p` with regular and
/// character coefficients.
pub fn sum_formula(seed: u64) -> Outcome {
    let start = Instant::now();
    let opts = FkOptions::default();
    let mut t = Tally::default();
    let mut real = 0;
    let mut record = |t: &mut Tally, label: String, r: Result<crate::formulas::FormulaReport>| match r {
        Ok(r) => {
            t.check(|| label.clone(), r.residual, 1e-8);
            if let Some(rc) = &r.real {
                real += 1;
                let line_path = r.lhs_log - r.rhs_log - r.correction;
                let real_path = rc.lhs_log - rc.rhs_log;
                t.check(|| format!("{label} (real path)"), (line_path - real_path).abs().max(rc.residual), 1e-8);
            }
        }
        Err(e) => t.fail(format!("{label}: {e}")),
    };
    let two_disks = || -> Result<Pushout> {
        let d = disk(2)?.space;
        let s1 = sphere(1)?.space;
        let j = Subcomplex { cells: vec![vec![0], vec![0]] };
        pushout_assemble(&s1, &d, &j, &d, &j.as_chain_map(&s1, &d))
    };
    match two_disks() {
        Ok(p) => {
            let h = CoefficientSystem::trivial(&p.x.group);
            record(&mut t, "S^2".into(), verify_sum(&p, &h, 0.0, 1e-8, &opts));
        }
        Err(e) => t.fail(format!("S^2: {e}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..100 {
        let p = [2, 3, 5, 7][i % 4];
        let po = match random_pushout(&mut rng, p) {
            Ok(po) => po,
            Err(e) => {
                t.fail(format!("pushout {i}: {e}"));
                continue;
            }
        };
        let regular = CoefficientSystem::regular(&po.x.group);
        let sigma = rng.random_range(-1.0..1.0);
        record(&mut t, format!("pushout {i} over Z/{p}"), regular.and_then(|h| verify_sum(&po, &h, sigma, 1e-8, &opts)));
        let chi = character(&po.x.group, p);
        record(&mut t, format!("pushout {i} with a character"), chi.and_then(|h| verify_sum(&po, &h, 0.0, 1e-8, &opts)));
    }
    let mut out = finish(3, "sum formula", start, None, &t, "residual");
    out.detail.push_str(&format!(", {real} real-number checks"));
    out.passed &= real > 0;
    out
}

/// Point times a space, circle times sphere, and lens times circle.
pub fn product_formula() -> Outcome {
    let start = Instant::now();
    let opts = FkOptions::default();
    let mut t = Tally::default();
    let pt = builtin_space("point", &[]).expect("builtin");
    for (name, params) in [("sphere", vec!["2"]), ("lens", vec!["3", "1"]), ("circle_z", vec![]), ("torus", vec!["2"])] {
        let params: Vec<String> = params.into_iter().map(String::from).collect();
        let b = builtin_space(name, &params).expect("builtin");
        match verify_product(&pt.space, &pt.coefficients, &b.space, &b.coefficients, 1e-8, &opts) {
            // exact: the product with a point is the same complex
            Ok(r) => t.check(|| format!("point x {name}"), if r.residual == 0.0 { 0.0 } else { f64::INFINITY }, 1e-8),
            Err(e) => t.fail(format!("point x {name}: {e}")),
        }
    }
    let circle = circle_z();
    let pairs = [("circle_z x sphere(2)", circle.clone(), sphere(2)), ("lens(3,1) x circle_z", lens(3, 1).expect("lens"), Ok(circle))];
    for (label, a, b) in pairs {
        let b = b.expect("builtin");
        match verify_product(&a.space, &a.coefficients, &b.space, &b.coefficients, 1e-8, &opts) {
            Ok(r) => t.check(|| label.into(), r.residual, 1e-8),
            Err(e) => t.fail(format!("{label}: {e}")),
        }
    }
    finish(4, "product formula", start, None, &t, "residual")
}

/// Trivial bundles against the product driver, the Klein bottle over the
/// circle with `l^2(D_4)`, the circle bundle over `S^2` and `chi(F) != 0`.
pub fn fibration_formula() -> Outcome {
    let start = Instant::now();
    let opts = FkOptions::default();
    let mut t = Tally::default();
    let pt = CoefficientSystem::trivial(&Group::trivial());
    let fibers = [("circle_z", circle_z()), ("lens(3,1)", lens(3, 1).expect("lens"))];
    for (fname, f) in &fibers {
        for n in [1, 2] {
            let base = sphere(n).expect("sphere").space;
            let label = format!("{fname} x S^{n}");
            let run = || -> Result<(f64, f64)> {
                let b = Bundle::trivial(f.space.clone(), base.clone())?;
                let fib = verify_fibration(&b, &f.coefficients, 0.0, 1e-8, &opts)?;
                let prod = verify_product(&f.space, &f.coefficients, &base, &pt, 1e-8, &opts)?;
                Ok(((fib.residual - prod.residual).abs().max((fib.lhs_log - prod.lhs_log).abs()), fib.residual))
            };
            match run() {
                Ok((gap, residual)) => {
                    t.check(|| format!("{label}: drivers"), gap, 1e-12);
                    t.check(|| format!("{label}: residual"), residual, 1e-8);
                }
                Err(e) => t.fail(format!("{label}: {e}")),
            }
        }
    }
    match klein_bundle().and_then(|(b, h)| verify_fibration(&b, &h, 0.0, 1e-8, &opts)) {
        Ok(r) => {
            t.check(|| "Klein bottle: ln rho".into(), r.lhs_log.abs(), 1e-8);
            t.check(|| "Klein bottle: residual".into(), r.residual, 1e-8);
            t.check(|| "Klein bottle: steps".into(), if r.all_passed() { 0.0 } else { 1.0 }, 0.5);
        }
        Err(e) => t.fail(format!("Klein bottle: {e}")),
    }
    let c = circle_z();
    match sphere(2).and_then(|s| Bundle::trivial(c.space.clone(), s.space)).and_then(|b| verify_fibration(&b, &c.coefficients, 0.0, 1e-8, &opts)) {
        Ok(r) => t.check(|| "circle over S^2: ln rho".into(), r.lhs_log.abs().max(r.residual), 1e-8),
        Err(e) => t.fail(format!("circle over S^2: {e}")),
    }
    let s2 = sphere(2).expect("sphere");
    match Bundle::trivial(s2.space.clone(), sphere(1).expect("sphere").space)
        .and_then(|b| verify_fibration(&b, &s2.coefficients, 0.0, 1e-8, &opts))
    {
        Err(Error::EulerNotZero(2)) => t.check(|| "chi(F) = 2".into(), 0.0, 1e-8),
        other => t.fail(format!("chi(F) = 2 was not rejected: {:?}", other.map(|r| r.residual))),
    }
    finish(5, "fibration formula", start, None, &t, "residual")
}

fn small_group(rng: &mut ChaCha8Rng) -> Arc<AlgebraModel> {
    let table = match rng.random_range(0..4) {
        0 => FiniteGroupTable::cyclic(rng.random_range(1..=8)),
        1 => FiniteGroupTable::dihedral(4),
        2 => FiniteGroupTable::symmetric(3),
        _ => FiniteGroupTable::cyclic(2).map(|z| z.product(&z)),
    };
    Arc::new(AlgebraModel::finite_group(table.expect("small group")))
}

/// The main torsion against the Laplacian and dense QR oracles.
pub fn oracle_equivalence(seed: u64) -> Outcome {
    let start = Instant::now();
    let opts = FkOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for i in 0..120 {
        let model = small_group(&mut rng);
        let len = rng.random_range(2..=4);
        let acyclic = rng.random_bool(0.5);
        let run = |c: &CochainComplex| -> Result<f64> {
            let main = c.torsion(&opts)?.real_log()?;
            let lap = torsion_via_laplacian(c, 1e-8)?;
            let dense = torsion_via_dense(c)?;
            Ok((main - lap).abs().max((main - dense).abs()))
        };
        match random::complex(&mut rng, &model, "C", len, 12, acyclic).and_then(|c| run(&c)) {
            Ok(gap) => t.check(|| format!("complex {i} over a group of order {}", model.group_order()), gap, 1e-8),
            Err(e) => t.fail(format!("complex {i}: {e}")),
        }
    }
    finish(6, "oracle equivalence", start, Some(60.0), &t, "|dlog|")
}

fn random_word(rng: &mut ChaCha8Rng, group: &Group) -> Word {
    let n = group.generator_count();
    if n == 0 {
        return Word::identity();
    }
    Word::from_pairs(&[(rng.random_range(0..n), rng.random_range(-2..=2)), (rng.random_range(0..n), rng.random_range(-1..=1))])
}

/// Re-lifting and reordering cells, and rescaling inner products with the
/// determinant-line correction.
pub fn well_definedness(seed: u64) -> Outcome {
    let start = Instant::now();
    let opts = FkOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    let spaces = [
        lens(3, 1).expect("lens"),
        lens(5, 2).expect("lens"),
        torus(2).expect("torus"),
        builtin_space("klein_bottle", &[]).expect("klein"),
        builtin_space("mapping_torus", &["1".into()]).expect("mapping torus"),
    ];
    let base: Vec<f64> = spaces
        .iter()
        .map(|b| l2_torsion(&b.space, &b.coefficients, 0.0, &opts).map(|r| r.log_value).unwrap_or(f64::NAN))
        .collect();
    for i in 0..50 {
        match i % 3 {
            0 | 1 => {
                let s = rng.random_range(0..spaces.len());
                let b = &spaces[s];
                let k = rng.random_range(0..b.space.cells.len());
                let n = b.space.cells[k];
                let moved = if i % 3 == 0 {
                    let w = random_word(&mut rng, &b.space.group);
                    b.space.relift(k, rng.random_range(0..n), &w)
                } else {
                    let mut perm: Vec<usize> = (0..n).collect();
                    for j in (1..n).rev() {
                        perm.swap(j, rng.random_range(0..=j));
                    }
                    b.space.reorder(k, &perm)
                };
                match moved.and_then(|x| l2_torsion(&x, &b.coefficients, 0.0, &opts)) {
                    Ok(r) => t.check(|| format!("{} move {i}", b.space.name), (r.log_value - base[s]).abs(), 1e-9),
                    Err(e) => t.fail(format!("{} move {i}: {e}", b.space.name)),
                }
            }
            _ => match gram_change(&mut rng, &opts) {
                Ok(gap) => t.check(|| format!("gram change {i}"), gap, 1e-9),
                Err(e) => t.fail(format!("gram change {i}: {e}")),
            },
        }
    }
    finish(7, "well-definedness", start, None, &t, "residual")
}

/// Rescales every inner product of a random complex and compares the
/// transported torsion with the torsion of the rescaled complex.
fn gram_change(rng: &mut ChaCha8Rng, opts: &FkOptions) -> Result<f64> {
    let model = cyclic(rng.random_range(2..=5));
    let old = random::complex(rng, &model, "C", 3, 6, false)?;
    let grams: Vec<GroupRingMatrix> = old
        .ranks()
        .iter()
        .map(|&r| {
            let a = random::invertible(rng, &model, r);
            a.star_transpose().mul(&a)
        })
        .collect::<Result<_>>()?;
    let new = old.with_grams(grams.iter().cloned().map(Some).collect())?;
    let mut e = old.torsion(opts)?.element();
    for (j, g) in grams.iter().enumerate() {
        let m = old.modules()[j].clone();
        let alpha = Morphism::new(m.clone(), m, g.clone())?;
        e.log_scalar += sign(old.degree(j)) as f64 * rescale_inner_product(&LineElement::canonical(LineExpr::trivial()), &alpha, opts)?.log_scalar;
    }
    let ctx = gram_change_context(&old, &new, opts)?;
    Ok((trivialize_log(&e, &ctx)? - new.torsion(opts)?.log_value).abs())
}

/// `Sum (-1)^i ln Det(d^i* d^i)` of a complex, from the positive operators.
fn alternating_log_det_squares(c: &CochainComplex, opts: &FkOptions) -> Result<f64> {
    let mut s = 0.0;
    for (j, d) in c.differentials().iter().enumerate() {
        let dd = d.then(&d.adjoint()?)?;
        s += sign(c.degree(j)) as f64 * dd.log_det(opts)?.log_det;
    }
    Ok(s)
}

/// Twisted sums `M` of weakly acyclic `L`, `N`.
pub fn split_lemma(seed: u64) -> Outcome {
    let start = Instant::now();
    let opts = FkOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for i in 0..100 {
        let model = cyclic(rng.random_range(1..=5));
        let len = rng.random_range(2..=4);
        let run = |rng: &mut ChaCha8Rng| -> Result<(f64, f64)> {
            let l = random::complex(rng, &model, "L", len, 6, true)?;
            let n = random::complex(rng, &model, "N", len, 6, true)?;
            let tw = random::twist(rng, &l, &n)?;
            let m = CochainComplex::twisted_sum(&l, &n, &tw, "M")?;
            let dets = alternating_log_det_squares(&m, &opts)?
                - alternating_log_det_squares(&l, &opts)?
                - alternating_log_det_squares(&n, &opts)?;
            let (rm, rl, rn) = (m.torsion(&opts)?, l.torsion(&opts)?, n.torsion(&opts)?);
            if !(rm.weakly_acyclic && rl.weakly_acyclic && rn.weakly_acyclic) {
                return Err(Error::NotExact("a summand is not weakly acyclic".into()));
            }
            Ok((dets.abs(), (rm.real_log()? - rl.real_log()? - rn.real_log()?).abs()))
        };
        match run(&mut rng) {
            Ok((dets, tors)) => {
                t.check(|| format!("twisted sum {i}: determinants"), dets, 1e-10);
                t.check(|| format!("twisted sum {i}: torsion"), tors, 1e-10);
            }
            Err(e) => t.fail(format!("twisted sum {i}: {e}")),
        }
    }
    finish(8, "split lemma", start, None, &t, "|dlog|")
}

/// All eight suites with their fixed seeds.
pub fn run_all() -> Vec<Outcome> {
    vec![
        tensor_determinant(1),
        golden_determinants(),
        sum_formula(3),
        product_formula(),
        fibration_formula(),
        oracle_equivalence(6),
        well_definedness(7),
        split_lemma(8),
    ]
}
