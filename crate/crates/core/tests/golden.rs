//! Closed-form values across the library, each derived by hand or by an
//! independent dense computation.

use std::sync::Arc;

use l2torsion::algebra::{fk_det, vn_dim, AlgebraModel, FiniteGroupTable, FkOptions, GroupRingElement, GroupRingMatrix, Key};
use l2torsion::complex::CochainComplex;
use l2torsion::detline::{pushforward, rescale_inner_product, ses_iso, LineElement, LineExpr};
use l2torsion::formulas::{verify_product, verify_sum};
use l2torsion::hilbmod::{ExtendedObject, HilbertianModule, Morphism};
use l2torsion::oracle::{mahler_refine, torsion_via_laplacian};
use l2torsion::spaces::{builtin_space, l2_torsion, pushout_assemble, unimodularity_check, CoefficientSystem, GeneratorImage, Subcomplex};
use num_complex::Complex64;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn cyclic(p: usize) -> Arc<AlgebraModel> {
    Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(p).unwrap()))
}

fn scalars() -> Arc<AlgebraModel> {
    Arc::new(AlgebraModel::scalars())
}

fn t_minus_one(model: &Arc<AlgebraModel>, key: Key, zero: Key) -> GroupRingMatrix {
    let mut e = GroupRingElement::monomial(key, c(1.0));
    e.add_term(zero, c(-1.0));
    GroupRingMatrix::single(model.clone(), e).unwrap()
}

fn space(name: &str, params: &[&str]) -> l2torsion::spaces::BuiltinSpace {
    builtin_space(name, &params.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn traces_in_the_cyclic_group_of_order_three() {
    let m = cyclic(3);
    let mut x = GroupRingElement::one(&m);
    x.add_term(Key::group(1), c(1.0));
    assert!((x.mul(&x, &m).trace(&m) - c(1.0)).norm() < 1e-15);
    assert_eq!(GroupRingElement::monomial(Key::group(2), c(1.0)).trace(&m), c(0.0));
}

#[test]
fn realizing_e_plus_t() {
    let m = cyclic(2);
    let mut x = GroupRingElement::one(&m);
    x.add_term(Key::group(1), c(1.0));
    let r = GroupRingMatrix::single(m, x).unwrap().realize().at(&[]);
    assert!(r.iter().all(|v| (*v - c(1.0)).norm() < 1e-15));
}

#[test]
fn determinants_of_small_operators() {
    let opts = FkOptions::default();
    let z3 = cyclic(3);
    let d = fk_det(&t_minus_one(&z3, Key::group(1), Key::group(0)), &opts).unwrap();
    assert!((d.value() - 3f64.powf(1.0 / 3.0)).abs() < 1e-12);
    let two = GroupRingMatrix::scalar_identity(z3, 1, c(2.0));
    assert!((fk_det(&two, &opts).unwrap().value() - 2.0).abs() < 1e-12);
    let torus = Arc::new(AlgebraModel::torus(1));
    let mut e = GroupRingElement::monomial(Key::monomial(vec![1]), c(1.0));
    e.add_term(Key::monomial(vec![0]), c(-2.0));
    let d = fk_det(&GroupRingMatrix::single(torus, e).unwrap(), &opts).unwrap();
    assert!((d.value() - 2.0).abs() < 1e-8);
}

#[test]
fn von_neumann_dimensions() {
    let m = cyclic(2);
    let mut p = GroupRingElement::scalar(&m, c(0.5));
    p.add_term(Key::group(1), c(0.5));
    assert!((vn_dim(&GroupRingMatrix::single(m.clone(), p).unwrap(), 1e-12).unwrap() - 0.5).abs() < 1e-15);
    assert!((vn_dim(&GroupRingMatrix::identity(m, 3), 1e-12).unwrap() - 3.0).abs() < 1e-15);
}

#[test]
fn the_circle_operator_has_dense_image() {
    let torus = Arc::new(AlgebraModel::torus(1));
    let h = HilbertianModule::free(torus.clone(), 1, "H");
    let a = Morphism::new(h.clone(), h, t_minus_one(&torus, Key::monomial(vec![1]), Key::monomial(vec![0]))).unwrap();
    let tp = ExtendedObject::new(a).tp_decompose(&FkOptions::default()).unwrap();
    assert!(tp.projective_dim.abs() < 1e-12);
    assert!(!tp.torsion_trivial);
}

#[test]
fn determinant_line_scalars() {
    let opts = FkOptions::default();
    let a = HilbertianModule::free(scalars(), 1, "A");
    let four = Morphism::new(a.clone(), a.clone(), GroupRingMatrix::scalar_identity(scalars(), 1, c(4.0))).unwrap();
    let e = rescale_inner_product(&LineElement::canonical(LineExpr::atom("A")), &four, &opts).unwrap();
    assert!((e.scalar() - 0.5).abs() < 1e-15);
    let five = Morphism::new(a.clone(), a.clone(), GroupRingMatrix::scalar_identity(scalars(), 1, c(-5.0))).unwrap();
    assert!((pushforward(&five, &opts).unwrap().factor() - 5.0).abs() < 1e-14);
    // 0 -> A -> A + A -> A -> 0 by the diagonal and the difference
    let aa = HilbertianModule::free(scalars(), 2, "AA");
    let col = GroupRingMatrix::from_rows(scalars(), vec![vec![GroupRingElement::scalar(&scalars(), c(1.0))]; 2]).unwrap();
    let row = GroupRingMatrix::from_rows(
        scalars(),
        vec![vec![GroupRingElement::scalar(&scalars(), c(1.0)), GroupRingElement::scalar(&scalars(), c(-1.0))]],
    )
    .unwrap();
    let alpha = Morphism::new(a.clone(), aa.clone(), col).unwrap();
    let beta = Morphism::new(aa, a, row).unwrap();
    let iso = ses_iso(&alpha, &beta, &opts).unwrap();
    assert!((iso.factor() - 1.0).abs() < 1e-14, "{}", iso.factor());
}

#[test]
fn torsion_of_multiplication_by_three() {
    let m = GroupRingMatrix::scalar_identity(scalars(), 1, c(3.0));
    let cx = CochainComplex::from_matrices(scalars(), "C", 0, &[1, 1], vec![m]).unwrap();
    let r = cx.torsion(&FkOptions::default()).unwrap();
    assert!((r.real_value().unwrap() - 3.0).abs() < 1e-14);
    assert!((torsion_via_laplacian(&cx, 1e-10).unwrap() - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn scalar_twisted_sums_have_torsion_six() {
    let opts = FkOptions::default();
    let one = |x: f64| GroupRingMatrix::scalar_identity(scalars(), 1, c(x));
    let l = CochainComplex::from_matrices(scalars(), "L", 0, &[1, 1], vec![one(2.0)]).unwrap();
    let n = CochainComplex::from_matrices(scalars(), "N", 0, &[1, 1], vec![one(3.0)]).unwrap();
    for twist in [0.0, 1.0, -7.5] {
        let m = CochainComplex::twisted_sum(&l, &n, &[one(twist)], "M").unwrap();
        assert!((m.torsion(&opts).unwrap().real_value().unwrap() - 6.0).abs() < 1e-12);
    }
}

#[test]
fn lens_space_betti_numbers() {
    let b = space("lens", &["5", "1"]);
    let r = l2_torsion(&b.space, &b.coefficients, 0.0, &FkOptions::default()).unwrap();
    let expected = [0.2, 0.0, 0.0, 0.2];
    assert!(r.betti.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12), "{:?}", r.betti);
}

#[test]
fn euler_characteristics() {
    assert_eq!(space("point", &[]).space.euler_char(), 1);
    assert_eq!(space("sphere", &["2"]).space.euler_char(), 2);
    assert_eq!(space("klein_bottle", &[]).space.euler_char(), 0);
    assert_eq!(space("klein_bottle", &[]).space.cells, vec![1, 2, 1]);
}

#[test]
fn unimodularity() {
    assert!(unimodularity_check(&space("lens", &["3", "1"]).coefficients).unimodular);
    assert!(unimodularity_check(&space("torus", &["2"]).coefficients).unimodular);
    let circle = space("circle_z", &[]);
    let scaled = CoefficientSystem::new(
        circle.space.group.clone(),
        circle.coefficients.target().clone(),
        vec![GeneratorImage { scale: c(2.0), key: Key::monomial(vec![1]) }],
    )
    .unwrap();
    assert!(!unimodularity_check(&scaled).unimodular);
}

#[test]
fn basic_torsions() {
    let opts = FkOptions::default();
    for (name, params) in [("point", vec![]), ("circle_z", vec![]), ("sphere", vec!["2"])] {
        let b = space(name, &params);
        let r = l2_torsion(&b.space, &b.coefficients, 0.0, &opts).unwrap();
        assert!(r.log_value.abs() < 1e-8, "{name}: {}", r.log_value);
    }
}

#[test]
fn gluing_along_all_of_x1_gives_x2() {
    let opts = FkOptions::default();
    let d = space("disk", &["2"]).space;
    let j = Subcomplex::whole(&d);
    let p = pushout_assemble(&d, &d, &j, &d, &j.as_chain_map(&d, &d)).unwrap();
    assert_eq!((&p.x.cells, &p.x.boundaries), (&d.cells, &d.boundaries));
    let r = verify_sum(&p, &CoefficientSystem::trivial(&d.group), 0.0, 1e-8, &opts).unwrap();
    // zero up to rounding in the sequence correction
    assert!(r.residual < 1e-14, "{}", r.residual);
}

#[test]
fn circle_times_sphere() {
    let (a, b) = (space("circle_z", &[]), space("sphere", &["2"]));
    let r = verify_product(&a.space, &a.coefficients, &b.space, &b.coefficients, 1e-8, &FkOptions::default()).unwrap();
    assert!(r.passed && r.lhs_log.abs() < 1e-8);
}

/// `m(1 + z + w) = (3 sqrt 3 / 4 pi) L(chi_{-3}, 2)`.
#[test]
fn mahler_measure_of_one_plus_z_plus_w() {
    let exact = 3.0 * 3f64.sqrt() / (4.0 * std::f64::consts::PI) * 0.781_302_412_896_486_3;
    let torus = Arc::new(AlgebraModel::torus(2));
    let p = GroupRingElement::from_terms([
        (Key::monomial(vec![0, 0]), c(1.0)),
        (Key::monomial(vec![1, 0]), c(1.0)),
        (Key::monomial(vec![0, 1]), c(1.0)),
    ]);
    for tol in [1e-6, 1e-7, 1e-8] {
        let r = mahler_refine(&p, 2, tol).unwrap();
        assert!((r.value - exact).abs() <= r.bound, "{tol}: {r:?}");
    }
    let opts = FkOptions::default().with_tolerance(1e-7);
    let d = fk_det(&GroupRingMatrix::single(torus, p).unwrap(), &opts).unwrap();
    assert!((d.log_det - exact).abs() <= d.error, "{d:?}");
}
