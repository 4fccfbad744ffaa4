//! Randomized invariants. Each case draws a seed and builds its inputs with a
//! seeded generator, so failures shrink to a reproducible seed.

use std::sync::Arc;

use l2torsion::acceptance::{character, random_pushout};
use l2torsion::algebra::{AlgebraModel, FiniteGroupTable, FkOptions, GroupRingElement, Key};
use l2torsion::complex::CochainComplex;
use l2torsion::document::Document;
use l2torsion::formulas::{det_tensor_identity_check, verify_product, verify_sum};
use l2torsion::hilbmod::{HilbertianModule, Morphism};
use l2torsion::oracle::{mahler_refine, torsion_via_dense, torsion_via_laplacian};
use l2torsion::random;
use l2torsion::spaces::cw::product_index;
use l2torsion::spaces::{builtin_space, product_space, pushout_assemble, CoefficientSystem, EquivariantCWComplex, Group, Subcomplex};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cyclic(p: usize) -> Arc<AlgebraModel> {
    Arc::new(AlgebraModel::finite_group(FiniteGroupTable::cyclic(p).unwrap()))
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// `X_0 x {v}` inside `X_0 x Y`.
fn slice(x0: &EquivariantCWComplex, y: &EquivariantCWComplex, v: usize) -> Subcomplex {
    Subcomplex {
        cells: (0..x0.cells.len())
            .map(|k| (0..x0.cells[k]).map(|a| product_index(&x0.cells, &y.cells, k, a, 0, v)).collect())
            .collect(),
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn tensor_determinants_multiply(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FkOptions::default();
        let mut pick = || {
            let model = cyclic(rng.random_range(1..=4));
            let n = rng.random_range(1..=3);
            let m = HilbertianModule::free(model.clone(), n, "H");
            Morphism::new(m.clone(), m, random::invertible(&mut rng, &model, n)).unwrap()
        };
        let (a, b) = (pick(), pick());
        let r = det_tensor_identity_check(&a, &b, 1e-10, &opts).unwrap();
        prop_assert!(r.passed, "residual {}", r.residual);
    }

    #[test]
    fn torsion_agrees_with_both_oracles(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = cyclic(rng.random_range(1..=6));
        let len = rng.random_range(2..=4);
        let acyclic = rng.random_bool(0.5);
        let c = random::complex(&mut rng, &model, "C", len, 8, acyclic).unwrap();
        let main = c.torsion(&FkOptions::default()).unwrap().log_value;
        prop_assert!((main - torsion_via_laplacian(&c, 1e-8).unwrap()).abs() < 1e-8);
        prop_assert!((main - torsion_via_dense(&c).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn twisted_sums_multiply_torsion(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FkOptions::default();
        let model = cyclic(rng.random_range(1..=5));
        let len = rng.random_range(2..=4);
        let l = random::complex(&mut rng, &model, "L", len, 6, true).unwrap();
        let n = random::complex(&mut rng, &model, "N", len, 6, true).unwrap();
        let tw = random::twist(&mut rng, &l, &n).unwrap();
        let m = CochainComplex::twisted_sum(&l, &n, &tw, "M").unwrap();
        let (rm, rl, rn) = (m.torsion(&opts).unwrap(), l.torsion(&opts).unwrap(), n.torsion(&opts).unwrap());
        prop_assert!(rm.weakly_acyclic);
        prop_assert!((rm.log_value - rl.log_value - rn.log_value).abs() < 1e-10);
    }

    #[test]
    fn sum_formula_on_random_pushouts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = [2, 3, 5, 7][rng.random_range(0..4)];
        let po = random_pushout(&mut rng, p).unwrap();
        let opts = FkOptions::default();
        let r = verify_sum(&po, &CoefficientSystem::regular(&po.x.group).unwrap(), 0.3, 1e-8, &opts).unwrap();
        prop_assert!(r.all_passed(), "residual {}", r.residual);
        let r = verify_sum(&po, &character(&po.x.group, p).unwrap(), 0.0, 1e-8, &opts).unwrap();
        prop_assert!(r.all_passed(), "residual {}", r.residual);
    }

    #[test]
    fn sum_residual_is_symmetric_in_the_two_pieces(seed in any::<u64>(), k1 in 1usize..=2, k2 in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(2..=5);
        let group = Group::finite(FiniteGroupTable::cyclic(p).unwrap());
        let circle = l2torsion::spaces::builtin::lens(p, 1).unwrap().space;
        let x0 = EquivariantCWComplex::new("X0", group, circle.cells[..2].to_vec(), circle.boundaries[..1].to_vec()).unwrap();
        let (d1, d2) = (builtin_space("disk", &[k1.to_string()]).unwrap().space, builtin_space("disk", &[k2.to_string()]).unwrap().space);
        let (x1, x2) = (product_space(&x0, &d1).unwrap(), product_space(&x0, &d2).unwrap());
        let (j1, j2) = (slice(&x0, &d1, 0), slice(&x0, &d2, 0));
        let a = pushout_assemble(&x0, &x1, &j1, &x2, &j2.as_chain_map(&x0, &x2)).unwrap();
        let b = pushout_assemble(&x0, &x2, &j2, &x1, &j1.as_chain_map(&x0, &x1)).unwrap();
        let opts = FkOptions::default();
        let h = CoefficientSystem::regular(&a.x.group).unwrap();
        let (ra, rb) = (verify_sum(&a, &h, 0.0, 1e-8, &opts).unwrap(), verify_sum(&b, &h, 0.0, 1e-8, &opts).unwrap());
        prop_assert!(ra.passed && rb.passed);
        prop_assert!((ra.residual - rb.residual).abs() < 1e-12);
        prop_assert!((ra.lhs_log - rb.lhs_log).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn product_residual_is_symmetric(i in 0usize..5, j in 0usize..5) {
        let names: [(&str, &[&str]); 5] = [("point", &[]), ("sphere", &["1"]), ("sphere", &["2"]), ("lens", &["3", "1"]), ("circle_z", &[])];
        let get = |k: usize| builtin_space(names[k].0, &names[k].1.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap();
        let (a, b) = (get(i), get(j));
        let opts = FkOptions::default();
        let ab = verify_product(&a.space, &a.coefficients, &b.space, &b.coefficients, 1e-8, &opts).unwrap();
        let ba = verify_product(&b.space, &b.coefficients, &a.space, &a.coefficients, 1e-8, &opts).unwrap();
        prop_assert!(ab.passed && ba.passed);
        prop_assert!((ab.lhs_log - ba.lhs_log).abs() < 1e-8);
        prop_assert!((ab.residual - ba.residual).abs() < 1e-8);
    }

    /// `c prod (z - r_i)` has log Mahler measure `ln|c| + sum ln max(1, |r_i|)`.
    #[test]
    fn mahler_bounds_are_honest(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let torus = AlgebraModel::torus(1);
        let c = rng.random_range(0.5..2.0);
        let mut p = GroupRingElement::monomial(Key::monomial(vec![0]), Complex64::new(c, 0.0));
        let mut truth = f64::ln(c);
        for _ in 0..rng.random_range(1..=4) {
            let radius = if rng.random_bool(0.5) { rng.random_range(0.2..0.8) } else { rng.random_range(1.25..3.0) };
            let root = Complex64::from_polar(radius, rng.random_range(0.0..std::f64::consts::TAU));
            let mut factor = GroupRingElement::monomial(Key::monomial(vec![1]), Complex64::new(1.0, 0.0));
            factor.add_term(Key::monomial(vec![0]), -root);
            p = p.mul(&factor, &torus);
            truth += radius.max(1.0).ln();
        }
        let coarse = mahler_refine(&p, 1, 1e-6).unwrap();
        let fine = mahler_refine(&p, 1, 5e-7).unwrap();
        prop_assert!((coarse.value - truth).abs() <= coarse.bound + 1e-12, "{} vs {truth}, bound {}", coarse.value, coarse.bound);
        prop_assert!((fine.value - coarse.value).abs() <= coarse.bound + 1e-12);
    }

    #[test]
    fn complex_documents_round_trip_bit_for_bit(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = cyclic(rng.random_range(1..=5));
        let c = random::complex(&mut rng, &model, "C", 3, 8, false).unwrap();
        let text = Document::from_complex(&c).to_json();
        let back = Document::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        let opts = FkOptions::default();
        let (a, b) = (c.torsion(&opts).unwrap().log_value, back.complex().unwrap().torsion(&opts).unwrap().log_value);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
