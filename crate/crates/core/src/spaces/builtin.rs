//! A small corpus of spaces given by equivariant chain data, each with a
//! default coefficient system.

use std::collections::HashMap;
use std::sync::Arc;

use super::coeff::{CoefficientSystem, GeneratorImage};
use super::cw::{product_space, Bundle, ChainMap, EquivariantCWComplex, Transport};
use super::group::{Group, IntElement, IntMatrix, Word};
use crate::algebra::{AlgebraModel, FiniteGroupTable, Key, MAX_GROUP_ORDER};
use crate::error::{Error, Result};

/// A space together with the coefficients it is usually paired with.
#[derive(Clone, Debug)]
pub struct BuiltinSpace {
    pub space: EquivariantCWComplex,
    pub coefficients: CoefficientSystem,
}

impl BuiltinSpace {
    /// Checks `dd = 0` exactly in the coefficient target. This is the only
    /// check available for presented groups.
    fn checked(space: EquivariantCWComplex, coefficients: CoefficientSystem) -> Result<Self> {
        match space.boundaries_vanish(&|w| coefficients.exact_key(w)) {
            Some(true) => Ok(BuiltinSpace { space, coefficients }),
            _ => Err(Error::NotComplex(format!("{}: boundary of a boundary is not zero", space.name))),
        }
    }

    fn trivial(space: EquivariantCWComplex) -> Self {
        let coefficients = CoefficientSystem::trivial(&space.group);
        BuiltinSpace { space, coefficients }
    }
}

fn binomial(t: Word, sign: i64) -> IntElement {
    IntElement::from_terms(vec![(t, sign), (Word::identity(), -sign)])
}

fn single(e: IntElement) -> IntMatrix {
    IntMatrix { rows: 1, cols: 1, entries: vec![e] }
}

pub fn point() -> EquivariantCWComplex {
    EquivariantCWComplex::new("point", Group::trivial(), vec![1], Vec::new()).expect("point is a complex")
}

/// `S^n` with trivial group: two points for `n = 0`, otherwise one cell in
/// degrees 0 and `n`.
pub fn sphere(n: usize) -> Result<BuiltinSpace> {
    let name = format!("S{n}");
    let space = if n == 0 {
        EquivariantCWComplex::new(name, Group::trivial(), vec![2], Vec::new())?
    } else {
        let mut cells = vec![0; n + 1];
        cells[0] = 1;
        cells[n] = 1;
        let boundaries = (1..=n).map(|k| IntMatrix::zeros(cells[k - 1], cells[k])).collect();
        EquivariantCWComplex::new(name, Group::trivial(), cells, boundaries)?
    };
    Ok(BuiltinSpace::trivial(space))
}

/// `D^n`: `S^{n-1}` plus a top cell bounding it.
pub fn disk(n: usize) -> Result<BuiltinSpace> {
    let name = format!("D{n}");
    let space = match n {
        0 => point().renamed(name),
        1 => EquivariantCWComplex::new(name, Group::trivial(), vec![2, 1], vec![IntMatrix::from_integers(2, 1, &[-1, 1])])?,
        _ => {
            let s = sphere(n - 1)?.space;
            let mut cells = s.cells.clone();
            cells.push(1);
            let mut boundaries = s.boundaries.clone();
            boundaries.push(IntMatrix::from_integers(1, 1, &[1]));
            EquivariantCWComplex::new(name, Group::trivial(), cells, boundaries)?
        }
    };
    Ok(BuiltinSpace::trivial(space))
}

/// The circle with `pi = Z`: `d e = (t - 1) v`.
pub fn circle_z() -> BuiltinSpace {
    let group = Group::free_abelian(1);
    let space = EquivariantCWComplex::new("circle_Z", group.clone(), vec![1, 1], vec![single(binomial(Word::gen(0), 1))])
        .expect("circle is a complex");
    let coefficients = CoefficientSystem::regular(&group).expect("Z has normal forms");
    BuiltinSpace { space, coefficients }
}

/// `T^k` over `Z^k`: the Koszul complex, cells indexed by subsets
/// `S = {i_1 < ... < i_n}` with `d e_S = sum_j (-1)^{j-1} (t_{i_j} - 1) e_{S - i_j}`.
/// Cells are ordered as in the iterated product `S^1 x ... x S^1`.
pub fn torus(k: usize) -> Result<BuiltinSpace> {
    if k == 0 {
        return Ok(BuiltinSpace::trivial(point().renamed("T0")));
    }
    if k > 6 {
        return Err(Error::BadParams(format!("torus({k}): at most 6 circle factors")));
    }
    let group = Group::free_abelian(k);
    let mut by_degree: Vec<Vec<u32>> = vec![Vec::new(); k + 1];
    for mask in 0u32..(1 << k) {
        by_degree[mask.count_ones() as usize].push(mask);
    }
    // product order: the last factor varies slowest, a missing factor first
    let sort_key = |m: &u32| (0..k).rev().map(|i| (m >> i) & 1 == 0).collect::<Vec<bool>>();
    for cells in &mut by_degree {
        cells.sort_by_key(sort_key);
    }
    let index: HashMap<u32, usize> =
        by_degree.iter().flat_map(|cells| cells.iter().enumerate().map(|(i, &m)| (m, i))).collect();
    let mut boundaries = Vec::with_capacity(k);
    for n in 1..=k {
        let mut b = IntMatrix::zeros(by_degree[n - 1].len(), by_degree[n].len());
        for (col, &mask) in by_degree[n].iter().enumerate() {
            let members = (0..k).filter(|i| mask >> i & 1 == 1);
            for (j, i) in members.enumerate() {
                let sign = if j % 2 == 0 { 1 } else { -1 };
                b.set(index[&(mask & !(1 << i))], col, binomial(Word::gen(i), sign));
            }
        }
        boundaries.push(b);
    }
    let cells = by_degree.iter().map(Vec::len).collect();
    let space = EquivariantCWComplex::new(format!("T{k}"), group.clone(), cells, boundaries)?;
    Ok(BuiltinSpace { space, coefficients: CoefficientSystem::regular(&group)? })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// `L(p, q)` over `Z/p`: `d_1 = t - 1`, `d_2 = sum_{j<p} t^j`, `d_3 = t^q - 1`.
pub fn lens(p: usize, q: usize) -> Result<BuiltinSpace> {
    if !(2..=MAX_GROUP_ORDER).contains(&p) || q == 0 || q >= p || gcd(p, q) != 1 {
        return Err(Error::BadParams(format!("lens({p}, {q}) needs p >= 2 and 0 < q < p coprime to p")));
    }
    let group = Group::finite(FiniteGroupTable::cyclic(p)?);
    let norm = IntElement::from_terms((0..p).map(|j| (Word::power(1, j as i64), 1)).collect());
    let boundaries = vec![single(binomial(Word::gen(1), 1)), single(norm), single(binomial(Word::gen(q), 1))];
    let space = EquivariantCWComplex::new(format!("L({p},{q})"), group.clone(), vec![1; 4], boundaries)?;
    Ok(BuiltinSpace { space, coefficients: CoefficientSystem::regular(&group)? })
}

/// The circle `d f1 = (a - 1) f0` over a group whose generator 0 is `a`.
fn fiber_circle(group: &Group) -> Result<EquivariantCWComplex> {
    EquivariantCWComplex::new("S1", group.clone(), vec![1, 1], vec![single(binomial(Word::gen(0), 1))])
}

fn base_circle() -> EquivariantCWComplex {
    EquivariantCWComplex::new("S1", Group::trivial(), vec![1, 1], vec![IntMatrix::zeros(1, 1)]).expect("circle is a complex")
}

/// The bundle over the circle with monodromy `m`, a chain map of the fiber
/// over its own group. Its total space is the mapping torus of `m`, glued by
/// the transport `m - id`.
pub fn circle_bundle(fiber: EquivariantCWComplex, monodromy: &ChainMap) -> Result<Bundle> {
    let map = monodromy.sub(&ChainMap::identity(&fiber))?;
    Bundle::new(base_circle(), fiber, vec![Transport { dim: 1, cell: 0, face: 0, map }])
}

fn word_matrix(rows: usize, cols: usize, entries: Vec<Vec<(Word, i64)>>) -> IntMatrix {
    IntMatrix { rows, cols, entries: entries.into_iter().map(IntElement::from_terms).collect() }
}

/// The mapping torus of `z -> z^s` on the circle, `s = +-1`, over
/// `<a, t | t a t^-1 a^-s>`. For `s = 1` this is the 2-torus over `Z^2` with
/// `l^2(Z^2)`; for `s = -1` the Klein bottle with coefficients through
/// `a -> r`, `t -> s` in the dihedral group of order 8.
pub fn mapping_torus(s: i64) -> Result<BuiltinSpace> {
    let (a, t) = (Word::gen(0), Word::gen(1));
    let (group, m1) = match s {
        1 => (Group::free_abelian(2), t.clone()),
        -1 => (Group::presented(&["a", "t"], vec![Word::from_pairs(&[(1, 1), (0, 1), (1, -1), (0, 1)])]), t.mul(&a.inverse())),
        _ => return Err(Error::BadParams(format!("mapping_torus({s}): the degree must be 1 or -1"))),
    };
    let fiber = fiber_circle(&group)?;
    let monodromy = ChainMap { matrices: vec![word_matrix(1, 1, vec![vec![(t, 1)]]), word_matrix(1, 1, vec![vec![(m1, s)]])] };
    let space = circle_bundle(fiber, &monodromy)?.total_space()?.renamed(format!("mapping_torus({s})"));
    let coefficients = if s == 1 { CoefficientSystem::regular(&group)? } else { dihedral_coefficients(&group)? };
    BuiltinSpace::checked(space, coefficients)
}

fn dihedral_coefficients(group: &Group) -> Result<CoefficientSystem> {
    let target = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::dihedral(4)?));
    CoefficientSystem::new(group.clone(), target, vec![GeneratorImage::key(Key::group(1)), GeneratorImage::key(Key::group(4))])
}

/// The Klein bottle over `<a, b | b a b^-1 a>`, cells `(1, 2, 1)`, with
/// coefficients in `l^2(D_4)` through `a -> r`, `b -> s`.
pub fn klein_bottle() -> Result<BuiltinSpace> {
    let b = mapping_torus(-1)?;
    let group = Group::presented(&["a", "b"], vec![Word::from_pairs(&[(1, 1), (0, 1), (1, -1), (0, 1)])]);
    let space = EquivariantCWComplex { name: "klein_bottle".into(), group: group.clone(), ..b.space };
    BuiltinSpace::checked(space, dihedral_coefficients(&group)?)
}

/// The Klein bottle as the bundle `S^1 -> K -> S^1`, for the fibration formula.
pub fn klein_bundle() -> Result<(Bundle, CoefficientSystem)> {
    let k = klein_bottle()?;
    let (a, b) = (Word::gen(0), Word::gen(1));
    let fiber = fiber_circle(&k.space.group)?;
    let monodromy = ChainMap {
        matrices: vec![word_matrix(1, 1, vec![vec![(b.clone(), 1)]]), word_matrix(1, 1, vec![vec![(b.mul(&a.inverse()), -1)]])],
    };
    Ok((circle_bundle(fiber, &monodromy)?, k.coefficients))
}

/// The Heisenberg nilmanifold as the mapping torus of the unipotent map of
/// `T^2`, over `<x, y, t | [x, y], [t, x], t x y t^-1 y^-1>`. Coefficients
/// go to the Heisenberg group mod `p` by `x -> C^-1`, `y -> B`, `t -> A`.
pub fn heisenberg_bundle(p: usize) -> Result<(Bundle, CoefficientSystem)> {
    if !(2..=16).contains(&p) {
        return Err(Error::BadParams(format!("heisenberg({p}): p must lie in 2..=16")));
    }
    let group = Group::presented(
        &["x", "y", "t"],
        vec![
            Word::from_pairs(&[(0, 1), (1, 1), (0, -1), (1, -1)]),
            Word::from_pairs(&[(2, 1), (0, 1), (2, -1), (0, -1)]),
            Word::from_pairs(&[(2, 1), (0, 1), (1, 1), (2, -1), (1, -1)]),
        ],
    );
    let target = Arc::new(AlgebraModel::finite_group(FiniteGroupTable::heisenberg_mod(p)?));
    let h = CoefficientSystem::new(
        group.clone(),
        target,
        vec![GeneratorImage::key(Key::group(p * p * (p - 1))), GeneratorImage::key(Key::group(p)), GeneratorImage::key(Key::group(1))],
    )?;
    let (x, y, t) = (Word::gen(0), Word::gen(1), Word::gen(2));
    let one = Word::identity();
    let fiber = EquivariantCWComplex::new(
        "T2",
        group.clone(),
        vec![1, 2, 1],
        vec![
            word_matrix(1, 2, vec![vec![(x.clone(), 1), (one.clone(), -1)], vec![(y.clone(), 1), (one.clone(), -1)]]),
            word_matrix(2, 1, vec![vec![(one.clone(), 1), (y, -1)], vec![(x.clone(), 1), (one, -1)]]),
        ],
    )?;
    let tx = t.mul(&x);
    let monodromy = ChainMap {
        matrices: vec![
            word_matrix(1, 1, vec![vec![(t.clone(), 1)]]),
            word_matrix(2, 2, vec![vec![(t.clone(), 1)], vec![(t, 1)], vec![], vec![(tx.clone(), 1)]]),
            word_matrix(1, 1, vec![vec![(tx, 1)]]),
        ],
    };
    Ok((circle_bundle(fiber, &monodromy)?, h))
}

pub fn heisenberg(p: usize) -> Result<BuiltinSpace> {
    let (bundle, h) = heisenberg_bundle(p)?;
    BuiltinSpace::checked(bundle.total_space()?.renamed(format!("heisenberg({p})")), h)
}

/// `X_1 x X_2` with coefficients `H_1 (x) H_2`.
pub fn product(a: &BuiltinSpace, b: &BuiltinSpace) -> Result<BuiltinSpace> {
    let space = product_space(&a.space, &b.space)?;
    let (_, coefficients) = CoefficientSystem::product(&a.coefficients, &b.coefficients)?;
    Ok(BuiltinSpace { space, coefficients })
}

fn parse(name: &str, params: &[String], i: usize) -> Result<usize> {
    let p = params.get(i).ok_or_else(|| Error::BadParams(format!("{name}: missing parameter {}", i + 1)))?;
    p.parse().map_err(|_| Error::BadParams(format!("{name}: {p:?} is not a non-negative integer")))
}

fn arity(name: &str, params: &[String], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(Error::BadParams(format!("{name} takes {n} parameter(s), got {}", params.len())));
    }
    Ok(())
}

/// Looks a space up by name. `product` takes two space descriptions
/// separated by the word `x`, as in `product lens 3 1 x circle_z`.
pub fn builtin_space(name: &str, params: &[String]) -> Result<BuiltinSpace> {
    match name {
        "point" => {
            arity(name, params, 0)?;
            Ok(BuiltinSpace::trivial(point()))
        }
        "sphere" => {
            arity(name, params, 1)?;
            sphere(parse(name, params, 0)?)
        }
        "disk" => {
            arity(name, params, 1)?;
            disk(parse(name, params, 0)?)
        }
        "circle_z" | "circle_Z" | "circle" => {
            arity(name, params, 0)?;
            Ok(circle_z())
        }
        "torus" => {
            arity(name, params, 1)?;
            torus(parse(name, params, 0)?)
        }
        "lens" => {
            arity(name, params, 2)?;
            lens(parse(name, params, 0)?, parse(name, params, 1)?)
        }
        "klein_bottle" | "klein" => {
            arity(name, params, 0)?;
            klein_bottle()
        }
        "mapping_torus" => {
            arity(name, params, 1)?;
            let s: i64 = params[0].parse().map_err(|_| Error::BadParams(format!("mapping_torus: {:?} is not 1 or -1", params[0])))?;
            mapping_torus(s)
        }
        "heisenberg" => match params.len() {
            0 => heisenberg(3),
            1 => heisenberg(parse(name, params, 0)?),
            _ => Err(Error::BadParams("heisenberg takes at most one parameter".into())),
        },
        "product" => {
            let sep = params
                .iter()
                .position(|p| p == "x")
                .ok_or_else(|| Error::BadParams("product: separate the two factors by `x`".into()))?;
            let (left, right) = (&params[..sep], &params[sep + 1..]);
            if left.is_empty() || right.is_empty() {
                return Err(Error::BadParams("product: both factors must be named".into()));
            }
            let a = builtin_space(&left[0], &left[1..])?;
            let b = builtin_space(&right[0], &right[1..])?;
            product(&a, &b)
        }
        _ => Err(Error::UnknownSpace(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sphere_two_has_zero_boundaries() {
        let s = sphere(2).unwrap().space;
        assert_eq!(s.cells, vec![1, 0, 1]);
        assert!(s.boundaries.iter().all(IntMatrix::is_zero));
        assert_eq!(s.euler_char(), 2);
    }

    #[test]
    fn disks_are_contractible() {
        for n in 0..5 {
            assert_eq!(disk(n).unwrap().space.euler_char(), 1);
        }
    }

    #[test]
    fn three_torus_matches_the_iterated_product() {
        let c = circle_z();
        let t2 = product(&c, &c).unwrap();
        let t3 = product(&t2, &c).unwrap();
        let direct = torus(3).unwrap();
        assert_eq!(direct.space.cells, vec![1, 3, 3, 1]);
        assert_eq!(direct.space.boundaries, t3.space.boundaries);
        assert_eq!(direct.space.group, t3.space.group);
    }

    #[test]
    fn lens_parameters_are_checked() {
        assert!(lens(7, 3).is_ok());
        for (p, q) in [(1, 0), (6, 2), (5, 5), (4, 0)] {
            assert!(matches!(lens(p, q), Err(Error::BadParams(_))));
        }
    }

    #[test]
    fn klein_bottle_cells() {
        let k = klein_bottle().unwrap();
        assert_eq!(k.space.cells, vec![1, 2, 1]);
        assert_eq!(k.space.euler_char(), 0);
        assert_eq!(k.coefficients.target().group_order(), 8);
    }

    #[test]
    fn a_wrong_monodromy_is_rejected() {
        // z -> z^{-1} glued by t alone is not a chain map in the quotient
        let group = Group::presented(&["a", "t"], vec![Word::from_pairs(&[(1, 1), (0, 1), (1, -1), (0, 1)])]);
        let fiber = fiber_circle(&group).unwrap();
        let m = ChainMap { matrices: vec![word_matrix(1, 1, vec![vec![(Word::gen(1), 1)]]), word_matrix(1, 1, vec![vec![(Word::gen(1), 1)]])] };
        let space = circle_bundle(fiber, &m).unwrap().total_space().unwrap();
        assert!(matches!(BuiltinSpace::checked(space, dihedral_coefficients(&group).unwrap()), Err(Error::NotComplex(_))));
    }

    #[test]
    fn heisenberg_is_a_complex() {
        for p in [2, 3] {
            let h = heisenberg(p).unwrap();
            assert_eq!(h.space.cells, vec![1, 3, 3, 1]);
        }
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(builtin_space("lens", &args(&["5", "2"])).unwrap().space.cells, vec![1; 4]);
        let p = builtin_space("product", &args(&["lens", "3", "1", "x", "circle_z"])).unwrap();
        assert_eq!(p.space.cells, vec![1, 2, 2, 2, 1]);
        assert!(matches!(builtin_space("moebius", &[]), Err(Error::UnknownSpace(_))));
        assert!(matches!(builtin_space("sphere", &args(&["two"])), Err(Error::BadParams(_))));
        assert!(matches!(builtin_space("mapping_torus", &args(&["2"])), Err(Error::BadParams(_))));
    }
}
