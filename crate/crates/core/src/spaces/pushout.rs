//! Equivariant pushouts `X = X_1 u_{X_0} X_2` and their Mayer-Vietoris
//! sequences.

use super::coeff::{cochain_with_coefficients, CoefficientSystem};
use super::cw::{ChainMap, EquivariantCWComplex};
use super::group::{IntElement, IntMatrix, Word};
use crate::algebra::{GroupRingMatrix, Key};
use crate::complex::{CochainComplex, ShortExactSequence};
use crate::error::{Error, Result};

/// An inclusion `X_0 -> X_1` of a subcomplex: `cells[k][a]` is the index in
/// `X_1` of the `a`-th cell of `X_0` in degree `k`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Subcomplex {
    pub cells: Vec<Vec<usize>>,
}

impl Subcomplex {
    /// The identity inclusion of `x` into itself.
    pub fn whole(x: &EquivariantCWComplex) -> Self {
        Subcomplex { cells: x.cells.iter().map(|&n| (0..n).collect()).collect() }
    }

    pub fn as_chain_map(&self, x0: &EquivariantCWComplex, x1: &EquivariantCWComplex) -> ChainMap {
        ChainMap {
            matrices: (0..x0.cells.len())
                .map(|k| {
                    let mut m = IntMatrix::zeros(x1.cells.get(k).copied().unwrap_or(0), x0.cells[k]);
                    for (a, &c) in self.cells[k].iter().enumerate() {
                        m.set(c, a, IntElement::one());
                    }
                    m
                })
                .collect(),
        }
    }
}

/// The glued space with its structure maps `j_1, j_2` out of `X_0` and
/// `i_1, i_2` into `X`; `i_1 j_1 = i_2 j_2`.
#[derive(Clone, Debug)]
pub struct Pushout {
    pub x0: EquivariantCWComplex,
    pub x1: EquivariantCWComplex,
    pub x2: EquivariantCWComplex,
    pub x: EquivariantCWComplex,
    pub j1: ChainMap,
    pub j2: ChainMap,
    pub i1: ChainMap,
    pub i2: ChainMap,
}

fn cells_at(x: &EquivariantCWComplex, k: usize) -> usize {
    x.cells.get(k).copied().unwrap_or(0)
}

/// Glues `X_1` to `X_2` along `X_0`. The cells of `X` in each degree are those
/// of `X_2` followed by the cells of `X_1` outside `X_0`.
pub fn pushout_assemble(
    x0: &EquivariantCWComplex,
    x1: &EquivariantCWComplex,
    j1: &Subcomplex,
    x2: &EquivariantCWComplex,
    j2: &ChainMap,
) -> Result<Pushout> {
    if x0.group != x1.group || x0.group != x2.group {
        return Err(Error::ShapeMismatch("pushout of complexes over different groups".into()));
    }
    let key = |w: &Word| x0.group.normal_form(w);
    let mut new_cells = check_subcomplex(x0, x1, j1)?;
    let j1_map = j1.as_chain_map(x0, x1);
    if let Some(false) = j1_map.check(x0, x1, &key).map_err(|e| Error::NotSubcomplex(e.to_string()))? {
        return Err(Error::NotSubcomplex("boundaries do not restrict to the subcomplex".into()));
    }
    if let Some(false) = j2.check(x0, x2, &key)? {
        return Err(Error::NotCellular("the attaching map does not commute with the boundary".into()));
    }

    let top = x1.dim().max(x2.dim());
    new_cells.resize(top + 1, Vec::new());
    let cells: Vec<usize> = (0..=top).map(|k| cells_at(x2, k) + new_cells[k].len()).collect();
    // i1 in every degree: X0 cells go where j2 sends them, new cells to their slot
    let i1: Vec<IntMatrix> = (0..=top)
        .map(|k| {
            let mut m = IntMatrix::zeros(cells[k], cells_at(x1, k));
            if k < x0.cells.len() {
                for (a, &c) in j1.cells[k].iter().enumerate() {
                    for r in 0..cells_at(x2, k) {
                        m.set(r, c, j2.matrices[k].get(r, a).clone());
                    }
                }
            }
            for (slot, &c) in new_cells[k].iter().enumerate() {
                m.set(cells_at(x2, k) + slot, c, IntElement::one());
            }
            m
        })
        .collect();
    let i2: Vec<IntMatrix> = (0..=top)
        .map(|k| {
            let mut m = IntMatrix::zeros(cells[k], cells_at(x2, k));
            for c in 0..cells_at(x2, k) {
                m.set(c, c, IntElement::one());
            }
            m
        })
        .collect();
    let mut boundaries = Vec::with_capacity(top);
    for k in 1..=top {
        let mut b = IntMatrix::zeros(cells[k - 1], cells[k]);
        for c in 0..cells_at(x2, k) {
            for r in 0..cells_at(x2, k - 1) {
                b.set(r, c, x2.boundary(k).get(r, c).clone());
            }
        }
        if !new_cells[k].is_empty() {
            // d i1(c) = i1(d c)
            let image = x1.boundary(k).then(&i1[k - 1])?;
            for (slot, &c) in new_cells[k].iter().enumerate() {
                for r in 0..cells[k - 1] {
                    b.set(r, cells_at(x2, k) + slot, image.get(r, c).clone());
                }
            }
        }
        boundaries.push(b);
    }
    let name = format!("{}+{}", x1.name, x2.name);
    let x = EquivariantCWComplex::new(name, x2.group.clone(), cells, boundaries)?;
    let trim = |ms: Vec<IntMatrix>, n: usize| ChainMap { matrices: ms.into_iter().take(n).collect() };
    Ok(Pushout {
        x0: x0.clone(),
        x1: x1.clone(),
        x2: x2.clone(),
        j1: j1_map,
        j2: j2.clone(),
        i1: trim(i1, x1.cells.len()),
        i2: trim(i2, x2.cells.len()),
        x,
    })
}

/// Injectivity and closure under the boundary; returns the cells of `X_1`
/// outside `X_0`, per degree up to the top degree.
fn check_subcomplex(x0: &EquivariantCWComplex, x1: &EquivariantCWComplex, j1: &Subcomplex) -> Result<Vec<Vec<usize>>> {
    if j1.cells.len() != x0.cells.len() || x0.cells.len() > x1.cells.len() {
        return Err(Error::NotSubcomplex("the inclusion needs one cell list per degree of X0".into()));
    }
    let mut inside: Vec<Vec<bool>> = x1.cells.iter().map(|&n| vec![false; n]).collect();
    for (k, list) in j1.cells.iter().enumerate() {
        if list.len() != x0.cells[k] {
            return Err(Error::NotSubcomplex(format!("degree {k}: {} images for {} cells", list.len(), x0.cells[k])));
        }
        for &c in list {
            if c >= x1.cells[k] || std::mem::replace(&mut inside[k][c], true) {
                return Err(Error::NotSubcomplex(format!("degree {k}: cell {c} is out of range or hit twice")));
            }
        }
    }
    for k in 1..x0.cells.len() {
        for &c in &j1.cells[k] {
            for r in 0..x1.cells[k - 1] {
                if !x1.boundary(k).get(r, c).is_zero() && !inside[k - 1][r] {
                    return Err(Error::NotSubcomplex(format!("the boundary of cell {c} in degree {k} leaves the subcomplex")));
                }
            }
        }
    }
    Ok((0..x1.cells.len()).map(|k| (0..x1.cells[k]).filter(|&c| !inside[k][c]).collect()).collect())
}

/// Cochains of a chain map, `phi(F)^T (x) I_m`, padded with empty blocks up to
/// `len` degrees.
fn cochain_maps(h: &CoefficientSystem, f: &ChainMap, source: &EquivariantCWComplex, target: &EquivariantCWComplex, len: usize) -> Vec<GroupRingMatrix> {
    let m = h.multiplicity();
    (0..len)
        .map(|k| match f.matrices.get(k) {
            Some(mat) => h.cochain_matrix(mat),
            None => GroupRingMatrix::zeros(h.target().clone(), m * cells_at(source, k), m * cells_at(target, k)),
        })
        .collect()
}

/// The cochain complexes of the four spaces, padded to a common range.
pub struct MayerVietoris {
    pub ses: ShortExactSequence,
    pub x: CochainComplex,
    pub x0: CochainComplex,
    pub x1: CochainComplex,
    pub x2: CochainComplex,
}

/// `0 -> C^*(X) -> C^*(X_1) + C^*(X_2) -> C^*(X_0) -> 0` with maps
/// `(i_1^*, i_2^*)` and `j_1^* - j_2^*`.
pub fn mayer_vietoris(p: &Pushout, h: &CoefficientSystem) -> Result<MayerVietoris> {
    let top = p.x.dim() as i64;
    let pad = |x: &EquivariantCWComplex| -> Result<CochainComplex> { cochain_with_coefficients(x, h)?.pad(0, top) };
    let (cx, c0, c1, c2) = (pad(&p.x)?, pad(&p.x0)?, pad(&p.x1)?, pad(&p.x2)?);
    let len = top as usize + 1;
    let i1 = cochain_maps(h, &p.i1, &p.x1, &p.x, len);
    let i2 = cochain_maps(h, &p.i2, &p.x2, &p.x, len);
    let j1 = cochain_maps(h, &p.j1, &p.x0, &p.x1, len);
    let j2 = cochain_maps(h, &p.j2, &p.x0, &p.x2, len);
    let mut alpha = Vec::with_capacity(len);
    let mut beta = Vec::with_capacity(len);
    for k in 0..len {
        alpha.push(i1[k].vstack(&i2[k])?);
        beta.push(j1[k].hstack(&j2[k].scale(num_complex::Complex64::new(-1.0, 0.0)))?);
    }
    let m = c1.direct_sum(&c2, format!("{}+{}", p.x1.name, p.x2.name))?;
    let ses = ShortExactSequence { l: cx.clone(), m, n: c0.clone(), alpha, beta };
    ses.validate()?;
    Ok(MayerVietoris { ses, x: cx, x0: c0, x1: c1, x2: c2 })
}

/// Exact check that `j_1`, `i_1` and `i_2` are chain maps; `None` when some
/// word has no image under `key`.
pub fn exact_key_check(p: &Pushout, key: &impl Fn(&Word) -> Option<Key>) -> Result<Option<bool>> {
    let a = p.j1.check(&p.x0, &p.x1, key)?;
    let b = p.i1.check(&p.x1, &p.x, key)?;
    let c = p.i2.check(&p.x2, &p.x, key)?;
    Ok(match (a, b, c) {
        (Some(a), Some(b), Some(c)) => Some(a && b && c),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{FiniteGroupTable, FkOptions};
    use crate::spaces::builtin::{disk, sphere};
    use crate::spaces::group::Group;

    /// `S^2` as two disks glued along the equator.
    pub(crate) fn two_disks() -> Pushout {
        let d = disk(2).unwrap().space;
        let s1 = sphere(1).unwrap().space;
        let j = Subcomplex { cells: vec![vec![0], vec![0]] };
        pushout_assemble(&s1, &d, &j, &d, &j.as_chain_map(&s1, &d)).unwrap()
    }

    #[test]
    fn sphere_from_two_disks() {
        let p = two_disks();
        assert_eq!(p.x.cells, vec![1, 1, 2]);
        assert_eq!(p.x.euler_char(), 2);
        assert_eq!(exact_key_check(&p, &|w| p.x.group.normal_form(w)).unwrap(), Some(true));
    }

    #[test]
    fn gluing_along_everything_returns_x2() {
        let d = disk(2).unwrap().space;
        let x2 = sphere(2).unwrap().space;
        // collapse the boundary circle of the disk to the base point
        let mut j2 = ChainMap::zero(&d, &x2);
        j2.matrices[0].set(0, 0, IntElement::one());
        j2.matrices[2].set(0, 0, IntElement::one());
        let p = pushout_assemble(&d, &d, &Subcomplex::whole(&d), &x2, &j2).unwrap();
        assert_eq!(p.x.cells, x2.cells);
        assert_eq!(p.x.boundaries, x2.boundaries);
    }

    #[test]
    fn doubling_a_cyclic_circle() {
        let g = Group::finite(FiniteGroupTable::cyclic(3).unwrap());
        let t = IntElement::from_terms(vec![(Word::gen(1), 1), (Word::identity(), -1)]);
        let c = EquivariantCWComplex::new("C", g.clone(), vec![1, 1], vec![IntMatrix { rows: 1, cols: 1, entries: vec![t] }]).unwrap();
        let v = EquivariantCWComplex::new("v", g.clone(), vec![1], vec![]).unwrap();
        let j = Subcomplex { cells: vec![vec![0]] };
        let p = pushout_assemble(&v, &c, &j, &c, &j.as_chain_map(&v, &c)).unwrap();
        assert_eq!(p.x.cells, vec![1, 2]);
        let h = CoefficientSystem::regular(&g).unwrap();
        let mv = mayer_vietoris(&p, &h).unwrap();
        assert!(mv.ses.correction(&FkOptions::default()).is_ok());
    }

    #[test]
    fn a_non_closed_subset_is_rejected() {
        let d = disk(2).unwrap().space;
        let s1 = sphere(1).unwrap().space;
        let err = pushout_assemble(&s1, &d, &Subcomplex { cells: vec![vec![0]] }, &d, &ChainMap::identity(&s1)).unwrap_err();
        assert!(matches!(err, Error::NotSubcomplex(_)));
        // the top cell alone, without its boundary circle
        let e = EquivariantCWComplex::new("e", Group::trivial(), vec![0, 0, 1], vec![IntMatrix::zeros(0, 0), IntMatrix::zeros(0, 1)]).unwrap();
        let err = pushout_assemble(&e, &d, &Subcomplex { cells: vec![vec![], vec![], vec![0]] }, &d, &ChainMap::zero(&e, &d));
        assert!(matches!(err, Err(Error::NotSubcomplex(_))));
    }
}
