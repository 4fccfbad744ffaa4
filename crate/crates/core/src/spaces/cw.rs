use serde::{Deserialize, Serialize};

use super::group::{Group, IntElement, IntMatrix, ProductGroup, Word};
use crate::algebra::Key;
use crate::error::{Error, Result};

/// A finite free `pi`-CW complex given by its cellular chain data over the
/// integral group ring.
///
/// `boundaries[k - 1]` is `d_k`, a `#c_{k-1} x #c_k` matrix in the column
/// convention `d e_l = sum_j d[j][l] e_j`, coefficients acting on the left.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivariantCWComplex {
    pub name: String,
    pub group: Group,
    pub cells: Vec<usize>,
    pub boundaries: Vec<IntMatrix>,
}

/// A cellular chain map, one matrix per degree in the column convention.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainMap {
    pub matrices: Vec<IntMatrix>,
}

impl EquivariantCWComplex {
    /// Checks shapes and word ranges, and `dd = 0` exactly when `pi` has
    /// normal forms. Presented groups are checked later, through a coefficient
    /// system.
    pub fn new(name: impl Into<String>, group: Group, cells: Vec<usize>, boundaries: Vec<IntMatrix>) -> Result<Self> {
        let x = EquivariantCWComplex { name: name.into(), group, cells, boundaries };
        x.check_shapes()?;
        if let Some(false) = x.boundaries_vanish(&|w| x.group.normal_form(w)) {
            return Err(Error::NotComplex(format!("{}: boundary of a boundary is not zero", x.name)));
        }
        Ok(x)
    }

    fn check_shapes(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::ShapeMismatch("a complex needs cells in degree 0".into()));
        }
        if self.boundaries.len() + 1 != self.cells.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} degrees but {} boundary matrices",
                self.cells.len(),
                self.boundaries.len()
            )));
        }
        for (k, b) in self.boundaries.iter().enumerate() {
            if b.rows != self.cells[k] || b.cols != self.cells[k + 1] {
                return Err(Error::ShapeMismatch(format!("boundary d_{} has the wrong shape", k + 1)));
            }
            for e in &b.entries {
                for (w, _) in &e.terms {
                    self.group.check_word(w)?;
                }
            }
        }
        Ok(())
    }

    /// `Some(true)` when every `d_k d_{k+1}` vanishes under `key`, `None` if
    /// some word has no image.
    pub fn boundaries_vanish(&self, key: &impl Fn(&Word) -> Option<Key>) -> Option<bool> {
        for w in self.boundaries.windows(2) {
            if !w[1].then(&w[0]).ok()?.vanishes_under(key)? {
                return Some(false);
            }
        }
        Some(true)
    }

    pub fn dim(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn total_cells(&self) -> usize {
        self.cells.iter().sum()
    }

    /// `d_k`; `k` ranges over `1..=dim`.
    pub fn boundary(&self, k: usize) -> &IntMatrix {
        &self.boundaries[k - 1]
    }

    /// `sum_k (-1)^k #c_k`.
    pub fn euler_char(&self) -> i64 {
        self.cells.iter().enumerate().map(|(k, &c)| if k % 2 == 0 { c as i64 } else { -(c as i64) }).sum()
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        EquivariantCWComplex { name: name.into(), ..self.clone() }
    }

    /// Replaces the lift `e` of cell `idx` in degree `k` by `g e`. Its boundary
    /// becomes `g d(e)` and every boundary mentioning `e` picks up `g^{-1}`.
    pub fn relift(&self, k: usize, idx: usize, g: &Word) -> Result<Self> {
        self.group.check_word(g)?;
        let mut x = self.clone();
        let gi = g.inverse();
        if k >= 1 {
            // new basis vector e' = g e, so d e' = g (d e)
            let b = &mut x.boundaries[k - 1];
            for i in 0..b.rows {
                let v = IntElement::word(g.clone(), 1).mul(b.get(i, idx));
                b.set(i, idx, v);
            }
        }
        if k < self.dim() {
            // e = g^{-1} e' wherever e appears in a boundary
            let b = &mut x.boundaries[k];
            for l in 0..b.cols {
                let v = b.get(idx, l).mul(&IntElement::word(gi.clone(), 1));
                b.set(idx, l, v);
            }
        }
        Ok(x)
    }

    /// Reorders the cells of degree `k`: new cell `i` is old cell `perm[i]`.
    pub fn reorder(&self, k: usize, perm: &[usize]) -> Result<Self> {
        let n = self.cells[k];
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::ShapeMismatch("not a permutation of the cells".into()));
        }
        let mut x = self.clone();
        if k >= 1 {
            let b = &self.boundaries[k - 1];
            let nb = &mut x.boundaries[k - 1];
            for i in 0..b.rows {
                for (new, &old) in perm.iter().enumerate() {
                    nb.set(i, new, b.get(i, old).clone());
                }
            }
        }
        if k < self.dim() {
            let b = &self.boundaries[k];
            let nb = &mut x.boundaries[k];
            for (new, &old) in perm.iter().enumerate() {
                for l in 0..b.cols {
                    nb.set(new, l, b.get(old, l).clone());
                }
            }
        }
        Ok(x)
    }
}

impl ChainMap {
    pub fn identity(x: &EquivariantCWComplex) -> Self {
        ChainMap { matrices: x.cells.iter().map(|&c| IntMatrix::identity(c)).collect() }
    }

    pub fn zero(source: &EquivariantCWComplex, target: &EquivariantCWComplex) -> Self {
        ChainMap {
            matrices: (0..source.cells.len())
                .map(|k| IntMatrix::zeros(target.cells.get(k).copied().unwrap_or(0), source.cells[k]))
                .collect(),
        }
    }

    pub fn scale(&self, n: i64) -> Self {
        ChainMap { matrices: self.matrices.iter().map(|m| m.map(|e| e.scale(n))).collect() }
    }

    pub fn sub(&self, other: &ChainMap) -> Result<ChainMap> {
        Ok(ChainMap { matrices: self.matrices.iter().zip(&other.matrices).map(|(a, b)| a.sub(b)).collect::<Result<_>>()? })
    }

    /// Shape check plus `d f = f d`, exactly under `key`. `None` when some word
    /// has no image.
    pub fn check(
        &self,
        source: &EquivariantCWComplex,
        target: &EquivariantCWComplex,
        key: &impl Fn(&Word) -> Option<Key>,
    ) -> Result<Option<bool>> {
        if self.matrices.len() != source.cells.len() {
            return Err(Error::NotCellular("one matrix per source degree expected".into()));
        }
        for (k, m) in self.matrices.iter().enumerate() {
            let tc = target.cells.get(k).copied().unwrap_or(0);
            if m.cols != source.cells[k] || m.rows != tc {
                return Err(Error::NotCellular(format!("degree {k} matrix has the wrong shape")));
            }
        }
        for k in 1..self.matrices.len() {
            if target.cells.len() <= k {
                continue;
            }
            let lhs = self.matrices[k].then(target.boundary(k))?;
            let rhs = source.boundary(k).then(&self.matrices[k - 1])?;
            match lhs.sub(&rhs)?.vanishes_under(key) {
                None => return Ok(None),
                Some(false) => return Ok(Some(false)),
                Some(true) => {}
            }
        }
        Ok(Some(true))
    }

    /// Image of the words under a group embedding.
    pub fn map_words(&self, f: &impl Fn(&Word) -> Word) -> ChainMap {
        ChainMap { matrices: self.matrices.iter().map(|m| m.map(|e| e.map_words(f))).collect() }
    }
}

/// Index of product cell `(a, b)` among the cells of degree `p + q`, in the
/// order: left degree outermost, then left cell, then right cell.
pub fn product_index(left: &[usize], right: &[usize], p: usize, a: usize, q: usize, b: usize) -> usize {
    let mut offset = 0;
    for pp in 0..p {
        let qq = p + q - pp;
        offset += left[pp] * right.get(qq).copied().unwrap_or(0);
    }
    offset + a * right[q] + b
}

fn product_cells(left: &[usize], right: &[usize]) -> Vec<usize> {
    let dim = left.len() + right.len() - 2;
    (0..=dim)
        .map(|n| {
            (0..=n.min(left.len() - 1))
                .filter(|&p| n - p < right.len())
                .map(|p| left[p] * right[n - p])
                .sum()
        })
        .collect()
}

/// `X1 x X2` over `pi_1 x pi_2`, with `d(a x b) = da x b + (-1)^|a| a x db`.
pub fn product_space(x1: &EquivariantCWComplex, x2: &EquivariantCWComplex) -> Result<EquivariantCWComplex> {
    let pg = ProductGroup::new(&x1.group, &x2.group);
    let name = format!("{}x{}", x1.name, x2.name);
    let (c1, c2) = (&x1.cells, &x2.cells);
    twisted(name, pg, x1, c2, |p, q, a, b, emit| {
        if p > 0 {
            let d = x1.boundary(p);
            for a2 in 0..c1[p - 1] {
                let e = d.get(a2, a);
                if !e.is_zero() {
                    emit(p - 1, a2, q, b, e.clone(), true);
                }
            }
        }
        if q > 0 {
            let d = x2.boundary(q);
            let sign = if p % 2 == 0 { 1 } else { -1 };
            for b2 in 0..c2[q - 1] {
                let e = d.get(b2, b);
                if !e.is_zero() {
                    emit(p, a, q - 1, b2, e.scale(sign), false);
                }
            }
        }
        Ok(())
    })
}

type Emit<'a> = dyn FnMut(usize, usize, usize, usize, IntElement, bool) + 'a;

/// Shared builder for products and bundle total spaces. `faces(p, q, a, b,
/// emit)` lists the boundary of cell `a x b`; `emit(p', a', q', b', coeff,
/// left)` adds `coeff (a' x b')`, with `coeff` a word of the left factor when
/// `left` is set and of the right factor otherwise.
fn twisted(
    name: String,
    pg: ProductGroup,
    x1: &EquivariantCWComplex,
    c2: &[usize],
    faces: impl Fn(usize, usize, usize, usize, &mut Emit<'_>) -> Result<()>,
) -> Result<EquivariantCWComplex> {
    let c1 = &x1.cells;
    let cells = product_cells(c1, c2);
    let mut boundaries: Vec<IntMatrix> = (1..cells.len()).map(|n| IntMatrix::zeros(cells[n - 1], cells[n])).collect();
    for n in 1..cells.len() {
        for p in 0..=n.min(c1.len() - 1) {
            let q = n - p;
            if q >= c2.len() {
                continue;
            }
            for a in 0..c1[p] {
                for b in 0..c2[q] {
                    let col = product_index(c1, c2, p, a, q, b);
                    let mut err = None;
                    let mut emit = |p2: usize, a2: usize, q2: usize, b2: usize, e: IntElement, left: bool| {
                        if p2 + q2 + 1 != n {
                            err = Some(Error::ShapeMismatch("face of the wrong degree".into()));
                            return;
                        }
                        let row = product_index(c1, c2, p2, a2, q2, b2);
                        let e = if left { e.map_words(|w| pg.embed_left(w)) } else { e.map_words(|w| pg.embed_right(w)) };
                        let m = &mut boundaries[n - 1];
                        let v = m.get(row, col).add(&e);
                        m.set(row, col, v);
                    };
                    faces(p, q, a, b, &mut emit)?;
                    if let Some(e) = err {
                        return Err(e);
                    }
                }
            }
        }
    }
    EquivariantCWComplex::new(name, pg.group, cells, boundaries)
}

/// Restriction of a bundle to a base cell `e` and face `e'`: the fiber chain
/// map `T_{e,e'}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transport {
    /// Degree of the base cell `e`.
    pub dim: usize,
    pub cell: usize,
    /// Index of the face `e'` among base cells of degree `dim - 1`.
    pub face: usize,
    pub map: ChainMap,
}

/// A cellular fibration over a base with trivial fundamental group action:
/// base cells, the fiber complex over `pi`, and transports. The total space
/// has cells `f x e` with
/// `d(f x e) = df x e + (-1)^|f| sum_{e'} T_{e,e'}(f) x e'`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub base: EquivariantCWComplex,
    pub fiber: EquivariantCWComplex,
    pub transports: Vec<Transport>,
}

impl Bundle {
    pub fn new(base: EquivariantCWComplex, fiber: EquivariantCWComplex, transports: Vec<Transport>) -> Result<Self> {
        if !base.group.is_trivial() {
            return Err(Error::ShapeMismatch("the base of a bundle is given with trivial group".into()));
        }
        for t in &transports {
            if t.dim == 0 || t.dim > base.dim() || t.cell >= base.cells[t.dim] || t.face >= base.cells[t.dim - 1] {
                return Err(Error::ShapeMismatch(format!("transport ({}, {}, {}) out of range", t.dim, t.cell, t.face)));
            }
            if t.map.check(&fiber, &fiber, &|w| fiber.group.normal_form(w))? == Some(false) {
                return Err(Error::NotCellular("a transport is not a chain map".into()));
            }
        }
        let b = Bundle { base, fiber, transports };
        for q in 1..=b.base.dim() {
            for e in 0..b.base.cells[q] {
                for f in 0..b.base.cells[q - 1] {
                    b.transport(q, e, f)?;
                }
            }
        }
        Ok(b)
    }

    /// The product bundle: `T_{e,e'} = [e : e'] id`.
    pub fn trivial(fiber: EquivariantCWComplex, base: EquivariantCWComplex) -> Result<Self> {
        let mut transports = Vec::new();
        for q in 1..=base.dim() {
            for e in 0..base.cells[q] {
                for f in 0..base.cells[q - 1] {
                    let inc = base_incidence(&base, q, e, f)?;
                    if inc != 0 {
                        transports.push(Transport { dim: q, cell: e, face: f, map: ChainMap::identity(&fiber).scale(inc) });
                    }
                }
            }
        }
        Bundle::new(base, fiber, transports)
    }

    /// `T_{e,e'}`; absent transports default to zero when the incidence
    /// number vanishes and are an error otherwise.
    pub fn transport(&self, dim: usize, cell: usize, face: usize) -> Result<ChainMap> {
        if let Some(t) = self.transports.iter().find(|t| (t.dim, t.cell, t.face) == (dim, cell, face)) {
            return Ok(t.map.clone());
        }
        if base_incidence(&self.base, dim, cell, face)? != 0 {
            return Err(Error::MissingTransport(format!("no transport over base cell ({dim}, {cell}) to face {face}")));
        }
        Ok(ChainMap::zero(&self.fiber, &self.fiber))
    }

    pub fn total_space(&self) -> Result<EquivariantCWComplex> {
        let pg = ProductGroup::new(&self.fiber.group, &Group::trivial());
        let name = format!("{}~{}", self.fiber.name, self.base.name);
        let f = &self.fiber;
        let mut maps = std::collections::BTreeMap::new();
        for q in 1..=self.base.dim() {
            for e in 0..self.base.cells[q] {
                for e2 in 0..self.base.cells[q - 1] {
                    maps.insert((q, e, e2), self.transport(q, e, e2)?);
                }
            }
        }
        twisted(name, pg, f, &self.base.cells, |p, q, a, b, emit| {
            if p > 0 {
                let d = f.boundary(p);
                for a2 in 0..f.cells[p - 1] {
                    let c = d.get(a2, a);
                    if !c.is_zero() {
                        emit(p - 1, a2, q, b, c.clone(), true);
                    }
                }
            }
            if q > 0 {
                let sign = if p % 2 == 0 { 1 } else { -1 };
                for b2 in 0..self.base.cells[q - 1] {
                    let t = &maps[&(q, b, b2)].matrices[p];
                    for a2 in 0..f.cells[p] {
                        let c = t.get(a2, a);
                        if !c.is_zero() {
                            emit(p, a2, q - 1, b2, c.scale(sign), true);
                        }
                    }
                }
            }
            Ok(())
        })
    }
}

/// Integer incidence `[e : e']` of a base with trivial group.
pub fn base_incidence(base: &EquivariantCWComplex, dim: usize, cell: usize, face: usize) -> Result<i64> {
    let e = base.boundary(dim).get(face, cell);
    e.terms.iter().try_fold(0i64, |acc, (w, n)| {
        if w.0.is_empty() || base.group.is_trivial() {
            Ok(acc + n)
        } else {
            Err(Error::ShapeMismatch("base incidences must be integers".into()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::builtin;

    #[test]
    fn product_with_point_is_identity() {
        let lens = builtin::lens(5, 2).unwrap().space;
        let p = product_space(&builtin::point(), &lens).unwrap();
        assert_eq!(p.cells, lens.cells);
        assert_eq!(p.boundaries, lens.boundaries);
        assert_eq!(p.group, lens.group);
    }

    #[test]
    fn circle_squared_is_the_torus() {
        let c = builtin::circle_z().space;
        let t = product_space(&c, &c).unwrap();
        let t2 = builtin::torus(2).unwrap().space;
        assert_eq!(t.cells, vec![1, 2, 1]);
        assert_eq!(t.boundaries, t2.boundaries);
        assert_eq!(t.group, Group::free_abelian(2));
    }

    #[test]
    fn euler_characteristic_multiplies() {
        let s2 = builtin::sphere(2).unwrap().space;
        let l = builtin::lens(3, 1).unwrap().space;
        let d = builtin::disk(3).unwrap().space;
        for (a, b) in [(&s2, &l), (&d, &s2), (&l, &d)] {
            assert_eq!(product_space(a, b).unwrap().euler_char(), a.euler_char() * b.euler_char());
        }
    }

    #[test]
    fn trivial_bundle_is_the_product() {
        let f = builtin::lens(3, 1).unwrap().space;
        let b = builtin::sphere(2).unwrap().space;
        let e = Bundle::trivial(f.clone(), b.clone()).unwrap().total_space().unwrap();
        let p = product_space(&f, &b).unwrap();
        assert_eq!(e.boundaries, p.boundaries);
    }

    #[test]
    fn missing_transport_is_reported() {
        let f = builtin::circle_z().space;
        let base = builtin::disk(1).unwrap().space;
        let err = Bundle::new(base, f, Vec::new()).unwrap_err();
        assert!(matches!(err, Error::MissingTransport(_)));
    }

    #[test]
    fn relifting_keeps_dd_zero() {
        let l = builtin::lens(5, 2).unwrap().space;
        let r = l.relift(1, 0, &Word::gen(2)).unwrap();
        assert!(r.boundaries_vanish(&|w| r.group.normal_form(w)).unwrap());
        let r = r.reorder(0, &[0]).unwrap();
        assert_eq!(r.cells, l.cells);
    }
}
