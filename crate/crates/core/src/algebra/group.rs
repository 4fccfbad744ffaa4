use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest group order for which associativity is verified exhaustively.
const EXHAUSTIVE_ASSOCIATIVITY: usize = 64;

/// Multiplication table of a finite group with elements indexed `0..order`.
///
/// The identity is always index 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct FiniteGroupTable {
    order: usize,
    mult: Vec<usize>,
    inverse: Vec<usize>,
}

impl FiniteGroupTable {
    /// Builds a table from rows `mult[a][b] = a*b`, checking the group axioms.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::InvalidGroupTable("empty table".into()));
        }
        let mut mult = Vec::with_capacity(order * order);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::InvalidGroupTable(format!(
                    "row {a} has {} entries, expected {order}",
                    row.len()
                )));
            }
            for &c in row {
                if c >= order {
                    return Err(Error::InvalidGroupTable(format!("entry {c} out of range")));
                }
                mult.push(c);
            }
        }
        Self::from_flat(order, mult)
    }

    fn from_flat(order: usize, mult: Vec<usize>) -> Result<Self> {
        for g in 0..order {
            if mult[g] != g || mult[g * order] != g {
                return Err(Error::InvalidGroupTable(format!(
                    "index 0 is not a two-sided identity (fails at {g})"
                )));
            }
        }
        let mut inverse = vec![usize::MAX; order];
        for g in 0..order {
            let mut found = None;
            for h in 0..order {
                if mult[g * order + h] == 0 {
                    found = Some(h);
                    break;
                }
            }
            let h = found
                .ok_or_else(|| Error::InvalidGroupTable(format!("element {g} has no inverse")))?;
            if mult[h * order + g] != 0 {
                return Err(Error::InvalidGroupTable(format!(
                    "right inverse of {g} is not a left inverse"
                )));
            }
            inverse[g] = h;
        }
        let table = FiniteGroupTable { order, mult, inverse };
        table.check_latin()?;
        if order <= EXHAUSTIVE_ASSOCIATIVITY {
            table.check_associative()?;
        }
        Ok(table)
    }

    fn check_latin(&self) -> Result<()> {
        let n = self.order;
        for a in 0..n {
            let mut seen = vec![false; n];
            for b in 0..n {
                let c = self.mul(a, b);
                if seen[c] {
                    return Err(Error::InvalidGroupTable(format!("row {a} repeats {c}")));
                }
                seen[c] = true;
            }
        }
        Ok(())
    }

    fn check_associative(&self) -> Result<()> {
        let n = self.order;
        for a in 0..n {
            for b in 0..n {
                let ab = self.mul(a, b);
                for c in 0..n {
                    if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                        return Err(Error::InvalidGroupTable(format!(
                            "({a}*{b})*{c} != {a}*({b}*{c})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn trivial() -> Self {
        FiniteGroupTable { order: 1, mult: vec![0], inverse: vec![0] }
    }

    /// Cyclic group of order `n`, index `k` standing for `t^k`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroupTable("cyclic group of order 0".into()));
        }
        let mult = (0..n * n).map(|i| (i / n + i % n) % n).collect();
        Self::from_flat(n, mult)
    }

    /// Dihedral group of order `2n`; index `i + n*j` stands for `r^i s^j`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroupTable("dihedral group with n = 0".into()));
        }
        let order = 2 * n;
        let mut mult = vec![0; order * order];
        for a in 0..order {
            let (i1, j1) = (a % n, a / n);
            for b in 0..order {
                let (i2, j2) = (b % n, b / n);
                // s r^i = r^{-i} s
                let i = if j1 == 0 { (i1 + i2) % n } else { (i1 + n - i2) % n };
                let j = (j1 + j2) % 2;
                mult[a * order + b] = i + n * j;
            }
        }
        Self::from_flat(order, mult)
    }

    /// Symmetric group on `n` letters, permutations in lexicographic order.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 5 {
            return Err(Error::InvalidGroupTable(format!("symmetric group S_{n} not supported")));
        }
        let mut perms: Vec<Vec<usize>> = Vec::new();
        permutations(&mut (0..n).collect(), 0, &mut perms);
        perms.sort();
        let order = perms.len();
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
        let mut mult = vec![0; order * order];
        for (a, p) in perms.iter().enumerate() {
            for (b, q) in perms.iter().enumerate() {
                // (p*q)(x) = p(q(x))
                let pq: Vec<usize> = (0..n).map(|x| p[q[x]]).collect();
                mult[a * order + b] = index(&pq);
            }
        }
        Self::from_flat(order, mult)
    }

    /// Heisenberg group over `Z/p`: triples `(a, b, c)` with
    /// `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')`, index `a + p*b + p^2*c`.
    pub fn heisenberg_mod(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidGroupTable("Heisenberg group needs p >= 2".into()));
        }
        let order = p * p * p;
        let split = |x: usize| (x % p, (x / p) % p, x / (p * p));
        let mut mult = vec![0; order * order];
        for x in 0..order {
            let (a, b, c) = split(x);
            for y in 0..order {
                let (a2, b2, c2) = split(y);
                let na = (a + a2) % p;
                let nb = (b + b2) % p;
                let nc = (c + c2 + a * b2) % p;
                mult[x * order + y] = na + p * nb + p * p * nc;
            }
        }
        Self::from_flat(order, mult)
    }

    /// Direct product; index `(g, h)` is `g * other.order() + h`.
    pub fn product(&self, other: &FiniteGroupTable) -> FiniteGroupTable {
        let (n1, n2) = (self.order, other.order);
        let order = n1 * n2;
        let mut mult = vec![0; order * order];
        for a in 0..order {
            for b in 0..order {
                let g = self.mul(a / n2, b / n2);
                let h = other.mul(a % n2, b % n2);
                mult[a * order + b] = g * n2 + h;
            }
        }
        let inverse = (0..order)
            .map(|a| self.inv(a / n2) * n2 + other.inv(a % n2))
            .collect();
        FiniteGroupTable { order, mult, inverse }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a * self.order + b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// `g^k` for any integer `k`.
    pub fn pow(&self, g: usize, k: i64) -> usize {
        let base = if k < 0 { self.inv(g) } else { g };
        let mut acc = 0;
        for _ in 0..k.unsigned_abs() {
            acc = self.mul(acc, base);
        }
        acc
    }

    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (0..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.mult.chunks(self.order).map(|r| r.to_vec()).collect()
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

impl TryFrom<Vec<Vec<usize>>> for FiniteGroupTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<usize>>) -> Result<Self> {
        FiniteGroupTable::from_rows(&rows)
    }
}

impl From<FiniteGroupTable> for Vec<Vec<usize>> {
    fn from(t: FiniteGroupTable) -> Self {
        t.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_tables_satisfy_axioms() {
        for t in [
            FiniteGroupTable::cyclic(7).unwrap(),
            FiniteGroupTable::dihedral(4).unwrap(),
            FiniteGroupTable::symmetric(3).unwrap(),
            FiniteGroupTable::heisenberg_mod(3).unwrap(),
        ] {
            let rebuilt = FiniteGroupTable::from_rows(&t.rows()).unwrap();
            assert_eq!(rebuilt, t);
        }
        assert_eq!(FiniteGroupTable::dihedral(4).unwrap().order(), 8);
        assert!(!FiniteGroupTable::dihedral(4).unwrap().is_abelian());
        assert!(!FiniteGroupTable::heisenberg_mod(3).unwrap().is_abelian());
    }

    #[test]
    fn dihedral_relation() {
        let d = FiniteGroupTable::dihedral(4).unwrap();
        let (r, s) = (1, 4);
        // s r s^-1 = r^-1
        assert_eq!(d.mul(d.mul(s, r), d.inv(s)), d.inv(r));
        assert_eq!(d.pow(r, 4), 0);
        assert_eq!(d.pow(r, -1), 3);
    }

    #[test]
    fn product_table_is_a_group() {
        let p = FiniteGroupTable::cyclic(2).unwrap().product(&FiniteGroupTable::cyclic(3).unwrap());
        FiniteGroupTable::from_rows(&p.rows()).unwrap();
        assert_eq!(p.order(), 6);
    }

    #[test]
    fn rejects_broken_tables() {
        assert!(FiniteGroupTable::from_rows(&[vec![0, 1], vec![1, 1]]).is_err());
        assert!(FiniteGroupTable::from_rows(&[vec![1, 0], vec![0, 1]]).is_err());
        // identity fine, but not associative
        let rows = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(FiniteGroupTable::from_rows(&rows).is_err());
    }
}
