use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraModel, FiniteGroupTable, Key};
use crate::error::{Error, Result};

/// `x_gen^power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub gen: usize,
    pub power: i64,
}

/// A word in the generators of a [`Group`]; the empty word is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn gen(gen: usize) -> Self {
        Word(vec![Letter { gen, power: 1 }])
    }

    pub fn power(gen: usize, power: i64) -> Self {
        if power == 0 {
            Word::identity()
        } else {
            Word(vec![Letter { gen, power }])
        }
    }

    /// Parses `[(gen, power), ...]` pairs.
    pub fn from_pairs(pairs: &[(usize, i64)]) -> Self {
        Word(pairs.iter().filter(|p| p.1 != 0).map(|&(gen, power)| Letter { gen, power }).collect())
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut letters = self.0.clone();
        for l in &other.0 {
            match letters.last_mut() {
                Some(last) if last.gen == l.gen => {
                    last.power += l.power;
                    if last.power == 0 {
                        letters.pop();
                    }
                }
                _ => letters.push(*l),
            }
        }
        Word(letters)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| Letter { gen: l.gen, power: -l.power }).collect())
    }

    pub fn map_gens(&self, f: impl Fn(usize) -> usize) -> Word {
        Word(self.0.iter().map(|l| Letter { gen: f(l.gen), power: l.power }).collect())
    }
}

/// A finitely presented group given only through generators and relators.
/// Group-ring arithmetic never happens in it directly; computations go
/// through homomorphisms to finite groups or free abelian groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: Vec<String>,
    pub relators: Vec<Word>,
}

/// The group `pi` acting on a CW complex.
///
/// Generators: every element of a finite table (letter `g` is the element
/// `g`), the standard basis of `Z^k`, the named generators of a presentation,
/// and for products the generators of the left factor followed by those of
/// the right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Group {
    Finite { table: FiniteGroupTable },
    FreeAbelian { rank: usize },
    Presented(Presentation),
    Product { left: Box<Group>, right: Box<Group> },
}

impl Group {
    pub fn trivial() -> Self {
        Group::Finite { table: FiniteGroupTable::trivial() }
    }

    pub fn finite(table: FiniteGroupTable) -> Self {
        Group::Finite { table }
    }

    pub fn free_abelian(rank: usize) -> Self {
        Group::FreeAbelian { rank }
    }

    pub fn presented(generators: &[&str], relators: Vec<Word>) -> Self {
        Group::Presented(Presentation { generators: generators.iter().map(|s| s.to_string()).collect(), relators })
    }

    pub fn is_trivial(&self) -> bool {
        match self {
            Group::Finite { table } => table.is_trivial(),
            Group::FreeAbelian { rank } => *rank == 0,
            Group::Presented(p) => p.generators.is_empty(),
            Group::Product { left, right } => left.is_trivial() && right.is_trivial(),
        }
    }

    pub fn generator_count(&self) -> usize {
        match self {
            Group::Finite { table } => table.order(),
            Group::FreeAbelian { rank } => *rank,
            Group::Presented(p) => p.generators.len(),
            Group::Product { left, right } => left.generator_count() + right.generator_count(),
        }
    }

    /// The algebra `l^2(pi)` when `pi` has a computable normal form.
    pub fn regular_model(&self) -> Option<AlgebraModel> {
        match self {
            Group::Finite { table } => Some(AlgebraModel::finite_group(table.clone())),
            Group::FreeAbelian { rank } => Some(AlgebraModel::torus(*rank)),
            Group::Presented(_) => None,
            Group::Product { left, right } => left.regular_model()?.tensor(&right.regular_model()?).ok(),
        }
    }

    /// Normal form of a word as a key of [`Group::regular_model`].
    pub fn normal_form(&self, w: &Word) -> Option<Key> {
        match self {
            Group::Finite { table } => {
                let g = w.0.iter().fold(0, |acc, l| table.mul(acc, table.pow(l.gen, l.power)));
                Some(Key::group(g))
            }
            Group::FreeAbelian { rank } => {
                let mut exp = vec![0; *rank];
                for l in &w.0 {
                    exp[l.gen] += l.power;
                }
                Some(Key::monomial(exp))
            }
            Group::Presented(_) => None,
            Group::Product { left, right } => {
                let n = left.generator_count();
                let (l, r): (Vec<Letter>, Vec<Letter>) = w.0.iter().partition(|l| l.gen < n);
                let kl = left.normal_form(&Word(l))?;
                let kr = right.normal_form(&Word(r).map_gens(|g| g - n))?;
                let (ml, mr) = (left.regular_model()?, right.regular_model()?);
                Some(ml.tensor_keys(&mr, &kl, &kr))
            }
        }
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        let n = self.generator_count();
        match w.0.iter().find(|l| l.gen >= n) {
            Some(l) => Err(Error::ShapeMismatch(format!("generator {} out of range ({n} generators)", l.gen))),
            None => Ok(()),
        }
    }
}

/// Direct product `pi_1 x pi_2`, simplified so that trivial factors vanish and
/// finite or free abelian factors merge.
#[derive(Clone, Debug)]
pub struct ProductGroup {
    pub group: Group,
    pub left: Group,
    pub right: Group,
}

impl ProductGroup {
    pub fn new(left: &Group, right: &Group) -> Self {
        let group = if right.is_trivial() {
            left.clone()
        } else if left.is_trivial() {
            right.clone()
        } else {
            match (left, right) {
                (Group::FreeAbelian { rank: a }, Group::FreeAbelian { rank: b }) => Group::free_abelian(a + b),
                (Group::Finite { table: a }, Group::Finite { table: b })
                    if a.order() * b.order() <= crate::algebra::MAX_GROUP_ORDER =>
                {
                    Group::finite(a.product(b))
                }
                _ => Group::Product { left: Box::new(left.clone()), right: Box::new(right.clone()) },
            }
        };
        ProductGroup { group, left: left.clone(), right: right.clone() }
    }

    fn shape(&self) -> Shape {
        if self.right.is_trivial() {
            Shape::LeftOnly
        } else if self.left.is_trivial() {
            Shape::RightOnly
        } else if let Group::Finite { .. } = self.group {
            Shape::Table
        } else {
            Shape::Concat
        }
    }

    /// Image of a word of the left factor.
    pub fn embed_left(&self, w: &Word) -> Word {
        match self.shape() {
            Shape::LeftOnly | Shape::Concat => w.clone(),
            Shape::RightOnly => Word::identity(),
            Shape::Table => {
                let g = self.left.normal_form(w).expect("finite factor").g;
                Word::gen(g * self.right.generator_count())
            }
        }
    }

    pub fn embed_right(&self, w: &Word) -> Word {
        match self.shape() {
            Shape::RightOnly => w.clone(),
            Shape::LeftOnly => Word::identity(),
            Shape::Concat => w.map_gens(|g| g + self.left.generator_count()),
            Shape::Table => Word::gen(self.right.normal_form(w).expect("finite factor").g),
        }
    }

    /// Splits a generator of the product into words of the two factors.
    pub fn split_generator(&self, gen: usize) -> (Word, Word) {
        match self.shape() {
            Shape::LeftOnly => (Word::gen(gen), Word::identity()),
            Shape::RightOnly => (Word::identity(), Word::gen(gen)),
            Shape::Concat => {
                let n = self.left.generator_count();
                if gen < n {
                    (Word::gen(gen), Word::identity())
                } else {
                    (Word::identity(), Word::gen(gen - n))
                }
            }
            Shape::Table => {
                let n2 = self.right.generator_count();
                (Word::gen(gen / n2), Word::gen(gen % n2))
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Shape {
    LeftOnly,
    RightOnly,
    Table,
    Concat,
}

/// An element `sum n_w w` of the integral group ring; words are kept as given.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntElement {
    pub terms: Vec<(Word, i64)>,
}

impl IntElement {
    pub fn zero() -> Self {
        IntElement::default()
    }

    pub fn one() -> Self {
        IntElement::word(Word::identity(), 1)
    }

    pub fn integer(n: i64) -> Self {
        IntElement::word(Word::identity(), n)
    }

    pub fn word(w: Word, n: i64) -> Self {
        if n == 0 {
            IntElement::zero()
        } else {
            IntElement { terms: vec![(w, n)] }
        }
    }

    pub fn from_terms(terms: Vec<(Word, i64)>) -> Self {
        let mut e = IntElement { terms };
        e.tidy();
        e
    }

    /// Merges equal words and drops zero coefficients.
    fn tidy(&mut self) {
        let mut merged: BTreeMap<Word, i64> = BTreeMap::new();
        for (w, n) in self.terms.drain(..) {
            *merged.entry(w).or_insert(0) += n;
        }
        self.terms = merged.into_iter().filter(|(_, n)| *n != 0).collect();
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, n)| *n == 0)
    }

    pub fn add(&self, other: &IntElement) -> IntElement {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        IntElement::from_terms(terms)
    }

    pub fn scale(&self, k: i64) -> IntElement {
        IntElement::from_terms(self.terms.iter().map(|(w, n)| (w.clone(), n * k)).collect())
    }

    pub fn neg(&self) -> IntElement {
        self.scale(-1)
    }

    pub fn mul(&self, other: &IntElement) -> IntElement {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, n) in &self.terms {
            for (b, m) in &other.terms {
                terms.push((a.mul(b), n * m));
            }
        }
        IntElement::from_terms(terms)
    }

    pub fn map_words(&self, f: impl Fn(&Word) -> Word) -> IntElement {
        IntElement::from_terms(self.terms.iter().map(|(w, n)| (f(w), *n)).collect())
    }

    /// The element pushed into `l^2` of a group with normal forms, with exact
    /// integer coefficients.
    pub fn keyed(&self, key: impl Fn(&Word) -> Option<Key>) -> Option<BTreeMap<Key, i64>> {
        let mut out: BTreeMap<Key, i64> = BTreeMap::new();
        for (w, n) in &self.terms {
            *out.entry(key(w)?).or_insert(0) += n;
        }
        out.retain(|_, n| *n != 0);
        Some(out)
    }
}

impl fmt::Display for IntElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, n)| {
                let word: Vec<String> = w.0.iter().map(|l| format!("x{}^{}", l.gen, l.power)).collect();
                if word.is_empty() { format!("{n}") } else { format!("{n}*{}", word.join("")) }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// A matrix over the integral group ring, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<IntElement>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, entries: vec![IntElement::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, IntElement::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<IntElement>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged integral matrix".into()));
        }
        Ok(IntMatrix { rows: r, cols: c, entries: rows.into_iter().flatten().collect() })
    }

    /// Integer matrix with trivial group elements.
    pub fn from_integers(rows: usize, cols: usize, values: &[i64]) -> Self {
        IntMatrix { rows, cols, entries: values.iter().map(|&n| IntElement::integer(n)).collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> &IntElement {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: IntElement) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(IntElement::is_zero)
    }

    pub fn map(&self, f: impl Fn(&IntElement) -> IntElement) -> IntMatrix {
        IntMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(f).collect() }
    }

    pub fn sub(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch("integral matrices of different shapes".into()));
        }
        Ok(IntMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(&b.neg())).collect(),
        })
    }

    /// Composite "first `self`, then `next`" of cellular maps written in the
    /// column convention `f(e_l) = sum_j F[j][l] e_j` with coefficients acting
    /// on the left: entry `(i, l)` is `sum_j self[j][l] * next[i][j]`.
    pub fn then(&self, next: &IntMatrix) -> Result<IntMatrix> {
        if next.cols != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, next.rows, next.cols
            )));
        }
        let mut out = IntMatrix::zeros(next.rows, self.cols);
        for i in 0..next.rows {
            for l in 0..self.cols {
                let mut acc = IntElement::zero();
                for j in 0..self.rows {
                    let (a, b) = (self.get(j, l), next.get(i, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b));
                    }
                }
                out.set(i, l, acc);
            }
        }
        Ok(out)
    }

    /// Exact zero test through a normal form map.
    pub fn vanishes_under(&self, key: &impl Fn(&Word) -> Option<Key>) -> Option<bool> {
        for e in &self.entries {
            if !e.keyed(key)?.is_empty() {
                return Some(false);
            }
        }
        Some(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_cancel() {
        let w = Word::from_pairs(&[(0, 2), (1, -1)]);
        assert_eq!(w.mul(&w.inverse()), Word::identity());
    }

    #[test]
    fn product_of_finite_groups_is_a_table() {
        let a = Group::finite(FiniteGroupTable::cyclic(2).unwrap());
        let b = Group::finite(FiniteGroupTable::cyclic(3).unwrap());
        let p = ProductGroup::new(&a, &b);
        assert_eq!(p.group.generator_count(), 6);
        let w = p.embed_left(&Word::gen(1)).mul(&p.embed_right(&Word::power(1, 2)));
        assert_eq!(p.group.normal_form(&w), Some(Key::group(5)));
        assert_eq!(p.split_generator(5), (Word::gen(1), Word::gen(2)));
    }

    #[test]
    fn free_abelian_factors_merge() {
        let p = ProductGroup::new(&Group::free_abelian(1), &Group::free_abelian(2));
        assert_eq!(p.group, Group::free_abelian(3));
        assert_eq!(p.group.normal_form(&p.embed_right(&Word::gen(1))), Some(Key::monomial(vec![0, 0, 1])));
    }

    #[test]
    fn trivial_factor_disappears() {
        let z = Group::free_abelian(1);
        let p = ProductGroup::new(&Group::trivial(), &z);
        assert_eq!(p.group, z);
        assert_eq!(p.embed_left(&Word::identity()), Word::identity());
    }

    #[test]
    fn composition_keeps_coefficient_order() {
        let g = Group::finite(FiniteGroupTable::symmetric(3).unwrap());
        let a = IntMatrix { rows: 1, cols: 1, entries: vec![IntElement::word(Word::gen(1), 1)] };
        let b = IntMatrix { rows: 1, cols: 1, entries: vec![IntElement::word(Word::gen(3), 1)] };
        let ab = a.then(&b).unwrap();
        let key = |w: &Word| g.normal_form(w);
        let direct = Word::gen(1).mul(&Word::gen(3));
        assert_eq!(ab.get(0, 0).keyed(key).unwrap(), IntElement::word(direct, 1).keyed(key).unwrap());
    }
}
