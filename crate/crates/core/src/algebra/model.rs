use std::fmt;

use serde::{Deserialize, Serialize};

use super::group::FiniteGroupTable;
use crate::error::{Error, Result};

/// Largest finite group order the tensor product will build.
pub const MAX_GROUP_ORDER: usize = 4096;

/// A computable finite von Neumann algebra: the group von Neumann algebra of
/// `G x Z^k` with `G` finite, together with its standard trace.
///
/// `k = 0` is the finite group model, a trivial `G` is the torus model; both
/// non-trivial is the mixed model produced by tensor products.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlgebraModel {
    group: FiniteGroupTable,
    torus_rank: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FiniteGroup,
    Torus,
    Mixed,
}

impl AlgebraModel {
    pub fn finite_group(group: FiniteGroupTable) -> Self {
        AlgebraModel { group, torus_rank: 0 }
    }

    pub fn torus(rank: usize) -> Self {
        AlgebraModel { group: FiniteGroupTable::trivial(), torus_rank: rank }
    }

    pub fn mixed(group: FiniteGroupTable, torus_rank: usize) -> Self {
        AlgebraModel { group, torus_rank }
    }

    /// The complex numbers, `l^2` of the trivial group.
    pub fn scalars() -> Self {
        Self::finite_group(FiniteGroupTable::trivial())
    }

    pub fn kind(&self) -> ModelKind {
        match (self.group.is_trivial(), self.torus_rank) {
            (_, 0) => ModelKind::FiniteGroup,
            (true, _) => ModelKind::Torus,
            (false, _) => ModelKind::Mixed,
        }
    }

    pub fn group(&self) -> &FiniteGroupTable {
        &self.group
    }

    pub fn group_order(&self) -> usize {
        self.group.order()
    }

    pub fn torus_rank(&self) -> usize {
        self.torus_rank
    }

    pub fn is_trivial(&self) -> bool {
        self.group.is_trivial() && self.torus_rank == 0
    }

    pub fn identity_key(&self) -> Key {
        Key { g: 0, exp: vec![0; self.torus_rank] }
    }

    pub fn mul_keys(&self, a: &Key, b: &Key) -> Key {
        Key {
            g: self.group.mul(a.g, b.g),
            exp: a.exp.iter().zip(&b.exp).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn inv_key(&self, a: &Key) -> Key {
        Key { g: self.group.inv(a.g), exp: a.exp.iter().map(|x| -x).collect() }
    }

    pub fn check_key(&self, k: &Key) -> Result<()> {
        if k.g >= self.group.order() || k.exp.len() != self.torus_rank {
            return Err(Error::ModelMismatch(format!(
                "key {k} does not belong to a model with |G| = {} and torus rank {}",
                self.group.order(),
                self.torus_rank
            )));
        }
        Ok(())
    }

    /// Tensor product `A1 (x) A2` with trace `tau1 (x) tau2`.
    pub fn tensor(&self, other: &AlgebraModel) -> Result<AlgebraModel> {
        let order = self.group.order() * other.group.order();
        if order > MAX_GROUP_ORDER {
            return Err(Error::UnsupportedModelPair(format!(
                "product group of order {order} exceeds {MAX_GROUP_ORDER}"
            )));
        }
        let group = if other.group.is_trivial() {
            self.group.clone()
        } else if self.group.is_trivial() {
            other.group.clone()
        } else {
            self.group.product(&other.group)
        };
        Ok(AlgebraModel { group, torus_rank: self.torus_rank + other.torus_rank })
    }

    /// Image of a key of `self` in `self (x) other` (left factor).
    pub fn tensor_keys(&self, other: &AlgebraModel, a: &Key, b: &Key) -> Key {
        let g = a.g * other.group.order() + b.g;
        let mut exp = a.exp.clone();
        exp.extend_from_slice(&b.exp);
        Key { g, exp }
    }
}

impl fmt::Display for AlgebraModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            ModelKind::FiniteGroup => write!(f, "l2(G), |G| = {}", self.group.order()),
            ModelKind::Torus => write!(f, "L-infinity(T^{})", self.torus_rank),
            ModelKind::Mixed => {
                write!(f, "l2(G) (x) L-infinity(T^{}), |G| = {}", self.torus_rank, self.group.order())
            }
        }
    }
}

/// A basis element `g * z^v` of the group ring of `G x Z^k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key {
    pub g: usize,
    pub exp: Vec<i64>,
}

impl Key {
    pub fn group(g: usize) -> Self {
        Key { g, exp: Vec::new() }
    }

    pub fn monomial(exp: Vec<i64>) -> Self {
        Key { g: 0, exp }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp.is_empty() {
            write!(f, "g{}", self.g)
        } else {
            write!(f, "g{}z{:?}", self.g, self.exp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_with_scalars_is_identity() {
        let m = AlgebraModel::mixed(FiniteGroupTable::cyclic(3).unwrap(), 1);
        assert_eq!(m.tensor(&AlgebraModel::scalars()).unwrap(), m);
        assert_eq!(AlgebraModel::scalars().tensor(&m).unwrap(), m);
    }

    #[test]
    fn kinds() {
        assert_eq!(AlgebraModel::torus(2).kind(), ModelKind::Torus);
        let z3 = AlgebraModel::finite_group(FiniteGroupTable::cyclic(3).unwrap());
        assert_eq!(z3.kind(), ModelKind::FiniteGroup);
        assert_eq!(z3.tensor(&AlgebraModel::torus(1)).unwrap().kind(), ModelKind::Mixed);
    }
}
