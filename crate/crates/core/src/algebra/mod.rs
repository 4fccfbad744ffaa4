//! Computable models of finite von Neumann algebras: the group von Neumann
//! algebra of `G x Z^k` for a finite group `G`, with its trace, involution,
//! concrete realizations and the Fuglede-Kadison determinant.

pub mod dense;
mod element;
pub mod fk;
mod group;
mod matrix;
mod model;
pub mod quadrature;
mod realize;

pub use element::GroupRingElement;
pub use fk::{fk_det, log_det_many, singular_values, vn_dim, FkDeterminant, FkOptions};
pub use group::FiniteGroupTable;
pub use matrix::GroupRingMatrix;
pub use model::{AlgebraModel, Key, ModelKind, MAX_GROUP_ORDER};
pub use realize::Realization;
