//! Equivariant CW complexes given by cellular chain data over `Z pi`, their
//! coefficient systems, products, bundles and pushouts.

pub mod builtin;
pub mod coeff;
pub mod cw;
pub mod group;
pub mod pushout;

pub use builtin::{builtin_space, BuiltinSpace};
pub use coeff::{cochain_with_coefficients, l2_torsion, unimodularity_check, CoefficientSystem, GeneratorImage, UnimodularityReport};
pub use cw::{product_space, Bundle, ChainMap, EquivariantCWComplex, Transport};
pub use group::{Group, IntElement, IntMatrix, Letter, Presentation, ProductGroup, Word};
pub use pushout::{mayer_vietoris, pushout_assemble, MayerVietoris, Pushout, Subcomplex};
