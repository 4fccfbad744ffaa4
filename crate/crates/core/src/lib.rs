pub mod acceptance;
pub mod algebra;
pub mod error;
pub mod formulas;
pub mod complex;
pub mod detline;
pub mod document;
pub mod hilbmod;
pub mod oracle;
pub mod random;
pub mod spaces;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/determinants.md")]
    mod determinants {}
    #[doc = include_str!("../../../book/src/complexes.md")]
    mod complexes {}
    #[doc = include_str!("../../../book/src/lines.md")]
    mod lines {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/formulas.md")]
    mod formulas {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/documents.md")]
    mod documents {}
}
