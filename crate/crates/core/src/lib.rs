//! Static transformation of programs in a small Python-like language into
//! hosted-function units, plus a local runtime to execute them.
//!
//! Start with [`transform::transform_program`]. The guide in `book/` walks
//! through each stage.

pub mod analyzer;
pub mod bench;
pub mod cli;
pub mod emulator;
pub mod interp;
pub mod package;
pub mod syntax;
pub mod transform;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/subset.md")]
    pub struct Subset;
    #[doc = include_str!("../../../book/src/units.md")]
    pub struct Units;
    #[doc = include_str!("../../../book/src/classes.md")]
    pub struct Classes;
    #[doc = include_str!("../../../book/src/packaging.md")]
    pub struct Packaging;
    #[doc = include_str!("../../../book/src/emulator.md")]
    pub struct Emulator;
    #[doc = include_str!("../../../book/src/running.md")]
    pub struct Running;
    #[doc = include_str!("../../../book/src/overhead.md")]
    pub struct Overhead;
}
