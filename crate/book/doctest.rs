// Each chapter becomes a module so that `cargo test --doc` runs the code
// blocks in the book.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/spaces.md")]
pub mod spaces {}
#[doc = include_str!("src/transport.md")]
pub mod transport {}
#[doc = include_str!("src/geodesics.md")]
pub mod geodesics {}
#[doc = include_str!("src/angles.md")]
pub mod angles {}
#[doc = include_str!("src/measures.md")]
pub mod measures {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
