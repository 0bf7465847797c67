//! The chapters of `book/` as modules, so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/mixtures.md")]
pub mod mixtures {}

#[doc = include_str!("../../../book/src/divergences.md")]
pub mod divergences {}

#[doc = include_str!("../../../book/src/npmle.md")]
pub mod npmle {}

#[doc = include_str!("../../../book/src/langevin.md")]
pub mod langevin {}

#[doc = include_str!("../../../book/src/polymer.md")]
pub mod polymer {}

#[doc = include_str!("../../../book/src/discretize.md")]
pub mod discretize {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}
