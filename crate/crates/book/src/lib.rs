//! mdbook can't test listings that depend on workspace crates, so every
//! chapter is included here as module docs and `cargo test --doc` runs them.
//! Each chapter gets its own module so a failing listing names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/adversarial.md")]
pub mod adversarial {}
#[doc = include_str!("../../../book/src/adaptation.md")]
pub mod adaptation {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}
