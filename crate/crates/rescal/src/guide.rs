//! The user guide, one module per chapter.
//!
//! Each chapter is a Markdown file under `book/src/`, rendered by `mdbook`
//! and included here verbatim so every code block in the book runs under
//! `cargo test --doc`. A book that compiles is a book that stays true.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/transitivity.md")]
pub mod transitivity {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
