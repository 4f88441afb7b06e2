//! Bilinear link prediction over transitively closed graphs.
//!
//! The library builds single-relation knowledge bases as directed graphs,
//! closes them transitively, fits a bilinear model (one shared vector per
//! entity, one square matrix per relation slot) under two training
//! protocols, and scores predictions under 0-1 loss on the closed edges,
//! their complement, and their reversals. Alongside the experimental
//! pipeline, [`theory`] turns the underlying linear algebra into executable
//! checks: a bilinear classifier propagates relation chains for all
//! embeddings only if its difference matrix is *transitive*, every
//! transitive matrix is symmetric, and for any measurably asymmetric matrix
//! the module constructs a concrete vector triple certifying the failure.
//!
//! A narrative walkthrough lives in the `book/` directory; its code blocks
//! compile and run as this crate's doc-tests (see [`guide`]).

pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod guide;
pub mod model;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
