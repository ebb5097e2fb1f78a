//! Deciding, constructing, and verifying non-contractive embeddings of
//! tree-indexed distance spaces into Euclidean space.
//!
//! The crate is organized around a dyadic index tree whose nodes carry a
//! distance model (either a modulus-of-continuity pullback or an explicit
//! Cantor scale sequence). A summability test on the critical sequence of
//! the modulus decides embeddability; when it holds, a product-of-Cantor-sets
//! construction produces an explicit finite-depth witness, and exact-rational
//! verifiers certify the non-contraction inequality pair by pair or
//! structurally per level. A geometry layer estimates perimeters of rounded
//! box unions and checks the covering-family properties that drive the
//! minimal-perimeter argument.

pub mod constructor;
pub mod error;
pub mod geometry;
pub mod index_tree;
pub mod modulus;
pub mod rational;
pub mod verifier;

pub use error::{Error, Result};
pub use rational::Rat;
