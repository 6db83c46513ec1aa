#![allow(clippy::needless_range_loop)]

//! Exact combinatorics and desk-scale mod-p algebra for the stratification
//! of Hilbert and quaternionic Shimura varieties with ramification at p.
//!
//! The crate is organized around the data that the Jacquet-Langlands
//! description of a stratum needs:
//!
//! * [`embeddings`] — the embedding set of the totally real field with its
//!   shift φ, induced cycles, chains, and CM signatures;
//! * [`jl`] — the transfer recipe producing the splice support, the target
//!   quaternion ramification set, and the projective-bundle index set;
//! * [`diagram`] — the two-row completion table certifying that both
//!   Dieudonné modules are recoverable from the splice;
//! * [`raynaud`] — scalar Raynaud data for F_q-vector schemes: characters,
//!   duality, subgroup extraction, and the scalar crystal;
//! * [`dmod`] — a concrete mod-p Dieudonné-module simulator with
//!   Pappas-Rapoport filtrations, essential Frobenius/Verschiebung, and
//!   partial Hasse invariants;
//! * [`local_model`] — lattice strata of the local model and the Smith
//!   normal form obstruction over truncated polynomial rings.

pub mod dmod;
pub mod diagram;
pub mod embeddings;
pub mod error;
pub mod fq;
pub mod jl;
pub mod linalg;
pub mod local_model;
pub mod raynaud;

pub use error::{Error, Result};
