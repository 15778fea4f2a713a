//! Semi-supervised sparse-representation classification with graph
//! regularization, in linear and kernel variants.
//!
//! The library learns, jointly over labeled and unlabeled points: a
//! dictionary for sparse coding, a linear classifier acting on the codes,
//! and a soft label matrix tied to the data geometry through three
//! neighborhood graphs (a label-propagated global graph, a within-class
//! graph, and a between-class graph).

pub mod config;
pub mod data;
pub mod error;
pub mod graphs;
pub mod kernel;
pub mod kssrgr;
pub mod linalg;
pub mod solvers;
pub mod ssrgr;

pub use config::{AdmmConfig, GraphConfig, HyperParams, KernelConfig, KernelKind};
pub use error::{Error, Result};
