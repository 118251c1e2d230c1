//! Causal structure learning from masked self-attention matrices.
//!
//! A lower-triangular, row-stochastic attention matrix is read as the
//! normalized effect matrix of a linear-Gaussian SCM over the input tokens.
//! From it we get a token correlation matrix, learn one partial ancestral
//! graph per head under the causal order fixed by the mask, and score how
//! confidently each graph separates independent from dependent token pairs.

pub mod attnmat;
pub mod citest;
pub mod confidence;
pub mod discovery;
pub mod fci;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod pag;
pub mod scmsim;
pub mod synth;

pub use attnmat::{
    correlation, covariance, synthesize_attention, to_uni_triangular, validate_attention,
    AttentionMatrix, CorrelationMatrix, CovarianceMatrix, EffectMatrix, MatrixError,
};
pub use citest::{ci_test, partial_correlation, CiConfig, CiError, CiRecord};
pub use discovery::{learn_all_heads, learn_structure, DiscoveryError, DiscoveryResult, DiscoveryTrace};
pub use matrix::Matrix;
pub use pag::{pag_equal, Edge, Mark, OrientationConfig, Pag, PagError};
