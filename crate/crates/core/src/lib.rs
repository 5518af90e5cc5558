//! Ground-penetrating radar wall scans: synthetic radargrams, stud labels
//! from the leading singular vector, baselines, feature selection, sparse
//! L0-gated networks and Shapley explanations tied back to wall depth.
//!
//! The guide in `book/` walks through each module; its code blocks run as
//! doctests of this crate.

// `!(x >= 0.0)` style checks are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod feature_select;
pub mod plot;
pub mod preprocess;
pub mod radargram;
pub mod sparsenn;
pub mod svd_labeler;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/radargrams.md")]
    mod radargrams {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/labeling.md")]
    mod labeling {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/sparsenn.md")]
    mod sparsenn {}
    #[doc = include_str!("../../../book/src/explanation.md")]
    mod explanation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
