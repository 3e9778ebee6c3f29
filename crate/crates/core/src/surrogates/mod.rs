//! Gamma and generalized-gamma surrogate distributions for the null of T.

pub mod gamma;
pub mod ggd;
pub mod moments;

pub use gamma::{fit_gb, fit_mr, pvalue_gamma, GammaSurrogate, GammaTail};
pub use ggd::{fit_ggd, pvalue_ggd, GgdFit, GgdSurrogate, GgdVariant};
pub use moments::MomentSummary;
