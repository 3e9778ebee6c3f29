//! GFisher: p-value calculation for weighted combinations of dependent p-values.

pub mod error;
pub mod numkernels;

pub use error::{Error, Result};
pub mod linalg;
pub mod stat;

pub use linalg::CorrMatrix;
pub use stat::{evaluate, to_pvalues, transform, GFisherDef, InputKind, InputPanel, Side};
pub mod dependence;
pub mod diagnostics;
pub mod surrogates;

pub use diagnostics::{Diagnostics, MomentSource, PValueResult};
pub mod qform;
pub mod harness;
pub mod methods;
pub use methods::{MethodRegistry, MomentStrategy, NullSetting, PValueMethod, PreparedPValue};
pub mod omnibus;
pub mod glm;
