//! Differentiable LTL_f constraints over batched trace tensors.
//!
//! Traces are real tensors with time on axis 0, features on axis 1 and any
//! further axes indexing a batch. A [`Constraint`] can be evaluated to a
//! boolean per batch element ([`eval`]), scored by a smooth loss that is zero
//! in the `γ → 0` limit exactly when it holds ([`loss`]), and differentiated
//! with respect to every trace element ([`dloss`]).
//!
//! ```
//! use ltlf_core::{eval, loss, Constraint, LossConfig, TraceBatch};
//!
//! let rho = Constraint::parse("G (f0 <= f1)").unwrap();
//! let trace = TraceBatch::from_rows(&[vec![0.0, 1.0], vec![0.5, 1.0]]).unwrap();
//! assert_eq!(eval(&rho, &trace, 0).unwrap().elems(), &[true]);
//! assert_eq!(loss(&rho, &trace, 0, &LossConfig::new(0.0)).unwrap().elems(), &[0.0]);
//! ```

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod lang;
pub mod loss;
pub mod oracle;
pub mod par;
mod recursion;
pub mod smooth;
pub mod tensor;
pub mod trace;
pub mod trajectory;

pub use error::{Error, Result};
pub use eval::{eval, eval_counted, EvalCounter};
pub use lang::{lower, parse_surface, Channel, Cmp, Constraint, FeatureDerivationPlan, FeatureRef, Formula, SurfaceFormula, Term};
pub use loss::{dloss, loss, loss_and_grad, LossConfig, LossResult};
pub use smooth::{Gamma, KernelMode};
pub use tensor::{BoolTensor, RealTensor, Shape, Tensor};
pub use trace::TraceBatch;
