//! Boolean semantics over batched traces.

use crate::error::Result;
use crate::lang::{Comparison, Constraint, FeatureRef};
use crate::recursion::{self, Semantics};
pub use crate::recursion::EvalCounter;
use crate::tensor::{BoolTensor, Shape};
use crate::trace::TraceBatch;

struct Boolean<'a> {
    trace: &'a TraceBatch,
    batch: Shape,
}

impl Semantics for Boolean<'_> {
    type Value = BoolTensor;

    fn beyond_end(&self) -> BoolTensor {
        BoolTensor::replicate(self.batch.clone(), false)
    }

    fn end_guard(&self) -> BoolTensor {
        BoolTensor::replicate(self.batch.clone(), true)
    }

    fn atom(&self, atom: &Comparison<FeatureRef>, t: usize) -> Result<BoolTensor> {
        let lhs = self.trace.column(t, atom.lhs.0)?;
        let rhs = self.trace.column(t, atom.rhs.0)?;
        let op = atom.op;
        lhs.binop(&rhs, |&a, &b| op.holds(a, b))
    }

    fn and(&self, a: &BoolTensor, b: &BoolTensor) -> Result<BoolTensor> {
        a.binop(b, |&x, &y| x && y)
    }

    fn or(&self, a: &BoolTensor, b: &BoolTensor) -> Result<BoolTensor> {
        a.binop(b, |&x, &y| x || y)
    }
}

fn semantics(trace: &TraceBatch) -> Boolean<'_> {
    Boolean {
        trace,
        batch: trace.batch_shape(),
    }
}

/// Truth value of `formula` from step `t`, one entry per batch element.
pub fn eval(formula: &Constraint, trace: &TraceBatch, t: usize) -> Result<BoolTensor> {
    recursion::check_features(formula, trace)?;
    recursion::memoized(&semantics(trace), formula, trace.steps(), t)
}

/// [`eval`] by literal recursion, counting every invocation.
pub fn eval_counted(
    formula: &Constraint,
    trace: &TraceBatch,
    t: usize,
) -> Result<(BoolTensor, EvalCounter)> {
    recursion::check_features(formula, trace)?;
    let mut counter = EvalCounter::default();
    let value = recursion::uncached(&semantics(trace), formula, trace.steps(), t, &mut counter)?;
    Ok((value, counter))
}
