//! The temporal recursion shared by `eval`, `loss` and `dloss`.
//!
//! All three semantics unfold the operators identically and differ only in
//! how atoms are scored and how `∧`/`∨` combine. [`Semantics`] captures that
//! difference, and two drivers walk the recursion:
//!
//! * [`memoized`] fills a `(node, t)` table backward from the last step, so
//!   every node is visited once per step;
//! * [`uncached`] follows the recursive definition literally and counts
//!   every call, base-case calls included.
//!
//! Both apply the same combinators in the same order, so their results are
//! bitwise identical.

use crate::error::{Error, Result};
use crate::lang::{Comparison, Constraint, FeatureRef, Formula};
use crate::trace::TraceBatch;

pub(crate) trait Semantics {
    type Value: Clone;

    /// Value of any formula past the end of the trace.
    fn beyond_end(&self) -> Self::Value;
    /// Substitute for the recursive call at the last step (true / zero loss).
    fn end_guard(&self) -> Self::Value;
    fn atom(&self, atom: &Comparison<FeatureRef>, t: usize) -> Result<Self::Value>;
    fn and(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn or(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
}

pub(crate) fn check_features(formula: &Constraint, trace: &TraceBatch) -> Result<()> {
    if let Some(max) = formula.max_feature() {
        if max >= trace.features() {
            return Err(Error::Bounds {
                index: vec![max],
                dims: vec![trace.features()],
            });
        }
    }
    Ok(())
}

/// Number of recursive invocations made by [`uncached`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct EvalCounter {
    pub calls: u64,
}

pub(crate) fn uncached<S: Semantics>(
    sem: &S,
    formula: &Constraint,
    steps: usize,
    t: usize,
    counter: &mut EvalCounter,
) -> Result<S::Value> {
    counter.calls += 1;
    if t >= steps {
        return Ok(sem.beyond_end());
    }
    let last = t + 1 == steps;
    let mut rec = |f: &Constraint, at: usize| uncached(sem, f, steps, at, counter);
    match formula {
        Formula::Atom(c) => sem.atom(c, t),
        Formula::And(a, b) => {
            let a = rec(a, t)?;
            let b = rec(b, t)?;
            sem.and(&a, &b)
        }
        Formula::Or(a, b) => {
            let a = rec(a, t)?;
            let b = rec(b, t)?;
            sem.or(&a, &b)
        }
        Formula::StrongNext(a) => rec(a, t + 1),
        Formula::WeakNext(a) => {
            if last {
                Ok(sem.end_guard())
            } else {
                rec(a, t + 1)
            }
        }
        Formula::Always(a) => {
            let now = rec(a, t)?;
            let later = if last {
                sem.end_guard()
            } else {
                rec(formula, t + 1)?
            };
            sem.and(&now, &later)
        }
        Formula::Eventually(a) => {
            let now = rec(a, t)?;
            let later = rec(formula, t + 1)?;
            sem.or(&now, &later)
        }
        Formula::WeakUntil(a, b) => {
            let right = rec(b, t)?;
            let left = rec(a, t)?;
            let later = if last {
                sem.end_guard()
            } else {
                rec(formula, t + 1)?
            };
            sem.or(&right, &sem.and(&left, &later)?)
        }
        Formula::StrongRelease(a, b) => {
            let left = rec(a, t)?;
            let right = rec(b, t)?;
            let later = rec(formula, t + 1)?;
            let both = sem.and(&left, &right)?;
            sem.or(&both, &sem.and(&right, &later)?)
        }
    }
}

enum Node<'a> {
    Atom(&'a Comparison<FeatureRef>),
    And(usize, usize),
    Or(usize, usize),
    StrongNext(usize),
    WeakNext(usize),
    Always(usize),
    Eventually(usize),
    WeakUntil(usize, usize),
    StrongRelease(usize, usize),
}

// Post-order: children precede their parent, the root is last.
fn compile<'a>(formula: &'a Constraint, nodes: &mut Vec<Node<'a>>) -> usize {
    let node = match formula {
        Formula::Atom(c) => Node::Atom(c),
        Formula::And(a, b) => Node::And(compile(a, nodes), compile(b, nodes)),
        Formula::Or(a, b) => Node::Or(compile(a, nodes), compile(b, nodes)),
        Formula::StrongNext(a) => Node::StrongNext(compile(a, nodes)),
        Formula::WeakNext(a) => Node::WeakNext(compile(a, nodes)),
        Formula::Always(a) => Node::Always(compile(a, nodes)),
        Formula::Eventually(a) => Node::Eventually(compile(a, nodes)),
        Formula::WeakUntil(a, b) => Node::WeakUntil(compile(a, nodes), compile(b, nodes)),
        Formula::StrongRelease(a, b) => {
            Node::StrongRelease(compile(a, nodes), compile(b, nodes))
        }
    };
    nodes.push(node);
    nodes.len() - 1
}

pub(crate) fn memoized<S: Semantics>(
    sem: &S,
    formula: &Constraint,
    steps: usize,
    t0: usize,
) -> Result<S::Value> {
    if t0 >= steps {
        return Ok(sem.beyond_end());
    }
    let mut nodes = Vec::new();
    let root = compile(formula, &mut nodes);

    // `next[k]` holds node k at step t+1; initially the row past the end.
    let mut next: Vec<S::Value> = vec![sem.beyond_end(); nodes.len()];
    let mut current: Vec<S::Value> = Vec::with_capacity(nodes.len());
    for t in (t0..steps).rev() {
        let last = t + 1 == steps;
        current.clear();
        for node in &nodes {
            let guard_or = |k: usize, next: &[S::Value]| {
                if last {
                    sem.end_guard()
                } else {
                    next[k].clone()
                }
            };
            let self_index = current.len();
            let value = match *node {
                Node::Atom(c) => sem.atom(c, t)?,
                Node::And(a, b) => sem.and(&current[a], &current[b])?,
                Node::Or(a, b) => sem.or(&current[a], &current[b])?,
                Node::StrongNext(a) => next[a].clone(),
                Node::WeakNext(a) => guard_or(a, &next),
                Node::Always(a) => sem.and(&current[a], &guard_or(self_index, &next))?,
                Node::Eventually(a) => sem.or(&current[a], &next[self_index])?,
                Node::WeakUntil(a, b) => {
                    let held = sem.and(&current[a], &guard_or(self_index, &next))?;
                    sem.or(&current[b], &held)?
                }
                Node::StrongRelease(a, b) => {
                    let both = sem.and(&current[a], &current[b])?;
                    let carried = sem.and(&current[b], &next[self_index])?;
                    sem.or(&both, &carried)?
                }
            };
            current.push(value);
        }
        std::mem::swap(&mut next, &mut current);
    }
    Ok(next.swap_remove(root))
}
