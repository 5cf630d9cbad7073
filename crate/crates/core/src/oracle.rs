//! Reference semantics over a plain list of states.
//!
//! Nothing here touches tensors. `eval_ref` is written from the quantifier
//! readings of the operators rather than the recursive tensor cases, so the
//! two implementations can disagree if either is wrong. `loss_ref` follows
//! the loss recursion literally on scalars; it is exponential in the
//! nesting depth and meant only for small instances.

use crate::error::{Error, Result};
use crate::lang::{Cmp, Comparison, Constraint, FeatureRef, Formula};
use crate::smooth::{gaussian_gamma, max_gamma, min_gamma, Gamma};

/// A single trace as an ordered list of feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ListTrace {
    pub states: Vec<Vec<f64>>,
}

impl ListTrace {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.len() != first.len()) {
                return Err(Error::Shape("states differ in length".into()));
            }
        }
        Ok(ListTrace { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn value(&self, t: usize, f: FeatureRef) -> Result<f64> {
        let state = &self.states[t];
        state.get(f.0).copied().ok_or_else(|| Error::Bounds {
            index: vec![t, f.0],
            dims: vec![self.states.len(), state.len()],
        })
    }
}

fn compare(c: &Comparison<FeatureRef>, tr: &ListTrace, t: usize) -> Result<bool> {
    let a = tr.value(t, c.lhs)?;
    let b = tr.value(t, c.rhs)?;
    Ok(match c.op {
        Cmp::Le => a <= b,
        Cmp::Lt => a < b,
        Cmp::Eq => a == b,
        Cmp::Ne => a != b,
    })
}

/// Truth of `formula` on the suffix of `tr` starting at `t`. Every formula
/// is false on the empty suffix.
pub fn eval_ref(formula: &Constraint, tr: &ListTrace, t: usize) -> Result<bool> {
    let n = tr.len();
    if t >= n {
        return Ok(false);
    }
    let holds = |f: &Constraint, j: usize| eval_ref(f, tr, j);
    Ok(match formula {
        Formula::Atom(c) => compare(c, tr, t)?,
        Formula::And(a, b) => holds(a, t)? && holds(b, t)?,
        Formula::Or(a, b) => holds(a, t)? || holds(b, t)?,
        // a successor state must exist
        Formula::StrongNext(a) => t + 1 < n && holds(a, t + 1)?,
        // vacuous when there is no successor
        Formula::WeakNext(a) => t + 1 == n || holds(a, t + 1)?,
        Formula::Always(a) => {
            for j in t..n {
                if !holds(a, j)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Eventually(a) => {
            for j in t..n {
                if holds(a, j)? {
                    return Ok(true);
                }
            }
            false
        }
        // b at some j with a on [t, j), or a on the whole suffix
        Formula::WeakUntil(a, b) => {
            for j in t..n {
                if holds(b, j)? {
                    return Ok(true);
                }
                if !holds(a, j)? {
                    return Ok(false);
                }
            }
            true
        }
        // a and b together at some j, with b on [t, j)
        Formula::StrongRelease(a, b) => {
            for j in t..n {
                if !holds(b, j)? {
                    return Ok(false);
                }
                if holds(a, j)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

fn atom_loss(c: &Comparison<FeatureRef>, tr: &ListTrace, t: usize, g: Gamma) -> Result<f64> {
    let a = tr.value(t, c.lhs)?;
    let b = tr.value(t, c.rhs)?;
    let le = |x: f64, y: f64| max_gamma(x - y, 0.0, g);
    Ok(match c.op {
        Cmp::Le => le(a, b),
        Cmp::Ne => gaussian_gamma(a - b, g),
        Cmp::Lt => max_gamma(le(a, b), gaussian_gamma(a - b, g), g),
        Cmp::Eq => max_gamma(le(a, b), le(b, a), g),
    })
}

/// Scalar loss of `formula` on `tr` from step `t`.
pub fn loss_ref(formula: &Constraint, tr: &ListTrace, t: usize, gamma: impl Into<Gamma>) -> Result<f64> {
    let g = gamma.into();
    let n = tr.len();
    if t >= n {
        return Ok(1.0);
    }
    let last = t + 1 == n;
    let l = |f: &Constraint, j: usize| loss_ref(f, tr, j, g);
    let guarded = |f: &Constraint| if last { Ok(0.0) } else { l(f, t + 1) };
    Ok(match formula {
        Formula::Atom(c) => atom_loss(c, tr, t, g)?,
        Formula::And(a, b) => max_gamma(l(a, t)?, l(b, t)?, g),
        Formula::Or(a, b) => min_gamma(l(a, t)?, l(b, t)?, g),
        Formula::StrongNext(a) => l(a, t + 1)?,
        Formula::WeakNext(a) => guarded(a)?,
        Formula::Always(a) => max_gamma(l(a, t)?, guarded(formula)?, g),
        Formula::Eventually(a) => min_gamma(l(a, t)?, l(formula, t + 1)?, g),
        Formula::WeakUntil(a, b) => {
            let rest = max_gamma(l(a, t)?, guarded(formula)?, g);
            min_gamma(l(b, t)?, rest, g)
        }
        Formula::StrongRelease(a, b) => min_gamma(
            max_gamma(l(a, t)?, l(b, t)?, g),
            max_gamma(l(b, t)?, l(formula, t + 1)?, g),
            g,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(rows: &[&[f64]]) -> ListTrace {
        ListTrace::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn c(text: &str) -> Constraint {
        Constraint::parse(text).unwrap()
    }

    #[test]
    fn textbook_cases() {
        let one = tr(&[&[0.0, 1.0]]);
        assert!(eval_ref(&c("G (f0 <= f1)"), &one, 0).unwrap());
        assert!(!eval_ref(&c("N (f0 <= f1)"), &one, 0).unwrap());
        assert!(eval_ref(&c("X (f1 <= f0)"), &one, 0).unwrap());
        assert!(!eval_ref(&c("F (f0 <= f1)"), &one, 1).unwrap());
    }

    #[test]
    fn loss_cases() {
        let one = tr(&[&[0.5, 0.2]]);
        assert!((loss_ref(&c("f0 <= f1"), &one, 0, 0.0).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(loss_ref(&c("G (f0 <= f1)"), &one, 1, 0.1).unwrap(), 1.0);
        assert_eq!(loss_ref(&c("X (f0 <= f1)"), &one, 0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_feature() {
        let one = tr(&[&[0.5]]);
        assert!(eval_ref(&c("f0 <= f1"), &one, 0).is_err());
        assert!(loss_ref(&c("f2 <= f0"), &one, 0, 0.1).is_err());
    }
}
