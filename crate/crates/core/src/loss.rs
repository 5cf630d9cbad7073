//! Smooth loss `L` and its analytic gradient `dL` over batched traces.
//!
//! The loss is batch-shaped: one value per trace in the batch, zero (in the
//! `γ → 0` limit) exactly when the constraint holds. The gradient has the
//! full trace shape; its entry at a trace element is the derivative of the
//! batch-summed loss with respect to that element.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lang::{Cmp, Comparison, Constraint, FeatureRef};
use crate::recursion::{self, EvalCounter, Semantics};
use crate::smooth::{dgaussian, dmax, dmin, tgaussian, tmax, tmin, Gamma};
use crate::tensor::{RealTensor, Shape};
use crate::trace::TraceBatch;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma: Gamma,
    /// Evaluate through the uncached recursion and report its call count.
    #[serde(default)]
    pub counter_enabled: bool,
}

impl LossConfig {
    pub fn new(gamma: impl Into<Gamma>) -> Self {
        LossConfig {
            gamma: gamma.into(),
            counter_enabled: false,
        }
    }

    pub fn counted(mut self) -> Self {
        self.counter_enabled = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossResult {
    pub value: RealTensor,
    pub grad: Option<RealTensor>,
    pub counter: Option<EvalCounter>,
}

struct Loss<'a> {
    trace: &'a TraceBatch,
    batch: Shape,
    gamma: Gamma,
}

impl Loss<'_> {
    fn diff(&self, lhs: usize, rhs: usize, t: usize) -> Result<RealTensor> {
        self.trace.column(t, lhs)?.sub(&self.trace.column(t, rhs)?)
    }

    fn le(&self, lhs: usize, rhs: usize, t: usize) -> Result<RealTensor> {
        let zero = RealTensor::zeros(self.batch.clone());
        tmax(&self.diff(lhs, rhs, t)?, &zero, self.gamma)
    }

    fn ne(&self, lhs: usize, rhs: usize, t: usize) -> Result<RealTensor> {
        Ok(tgaussian(&self.diff(lhs, rhs, t)?, self.gamma))
    }
}

impl Semantics for Loss<'_> {
    type Value = RealTensor;

    fn beyond_end(&self) -> RealTensor {
        RealTensor::replicate(self.batch.clone(), 1.0)
    }

    fn end_guard(&self) -> RealTensor {
        RealTensor::zeros(self.batch.clone())
    }

    fn atom(&self, atom: &Comparison<FeatureRef>, t: usize) -> Result<RealTensor> {
        let (a, b) = (atom.lhs.0, atom.rhs.0);
        match atom.op {
            Cmp::Le => self.le(a, b, t),
            Cmp::Ne => self.ne(a, b, t),
            Cmp::Lt => tmax(&self.le(a, b, t)?, &self.ne(a, b, t)?, self.gamma),
            Cmp::Eq => tmax(&self.le(a, b, t)?, &self.le(b, a, t)?, self.gamma),
        }
    }

    fn and(&self, a: &RealTensor, b: &RealTensor) -> Result<RealTensor> {
        tmax(a, b, self.gamma)
    }

    fn or(&self, a: &RealTensor, b: &RealTensor) -> Result<RealTensor> {
        tmin(a, b, self.gamma)
    }
}

/// Loss value paired with its trace-shaped derivative.
#[derive(Clone, Debug)]
struct Dual {
    value: RealTensor,
    grad: RealTensor,
}

struct Grad<'a> {
    primal: Loss<'a>,
}

impl Grad<'_> {
    fn zeros(&self) -> RealTensor {
        RealTensor::zeros(self.primal.trace.shape().clone())
    }

    fn diff(&self, lhs: usize, rhs: usize, t: usize) -> Result<Dual> {
        let shape = self.primal.trace.shape();
        Ok(Dual {
            value: self.primal.diff(lhs, rhs, t)?,
            grad: crate::tensor::backsubt(&[t, lhs], shape)?
                .sub(&crate::tensor::backsubt(&[t, rhs], shape)?)?,
        })
    }

    fn le(&self, lhs: usize, rhs: usize, t: usize) -> Result<Dual> {
        let d = self.diff(lhs, rhs, t)?;
        let zero = Dual {
            value: RealTensor::zeros(self.primal.batch.clone()),
            grad: self.zeros(),
        };
        self.max(&d, &zero)
    }

    fn ne(&self, lhs: usize, rhs: usize, t: usize) -> Result<Dual> {
        let d = self.diff(lhs, rhs, t)?;
        let gamma = self.primal.gamma;
        Ok(Dual {
            value: tgaussian(&d.value, gamma),
            grad: dgaussian(&d.value, &d.grad, gamma)?,
        })
    }

    fn max(&self, a: &Dual, b: &Dual) -> Result<Dual> {
        let gamma = self.primal.gamma;
        Ok(Dual {
            value: tmax(&a.value, &b.value, gamma)?,
            grad: dmax(&a.value, &a.grad, &b.value, &b.grad, gamma)?,
        })
    }

    fn min(&self, a: &Dual, b: &Dual) -> Result<Dual> {
        let gamma = self.primal.gamma;
        Ok(Dual {
            value: tmin(&a.value, &b.value, gamma)?,
            grad: dmin(&a.value, &a.grad, &b.value, &b.grad, gamma)?,
        })
    }
}

impl Semantics for Grad<'_> {
    type Value = Dual;

    fn beyond_end(&self) -> Dual {
        Dual {
            value: self.primal.beyond_end(),
            grad: self.zeros(),
        }
    }

    fn end_guard(&self) -> Dual {
        Dual {
            value: self.primal.end_guard(),
            grad: self.zeros(),
        }
    }

    fn atom(&self, atom: &Comparison<FeatureRef>, t: usize) -> Result<Dual> {
        let (a, b) = (atom.lhs.0, atom.rhs.0);
        match atom.op {
            Cmp::Le => self.le(a, b, t),
            Cmp::Ne => self.ne(a, b, t),
            Cmp::Lt => self.max(&self.le(a, b, t)?, &self.ne(a, b, t)?),
            Cmp::Eq => self.max(&self.le(a, b, t)?, &self.le(b, a, t)?),
        }
    }

    fn and(&self, a: &Dual, b: &Dual) -> Result<Dual> {
        self.max(a, b)
    }

    fn or(&self, a: &Dual, b: &Dual) -> Result<Dual> {
        self.min(a, b)
    }
}

fn primal(trace: &TraceBatch, gamma: Gamma) -> Loss<'_> {
    Loss {
        trace,
        batch: trace.batch_shape(),
        gamma,
    }
}

/// `L(ρ, T, t, γ)`, one value per batch element.
pub fn loss(formula: &Constraint, trace: &TraceBatch, t: usize, cfg: &LossConfig) -> Result<RealTensor> {
    Ok(loss_with(formula, trace, t, cfg)?.value)
}

/// `dL(ρ, T, t, γ)`, shaped like the trace.
pub fn dloss(formula: &Constraint, trace: &TraceBatch, t: usize, cfg: &LossConfig) -> Result<RealTensor> {
    let result = loss_and_grad(formula, trace, t, cfg)?;
    Ok(result.grad.expect("gradient requested"))
}

/// Value and gradient from one pass.
pub fn loss_and_grad(
    formula: &Constraint,
    trace: &TraceBatch,
    t: usize,
    cfg: &LossConfig,
) -> Result<LossResult> {
    recursion::check_features(formula, trace)?;
    let sem = Grad {
        primal: primal(trace, cfg.gamma),
    };
    let (dual, counter) = drive(&sem, formula, trace.steps(), t, cfg.counter_enabled)?;
    Ok(LossResult {
        value: dual.value,
        grad: Some(dual.grad),
        counter,
    })
}

/// Loss value only, with the call count when the config asks for it.
pub fn loss_with(
    formula: &Constraint,
    trace: &TraceBatch,
    t: usize,
    cfg: &LossConfig,
) -> Result<LossResult> {
    recursion::check_features(formula, trace)?;
    let sem = primal(trace, cfg.gamma);
    let (value, counter) = drive(&sem, formula, trace.steps(), t, cfg.counter_enabled)?;
    Ok(LossResult {
        value,
        grad: None,
        counter,
    })
}

fn drive<S: Semantics>(
    sem: &S,
    formula: &Constraint,
    steps: usize,
    t: usize,
    counted: bool,
) -> Result<(S::Value, Option<EvalCounter>)> {
    if counted {
        let mut counter = EvalCounter::default();
        let value = recursion::uncached(sem, formula, steps, t, &mut counter)?;
        Ok((value, Some(counter)))
    } else {
        Ok((recursion::memoized(sem, formula, steps, t)?, None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn c(text: &str) -> Constraint {
        Constraint::parse(text).unwrap()
    }

    fn single(rows: &[&[f64]]) -> TraceBatch {
        TraceBatch::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn le_atom_hard_value() {
        let tr = single(&[&[0.5, 0.2]]);
        let v = loss(&c("f0 <= f1"), &tr, 0, &LossConfig::new(0.0)).unwrap();
        assert!((v.elems()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn past_end_is_one() {
        let tr = TraceBatch::new(RealTensor::zeros(vec![2, 2, 3])).unwrap();
        for g in [0.0, 0.1] {
            let v = loss(&c("G (f0 < f1)"), &tr, 2, &LossConfig::new(g)).unwrap();
            assert_eq!(v, RealTensor::replicate(vec![3], 1.0));
            let d = dloss(&c("G (f0 < f1)"), &tr, 2, &LossConfig::new(g)).unwrap();
            assert_eq!(d, RealTensor::zeros(vec![2, 2, 3]));
        }
    }

    #[test]
    fn eventually_is_hard_min_at_gamma_zero() {
        let tr = single(&[&[1.0, 0.25], &[0.5, 0.25], &[0.75, 0.25]]);
        let v = loss(&c("F (f0 <= f1)"), &tr, 0, &LossConfig::new(0.0)).unwrap();
        assert_eq!(v.elems(), &[0.25]);
        // no end guard: the value past the end (1) takes part in the min
        let far = single(&[&[3.0, 1.0], &[2.5, 1.0]]);
        let v = loss(&c("F (f0 <= f1)"), &far, 0, &LossConfig::new(0.0)).unwrap();
        assert_eq!(v.elems(), &[1.0]);
    }

    #[test]
    fn atom_gradient_is_local() {
        let tr = single(&[&[0.0, 0.0, 0.0], &[0.7, 0.2, 9.0], &[0.0, 0.0, 0.0]]);
        let cfg = LossConfig::new(0.05);
        let g = dloss(&c("f0 <= f1"), &tr, 1, &cfg).unwrap();
        let w = crate::smooth::max_weights(0.5, 0.0, 0.05).0;
        let mut expected = vec![0.0; 9];
        expected[3] = w;
        expected[4] = -w;
        assert_eq!(g.elems(), expected.as_slice());
    }

    #[test]
    fn combined_pass_matches_value_pass() {
        let tr = single(&[&[0.1, 0.4], &[0.5, 0.3], &[0.2, 0.2]]);
        let cfg = LossConfig::new(0.05);
        let f = c("(f0 < f1) U ((f1 == f0) || G (f0 != f1))");
        let both = loss_and_grad(&f, &tr, 0, &cfg).unwrap();
        assert_eq!(both.value, loss(&f, &tr, 0, &cfg).unwrap());
        assert!(both.counter.is_none());
        let counted = loss_and_grad(&f, &tr, 0, &cfg.counted()).unwrap();
        assert_eq!(counted.value, both.value);
        assert_eq!(counted.grad, both.grad);
        assert!(counted.counter.unwrap().calls > 1);
    }

    #[test]
    fn bounds_are_checked() {
        let tr = single(&[&[0.1, 0.4]]);
        let err = loss(&c("f0 <= f3"), &tr, 0, &LossConfig::new(0.1)).unwrap_err();
        assert!(matches!(err, Error::Bounds { .. }));
    }
}
