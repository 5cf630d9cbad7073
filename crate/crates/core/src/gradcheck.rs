//! Finite-difference checks of `dL`.

use serde::Serialize;

use crate::error::Result;
use crate::lang::Constraint;
use crate::loss::{loss, loss_and_grad, LossConfig};
use crate::par::{self, Execution};
use crate::tensor::{unflatten, RealTensor};
use crate::trace::TraceBatch;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct GradcheckOptions {
    /// Relative tolerance per element.
    pub tolerance: f64,
    /// Differences at or below this pass regardless of the relative error.
    pub abs_floor: f64,
    /// Test hook: add 1 to the analytic gradient at this flat index.
    pub corrupt: Option<usize>,
    pub execution: Execution,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            tolerance: DEFAULT_TOLERANCE,
            abs_floor: ABS_FLOOR,
            corrupt: None,
            execution: Execution::default(),
        }
    }
}

/// Per-element comparison of analytic against numeric derivatives.
#[derive(Clone, Debug, Serialize)]
pub struct ElementCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl ElementCheck {
    fn new(analytic: f64, numeric: f64) -> Self {
        let abs_err = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel_err = if scale == 0.0 { 0.0 } else { abs_err / scale };
        ElementCheck {
            analytic,
            numeric,
            abs_err,
            rel_err,
        }
    }

    pub fn passes(&self, tolerance: f64, abs_floor: f64) -> bool {
        self.abs_err <= abs_floor || self.rel_err < tolerance
    }

    /// Relative error counted against the tolerance; zero when under the
    /// absolute floor.
    fn effective(&self, abs_floor: f64) -> f64 {
        if self.abs_err <= abs_floor {
            0.0
        } else {
            self.rel_err
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub passed: bool,
    pub tolerance: f64,
    pub abs_floor: f64,
    pub checked: usize,
    pub failures: usize,
    /// Largest relative error among elements above the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Full index of the element with the largest effective error.
    pub argmax: Option<Vec<usize>>,
    #[serde(skip)]
    pub elements: Vec<ElementCheck>,
}

impl GradcheckReport {
    /// Failure count at each tolerance, for a sweep.
    pub fn sweep(&self, tolerances: &[f64]) -> Vec<(f64, usize)> {
        tolerances
            .iter()
            .map(|&tol| {
                let failing = self
                    .elements
                    .iter()
                    .filter(|e| !e.passes(tol, self.abs_floor))
                    .count();
                (tol, failing)
            })
            .collect()
    }
}

/// Central-difference step for an element of value `e`.
pub fn step_for(e: f64) -> f64 {
    1e-6_f64.max(1e-6 * e.abs())
}

/// Batch-summed loss, the scalar whose gradient `dL` returns.
fn total(formula: &Constraint, trace: &TraceBatch, t: usize, cfg: &LossConfig) -> Result<f64> {
    Ok(loss(formula, trace, t, cfg)?.elems().iter().sum())
}

fn with_element(trace: &TraceBatch, k: usize, value: f64) -> TraceBatch {
    let tensor = trace.tensor();
    let mut elems = tensor.elems().to_vec();
    elems[k] = value;
    let tensor = RealTensor::new(tensor.shape().clone(), elems).expect("same length");
    TraceBatch::new(tensor).expect("same order")
}

/// Numeric gradient of the batch-summed loss by central differences.
pub fn numeric_grad(
    formula: &Constraint,
    trace: &TraceBatch,
    t: usize,
    cfg: &LossConfig,
    exec: Execution,
) -> Result<RealTensor> {
    let elems = trace.tensor().elems();
    let cfg = LossConfig {
        counter_enabled: false,
        ..*cfg
    };
    let parts = par::map_range(exec, elems.len(), |k| -> Result<f64> {
        let e = elems[k];
        let h = step_for(e);
        let up = total(formula, &with_element(trace, k, e + h), t, &cfg)?;
        let down = total(formula, &with_element(trace, k, e - h), t, &cfg)?;
        Ok((up - down) / (2.0 * h))
    });
    let values = parts.into_iter().collect::<Result<Vec<_>>>()?;
    RealTensor::new(trace.shape().clone(), values)
}

pub fn gradcheck(
    formula: &Constraint,
    trace: &TraceBatch,
    t: usize,
    cfg: &LossConfig,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let cfg = LossConfig {
        counter_enabled: false,
        ..*cfg
    };
    let mut analytic = loss_and_grad(formula, trace, t, &cfg)?
        .grad
        .expect("gradient requested")
        .into_elems();
    if let Some(k) = opts.corrupt {
        if let Some(slot) = analytic.get_mut(k) {
            *slot += 1.0;
        }
    }
    let numeric = numeric_grad(formula, trace, t, &cfg, opts.execution)?;
    let elements: Vec<ElementCheck> = analytic
        .iter()
        .zip(numeric.elems())
        .map(|(&a, &n)| ElementCheck::new(a, n))
        .collect();

    let mut worst: Option<(usize, f64)> = None;
    for (k, e) in elements.iter().enumerate() {
        let eff = e.effective(opts.abs_floor);
        if worst.map_or(eff > 0.0, |(_, w)| eff > w) {
            worst = Some((k, eff));
        }
    }
    let failures = elements
        .iter()
        .filter(|e| !e.passes(opts.tolerance, opts.abs_floor))
        .count();
    let argmax = worst
        .map(|(k, _)| unflatten(k, trace.shape()))
        .transpose()?;
    Ok(GradcheckReport {
        passed: failures == 0,
        tolerance: opts.tolerance,
        abs_floor: opts.abs_floor,
        checked: elements.len(),
        failures,
        max_rel_err: worst.map_or(0.0, |(_, w)| w),
        max_abs_err: elements.iter().map(|e| e.abs_err).fold(0.0, f64::max),
        argmax,
        elements,
    })
}
