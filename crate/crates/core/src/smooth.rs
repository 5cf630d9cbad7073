//! Smoothed max, min and Gaussian kernels and their chain-rule derivatives.
//!
//! `γ ≤ 0` selects the exact (non-smooth) functions. For `γ > 0` each kernel
//! has a naive form, which is the textbook log-sum-exp and overflows once
//! `|a|/γ` passes roughly 709, and a stable form that only ever
//! exponentiates non-positive numbers. The naive form exists for
//! differential testing.
//!
//! Derivative kernels take the primal operands together with their
//! derivative tensors. The operands are batch-shaped while the derivative
//! tensors carry the full trace shape, whose trailing axes are the batch
//! axes; the per-batch weights are broadcast over the leading axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::RealTensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    Naive,
    #[default]
    Stable,
}

/// Smoothing factor together with the kernel form used to evaluate it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub value: f64,
    #[serde(default)]
    pub mode: KernelMode,
}

impl Gamma {
    pub fn new(value: f64) -> Self {
        Gamma {
            value,
            mode: KernelMode::Stable,
        }
    }

    pub fn naive(value: f64) -> Self {
        Gamma {
            value,
            mode: KernelMode::Naive,
        }
    }

    pub fn exact() -> Self {
        Gamma::new(0.0)
    }

    pub fn is_smooth(&self) -> bool {
        self.value > 0.0
    }
}

impl From<f64> for Gamma {
    fn from(value: f64) -> Self {
        Gamma::new(value)
    }
}

pub fn max_gamma_naive(a: f64, b: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return a.max(b);
    }
    gamma * ((a / gamma).exp() + (b / gamma).exp()).ln()
}

/// Four-case log-sum-exp with the larger operand factored out.
pub fn max_gamma_stable(a: f64, b: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        a.max(b)
    } else if b < a {
        a + gamma * ((b - a) / gamma).exp().ln_1p()
    } else if a < b {
        b + gamma * ((a - b) / gamma).exp().ln_1p()
    } else {
        a + gamma * std::f64::consts::LN_2
    }
}

pub fn min_gamma_naive(a: f64, b: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return a.min(b);
    }
    -gamma * ((-a / gamma).exp() + (-b / gamma).exp()).ln()
}

pub fn min_gamma_stable(a: f64, b: f64, gamma: f64) -> f64 {
    -max_gamma_stable(-a, -b, gamma)
}

pub fn max_gamma(a: f64, b: f64, gamma: Gamma) -> f64 {
    match gamma.mode {
        KernelMode::Stable => max_gamma_stable(a, b, gamma.value),
        KernelMode::Naive => max_gamma_naive(a, b, gamma.value),
    }
}

pub fn min_gamma(a: f64, b: f64, gamma: Gamma) -> f64 {
    match gamma.mode {
        KernelMode::Stable => min_gamma_stable(a, b, gamma.value),
        KernelMode::Naive => min_gamma_naive(a, b, gamma.value),
    }
}

pub fn gaussian_gamma(a: f64, gamma: Gamma) -> f64 {
    let g = gamma.value;
    if g <= 0.0 {
        if a == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (-(a * a) / (2.0 * g * g)).exp()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(∂max_γ/∂a, ∂max_γ/∂b)`. Hard max sends everything to the larger
/// operand, ties to `a`.
pub fn max_weights(a: f64, b: f64, gamma: f64) -> (f64, f64) {
    if gamma <= 0.0 {
        if a >= b {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        (logistic((a - b) / gamma), logistic((b - a) / gamma))
    }
}

/// `(∂min_γ/∂a, ∂min_γ/∂b)`. Hard min sends everything to the smaller
/// operand, ties to `a`.
pub fn min_weights(a: f64, b: f64, gamma: f64) -> (f64, f64) {
    if gamma <= 0.0 {
        if a <= b {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        (logistic((b - a) / gamma), logistic((a - b) / gamma))
    }
}

/// `d gaussian_γ / da`; zero for the exact indicator.
pub fn gaussian_slope(a: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        0.0
    } else {
        let g2 = gamma * gamma;
        (-a / g2) * (-(a * a) / (2.0 * g2)).exp()
    }
}

pub fn tmax(a: &RealTensor, b: &RealTensor, gamma: Gamma) -> Result<RealTensor> {
    a.binop(b, |&x, &y| max_gamma(x, y, gamma))
}

pub fn tmin(a: &RealTensor, b: &RealTensor, gamma: Gamma) -> Result<RealTensor> {
    a.binop(b, |&x, &y| min_gamma(x, y, gamma))
}

pub fn tgaussian(a: &RealTensor, gamma: Gamma) -> RealTensor {
    a.unop(|&x| gaussian_gamma(x, gamma))
}

fn check_broadcast(operand: &RealTensor, deriv: &RealTensor) -> Result<()> {
    if !deriv.dims().ends_with(operand.dims()) {
        return Err(Error::Shape(format!(
            "derivative dims {} do not end with operand dims {}",
            deriv.shape(),
            operand.shape()
        )));
    }
    Ok(())
}

fn chain(
    a: &RealTensor,
    da: &RealTensor,
    b: &RealTensor,
    db: &RealTensor,
    weights: impl Fn(f64, f64) -> (f64, f64),
) -> Result<RealTensor> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "operand dims {} and {} differ",
            a.shape(),
            b.shape()
        )));
    }
    if da.shape() != db.shape() {
        return Err(Error::Shape(format!(
            "derivative dims {} and {} differ",
            da.shape(),
            db.shape()
        )));
    }
    check_broadcast(a, da)?;
    let w: Vec<(f64, f64)> = a
        .elems()
        .iter()
        .zip(b.elems())
        .map(|(&x, &y)| weights(x, y))
        .collect();
    let inner = w.len();
    if inner == 0 {
        return Ok(da.unop(|_| 0.0));
    }
    let elems = da
        .elems()
        .iter()
        .zip(db.elems())
        .enumerate()
        .map(|(k, (&ga, &gb))| {
            let (wa, wb) = w[k % inner];
            wa * ga + wb * gb
        })
        .collect();
    RealTensor::new(da.shape().clone(), elems)
}

/// Chain rule for [`tmax`].
pub fn dmax(
    a: &RealTensor,
    da: &RealTensor,
    b: &RealTensor,
    db: &RealTensor,
    gamma: Gamma,
) -> Result<RealTensor> {
    chain(a, da, b, db, |x, y| max_weights(x, y, gamma.value))
}

/// Chain rule for [`tmin`].
pub fn dmin(
    a: &RealTensor,
    da: &RealTensor,
    b: &RealTensor,
    db: &RealTensor,
    gamma: Gamma,
) -> Result<RealTensor> {
    chain(a, da, b, db, |x, y| min_weights(x, y, gamma.value))
}

/// Chain rule for [`tgaussian`].
pub fn dgaussian(a: &RealTensor, da: &RealTensor, gamma: Gamma) -> Result<RealTensor> {
    check_broadcast(a, da)?;
    let slopes: Vec<f64> = a
        .elems()
        .iter()
        .map(|&x| gaussian_slope(x, gamma.value))
        .collect();
    let inner = slopes.len();
    if inner == 0 {
        return Ok(da.unop(|_| 0.0));
    }
    let elems = da
        .elems()
        .iter()
        .enumerate()
        .map(|(k, &g)| slopes[k % inner] * g)
        .collect();
    RealTensor::new(da.shape().clone(), elems)
}
