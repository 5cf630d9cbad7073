//! C ABI over the constraint engine for host autograd bridges.
//!
//! A host parses a formula once into an opaque handle, then calls [`ltlf_loss`]
//! in its forward pass and [`ltlf_grad`] or [`ltlf_backward`] in its backward
//! pass. Traces cross as a contiguous row-major `f64` buffer plus a dims
//! array; results are written into caller-owned buffers.
//!
//! Every function returns a status code: [`LTLF_OK`], [`LTLF_PARSE`] for
//! formula errors, [`LTLF_DATA`] for shape, bounds and argument errors, and
//! [`LTLF_PANIC`] if the engine panicked.

use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use ltlf_core::{dloss, loss, Constraint, Error, Gamma, LossConfig, RealTensor, Result, TraceBatch};

pub const LTLF_OK: c_int = 0;
pub const LTLF_PANIC: c_int = 1;
pub const LTLF_PARSE: c_int = 2;
pub const LTLF_DATA: c_int = 3;

/// A parsed constraint with its loss configuration; immutable once built.
#[derive(Clone, Debug)]
pub struct BoundConstraint {
    pub constraint: Constraint,
    pub config: LossConfig,
}

impl BoundConstraint {
    pub fn new(text: &str, gamma: impl Into<Gamma>) -> Result<Self> {
        Ok(BoundConstraint {
            constraint: Constraint::parse(text)?,
            config: LossConfig::new(gamma),
        })
    }

    fn trace(dims: &[usize], buffer: &[f64]) -> Result<TraceBatch> {
        TraceBatch::new(RealTensor::new(dims.to_vec(), buffer.to_vec())?)
    }

    /// Batch-shaped loss.
    pub fn forward(&self, dims: &[usize], buffer: &[f64], t: usize) -> Result<Vec<f64>> {
        let trace = Self::trace(dims, buffer)?;
        Ok(loss(&self.constraint, &trace, t, &self.config)?.into_elems())
    }

    /// Trace-shaped gradient of `Σ_b upstream[b]·loss[b]`.
    pub fn backward(
        &self,
        dims: &[usize],
        buffer: &[f64],
        t: usize,
        upstream: &[f64],
    ) -> Result<Vec<f64>> {
        contract(&self.constraint, &self.config, dims, buffer, t, upstream)
    }
}

fn contract(
    constraint: &Constraint,
    config: &LossConfig,
    dims: &[usize],
    buffer: &[f64],
    t: usize,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    let trace = BoundConstraint::trace(dims, buffer)?;
    let batch = trace.batch_size();
    if upstream.len() != batch {
        return Err(Error::Shape(format!(
            "upstream gradient has {} entries, batch has {batch}",
            upstream.len()
        )));
    }
    let mut grad = dloss(constraint, &trace, t, config)?.into_elems();
    for (k, g) in grad.iter_mut().enumerate() {
        *g *= upstream[k % batch];
    }
    Ok(grad)
}

/// Opaque handle type seen by C callers.
pub struct LtlfFormula(Constraint);

fn status(e: &Error) -> c_int {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier(_) => LTLF_PARSE,
        _ => LTLF_DATA,
    }
}

fn guarded(f: impl FnOnce() -> Result<()>) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LTLF_OK,
        Ok(Err(e)) => status(&e),
        Err(_) => LTLF_PANIC,
    }
}

fn null_arg(what: &str) -> Error {
    Error::Invalid(format!("{what} is null"))
}

/// Parses `text` (NUL-terminated UTF-8) into `*out`. On failure `*out` is
/// set to null.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltlf_parse_formula(text: *const c_char, out: *mut *mut LtlfFormula) -> c_int {
    if out.is_null() {
        return LTLF_DATA;
    }
    *out = std::ptr::null_mut();
    guarded(|| {
        if text.is_null() {
            return Err(null_arg("formula text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Error::Invalid(format!("formula text is not UTF-8: {e}")))?;
        let c = Constraint::parse(text)?;
        *out = Box::into_raw(Box::new(LtlfFormula(c)));
        Ok(())
    })
}

/// Releases a handle from [`ltlf_parse_formula`]. Null is ignored.
///
/// # Safety
/// `handle` must come from [`ltlf_parse_formula`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ltlf_free(handle: *mut LtlfFormula) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

struct Call<'a> {
    constraint: &'a Constraint,
    config: LossConfig,
    dims: &'a [usize],
    buffer: &'a [f64],
}

unsafe fn call<'a>(
    handle: *const LtlfFormula,
    dims: *const usize,
    ndims: usize,
    buffer: *const f64,
    gamma: f64,
) -> Result<Call<'a>> {
    if handle.is_null() {
        return Err(null_arg("handle"));
    }
    if dims.is_null() && ndims > 0 {
        return Err(null_arg("dims"));
    }
    let dims: &[usize] = if ndims == 0 { &[] } else { slice::from_raw_parts(dims, ndims) };
    let len: usize = dims.iter().product();
    if buffer.is_null() && len > 0 {
        return Err(null_arg("trace buffer"));
    }
    let buffer: &[f64] = if len == 0 { &[] } else { slice::from_raw_parts(buffer, len) };
    Ok(Call {
        constraint: &(*handle).0,
        config: LossConfig::new(gamma),
        dims,
        buffer,
    })
}

unsafe fn write_out(values: &[f64], out: *mut f64, out_len: usize) -> Result<()> {
    if out_len != values.len() {
        return Err(Error::Shape(format!(
            "output buffer holds {out_len} values, result has {}",
            values.len()
        )));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null_arg("output buffer"));
        }
        slice::from_raw_parts_mut(out, out_len).copy_from_slice(values);
    }
    Ok(())
}

/// Writes the batch-shaped loss (`Π dims[2..]` values) into `out`.
///
/// # Safety
/// `dims` holds `ndims` entries, `buffer` holds `Π dims` values and `out`
/// holds `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn ltlf_loss(
    handle: *const LtlfFormula,
    dims: *const usize,
    ndims: usize,
    buffer: *const f64,
    t: usize,
    gamma: f64,
    out: *mut f64,
    out_len: usize,
) -> c_int {
    guarded(|| {
        let c = call(handle, dims, ndims, buffer, gamma)?;
        let trace = BoundConstraint::trace(c.dims, c.buffer)?;
        write_out(loss(c.constraint, &trace, t, &c.config)?.elems(), out, out_len)
    })
}

/// Writes the trace-shaped gradient (`Π dims` values) into `out`.
///
/// # Safety
/// As for [`ltlf_loss`], with `out` holding `Π dims` values.
#[no_mangle]
pub unsafe extern "C" fn ltlf_grad(
    handle: *const LtlfFormula,
    dims: *const usize,
    ndims: usize,
    buffer: *const f64,
    t: usize,
    gamma: f64,
    out: *mut f64,
    out_len: usize,
) -> c_int {
    guarded(|| {
        let c = call(handle, dims, ndims, buffer, gamma)?;
        let trace = BoundConstraint::trace(c.dims, c.buffer)?;
        let g = dloss(c.constraint, &trace, t, &c.config)?;
        write_out(g.elems(), out, out_len)
    })
}

/// Backward pass: the gradient contracted with a batch-shaped upstream
/// gradient of `upstream_len` values.
///
/// # Safety
/// As for [`ltlf_grad`], with `upstream` holding `upstream_len` values.
#[no_mangle]
pub unsafe extern "C" fn ltlf_backward(
    handle: *const LtlfFormula,
    dims: *const usize,
    ndims: usize,
    buffer: *const f64,
    t: usize,
    gamma: f64,
    upstream: *const f64,
    upstream_len: usize,
    out: *mut f64,
    out_len: usize,
) -> c_int {
    guarded(|| {
        let c = call(handle, dims, ndims, buffer, gamma)?;
        if upstream.is_null() && upstream_len > 0 {
            return Err(null_arg("upstream gradient"));
        }
        let up: &[f64] = if upstream_len == 0 { &[] } else { slice::from_raw_parts(upstream, upstream_len) };
        write_out(&contract(c.constraint, &c.config, c.dims, c.buffer, t, up)?, out, out_len)
    })
}
