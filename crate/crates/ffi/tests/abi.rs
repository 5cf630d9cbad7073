use std::ffi::CString;
use std::path::PathBuf;
use std::ptr;

use ltlf_core::corpus::{corpus, CorpusLimits};
use ltlf_ffi::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Handle(*mut LtlfFormula);

impl Handle {
    fn parse(text: &str) -> Result<Handle, i32> {
        let c = CString::new(text).unwrap();
        let mut h = ptr::null_mut();
        match unsafe { ltlf_parse_formula(c.as_ptr(), &mut h) } {
            LTLF_OK => Ok(Handle(h)),
            code => {
                assert!(h.is_null());
                Err(code)
            }
        }
    }

    fn loss(&self, dims: &[usize], buf: &[f64], t: usize, gamma: f64) -> Vec<f64> {
        let mut out = vec![f64::NAN; dims[2..].iter().product()];
        let code = unsafe {
            ltlf_loss(self.0, dims.as_ptr(), dims.len(), buf.as_ptr(), t, gamma, out.as_mut_ptr(), out.len())
        };
        assert_eq!(code, LTLF_OK);
        out
    }

    fn grad(&self, dims: &[usize], buf: &[f64], t: usize, gamma: f64) -> Vec<f64> {
        let mut out = vec![f64::NAN; buf.len()];
        let code = unsafe {
            ltlf_grad(self.0, dims.as_ptr(), dims.len(), buf.as_ptr(), t, gamma, out.as_mut_ptr(), out.len())
        };
        assert_eq!(code, LTLF_OK);
        out
    }

    fn backward(&self, dims: &[usize], buf: &[f64], t: usize, gamma: f64, up: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NAN; buf.len()];
        let code = unsafe {
            ltlf_backward(
                self.0,
                dims.as_ptr(),
                dims.len(),
                buf.as_ptr(),
                t,
                gamma,
                up.as_ptr(),
                up.len(),
                out.as_mut_ptr(),
                out.len(),
            )
        };
        assert_eq!(code, LTLF_OK);
        out
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { ltlf_free(self.0) }
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn matches_cli_goldens_bitwise() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/goldens/loss_grad.json");
    let goldens: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let cases = goldens["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 50);
    for case in cases {
        let h = Handle::parse(case["formula"].as_str().unwrap()).unwrap();
        let dims: Vec<usize> = case["trace"]["dims"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d.as_u64().unwrap() as usize)
            .collect();
        let buf = floats(&case["trace"]["elems"]);
        let t = case["t"].as_u64().unwrap() as usize;
        let gamma = case["gamma"].as_f64().unwrap();
        let name = &case["name"];
        assert_eq!(bits(&h.loss(&dims, &buf, t, gamma)), bits(&floats(&case["loss"]["elems"])), "{name}");
        let grad = h.grad(&dims, &buf, t, gamma);
        assert_eq!(bits(&grad), bits(&floats(&case["grad"]["elems"])), "{name}");
        let ones = vec![1.0; dims[2..].iter().product()];
        assert_eq!(bits(&h.backward(&dims, &buf, t, gamma, &ones)), bits(&grad), "{name}");
    }
}

#[test]
fn base_case_and_identical_batch() {
    let h = Handle::parse("G (f0 <= f1)").unwrap();
    let dims = [3, 2, 2];
    // both batch slices hold the same trace
    let buf = [0.1, 0.1, 0.5, 0.5, 0.7, 0.7, 0.2, 0.2, 0.3, 0.3, 0.9, 0.9];
    assert_eq!(h.loss(&dims, &buf, 3, 0.05), [1.0, 1.0]);
    let l = h.loss(&dims, &buf, 0, 0.05);
    assert_eq!(l[0].to_bits(), l[1].to_bits());
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let h = Handle::parse("F (f0 != f1)").unwrap();
    let dims = [2, 2, 3];
    let buf: Vec<f64> = (0..12).map(|k| k as f64 * 0.1).collect();
    assert!(h.backward(&dims, &buf, 0, 0.05, &[0.0; 3]).iter().all(|g| *g == 0.0));
}

// Σ_b u_b·loss_b by central differences against the contracted backward pass.
#[test]
fn backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let limits = CorpusLimits {
        max_batch: 3,
        ..CorpusLimits::default()
    };
    for (k, inst) in corpus(31, 20, &limits).iter().enumerate() {
        let gamma = [0.5, 0.05][k % 2];
        let h = Handle::parse(&inst.formula.to_string()).unwrap();
        let dims = inst.trace.shape().dims().to_vec();
        let buf = inst.trace.tensor().elems().to_vec();
        let batch: usize = dims[2..].iter().product();
        let up: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let scalar = |b: &[f64]| -> f64 {
            h.loss(&dims, b, inst.t, gamma).iter().zip(&up).map(|(l, u)| l * u).sum()
        };
        let analytic = h.backward(&dims, &buf, inst.t, gamma, &up);
        for i in 0..buf.len() {
            let step = 1e-6f64.max(1e-6 * buf[i].abs());
            let mut hi = buf.clone();
            hi[i] += step;
            let mut lo = buf.clone();
            lo[i] -= step;
            let fd = (scalar(&hi) - scalar(&lo)) / (2.0 * step);
            let err = (fd - analytic[i]).abs();
            assert!(
                err <= 1e-8 || err / fd.abs().max(analytic[i].abs()) < 1e-4,
                "instance {k} element {i}: {fd} vs {}",
                analytic[i]
            );
        }
    }
}

#[test]
fn error_codes() {
    assert_eq!(Handle::parse("G (f0 <=").err(), Some(LTLF_PARSE));
    assert_eq!(Handle::parse("G (x <= 1)").err(), Some(LTLF_PARSE));
    let h = Handle::parse("f0 <= f3").unwrap();
    let dims = [1usize, 2];
    let buf = [0.0, 1.0];
    let mut out = [0.0];
    let code = |h: *const LtlfFormula, out_len: usize, out: &mut [f64]| unsafe {
        ltlf_loss(h, dims.as_ptr(), 2, buf.as_ptr(), 0, 0.1, out.as_mut_ptr(), out_len)
    };
    assert_eq!(code(h.0, 1, &mut out), LTLF_DATA);
    let ok = Handle::parse("f0 <= f1").unwrap();
    assert_eq!(code(ok.0, 1, &mut out), LTLF_OK);
    assert!(out[0] > 0.0 && out[0] < 1e-5);
    assert_eq!(code(ok.0, 2, &mut [0.0, 0.0]), LTLF_DATA);
    assert_eq!(code(ptr::null(), 1, &mut out), LTLF_DATA);
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { ltlf_parse_formula(ptr::null(), &mut h2) }, LTLF_DATA);
    unsafe { ltlf_free(ptr::null_mut()) };
    let wrong_up = unsafe {
        ltlf_backward(ok.0, dims.as_ptr(), 2, buf.as_ptr(), 0, 0.1, [1.0, 2.0].as_ptr(), 2, [0.0; 2].as_mut_ptr(), 2)
    };
    assert_eq!(wrong_up, LTLF_DATA);
}

#[test]
fn safe_wrapper_agrees() {
    let bound = BoundConstraint::new("F (f0 <= f1) && G (f1 != f0)", 0.05).unwrap();
    let h = Handle::parse("F (f0 <= f1) && G (f1 != f0)").unwrap();
    let dims = [3, 2, 2];
    let buf: Vec<f64> = (0..12).map(|k| ((k * 7) % 5) as f64 * 0.2).collect();
    assert_eq!(bits(&bound.forward(&dims, &buf, 0).unwrap()), bits(&h.loss(&dims, &buf, 0, 0.05)));
    let up = [0.5, -1.5];
    assert_eq!(
        bits(&bound.backward(&dims, &buf, 0, &up).unwrap()),
        bits(&h.backward(&dims, &buf, 0, 0.05, &up))
    );
}
