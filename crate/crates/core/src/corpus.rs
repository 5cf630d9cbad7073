//! Seeded random constraints and traces for property sweeps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::{Cmp, Constraint, FeatureRef, Formula};
use crate::oracle::ListTrace;
use crate::tensor::RealTensor;
use crate::trace::TraceBatch;

/// Size limits for generated instances.
#[derive(Clone, Copy, Debug)]
pub struct CorpusLimits {
    pub max_depth: usize,
    pub max_steps: usize,
    pub max_features: usize,
    pub max_batch: usize,
}

impl Default for CorpusLimits {
    fn default() -> Self {
        CorpusLimits {
            max_depth: 4,
            max_steps: 6,
            max_features: 3,
            max_batch: 2,
        }
    }
}

/// A constraint, a trace batch it is valid for, and a start step.
#[derive(Clone, Debug)]
pub struct Instance {
    pub formula: Constraint,
    pub trace: TraceBatch,
    pub t: usize,
}

impl Instance {
    /// The batch slices as list traces, in flat batch order.
    pub fn slices(&self) -> Vec<ListTrace> {
        (0..self.trace.batch_size())
            .map(|b| ListTrace {
                states: self.trace.slice_rows(b),
            })
            .collect()
    }
}

// A coarse grid makes ties, and hence `=`/`≠` atoms, common.
const GRID: [f64; 7] = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];

pub fn random_value(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.6) {
        *GRID.choose(rng).expect("non-empty")
    } else {
        rng.gen_range(-1.0..1.0)
    }
}

/// Random constraint of depth at most `depth` over features `0..features`.
pub fn random_constraint(rng: &mut impl Rng, depth: usize, features: usize) -> Constraint {
    if depth == 0 || rng.gen_bool(0.2) {
        let op = *[Cmp::Le, Cmp::Lt, Cmp::Eq, Cmp::Ne].choose(rng).expect("non-empty");
        let lhs = FeatureRef(rng.gen_range(0..features.max(1)));
        let rhs = FeatureRef(rng.gen_range(0..features.max(1)));
        return Formula::atom(op, lhs, rhs);
    }
    let d = depth - 1;
    match rng.gen_range(0..8) {
        0 => random_constraint(rng, d, features).and(random_constraint(rng, d, features)),
        1 => random_constraint(rng, d, features).or(random_constraint(rng, d, features)),
        2 => random_constraint(rng, d, features).strong_next(),
        3 => random_constraint(rng, d, features).weak_next(),
        4 => random_constraint(rng, d, features).always(),
        5 => random_constraint(rng, d, features).eventually(),
        6 => random_constraint(rng, d, features).until(random_constraint(rng, d, features)),
        _ => random_constraint(rng, d, features).release(random_constraint(rng, d, features)),
    }
}

/// Random trace of shape `(steps, features)` or `(steps, features, batch)`.
pub fn random_trace(rng: &mut impl Rng, steps: usize, features: usize, batch: Option<usize>) -> TraceBatch {
    let mut dims = vec![steps, features];
    dims.extend(batch);
    let n: usize = dims.iter().product();
    let elems = (0..n).map(|_| random_value(rng)).collect();
    TraceBatch::new(RealTensor::new(dims, elems).expect("length matches")).expect("order >= 2")
}

pub fn random_instance(rng: &mut impl Rng, limits: &CorpusLimits) -> Instance {
    let features = rng.gen_range(1..=limits.max_features);
    let steps = rng.gen_range(1..=limits.max_steps);
    let depth = rng.gen_range(0..=limits.max_depth);
    let batch = if rng.gen_bool(0.5) {
        None
    } else {
        Some(rng.gen_range(1..=limits.max_batch))
    };
    Instance {
        formula: random_constraint(rng, depth, features),
        trace: random_trace(rng, steps, features, batch),
        t: rng.gen_range(0..=steps),
    }
}

/// `count` instances drawn from one seeded stream.
pub fn corpus(seed: u64, count: usize, limits: &CorpusLimits) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, limits)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn respects_limits_and_seed() {
        let limits = CorpusLimits::default();
        let a = corpus(7, 200, &limits);
        let b = corpus(7, 200, &limits);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.formula, y.formula);
            assert_eq!(x.trace, y.trace);
            assert!(x.formula.depth() <= limits.max_depth);
            assert!(x.trace.steps() <= limits.max_steps);
            assert!(x.t <= x.trace.steps());
            assert!(x.formula.max_feature().unwrap() < x.trace.features());
        }
    }
}
