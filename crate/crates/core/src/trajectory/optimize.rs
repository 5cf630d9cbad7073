//! Gradient descent on the mixed loss `w·D + η·L(ρ, g(traj), γ)`.

use serde::{Deserialize, Serialize};

use super::dynamics::DynamicalSystem;
use super::features::{derive_features, pullback};
use super::{Trajectory, TrajectoryGrad};
use crate::error::{Error, Result};
use crate::lang::{lower, SurfaceFormula};
use crate::loss::{loss_and_grad, LossConfig};
use crate::smooth::Gamma;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain gradient descent.
    Gd,
    /// Heavy-ball momentum.
    Momentum { beta: f64 },
    /// Adam moment estimates with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn momentum() -> Self {
        Optimizer::Momentum { beta: 0.9 }
    }

    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedLossSpec {
    pub gamma: Gamma,
    /// Weight `η` of the constraint loss.
    pub eta: f64,
    /// Weight of the dynamical loss; zero disables it.
    pub dynamical_weight: f64,
    pub system: Option<DynamicalSystem>,
}

impl MixedLossSpec {
    pub fn ltlf_only(gamma: impl Into<Gamma>) -> Self {
        MixedLossSpec {
            gamma: gamma.into(),
            eta: 1.0,
            dynamical_weight: 0.0,
            system: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSpec {
    pub loss: MixedLossSpec,
    pub steps: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub step: usize,
    pub total: f64,
    pub ltlf: f64,
    pub dynamical: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome {
    pub trajectory: Trajectory,
    /// One record per step before its update, plus one for the result.
    pub history: Vec<LossRecord>,
}

impl OptimizeOutcome {
    pub fn history_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "total", "ltlf", "dynamical"])
            .expect("in-memory write");
        for r in &self.history {
            w.write_record(&[
                r.step.to_string(),
                r.total.to_string(),
                r.ltlf.to_string(),
                r.dynamical.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

struct State {
    optimizer: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl State {
    fn new(optimizer: Optimizer, n: usize) -> Self {
        State {
            optimizer,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Step for each parameter given its gradient.
    fn steps(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        self.t += 1;
        match self.optimizer {
            Optimizer::Gd => grad.iter().map(|g| -lr * g).collect(),
            Optimizer::Momentum { beta } => {
                for (m, g) in self.m.iter_mut().zip(grad) {
                    *m = beta * *m + g;
                }
                self.m.iter().map(|m| -lr * m).collect()
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                self.m
                    .iter_mut()
                    .zip(self.v.iter_mut())
                    .zip(grad)
                    .map(|((m, v), g)| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        -lr * (*m / c1) / ((*v / c2).sqrt() + eps)
                    })
                    .collect()
            }
        }
    }
}

// Flat parameter positions that never move.
fn frozen_mask(traj: &Trajectory) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..traj.len())
        .flat_map(|t| [traj.is_frozen(t); 2])
        .collect();
    if traj.velocities.is_some() {
        mask.extend((0..traj.len()).flat_map(|t| [t == 0; 2]));
    }
    mask
}

fn apply(traj: &mut Trajectory, delta: &[f64], mask: &[bool]) {
    let n = traj.len();
    for (k, (&d, &frozen)) in delta.iter().zip(mask).enumerate() {
        if frozen {
            continue;
        }
        let (t, a) = ((k / 2) % n, k % 2);
        if k < 2 * n {
            traj.positions[t][a] += d;
        } else if let Some(v) = &mut traj.velocities {
            v[t][a] += d;
        }
    }
    if let Some(v) = &mut traj.velocities {
        if v.len() > 1 {
            v[0] = v[1];
        }
    }
}

/// Mixed loss and its gradient at `traj`.
pub fn mixed_loss(
    traj: &Trajectory,
    formula: &SurfaceFormula,
    spec: &MixedLossSpec,
) -> Result<(LossRecord, TrajectoryGrad)> {
    let (constraint, plan) = lower(formula)?;
    let cfg = LossConfig::new(spec.gamma);
    let trace = derive_features(traj, &plan)?;
    let result = loss_and_grad(&constraint, &trace, 0, &cfg)?;
    let ltlf = result.value.elems()[0];
    let trace_grad = result.grad.expect("gradient requested");
    let mut grad = TrajectoryGrad::zeros_like(traj);
    grad.add_scaled(&pullback(traj, &plan, &trace_grad)?, spec.eta);
    let mut dynamical = 0.0;
    if spec.dynamical_weight != 0.0 {
        let system = spec
            .system
            .ok_or_else(|| Error::Invalid("a dynamical weight needs a dynamical system".into()))?;
        let (d, g) = system.loss_and_grad(traj)?;
        dynamical = d;
        grad.add_scaled(&g, spec.dynamical_weight);
    }
    let record = LossRecord {
        step: 0,
        total: spec.eta * ltlf + spec.dynamical_weight * dynamical,
        ltlf,
        dynamical,
    };
    Ok((record, grad))
}

/// Runs `spec.steps` updates from `initial`. Fails with
/// [`Error::Divergence`] as soon as the loss or its gradient stops being
/// finite.
pub fn optimize(
    initial: &Trajectory,
    formula: &SurfaceFormula,
    spec: &OptimizeSpec,
) -> Result<OptimizeOutcome> {
    let mut traj = initial.clone();
    let mask = frozen_mask(&traj);
    let mut state = State::new(spec.optimizer, mask.len());
    let mut history = Vec::with_capacity(spec.steps + 1);
    for step in 0..=spec.steps {
        let (mut record, grad) = mixed_loss(&traj, formula, &spec.loss)?;
        record.step = step;
        let flat = grad.flat();
        if !record.total.is_finite() || flat.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step,
                detail: format!(
                    "loss {} (constraint {}, dynamical {})",
                    record.total, record.ltlf, record.dynamical
                ),
            });
        }
        history.push(record);
        if step == spec.steps {
            break;
        }
        let delta = state.steps(&flat, spec.lr);
        apply(&mut traj, &delta, &mask);
    }
    Ok(OptimizeOutcome {
        trajectory: traj,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_surface;

    fn line() -> Trajectory {
        Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], 20, 1.0).unwrap()
    }

    #[test]
    fn zero_weight_leaves_consistent_trajectory() {
        let start = line().with_difference_velocities();
        let spec = OptimizeSpec {
            loss: MixedLossSpec {
                gamma: Gamma::new(0.005),
                eta: 0.0,
                dynamical_weight: 1.0,
                system: Some(DynamicalSystem::new([0.0, 0.0], [1.0, 1.0])),
            },
            steps: 20,
            lr: 1e-2,
            optimizer: Optimizer::Gd,
        };
        let f = parse_surface("G (0.1 <= dist(p, (0.4, 0.4)))").unwrap();
        let out = optimize(&start, &f, &spec).unwrap();
        for (a, b) in out.trajectory.positions.iter().zip(&start.positions) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
        assert_eq!(out.history.len(), 21);
    }

    #[test]
    fn endpoints_stay_put_and_loss_falls() {
        let f = parse_surface("G (0.1 <= dist(p, (0.4, 0.4)))").unwrap();
        for optimizer in [Optimizer::Gd, Optimizer::momentum(), Optimizer::adam()] {
            let spec = OptimizeSpec {
                loss: MixedLossSpec::ltlf_only(0.01),
                steps: 50,
                lr: 1e-2,
                optimizer,
            };
            let start = line();
            let out = optimize(&start, &f, &spec).unwrap();
            let p = &out.trajectory.positions;
            assert_eq!(p[0].map(f64::to_bits), start.positions[0].map(f64::to_bits));
            assert_eq!(p[19].map(f64::to_bits), start.positions[19].map(f64::to_bits));
            let first = out.history[0].total;
            let last = out.history.last().unwrap().total;
            assert!(last < first, "{optimizer:?}: {first} -> {last}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let f = parse_surface("G (accel <= 0) && G (x <= 0)").unwrap();
        let spec = OptimizeSpec {
            loss: MixedLossSpec::ltlf_only(0.01),
            steps: 10,
            lr: f64::MAX,
            optimizer: Optimizer::Gd,
        };
        let err = optimize(&line(), &f, &spec).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn dynamical_weight_requires_system() {
        let f = parse_surface("G (x <= 2)").unwrap();
        let spec = MixedLossSpec {
            dynamical_weight: 1.0,
            ..MixedLossSpec::ltlf_only(0.01)
        };
        assert!(mixed_loss(&line().with_difference_velocities(), &f, &spec).is_err());
    }
}
