//! Feature channels derived from a trajectory, and their pullback.
//!
//! Channel `k` of the plan becomes trace column `k`. Differenced channels
//! are undefined at the first one or two steps; those rows repeat the
//! earliest defined value so every column has one entry per step.

use super::{Point, Trajectory, TrajectoryGrad};
use crate::error::{Error, Result};
use crate::lang::{Channel, FeatureDerivationPlan};
use crate::tensor::RealTensor;
use crate::trace::TraceBatch;

fn order(channel: &Channel) -> usize {
    match channel {
        Channel::Accel => 2,
        Channel::Speed | Channel::Vx | Channel::Vy => 1,
        _ => 0,
    }
}

// The step whose value row `t` carries.
fn source(t: usize, k: usize) -> usize {
    t.max(k)
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

// d‖v‖/dv, taken as zero at the origin.
fn unit(v: Point) -> Point {
    let n = norm(v);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

fn second_difference(p: &[Point], s: usize) -> Point {
    [
        p[s][0] - 2.0 * p[s - 1][0] + p[s - 2][0],
        p[s][1] - 2.0 * p[s - 1][1] + p[s - 2][1],
    ]
}

fn check(traj: &Trajectory, plan: &FeatureDerivationPlan) -> Result<()> {
    if plan.is_empty() {
        return Err(Error::Invalid(
            "a trajectory constraint needs measurement channels".into(),
        ));
    }
    let needed = plan.derivative_order() + 1;
    if traj.len() < needed {
        return Err(Error::Shape(format!(
            "{} steps cannot support derivative order {}",
            traj.len(),
            plan.derivative_order()
        )));
    }
    Ok(())
}

fn value(channel: &Channel, traj: &Trajectory, s: usize) -> f64 {
    let p = &traj.positions;
    let dt = traj.dt;
    match channel {
        Channel::X => p[s][0],
        Channel::Y => p[s][1],
        Channel::Vx | Channel::Vy => {
            let axis = usize::from(matches!(channel, Channel::Vy));
            match &traj.velocities {
                Some(v) => v[s][axis],
                None => (p[s][axis] - p[s - 1][axis]) / dt,
            }
        }
        Channel::Speed => norm(sub(p[s], p[s - 1])) / dt,
        Channel::Accel => norm(second_difference(p, s)) / (dt * dt),
        Channel::Dist { x, y } => norm(sub(p[s], [*x, *y])),
        Channel::Const { value } => *value,
    }
}

/// The `(N, channels)` trace of a trajectory under `plan`.
pub fn derive_features(traj: &Trajectory, plan: &FeatureDerivationPlan) -> Result<TraceBatch> {
    check(traj, plan)?;
    let n = traj.len();
    let width = plan.len();
    let mut elems = Vec::with_capacity(n * width);
    for t in 0..n {
        for channel in &plan.channels {
            elems.push(value(channel, traj, source(t, order(channel))));
        }
    }
    TraceBatch::new(RealTensor::new(vec![n, width], elems)?)
}

/// Maps a gradient with respect to the derived trace back to the
/// trajectory's positions and velocities.
pub fn pullback(
    traj: &Trajectory,
    plan: &FeatureDerivationPlan,
    trace_grad: &RealTensor,
) -> Result<TrajectoryGrad> {
    check(traj, plan)?;
    let n = traj.len();
    let width = plan.len();
    if trace_grad.dims() != [n, width] {
        return Err(Error::Shape(format!(
            "trace gradient dims {} do not match ({n}, {width})",
            trace_grad.shape()
        )));
    }
    let p = &traj.positions;
    let dt = traj.dt;
    let mut out = TrajectoryGrad::zeros_like(traj);
    let g_elems = trace_grad.elems();
    for t in 0..n {
        for (c, channel) in plan.channels.iter().enumerate() {
            let g = g_elems[t * width + c];
            if g == 0.0 {
                continue;
            }
            let s = source(t, order(channel));
            let dp = &mut out.positions;
            match channel {
                Channel::X => dp[s][0] += g,
                Channel::Y => dp[s][1] += g,
                Channel::Vx | Channel::Vy => {
                    let axis = usize::from(matches!(channel, Channel::Vy));
                    match &mut out.velocities {
                        Some(dv) => dv[s][axis] += g,
                        None => {
                            dp[s][axis] += g / dt;
                            dp[s - 1][axis] -= g / dt;
                        }
                    }
                }
                Channel::Speed => {
                    let u = unit(sub(p[s], p[s - 1]));
                    for a in 0..2 {
                        dp[s][a] += g * u[a] / dt;
                        dp[s - 1][a] -= g * u[a] / dt;
                    }
                }
                Channel::Accel => {
                    let u = unit(second_difference(p, s));
                    let scale = g / (dt * dt);
                    for a in 0..2 {
                        dp[s][a] += scale * u[a];
                        dp[s - 1][a] -= 2.0 * scale * u[a];
                        dp[s - 2][a] += scale * u[a];
                    }
                }
                Channel::Dist { x, y } => {
                    let u = unit(sub(p[s], [*x, *y]));
                    dp[s][0] += g * u[0];
                    dp[s][1] += g * u[1];
                }
                Channel::Const { .. } => {}
            }
        }
    }
    Ok(out)
}
