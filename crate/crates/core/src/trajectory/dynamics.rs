//! Consistency of positions with velocities, as a least-squares residual.
//!
//! The unknowns are `z = (x₀, y₀, …, x_{N-1}, y_{N-1}, v₁, u₁, …, v_{N-1}, u_{N-1})`,
//! `4N − 2` values. Row pair `t` of `E` reads `x_{t-1} − x_t + v_t·dt` and
//! the same for `y`; four final rows pin the endpoints. The loss is
//! `½‖E·z − b‖²` with `b` zero except for the endpoint targets.

use serde::{Deserialize, Serialize};

use super::{Point, Trajectory, TrajectoryGrad};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicalSystem {
    pub start: Point,
    pub end: Point,
}

impl DynamicalSystem {
    pub fn new(start: Point, end: Point) -> Self {
        DynamicalSystem { start, end }
    }

    fn velocities<'a>(&self, traj: &'a Trajectory) -> Result<&'a [Point]> {
        traj.velocities
            .as_deref()
            .ok_or_else(|| Error::Invalid("the dynamical loss needs velocities".into()))
    }

    /// `E·z − b`, transition rows first (x then y per step), then the
    /// endpoint rows `x₀, y₀, x_{N-1}, y_{N-1}`.
    pub fn residual(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let v = self.velocities(traj)?;
        let p = &traj.positions;
        let n = p.len();
        let mut r = Vec::with_capacity(2 * (n - 1) + 4);
        for t in 1..n {
            for a in 0..2 {
                r.push(p[t - 1][a] - p[t][a] + v[t][a] * traj.dt);
            }
        }
        r.push(p[0][0] - self.start[0]);
        r.push(p[0][1] - self.start[1]);
        r.push(p[n - 1][0] - self.end[0]);
        r.push(p[n - 1][1] - self.end[1]);
        Ok(r)
    }

    /// `½‖E·z − b‖²` and its gradient `Eᵀ(E·z − b)`.
    pub fn loss_and_grad(&self, traj: &Trajectory) -> Result<(f64, TrajectoryGrad)> {
        let r = self.residual(traj)?;
        let n = traj.len();
        let value = 0.5 * r.iter().map(|x| x * x).sum::<f64>();
        let mut g = TrajectoryGrad::zeros_like(traj);
        let dv = g.velocities.as_mut().expect("velocities checked");
        for t in 1..n {
            for a in 0..2 {
                let ri = r[2 * (t - 1) + a];
                g.positions[t - 1][a] += ri;
                g.positions[t][a] -= ri;
                dv[t][a] += ri * traj.dt;
            }
        }
        let base = 2 * (n - 1);
        g.positions[0][0] += r[base];
        g.positions[0][1] += r[base + 1];
        g.positions[n - 1][0] += r[base + 2];
        g.positions[n - 1][1] += r[base + 3];
        Ok((value, g))
    }

    /// Dense `E` over the unknown ordering in the module docs.
    pub fn matrix(&self, n: usize, dt: f64) -> Vec<Vec<f64>> {
        let cols = 4 * n - 2;
        let vel = |t: usize, a: usize| 2 * n + 2 * (t - 1) + a;
        let mut rows = Vec::with_capacity(2 * (n - 1) + 4);
        for t in 1..n {
            for a in 0..2 {
                let mut row = vec![0.0; cols];
                row[2 * (t - 1) + a] = 1.0;
                row[2 * t + a] = -1.0;
                row[vel(t, a)] = dt;
                rows.push(row);
            }
        }
        for (t, a) in [(0, 0), (0, 1), (n - 1, 0), (n - 1, 1)] {
            let mut row = vec![0.0; cols];
            row[2 * t + a] = 1.0;
            rows.push(row);
        }
        rows
    }

    /// The unknown vector `z` of a trajectory with velocities.
    pub fn unknowns(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let v = self.velocities(traj)?;
        let mut z: Vec<f64> = traj.positions.iter().flatten().copied().collect();
        z.extend(v[1..].iter().flatten());
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn system() -> DynamicalSystem {
        DynamicalSystem::new([0.0, 0.0], [1.0, 1.0])
    }

    #[test]
    fn consistent_line_is_free() {
        let line = Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], 10, 0.5)
            .unwrap()
            .with_difference_velocities();
        let (value, grad) = system().loss_and_grad(&line).unwrap();
        assert!(value < 1e-30);
        assert!(grad.flat().iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn perturbing_one_position() {
        let line = Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], 10, 1.0)
            .unwrap()
            .with_difference_velocities();
        let mut bumped = line.clone();
        let delta = 0.01;
        bumped.positions[4][0] += delta;
        let (value, _) = system().loss_and_grad(&bumped).unwrap();
        // two transition rows move by ±δ
        assert!((value - delta * delta).abs() < 1e-15);
    }

    #[test]
    fn endpoint_rows_measure_error() {
        let mut line = Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], 5, 1.0)
            .unwrap()
            .with_difference_velocities();
        let r = system().residual(&line).unwrap();
        assert_eq!(r.len(), 2 * 4 + 4);
        line.positions[4] = [1.5, 1.0];
        let r = system().residual(&line).unwrap();
        assert_eq!(r[r.len() - 2], 0.5);
    }

    #[test]
    fn matches_dense_matrix_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let traj = Trajectory::random(&mut rng, [0.2, 0.1], [0.9, 0.7], 6, 0.3)
            .unwrap()
            .with_random_velocities(&mut rng, -0.5, 0.5);
        let sys = system();
        let e = sys.matrix(6, 0.3);
        let z = sys.unknowns(&traj).unwrap();
        assert_eq!(z.len(), 4 * 6 - 2);
        let mut b = vec![0.0; e.len()];
        let k = b.len();
        b[k - 2] = 1.0;
        b[k - 1] = 1.0;
        let dense: Vec<f64> = e
            .iter()
            .zip(&b)
            .map(|(row, bi)| row.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>() - bi)
            .collect();
        let r = sys.residual(&traj).unwrap();
        for (a, b) in dense.iter().zip(&r) {
            assert!((a - b).abs() < 1e-15);
        }

        let (_, grad) = sys.loss_and_grad(&traj).unwrap();
        let h = 1e-6;
        for t in 0..6 {
            for a in 0..2 {
                let f = |tj: &Trajectory| sys.loss_and_grad(tj).unwrap().0;
                let mut up = traj.clone();
                up.positions[t][a] += h;
                let mut down = traj.clone();
                down.positions[t][a] -= h;
                let fd = (f(&up) - f(&down)) / (2.0 * h);
                assert!((fd - grad.positions[t][a]).abs() < 1e-8);
                let mut up = traj.clone();
                up.velocities.as_mut().unwrap()[t][a] += h;
                let mut down = traj.clone();
                down.velocities.as_mut().unwrap()[t][a] -= h;
                let fd = (f(&up) - f(&down)) / (2.0 * h);
                assert!((fd - grad.velocities.as_ref().unwrap()[t][a]).abs() < 1e-8);
            }
        }
        // velocity 0 enters no row
        assert_eq!(grad.velocities.as_ref().unwrap()[0], [0.0, 0.0]);
    }

    #[test]
    fn needs_velocities() {
        let line = Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], 4, 1.0).unwrap();
        assert!(system().residual(&line).is_err());
    }
}
