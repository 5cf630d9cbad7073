//! Direct optimisation of planar point-set trajectories.
//!
//! A [`Trajectory`] is the optimisable object: `N` positions and, optionally,
//! per-step velocities. [`features`] maps it to a trace for a lowered
//! constraint and pulls trace gradients back, [`dynamics`] scores
//! consistency between positions and velocities, and [`optimize`] runs
//! gradient descent on the weighted sum. [`experiments`] packages the named
//! constraint scenarios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod dynamics;
pub mod experiments;
pub mod features;
pub mod optimize;

pub use dynamics::DynamicalSystem;
pub use experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutcome};
pub use features::{derive_features, pullback};
pub use optimize::{optimize, LossRecord, MixedLossSpec, OptimizeOutcome, Optimizer};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub positions: Vec<Point>,
    /// Per-step velocities. Entry 0 has no dynamical row and is kept equal
    /// to entry 1 for output only.
    pub velocities: Option<Vec<Point>>,
    pub dt: f64,
    pub fixed_endpoints: bool,
}

/// Gradient with respect to a trajectory's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryGrad {
    pub positions: Vec<Point>,
    pub velocities: Option<Vec<Point>>,
}

impl TrajectoryGrad {
    pub fn zeros_like(traj: &Trajectory) -> Self {
        TrajectoryGrad {
            positions: vec![[0.0; 2]; traj.len()],
            velocities: traj.velocities.as_ref().map(|v| vec![[0.0; 2]; v.len()]),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &TrajectoryGrad, scale: f64) {
        axpy(&mut self.positions, &other.positions, scale);
        if let (Some(mine), Some(theirs)) = (&mut self.velocities, &other.velocities) {
            axpy(mine, theirs, scale);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.positions.iter().flatten().copied().collect();
        if let Some(v) = &self.velocities {
            out.extend(v.iter().flatten());
        }
        out
    }
}

fn axpy(y: &mut [Point], x: &[Point], a: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi[0] += a * xi[0];
        yi[1] += a * xi[1];
    }
}

impl Trajectory {
    pub fn new(positions: Vec<Point>, dt: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::Invalid(format!(
                "a trajectory needs at least 2 steps, got {}",
                positions.len()
            )));
        }
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(Trajectory {
            positions,
            velocities: None,
            dt,
            fixed_endpoints: true,
        })
    }

    /// Evenly spaced points from `start` to `end`.
    pub fn straight_line(start: Point, end: Point, n: usize, dt: f64) -> Result<Self> {
        if n < 2 {
            return Trajectory::new(vec![start; n], dt);
        }
        let last = (n - 1) as f64;
        let positions = (0..n)
            .map(|i| {
                let s = i as f64 / last;
                [start[0] + s * (end[0] - start[0]), start[1] + s * (end[1] - start[1])]
            })
            .collect();
        Trajectory::new(positions, dt)
    }

    /// Points drawn uniformly from the unit square, endpoints pinned.
    pub fn random(rng: &mut impl Rng, start: Point, end: Point, n: usize, dt: f64) -> Result<Self> {
        let mut positions: Vec<Point> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
        if let Some(first) = positions.first_mut() {
            *first = start;
        }
        if let Some(last) = positions.last_mut() {
            *last = end;
        }
        Trajectory::new(positions, dt)
    }

    /// Adds uniform noise in `[-amplitude, amplitude]` to every coordinate
    /// of the interior points.
    pub fn jitter(mut self, rng: &mut impl Rng, amplitude: f64) -> Self {
        let n = self.positions.len();
        for p in &mut self.positions[1..n - 1] {
            p[0] += rng.gen_range(-amplitude..=amplitude);
            p[1] += rng.gen_range(-amplitude..=amplitude);
        }
        self
    }

    /// Attaches velocities consistent with the positions.
    pub fn with_difference_velocities(mut self) -> Self {
        let v = self.difference_velocities();
        self.velocities = Some(v);
        self
    }

    /// Attaches independent velocities drawn uniformly from `[lo, hi]`.
    pub fn with_random_velocities(mut self, rng: &mut impl Rng, lo: f64, hi: f64) -> Self {
        let mut v: Vec<Point> = (0..self.len())
            .map(|_| [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)])
            .collect();
        v[0] = v[1];
        self.velocities = Some(v);
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(p_t - p_{t-1}) / dt`, with entry 0 repeating entry 1.
    pub fn difference_velocities(&self) -> Vec<Point> {
        let p = &self.positions;
        let mut v: Vec<Point> = (0..p.len())
            .map(|t| {
                let s = t.max(1);
                [(p[s][0] - p[s - 1][0]) / self.dt, (p[s][1] - p[s - 1][1]) / self.dt]
            })
            .collect();
        if v.len() > 1 {
            v[0] = v[1];
        }
        v
    }

    /// Whether position `t` is held fixed by the optimiser.
    pub fn is_frozen(&self, t: usize) -> bool {
        self.fixed_endpoints && (t == 0 || t + 1 == self.len())
    }

    /// Smallest distance from any sample to `o`.
    pub fn min_distance_to(&self, o: Point) -> f64 {
        self.positions
            .iter()
            .map(|p| (p[0] - o[0]).hypot(p[1] - o[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t,x,y` and, when present, `vx,vy`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: &[&str] = if self.velocities.is_some() {
            &["t", "x", "y", "vx", "vy"]
        } else {
            &["t", "x", "y"]
        };
        w.write_record(header).expect("in-memory write");
        for (t, p) in self.positions.iter().enumerate() {
            let mut row = vec![t.to_string(), p[0].to_string(), p[1].to_string()];
            if let Some(v) = &self.velocities {
                row.push(v[t][0].to_string());
                row.push(v[t][1].to_string());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Reads the [`Trajectory::to_csv`] layout back. Velocities are taken
    /// when both `vx` and `vy` columns are present.
    pub fn from_csv_reader(reader: impl std::io::Read, dt: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(x), Some(y)) = (col("x"), col("y")) else {
            return Err(Error::Shape("trajectory CSV needs x and y columns".into()));
        };
        let vel = col("vx").zip(col("vy"));
        let mut positions = Vec::new();
        let mut velocities = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let num = |c: usize| -> Result<f64> {
                record
                    .get(c)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| Error::Shape(format!("trajectory CSV row {}: {e}", i + 1)))
            };
            positions.push([num(x)?, num(y)?]);
            if let Some((vx, vy)) = vel {
                velocities.push([num(vx)?, num(vy)?]);
            }
        }
        let mut traj = Trajectory::new(positions, dt)?;
        if vel.is_some() {
            traj.velocities = Some(velocities);
        }
        Ok(traj)
    }
}
