//! The named trajectory scenarios and their run artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::DynamicalSystem;
use super::features::derive_features;
use super::optimize::{optimize, MixedLossSpec, OptimizeOutcome, OptimizeSpec, Optimizer};
use super::{Point, Trajectory};
use crate::error::{Error, Result};
use crate::eval::{eval, eval_counted};
use crate::lang::{lower, parse_surface};
use crate::smooth::Gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Avoid,
    Patrol,
    Until,
    Compound,
    Loop,
    DoubleLoopNested,
    DoubleLoopConjoined,
    Smoothen,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Avoid,
        ExperimentKind::Patrol,
        ExperimentKind::Until,
        ExperimentKind::Compound,
        ExperimentKind::Loop,
        ExperimentKind::DoubleLoopNested,
        ExperimentKind::DoubleLoopConjoined,
        ExperimentKind::Smoothen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Avoid => "avoid",
            ExperimentKind::Patrol => "patrol",
            ExperimentKind::Until => "until",
            ExperimentKind::Compound => "compound",
            ExperimentKind::Loop => "loop",
            ExperimentKind::DoubleLoopNested => "double_loop_nested",
            ExperimentKind::DoubleLoopConjoined => "double_loop_conjoined",
            ExperimentKind::Smoothen => "smoothen",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown experiment `{s}`")))
    }
}

pub const AVOID_CENTRE: Point = [0.4, 0.4];
pub const AVOID_RADIUS: f64 = 0.1;
pub const PATROL_POINTS: [Point; 2] = [[0.2, 0.4], [0.85, 0.6]];
pub const COMPOUND_AVOID: Point = [0.5, 0.5];
pub const COMPOUND_TOUCH: Point = [0.7, 0.5];
/// `o₁ … o₄`, ordered by x.
pub const LOOP_POINTS: [Point; 4] = [[0.2, 0.6], [0.4, 0.8], [0.6, 0.2], [0.8, 0.4]];

fn pt(p: Point) -> String {
    format!("({}, {})", p[0], p[1])
}

fn reach(o: Point, within: f64) -> String {
    format!("dist(p, {}) <= {within}", pt(o))
}

/// `◇(a ∧ X ◇(b ∧ X ◇(…)))` over reach atoms, in visiting order.
pub fn ordered_visits(points: &[Point], within: f64) -> String {
    match points {
        [] => String::new(),
        [last] => format!("F ({})", reach(*last, within)),
        [first, rest @ ..] => format!(
            "F ({} && X {})",
            reach(*first, within),
            ordered_visits(rest, within)
        ),
    }
}

fn nested_double_loop(within: f64) -> String {
    let [o1, o2, o3, o4] = LOOP_POINTS;
    ordered_visits(&[o2, o1, o4, o3], within)
}

fn conjoined_double_loop(within: f64) -> String {
    let [o1, o2, o3, o4] = LOOP_POINTS;
    format!(
        "{} && {}",
        ordered_visits(&[o2, o1], within),
        ordered_visits(&[o4, o3], within)
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub steps: usize,
    pub lr: f64,
    pub gamma: f64,
    pub eta: f64,
    pub optimizer: Optimizer,
    /// Number of trajectory samples `N`.
    pub samples: usize,
    pub dt: f64,
    /// Half-width of the uniform noise added to the initial line.
    pub noise: f64,
    pub dynamical_weight: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        let smoothen = experiment == ExperimentKind::Smoothen;
        ExperimentConfig {
            experiment,
            seed: 0,
            steps: 500,
            lr: 1e-3,
            gamma: 0.005,
            eta: 1.0,
            optimizer: Optimizer::momentum(),
            samples: 50,
            dt: 1.0,
            noise: 0.01,
            dynamical_weight: if smoothen { 1.0 } else { 0.0 },
        }
    }

    /// The optimised constraint in the surface grammar.
    pub fn constraint(&self) -> String {
        match self.experiment {
            ExperimentKind::Avoid => format!(
                "G ((0.1 <= dist(p, {})) && (speed <= 0.15) && (accel <= 0.02))",
                pt(AVOID_CENTRE)
            ),
            ExperimentKind::Patrol => format!(
                "F ({}) && F ({})",
                reach(PATROL_POINTS[0], 0.0),
                reach(PATROL_POINTS[1], 0.0)
            ),
            ExperimentKind::Until => "(py <= 0.4) U (0.6 <= px)".to_string(),
            ExperimentKind::Compound => format!(
                "G (0.1 <= dist(p, {})) && F ({}) && G (py <= 0.8)",
                pt(COMPOUND_AVOID),
                reach(COMPOUND_TOUCH, 0.0)
            ),
            ExperimentKind::Loop => {
                let [o1, o2, ..] = LOOP_POINTS;
                ordered_visits(&[o2, o1], 0.0)
            }
            ExperimentKind::DoubleLoopNested => nested_double_loop(0.0),
            ExperimentKind::DoubleLoopConjoined => conjoined_double_loop(0.0),
            ExperimentKind::Smoothen => {
                "G (0 <= vx && 0 <= vy && vx <= 0.03 && vy <= 0.03)".to_string()
            }
        }
    }

    /// Named hard checks for the verdict. Reaching a point is judged at
    /// distance `2γ` and avoiding a disk at radius `r − γ`.
    pub fn clauses(&self) -> Vec<(String, String)> {
        let g = self.gamma;
        let within = 2.0 * g;
        let clearance = AVOID_RADIUS - g;
        let named = |n: &str, f: String| (n.to_string(), f);
        match self.experiment {
            ExperimentKind::Avoid => vec![
                named("avoid", format!("G ({clearance} <= dist(p, {}))", pt(AVOID_CENTRE))),
                named("speed", "G (speed <= 0.15)".into()),
                named("accel", "G (accel <= 0.02)".into()),
            ],
            ExperimentKind::Patrol => vec![
                named("reach_o1", format!("F ({})", reach(PATROL_POINTS[0], within))),
                named("reach_o2", format!("F ({})", reach(PATROL_POINTS[1], within))),
            ],
            ExperimentKind::Until => vec![named("until", self.constraint())],
            ExperimentKind::Compound => vec![
                named("avoid", format!("G ({clearance} <= dist(p, {}))", pt(COMPOUND_AVOID))),
                named("touch", format!("F ({})", reach(COMPOUND_TOUCH, within))),
                named("ceiling", "G (py <= 0.8)".into()),
            ],
            ExperimentKind::Loop => {
                let [o1, o2, ..] = LOOP_POINTS;
                vec![named("loop", ordered_visits(&[o2, o1], within))]
            }
            ExperimentKind::DoubleLoopNested | ExperimentKind::DoubleLoopConjoined => vec![
                named("nested_order", nested_double_loop(within)),
                named("conjoined_order", conjoined_double_loop(within)),
            ],
            ExperimentKind::Smoothen => vec![
                named("velocity_bounds", self.constraint()),
                named("non_negative", "G (0 <= vx && 0 <= vy)".into()),
            ],
        }
    }

    fn initial(&self) -> Result<Trajectory> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (start, end) = ([0.0, 0.0], [1.0, 1.0]);
        if self.experiment == ExperimentKind::Smoothen {
            return Ok(Trajectory::random(&mut rng, start, end, self.samples, self.dt)?
                .with_random_velocities(&mut rng, -0.05, 0.05));
        }
        Ok(Trajectory::straight_line(start, end, self.samples, self.dt)?.jitter(&mut rng, self.noise))
    }

    fn spec(&self) -> OptimizeSpec {
        OptimizeSpec {
            loss: MixedLossSpec {
                gamma: Gamma::new(self.gamma),
                eta: self.eta,
                dynamical_weight: self.dynamical_weight,
                system: (self.dynamical_weight != 0.0)
                    .then(|| DynamicalSystem::new([0.0, 0.0], [1.0, 1.0])),
            },
            steps: self.steps,
            lr: self.lr,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClauseVerdict {
    pub name: String,
    pub formula: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub experiment: ExperimentKind,
    pub clauses: Vec<ClauseVerdict>,
    pub metrics: BTreeMap<String, f64>,
    /// Uncached evaluation calls for the optimised constraint on the final
    /// trace.
    pub eval_calls: u64,
}

impl Verdict {
    pub fn clause(&self, name: &str) -> Option<bool> {
        self.clauses.iter().find(|c| c.name == name).map(|c| c.holds)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub initial: Trajectory,
    pub run: OptimizeOutcome,
    pub verdict: Verdict,
    pub counts: Option<CountReport>,
}

/// Hard truth of a surface formula on a trajectory at step 0.
pub fn holds_on(text: &str, traj: &Trajectory) -> Result<bool> {
    let (constraint, plan) = lower(&parse_surface(text)?)?;
    let trace = derive_features(traj, &plan)?;
    Ok(eval(&constraint, &trace, 0)?.elems()[0])
}

/// Uncached evaluation calls for a surface formula on a trajectory.
pub fn eval_calls_on(text: &str, traj: &Trajectory) -> Result<u64> {
    let (constraint, plan) = lower(&parse_surface(text)?)?;
    let trace = derive_features(traj, &plan)?;
    Ok(eval_counted(&constraint, &trace, 0)?.1.calls)
}

fn metrics(cfg: &ExperimentConfig, traj: &Trajectory) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let mut dist = |name: &str, o: Point| {
        m.insert(format!("min_dist_{name}"), traj.min_distance_to(o));
    };
    match cfg.experiment {
        ExperimentKind::Avoid => dist("o", AVOID_CENTRE),
        ExperimentKind::Patrol => {
            dist("o1", PATROL_POINTS[0]);
            dist("o2", PATROL_POINTS[1]);
        }
        ExperimentKind::Compound => {
            dist("o1", COMPOUND_AVOID);
            dist("o2", COMPOUND_TOUCH);
        }
        ExperimentKind::Loop
        | ExperimentKind::DoubleLoopNested
        | ExperimentKind::DoubleLoopConjoined => {
            for (k, o) in LOOP_POINTS.iter().enumerate() {
                dist(&format!("o{}", k + 1), *o);
            }
        }
        ExperimentKind::Until | ExperimentKind::Smoothen => {}
    }
    let v = traj.difference_velocities();
    let speeds = v[1..].iter().map(|v| v[0].hypot(v[1]));
    m.insert("max_speed".into(), speeds.fold(0.0, f64::max));
    if let (Some(sys), true) = (cfg.spec().loss.system, traj.velocities.is_some()) {
        let r = sys.residual(traj).expect("velocities present");
        m.insert(
            "dynamical_residual".into(),
            r.iter().map(|x| x * x).sum::<f64>().sqrt(),
        );
    }
    m
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let initial = cfg.initial()?;
    let formula = parse_surface(&cfg.constraint())?;
    let run = optimize(&initial, &formula, &cfg.spec())?;
    let traj = &run.trajectory;
    let clauses = cfg
        .clauses()
        .into_iter()
        .map(|(name, formula)| {
            let holds = holds_on(&formula, traj)?;
            Ok(ClauseVerdict {
                name,
                formula,
                holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = Verdict {
        experiment: cfg.experiment,
        clauses,
        metrics: metrics(cfg, traj),
        eval_calls: eval_calls_on(&cfg.constraint(), traj)?,
    };
    let counts = matches!(
        cfg.experiment,
        ExperimentKind::DoubleLoopNested | ExperimentKind::DoubleLoopConjoined
    )
    .then(|| count_law(&COUNT_LENGTHS))
    .transpose()?;
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        initial,
        run,
        verdict,
        counts,
    })
}

impl ExperimentOutcome {
    /// Writes `config.json`, `trajectory.csv`, `loss_history.csv`,
    /// `verdict.json` and, for the double loops, `counts.json`.
    pub fn write_artifacts(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let config = serde_json::json!({
            "config": self.config,
            "constraint": self.config.constraint(),
        });
        std::fs::write(dir.join("config.json"), pretty(&config)?)?;
        std::fs::write(dir.join("trajectory.csv"), self.run.trajectory.to_csv())?;
        std::fs::write(dir.join("loss_history.csv"), self.run.history_csv())?;
        std::fs::write(dir.join("verdict.json"), pretty(&self.verdict)?)?;
        if let Some(counts) = &self.counts {
            std::fs::write(dir.join("counts.json"), pretty(counts)?)?;
        }
        Ok(())
    }
}

fn pretty(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub const COUNT_LENGTHS: [usize; 4] = [10, 20, 40, 80];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountRow {
    pub length: usize,
    pub nested: u64,
    pub conjoined: u64,
}

/// Uncached evaluation counts of the two double-loop constraints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub rows: Vec<CountRow>,
    /// Least-squares slope of log(count) against log(length).
    pub nested_slope: f64,
    pub conjoined_slope: f64,
}

impl CountReport {
    pub fn ratio_at(&self, length: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.length == length)
            .map(|r| r.nested as f64 / r.conjoined as f64)
    }
}

pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Counts on straight-line trajectories of each length. The count does not
/// depend on the trajectory's values.
pub fn count_law(lengths: &[usize]) -> Result<CountReport> {
    let nested = nested_double_loop(0.0);
    let conjoined = conjoined_double_loop(0.0);
    let rows = lengths
        .iter()
        .map(|&n| {
            let line = Trajectory::straight_line([0.0, 0.0], [1.0, 1.0], n, 1.0)?;
            Ok(CountRow {
                length: n,
                nested: eval_calls_on(&nested, &line)?,
                conjoined: eval_calls_on(&conjoined, &line)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = |pick: fn(&CountRow) -> u64| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.length as f64, pick(r) as f64))
            .collect();
        log_log_slope(&pts)
    };
    Ok(CountReport {
        nested_slope: slope(|r| r.nested),
        conjoined_slope: slope(|r| r.conjoined),
        rows,
    })
}
