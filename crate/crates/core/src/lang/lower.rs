use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Constraint, FeatureRef, SurfaceFormula, Term};
use crate::error::{Error, Result};

/// One feature column derived from a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    X,
    Y,
    Vx,
    Vy,
    Speed,
    Accel,
    Dist { x: f64, y: f64 },
    Const { value: f64 },
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::X => f.write_str("x"),
            Channel::Y => f.write_str("y"),
            Channel::Vx => f.write_str("vx"),
            Channel::Vy => f.write_str("vy"),
            Channel::Speed => f.write_str("speed"),
            Channel::Accel => f.write_str("accel"),
            Channel::Dist { x, y } => write!(f, "dist({x},{y})"),
            Channel::Const { value } => write!(f, "const({value})"),
        }
    }
}

/// Ordered channel list; channel `k` becomes feature column `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureDerivationPlan {
    pub channels: Vec<Channel>,
}

impl FeatureDerivationPlan {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    fn intern(&mut self, channel: Channel) -> usize {
        match self.channels.iter().position(|c| *c == channel) {
            Some(k) => k,
            None => {
                self.channels.push(channel);
                self.channels.len() - 1
            }
        }
    }

    /// Highest finite-difference order any channel needs.
    pub fn derivative_order(&self) -> usize {
        self.channels
            .iter()
            .map(|c| match c {
                Channel::Accel => 2,
                Channel::Speed | Channel::Vx | Channel::Vy => 1,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Replaces every literal and measurement by a feature column, in order of
/// first appearance. Identical operands share one column.
///
/// A formula over raw feature columns only lowers to itself with the empty
/// (identity) plan; mixing raw columns with measurements is rejected.
pub fn lower(surface: &SurfaceFormula) -> Result<(Constraint, FeatureDerivationPlan)> {
    let raw_only = surface
        .atoms()
        .iter()
        .all(|c| matches!((&c.lhs, &c.rhs), (Term::Feature(_), Term::Feature(_))));
    if raw_only {
        let constraint = surface.try_map_operands(&mut |term| match term {
            Term::Feature(k) => Ok::<_, Error>(FeatureRef(*k)),
            _ => unreachable!(),
        })?;
        return Ok((constraint, FeatureDerivationPlan::default()));
    }
    let mut plan = FeatureDerivationPlan::default();
    let constraint = surface.try_map_operands(&mut |term| {
        let channel = match term {
            Term::Feature(k) => {
                return Err(Error::UnknownIdentifier(format!(
                    "f{k} is not a trajectory measurement"
                )))
            }
            Term::Const(value) => Channel::Const { value: *value },
            Term::X => Channel::X,
            Term::Y => Channel::Y,
            Term::Vx => Channel::Vx,
            Term::Vy => Channel::Vy,
            Term::Speed => Channel::Speed,
            Term::Accel => Channel::Accel,
            Term::Dist(x, y) => Channel::Dist { x: *x, y: *y },
        };
        Ok(FeatureRef(plan.intern(channel)))
    })?;
    Ok((constraint, plan))
}

#[cfg(test)]
mod tests {
    use super::super::parse_surface;
    use super::*;

    #[test]
    fn avoid_lowers_to_two_channels() {
        let s = parse_surface("G (0.1 <= dist(p,(0.4,0.4)))").unwrap();
        let (c, plan) = lower(&s).unwrap();
        assert_eq!(c, Constraint::parse("G (f0 <= f1)").unwrap());
        assert_eq!(
            plan.channels,
            vec![Channel::Const { value: 0.1 }, Channel::Dist { x: 0.4, y: 0.4 }]
        );
    }

    #[test]
    fn until_lowers_to_four_channels() {
        let s = parse_surface("(py <= 0.4) U (0.6 <= px)").unwrap();
        let (c, plan) = lower(&s).unwrap();
        assert_eq!(c, Constraint::parse("(f0 <= f1) U (f2 <= f3)").unwrap());
        assert_eq!(
            plan.channels,
            vec![
                Channel::Y,
                Channel::Const { value: 0.4 },
                Channel::Const { value: 0.6 },
                Channel::X
            ]
        );
    }

    #[test]
    fn shared_operands_share_columns() {
        let s = parse_surface("G (speed <= 0.1 && speed <= 0.1 && x <= 0.1)").unwrap();
        let (_, plan) = lower(&s).unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(plan.derivative_order(), 1);
    }

    #[test]
    fn raw_features_lower_to_identity_plan() {
        let s = parse_surface("G (f0 <= f1)").unwrap();
        let (c, plan) = lower(&s).unwrap();
        assert_eq!(c, Constraint::parse("G (f0 <= f1)").unwrap());
        assert!(plan.is_empty());
        let mixed = parse_surface("G (f0 <= speed)").unwrap();
        assert!(matches!(lower(&mixed), Err(Error::UnknownIdentifier(_))));
    }
}
