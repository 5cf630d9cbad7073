//! LTLf constraint language.
//!
//! [`Formula`] is generic over its atom operand: a [`Constraint`] compares
//! trace feature columns, while a [`SurfaceFormula`] may also mention
//! literal constants and trajectory measurements. [`lower`] rewrites the
//! latter into the former plus a [`FeatureDerivationPlan`].
//!
//! There is no negation node. [`Formula::not`] pushes negation down to the
//! atoms instead.

mod lower;
mod negate;
mod parser;
mod printer;

use std::fmt;

pub use lower::{lower, Channel, FeatureDerivationPlan};
pub use parser::parse_surface;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Lt,
    Eq,
    Ne,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Le => a <= b,
            Cmp::Lt => a < b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison<T> {
    pub op: Cmp,
    pub lhs: T,
    pub rhs: T,
}

/// Column index into the feature axis of a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureRef(pub usize);

impl fmt::Display for FeatureRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Operand of a surface-level comparison.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Feature(usize),
    Const(f64),
    X,
    Y,
    Vx,
    Vy,
    Speed,
    Accel,
    Dist(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula<T> {
    Atom(Comparison<T>),
    And(Box<Formula<T>>, Box<Formula<T>>),
    Or(Box<Formula<T>>, Box<Formula<T>>),
    /// `N ρ`: false at the last step.
    StrongNext(Box<Formula<T>>),
    /// `X ρ`: true at the last step.
    WeakNext(Box<Formula<T>>),
    Always(Box<Formula<T>>),
    Eventually(Box<Formula<T>>),
    WeakUntil(Box<Formula<T>>, Box<Formula<T>>),
    StrongRelease(Box<Formula<T>>, Box<Formula<T>>),
}

pub type Constraint = Formula<FeatureRef>;
pub type SurfaceFormula = Formula<Term>;

impl<T> Formula<T> {
    pub fn atom(op: Cmp, lhs: T, rhs: T) -> Self {
        Formula::Atom(Comparison { op, lhs, rhs })
    }

    pub fn and(self, other: Self) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Self) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn strong_next(self) -> Self {
        Formula::StrongNext(Box::new(self))
    }

    pub fn weak_next(self) -> Self {
        Formula::WeakNext(Box::new(self))
    }

    pub fn always(self) -> Self {
        Formula::Always(Box::new(self))
    }

    pub fn eventually(self) -> Self {
        Formula::Eventually(Box::new(self))
    }

    pub fn until(self, other: Self) -> Self {
        Formula::WeakUntil(Box::new(self), Box::new(other))
    }

    pub fn release(self, other: Self) -> Self {
        Formula::StrongRelease(Box::new(self), Box::new(other))
    }

    /// Operator nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::StrongNext(a)
            | Formula::WeakNext(a)
            | Formula::Always(a)
            | Formula::Eventually(a) => 1 + a.depth(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::WeakUntil(a, b)
            | Formula::StrongRelease(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) => 1,
            Formula::StrongNext(a)
            | Formula::WeakNext(a)
            | Formula::Always(a)
            | Formula::Eventually(a) => 1 + a.size(),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::WeakUntil(a, b)
            | Formula::StrongRelease(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn atoms(&self) -> Vec<&Comparison<T>> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Comparison<T>>) {
        match self {
            Formula::Atom(c) => out.push(c),
            Formula::StrongNext(a)
            | Formula::WeakNext(a)
            | Formula::Always(a)
            | Formula::Eventually(a) => a.collect_atoms(out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::WeakUntil(a, b)
            | Formula::StrongRelease(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Rewrites every atom operand, keeping the tree shape.
    pub fn try_map_operands<U, E>(
        &self,
        f: &mut impl FnMut(&T) -> std::result::Result<U, E>,
    ) -> std::result::Result<Formula<U>, E> {
        let un = |a: &Formula<T>, f: &mut _| a.try_map_operands(f).map(Box::new);
        Ok(match self {
            Formula::Atom(c) => Formula::Atom(Comparison {
                op: c.op,
                lhs: f(&c.lhs)?,
                rhs: f(&c.rhs)?,
            }),
            Formula::And(a, b) => Formula::And(un(a, f)?, un(b, f)?),
            Formula::Or(a, b) => Formula::Or(un(a, f)?, un(b, f)?),
            Formula::StrongNext(a) => Formula::StrongNext(un(a, f)?),
            Formula::WeakNext(a) => Formula::WeakNext(un(a, f)?),
            Formula::Always(a) => Formula::Always(un(a, f)?),
            Formula::Eventually(a) => Formula::Eventually(un(a, f)?),
            Formula::WeakUntil(a, b) => Formula::WeakUntil(un(a, f)?, un(b, f)?),
            Formula::StrongRelease(a, b) => Formula::StrongRelease(un(a, f)?, un(b, f)?),
        })
    }
}

impl Constraint {
    /// Parses a formula whose operands are all raw feature columns `f<k>`.
    pub fn parse(text: &str) -> Result<Constraint> {
        parse_surface(text)?.try_map_operands(&mut |term| match term {
            Term::Feature(k) => Ok(FeatureRef(*k)),
            other => Err(Error::UnknownIdentifier(format!(
                "{other} (only feature columns f<k> are allowed here; lower the formula against a trajectory plan instead)"
            ))),
        })
    }

    /// Largest feature column referenced, if any atom exists.
    pub fn max_feature(&self) -> Option<usize> {
        self.atoms()
            .into_iter()
            .flat_map(|c| [c.lhs.0, c.rhs.0])
            .max()
    }
}

impl std::str::FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Constraint::parse(s)
    }
}
