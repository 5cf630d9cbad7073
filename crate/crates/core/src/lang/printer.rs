use std::fmt;

use super::{Formula, Term};

// Binding levels: `||` < `&&` < unary operators.
const OR: u8 = 0;
const AND: u8 = 1;
const UNARY: u8 = 2;

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Feature(k) => write!(f, "f{k}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::X => f.write_str("x"),
            Term::Y => f.write_str("y"),
            Term::Vx => f.write_str("vx"),
            Term::Vy => f.write_str("vy"),
            Term::Speed => f.write_str("speed"),
            Term::Accel => f.write_str("accel"),
            Term::Dist(x, y) => write!(f, "dist(p, ({x}, {y}))"),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Formula<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(self, OR, f)
    }
}

fn write_at<T: fmt::Display>(
    formula: &Formula<T>,
    level: u8,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    match formula {
        Formula::Atom(c) => write!(f, "({} {} {})", c.lhs, c.op.symbol(), c.rhs),
        Formula::Or(a, b) => {
            let wrap = level > OR;
            if wrap {
                f.write_str("(")?;
            }
            write_at(a, OR, f)?;
            f.write_str(" || ")?;
            write_at(b, AND, f)?;
            if wrap {
                f.write_str(")")?;
            }
            Ok(())
        }
        Formula::And(a, b) => {
            let wrap = level > AND;
            if wrap {
                f.write_str("(")?;
            }
            write_at(a, AND, f)?;
            f.write_str(" && ")?;
            write_at(b, UNARY, f)?;
            if wrap {
                f.write_str(")")?;
            }
            Ok(())
        }
        Formula::StrongNext(a) => unary("N", a, f),
        Formula::WeakNext(a) => unary("X", a, f),
        Formula::Always(a) => unary("G", a, f),
        Formula::Eventually(a) => unary("F", a, f),
        Formula::WeakUntil(a, b) => binary_temporal("U", a, b, f),
        Formula::StrongRelease(a, b) => binary_temporal("R", a, b, f),
    }
}

fn unary<T: fmt::Display>(op: &str, a: &Formula<T>, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{op} ")?;
    write_at(a, UNARY, f)
}

fn binary_temporal<T: fmt::Display>(
    op: &str,
    a: &Formula<T>,
    b: &Formula<T>,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    f.write_str("(")?;
    write_at(a, OR, f)?;
    write!(f, " {op} ")?;
    write_at(b, OR, f)?;
    f.write_str(")")
}

#[cfg(test)]
mod tests {
    use super::super::{parse_surface, Constraint};

    #[test]
    fn canonical_text() {
        let c = Constraint::parse("G f0 <= f1").unwrap();
        assert_eq!(c.to_string(), "G (f0 <= f1)");
        let c = Constraint::parse("f0 <= f1 U f2 < f3").unwrap();
        assert_eq!(c.to_string(), "((f0 <= f1) U (f2 < f3))");
        let c = Constraint::parse("(f0 < f1 || f1 < f0) && f2 == f2").unwrap();
        assert_eq!(c.to_string(), "((f0 < f1) || (f1 < f0)) && (f2 == f2)");
    }

    #[test]
    fn surface_terms_print_back() {
        let s = parse_surface("G (0.1 <= dist(p,(0.4,0.4)) && speed <= 0.15)").unwrap();
        assert_eq!(s.to_string(), "G ((0.1 <= dist(p, (0.4, 0.4))) && (speed <= 0.15))");
        assert_eq!(parse_surface(&s.to_string()).unwrap(), s);
    }
}
