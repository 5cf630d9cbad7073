use super::{Cmp, Comparison, Formula};

impl<T: Clone> Formula<T> {
    /// The dual constraint: holds exactly where `self` fails, at every step
    /// inside the trace.
    ///
    /// Atoms flip (`a ≤ b` ↦ `b < a`, `a = b` ↦ `a ≠ b`), `∧`/`∨` swap by De
    /// Morgan, `N`/`X` and `□`/`◇` swap, and weak until and strong release
    /// swap with both operands negated.
    pub fn not(&self) -> Formula<T> {
        match self {
            Formula::Atom(c) => Formula::Atom(negate_atom(c)),
            Formula::And(a, b) => a.not().or(b.not()),
            Formula::Or(a, b) => a.not().and(b.not()),
            Formula::StrongNext(a) => a.not().weak_next(),
            Formula::WeakNext(a) => a.not().strong_next(),
            Formula::Always(a) => a.not().eventually(),
            Formula::Eventually(a) => a.not().always(),
            Formula::WeakUntil(a, b) => a.not().release(b.not()),
            Formula::StrongRelease(a, b) => a.not().until(b.not()),
        }
    }
}

fn negate_atom<T: Clone>(c: &Comparison<T>) -> Comparison<T> {
    let (op, lhs, rhs) = match c.op {
        Cmp::Le => (Cmp::Lt, c.rhs.clone(), c.lhs.clone()),
        Cmp::Lt => (Cmp::Le, c.rhs.clone(), c.lhs.clone()),
        Cmp::Eq => (Cmp::Ne, c.lhs.clone(), c.rhs.clone()),
        Cmp::Ne => (Cmp::Eq, c.lhs.clone(), c.rhs.clone()),
    };
    Comparison { op, lhs, rhs }
}

#[cfg(test)]
mod tests {
    use super::super::{Constraint, FeatureRef};
    use super::*;

    #[test]
    fn atom_duals() {
        let le = Constraint::parse("f0 <= f1").unwrap();
        assert_eq!(le.not(), Constraint::parse("f1 < f0").unwrap());
        let eq = Constraint::parse("f2 == f0").unwrap();
        assert_eq!(eq.not(), Constraint::parse("f2 != f0").unwrap());
    }

    #[test]
    fn temporal_duals() {
        let c = Constraint::parse("(G (f0 <= f1) U N (f1 < f2))").unwrap();
        let expect = Constraint::parse("(F (f1 < f0) R X (f2 <= f1))").unwrap();
        assert_eq!(c.not(), expect);
        assert_eq!(c.not().not(), c);
    }

    #[test]
    fn involution_on_every_constructor() {
        let a = Formula::atom(Cmp::Lt, FeatureRef(0), FeatureRef(1));
        let b = Formula::atom(Cmp::Ne, FeatureRef(1), FeatureRef(2));
        let all = [
            a.clone().and(b.clone()),
            a.clone().or(b.clone()),
            a.clone().strong_next(),
            a.clone().weak_next(),
            a.clone().always(),
            a.clone().eventually(),
            a.clone().until(b.clone()),
            a.clone().release(b.clone()),
        ];
        for f in all {
            assert_eq!(f.not().not(), f);
        }
    }
}
