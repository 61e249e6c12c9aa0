//! Robin Hood redistribution and martingale regularization.
//!
//! A martingale is regular when capital at or above 1 never drops back
//! below 1: once a bettor has doubled their stake, a regular strategy locks
//! the win. Regularization rebalances the two children of each node, moving
//! capital from the richer branch to the poorer (hence the name) while
//! preserving the parent's conditional average, so the initial value is
//! unchanged and every string whose prefix reached 1 still reaches 1.
//!
//! The redistribution function acts on pairs `(s, t)` with bias `α` on the
//! left coordinate, defined on pairs that are either both nonnegative or
//! have weighted average at least 1:
//!
//! 1. pairs inside the unit square are fixed;
//! 2. pairs with average `m >= 1` both move to `m`;
//! 3. otherwise the coordinate at or above 1 is cut to exactly 1 and the
//!    surplus is handed to the other side, reweighted by its bias.
//!
//! Each clause preserves the weighted average; a winner is never cut below
//! 1, and a loser never loses what it had below 1.

use std::sync::Arc;

use serde::Serialize;

use crate::cantor::BitString;
use crate::numerics::ExactRational;
use crate::{Error, Result};

use super::{eval_expr, EvalSession, Expr, Martingale};

/// The Robin Hood redistribution of `(s, t)` with left weight `alpha`.
///
/// Requires `alpha` strictly between 0 and 1 and `(s, t)` in the domain:
/// both coordinates nonnegative, or weighted average at least 1.
pub fn robin_hood(
    alpha: &ExactRational,
    s: &ExactRational,
    t: &ExactRational,
) -> Result<(ExactRational, ExactRational)> {
    let zero = ExactRational::zero();
    let one = ExactRational::one();
    if *alpha <= zero || *alpha >= one {
        return Err(Error::DegenerateBias {
            alpha: alpha.to_string(),
        });
    }
    let weighted = |a: &ExactRational, b: &ExactRational| &(alpha * a) + &(&(&one - alpha) * b);
    let m = weighted(s, t);
    let in_square =
        *s >= zero && *s <= one && *t >= zero && *t <= one;
    if in_square {
        return Ok((s.clone(), t.clone()));
    }
    if m >= one {
        return Ok((m.clone(), m));
    }
    if s.is_negative() || t.is_negative() {
        return Err(Error::OutsideRobinHoodDomain {
            alpha: alpha.to_string(),
            s: s.to_string(),
            t: t.to_string(),
        });
    }
    if *s >= one {
        // Average of (s - 1, t) is m - alpha; nonnegative because s >= 1.
        let rest = &(&m - alpha) / &(&one - alpha);
        Ok((one, rest))
    } else if *t >= one {
        let rest = &(&m - &(&one - alpha)) / alpha;
        Ok((rest, one))
    } else {
        unreachable!("nonnegative pair below 1 in both coordinates is inside the unit square")
    }
}

/// Evaluates the regularization node `me = Regularized(inner)` at `w` by
/// walking down from the root: the value at a child is the Robin Hood
/// redistribution of the parent's value shifted by the inner martingale's
/// local bets. Degenerate steps (zero-measure parent, deterministic child)
/// copy the parent's value. Memoized per node and string through the
/// session, so repeated queries share the path work.
pub(super) fn lambda_value(
    me: &Arc<Expr>,
    inner: &Arc<Expr>,
    s: &mut EvalSession,
    w: &BitString,
) -> Result<ExactRational> {
    let Some(parent) = w.parent() else {
        return eval_expr(inner, s, w);
    };
    // Recursing through eval_expr keeps the per-node memo table authoritative.
    let lam_parent = eval_expr(me, s, &parent)?;
    if s.measure().is_zero_at(&parent)? {
        return Ok(lam_parent);
    }
    let alpha = s.measure().conditional(&parent.child(false), &parent)?;
    if alpha.is_zero() || alpha == ExactRational::one() {
        return Ok(lam_parent);
    }
    let d_parent = eval_expr(inner, s, &parent)?;
    let shift = &lam_parent - &d_parent;
    let g0 = &shift + &eval_expr(inner, s, &parent.child(false))?;
    let g1 = &shift + &eval_expr(inner, s, &parent.child(true))?;
    let (l0, l1) = robin_hood(&alpha, &g0, &g1)?;
    Ok(if w.bit(w.len() - 1) { l1 } else { l0 })
}

/// Result of scanning a martingale for regularity violations up to a depth.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub depth: usize,
    /// Strings whose value is at least 1 while a child's value is below 1.
    pub violations: Vec<BitString>,
}

impl RegularityReport {
    pub fn is_regular(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans all strings of length below `depth`: wherever the value is at
/// least 1, both children must be too.
pub fn regularity_report(d: &Martingale, depth: usize) -> Result<RegularityReport> {
    let one = ExactRational::one();
    let mut s = EvalSession::new(d.measure());
    let mut violations = Vec::new();
    for w in BitString::all_up_to(depth.saturating_sub(1)) {
        if d.eval_exact_with(&mut s, &w)? >= one {
            for b in [false, true] {
                if d.eval_exact_with(&mut s, &w.child(b))? < one {
                    violations.push(w.clone());
                    break;
                }
            }
        }
    }
    Ok(RegularityReport { depth, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::table_from;
    use crate::measure::ProbMeasure;

    fn rat(x: &str) -> ExactRational {
        x.parse().unwrap()
    }

    fn bs(x: &str) -> BitString {
        x.parse().unwrap()
    }

    fn rh(alpha: &str, s: &str, t: &str) -> (ExactRational, ExactRational) {
        robin_hood(&rat(alpha), &rat(s), &rat(t)).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(rh("1/2", "1/2", "1/2"), (rat("1/2"), rat("1/2")));
        assert_eq!(rh("1/2", "3/2", "3/4"), (rat("9/8"), rat("9/8")));
        assert_eq!(rh("1/2", "3/2", "1/4"), (rat("1"), rat("3/4")));
    }

    #[test]
    fn clause_dispatch() {
        // Unit square is fixed even when the average reaches 1.
        assert_eq!(rh("1/2", "1", "1"), (rat("1"), rat("1")));
        // Rich-average pair outside the square moves to the average.
        assert_eq!(rh("1/2", "3/2", "3/4"), (rat("9/8"), rat("9/8")));
        // Left winner, poor average: cut to 1, surplus reweighted right.
        assert_eq!(rh("1/2", "3/2", "1/4"), (rat("1"), rat("3/4")));
        // Right winner mirrors.
        assert_eq!(rh("1/2", "1/4", "3/2"), (rat("3/4"), rat("1")));
        // A negative coordinate is fine inside the rich half-plane.
        let (a, b) = rh("1/2", "-1/2", "7/2");
        assert_eq!((a, b), (rat("3/2"), rat("3/2")));
    }

    #[test]
    fn domain_errors() {
        assert!(robin_hood(&rat("0"), &rat("1"), &rat("1")).is_err());
        assert!(robin_hood(&rat("1"), &rat("1"), &rat("1")).is_err());
        // Negative coordinate with poor average: outside the domain.
        assert!(robin_hood(&rat("1/2"), &rat("-1/2"), &rat("1")).is_err());
    }

    #[test]
    fn regularization_worked_table() {
        let mu = ProbMeasure::uniform();
        let d = table_from(
            &mu,
            2,
            &[
                ("", "1/2"),
                ("0", "1"),
                ("1", "0"),
                ("00", "2"),
                ("01", "0"),
                ("10", "0"),
                ("11", "0"),
            ],
        );
        let lam = d.regularize().unwrap();
        assert_eq!(lam.initial_value().unwrap(), rat("1/2"));
        assert_eq!(lam.eval_exact(&bs("0")).unwrap(), rat("1"));
        assert_eq!(lam.eval_exact(&bs("1")).unwrap(), rat("0"));
        // The winning branch has locked its capital at 1 on both children.
        assert_eq!(lam.eval_exact(&bs("00")).unwrap(), rat("1"));
        assert_eq!(lam.eval_exact(&bs("01")).unwrap(), rat("1"));
        assert!(regularity_report(&lam, 6).unwrap().is_regular());
        assert!(!regularity_report(&d, 3).unwrap().is_regular());
    }

    #[test]
    fn rich_pair_moves_to_average() {
        let mu = ProbMeasure::uniform();
        let d = table_from(&mu, 1, &[("", "1"), ("0", "3/2"), ("1", "1/2")]);
        let lam = d.regularize().unwrap();
        assert_eq!(lam.eval_exact(&bs("0")).unwrap(), rat("1"));
        assert_eq!(lam.eval_exact(&bs("1")).unwrap(), rat("1"));
    }

    #[test]
    fn unit_is_fixed() {
        let mu = ProbMeasure::uniform();
        let lam = Martingale::unit(&mu).regularize().unwrap();
        for w in BitString::all_up_to(6) {
            assert_eq!(lam.eval_exact(&w).unwrap(), rat("1"));
        }
    }

    #[test]
    fn zero_measure_steps_copy() {
        // Bias 0 forces every step to the 0 branch; the 1 branch has
        // measure zero and regularization copies values across it.
        let nu = ProbMeasure::bernoulli(rat("0")).unwrap();
        let d = table_from(&nu, 1, &[("", "1/2"), ("0", "1/2"), ("1", "7")]);
        let lam = d.regularize().unwrap();
        assert_eq!(lam.eval_exact(&bs("1")).unwrap(), rat("1/2"));
        assert_eq!(lam.eval_exact(&bs("11")).unwrap(), rat("1/2"));
    }
}
