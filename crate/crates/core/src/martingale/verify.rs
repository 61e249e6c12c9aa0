//! Exhaustive finite verification of martingale laws.
//!
//! Everything here is exact: a reported violation carries the two sides of
//! the failed identity as rationals, so a reader can recompute it by hand.

use serde::Serialize;

use crate::cantor::{BitString, PrefixSet};
use crate::measure::ProbMeasure;
use crate::numerics::ExactRational;
use crate::Result;

use super::{EvalSession, Martingale};

/// One failed check in a martingale scan.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleViolation {
    pub at: BitString,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `d(w) ν(w) != d(w0) ν(w0) + d(w1) ν(w1)`; both sides recorded.
    Identity {
        lhs: ExactRational,
        rhs: ExactRational,
    },
    Negative {
        value: ExactRational,
    },
}

/// Scan summary. `strings_visited` counts every string the scan touched:
/// `2^{depth+1} - 1` for a full scan to `depth`.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub depth: usize,
    pub strings_visited: usize,
    pub violations: Vec<MartingaleViolation>,
}

impl MartingaleReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks nonnegativity for every string of length at most `depth` and the
/// fairness identity under `nu` for every string of length below `depth`.
///
/// The measure is an explicit argument, not read off the martingale: values
/// are computed under the martingale's own semantics, and the identity is
/// weighted by `nu`, so a table can be validated against several measures.
pub fn verify_martingale(
    d: &Martingale,
    nu: &ProbMeasure,
    depth: usize,
) -> Result<MartingaleReport> {
    let mut s = EvalSession::new(d.measure());
    verify_martingale_with(&mut s, d, nu, depth)
}

/// Session-sharing variant of [`verify_martingale`]: scanning both halves
/// of a split through one session reuses every value of their shared
/// subterms.
pub fn verify_martingale_with(
    s: &mut EvalSession,
    d: &Martingale,
    nu: &ProbMeasure,
    depth: usize,
) -> Result<MartingaleReport> {
    let mut violations = Vec::new();
    let mut strings_visited = 0usize;
    for w in BitString::all_up_to(depth) {
        strings_visited += 1;
        let value = d.eval_exact_with(s, &w)?;
        if value.is_negative() {
            violations.push(MartingaleViolation {
                at: w.clone(),
                kind: ViolationKind::Negative { value },
            });
            continue;
        }
        if w.len() < depth {
            let lhs = &value * &nu.measure_of(&w)?;
            let left = w.child(false);
            let right = w.child(true);
            let rhs = &(&d.eval_exact_with(s, &left)? * &nu.measure_of(&left)?)
                + &(&d.eval_exact_with(s, &right)? * &nu.measure_of(&right)?);
            if lhs != rhs {
                violations.push(MartingaleViolation {
                    at: w,
                    kind: ViolationKind::Identity { lhs, rhs },
                });
            }
        }
    }
    Ok(MartingaleReport {
        depth,
        strings_visited,
        violations,
    })
}

/// Outcome of searching the prefixes of a string for capital at least 1.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageOutcome {
    /// Shortest prefix whose value reaches 1, with the value for recheck.
    Witness {
        prefix: BitString,
        value: ExactRational,
    },
    /// No prefix reaches 1; the whole length was searched.
    Refuted { depth: usize },
}

/// Certificate that a martingale does or does not unitarily cover a string.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageCertificate {
    pub subject: BitString,
    pub outcome: CoverageOutcome,
}

impl CoverageCertificate {
    pub fn is_covered(&self) -> bool {
        matches!(self.outcome, CoverageOutcome::Witness { .. })
    }
}

impl Martingale {
    /// Does some prefix of `w` (including `w` itself) carry value at least
    /// 1? This is the finite trace of the unitary success set.
    pub fn covers(&self, w: &BitString) -> Result<CoverageCertificate> {
        let mut s = EvalSession::new(self.measure());
        self.covers_with(&mut s, w)
    }

    /// Session-sharing variant of [`Martingale::covers`].
    pub fn covers_with(&self, s: &mut EvalSession, w: &BitString) -> Result<CoverageCertificate> {
        let one = ExactRational::one();
        for prefix in w.prefixes() {
            let value = self.eval_exact_with(s, &prefix)?;
            if value >= one {
                return Ok(CoverageCertificate {
                    subject: w.clone(),
                    outcome: CoverageOutcome::Witness { prefix, value },
                });
            }
        }
        Ok(CoverageCertificate {
            subject: w.clone(),
            outcome: CoverageOutcome::Refuted { depth: w.len() },
        })
    }

    /// `Σ_{w in A} d(w) ν(w)` over a prefix set, and whether it is bounded
    /// by the initial value. The bound holds for every true martingale; its
    /// failure is a finite disproof of the fairness identity somewhere
    /// above the set.
    pub fn prefix_sum_bound(&self, set: &PrefixSet) -> Result<(ExactRational, bool)> {
        let mut s = EvalSession::new(self.measure());
        let mut sum = ExactRational::zero();
        for w in set.iter() {
            sum += &(&self.eval_exact_with(&mut s, w)? * &self.measure().measure_of(w)?);
        }
        let ok = sum <= self.initial_value()?;
        Ok((sum, ok))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::table_from;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn rat(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    #[test]
    fn prefix_set_hitter_is_a_martingale() {
        let mu = ProbMeasure::uniform();
        let d = Martingale::from_prefix_set(PrefixSet::new([bs("0")]).unwrap(), &mu);
        let report = verify_martingale(&d, &mu, 6).unwrap();
        assert!(report.is_valid());
        assert_eq!(report.strings_visited, (1 << 7) - 1);
    }

    #[test]
    fn broken_table_reports_at_root() {
        let mu = ProbMeasure::uniform();
        let d = table_from(&mu, 1, &[("", "1"), ("0", "2"), ("1", "1")]);
        let report = verify_martingale(&d, &mu, 1).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].at, BitString::empty());
        match &report.violations[0].kind {
            ViolationKind::Identity { lhs, rhs } => {
                assert_eq!(lhs, &rat("1"));
                assert_eq!(rhs, &rat("3/2"));
            }
            other => panic!("wrong kind: {other:?}"),
        }
    }

    #[test]
    fn table_valid_under_one_measure_only() {
        // Fair under bias 1/4 but not under the uniform measure.
        let nu = ProbMeasure::bernoulli(rat("1/4")).unwrap();
        let d = table_from(&nu, 1, &[("", "1"), ("0", "4/3"), ("1", "0")]);
        assert!(verify_martingale(&d, &nu, 1).unwrap().is_valid());
        assert!(!verify_martingale(&d, &ProbMeasure::uniform(), 1)
            .unwrap()
            .is_valid());
    }

    #[test]
    fn ladder_verifies_under_uniform() {
        for r in 0..4 {
            let d = Martingale::z3_ladder(r);
            assert!(verify_martingale(&d, &ProbMeasure::uniform(), 6)
                .unwrap()
                .is_valid());
        }
        let sum = Martingale::z3_cover_sum();
        assert!(verify_martingale(&sum, &ProbMeasure::uniform(), 8)
            .unwrap()
            .is_valid());
    }

    #[test]
    fn coverage_certificates() {
        let d = Martingale::z3_ladder(1);
        let cert = d.covers(&bs("001")).unwrap();
        match cert.outcome {
            CoverageOutcome::Witness { ref prefix, .. } => assert_eq!(prefix, &bs("00")),
            _ => panic!("expected witness"),
        }

        let mu = ProbMeasure::uniform();
        let hitter = Martingale::from_prefix_set(PrefixSet::new([bs("0")]).unwrap(), &mu);
        let cert = hitter.covers(&bs("11")).unwrap();
        match cert.outcome {
            CoverageOutcome::Refuted { depth } => assert_eq!(depth, 2),
            _ => panic!("expected refutation"),
        }
    }

    #[test]
    fn prefix_sum_at_the_bound() {
        let d = Martingale::z3_ladder(1);
        let set = PrefixSet::new([bs("00")]).unwrap();
        let (sum, ok) = d.prefix_sum_bound(&set).unwrap();
        assert_eq!(sum, rat("1/4"));
        assert!(ok);

        // Covering prefix set of the full level.
        let level = PrefixSet::new(BitString::all_of_length(3)).unwrap();
        let (sum, ok) = d.prefix_sum_bound(&level).unwrap();
        assert_eq!(sum, d.initial_value().unwrap());
        assert!(ok);
    }
}
