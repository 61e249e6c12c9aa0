//! Probability measures on Cantor space.
//!
//! A measure assigns each finite string `w` the probability `ν(w)` of the
//! cylinder `C_w`, subject to `ν(λ) = 1` and additivity
//! `ν(w) = ν(w0) + ν(w1)`. Three representations are supported:
//!
//! * the uniform measure `μ(w) = 2^{-|w|}`;
//! * coin-toss product measures with an explicit list of per-position
//!   biases and a constant tail bias, where `β_k` is the probability of a
//!   `1` at position `k`;
//! * finite tables up to a depth, extended beyond it either by proportional
//!   halving or not at all.
//!
//! All values are exact rationals, so zero-measure strings are decidable
//! and conditionals are computed without rounding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cantor::BitString;
use crate::numerics::ExactRational;
use crate::{Error, Result};

/// Extension rule for a table measure beyond its stored depth.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionRule {
    /// `ν(wb) = ν(w) / 2` beyond the table.
    Proportional,
    /// Queries beyond the table depth are errors.
    Reject,
}

/// A probability measure on Cantor space.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbMeasure {
    Uniform,
    CoinToss {
        /// Explicit biases for the first positions; `biases[k]` is the
        /// probability of reading a 1 at position `k`.
        biases: Vec<ExactRational>,
        /// Bias for every position past the explicit list.
        tail: ExactRational,
    },
    Table {
        depth: usize,
        /// Values for every string of length at most `depth`.
        values: BTreeMap<BitString, ExactRational>,
        extension: ExtensionRule,
    },
}

impl ProbMeasure {
    pub fn uniform() -> Self {
        ProbMeasure::Uniform
    }

    /// Coin-toss measure; all biases must lie in `[0, 1]`.
    pub fn coin_toss(biases: Vec<ExactRational>, tail: ExactRational) -> Result<Self> {
        let one = ExactRational::one();
        for b in biases.iter().chain(std::iter::once(&tail)) {
            b.require_nonnegative()?;
            if *b > one {
                return Err(Error::Precondition(format!(
                    "coin-toss bias {b} exceeds 1"
                )));
            }
        }
        Ok(ProbMeasure::CoinToss { biases, tail })
    }

    /// Constant-bias coin toss.
    pub fn bernoulli(bias: ExactRational) -> Result<Self> {
        Self::coin_toss(Vec::new(), bias)
    }

    /// Table measure. Requires an entry for every string of length at most
    /// `depth` and nonnegative values; the measure axioms themselves are
    /// checked separately by [`validate_table_measure`], so structurally
    /// complete but non-additive tables are representable (and reportable).
    pub fn table(
        depth: usize,
        values: BTreeMap<BitString, ExactRational>,
        extension: ExtensionRule,
    ) -> Result<Self> {
        for w in BitString::all_up_to(depth) {
            match values.get(&w) {
                None => return Err(Error::MissingTableEntry { w: w.to_string() }),
                Some(v) => v.require_nonnegative()?,
            }
        }
        Ok(ProbMeasure::Table {
            depth,
            values,
            extension,
        })
    }

    /// Bias at position `k` for coin-toss measures.
    fn bias_at(biases: &[ExactRational], tail: &ExactRational, k: usize) -> ExactRational {
        biases.get(k).cloned().unwrap_or_else(|| tail.clone())
    }

    /// `ν(w)`, exact.
    pub fn measure_of(&self, w: &BitString) -> Result<ExactRational> {
        match self {
            ProbMeasure::Uniform => Ok(ExactRational::pow2(-(w.len() as i64))),
            ProbMeasure::CoinToss { biases, tail } => {
                let one = ExactRational::one();
                let mut acc = ExactRational::one();
                for k in 0..w.len() {
                    let beta = Self::bias_at(biases, tail, k);
                    let factor = if w.bit(k) { beta } else { &one - &beta };
                    if factor.is_zero() {
                        return Ok(ExactRational::zero());
                    }
                    acc = &acc * &factor;
                }
                Ok(acc)
            }
            ProbMeasure::Table {
                depth,
                values,
                extension,
            } => {
                if w.len() <= *depth {
                    values
                        .get(w)
                        .cloned()
                        .ok_or_else(|| Error::MissingTableEntry { w: w.to_string() })
                } else {
                    match extension {
                        ExtensionRule::Proportional => {
                            let base = self.measure_of(&w.prefix(*depth))?;
                            Ok(&base * &ExactRational::pow2(-((w.len() - depth) as i64)))
                        }
                        ExtensionRule::Reject => Err(Error::BeyondTableDepth {
                            depth: *depth,
                            w: w.to_string(),
                        }),
                    }
                }
            }
        }
    }

    /// Decidable zero test for `ν(w)`.
    pub fn is_zero_at(&self, w: &BitString) -> Result<bool> {
        Ok(self.measure_of(w)?.is_zero())
    }

    /// Conditional measure `ν(v | w)`: 1 when `v` is a prefix of `w`,
    /// `ν(v)/ν(w)` when `w` is a prefix of `v`, and 0 when the strings are
    /// incomparable. Undefined (an error) when `ν(w) = 0`.
    pub fn conditional(&self, v: &BitString, w: &BitString) -> Result<ExactRational> {
        let nu_w = self.measure_of(w)?;
        if nu_w.is_zero() {
            return Err(Error::ZeroConditional { w: w.to_string() });
        }
        if v.is_prefix_of(w) {
            Ok(ExactRational::one())
        } else if w.is_prefix_of(v) {
            Ok(&self.measure_of(v)? / &nu_w)
        } else {
            Ok(ExactRational::zero())
        }
    }

    /// Positivity bound for this measure; see [`PositivityBound`].
    pub fn positivity_bound(&self) -> Result<PositivityBound> {
        match self {
            ProbMeasure::Uniform => Ok(PositivityBound {
                prefix: vec![0],
                tail_step: 1,
            }),
            ProbMeasure::CoinToss { biases, tail } => {
                let one = ExactRational::one();
                let step = |beta: &ExactRational| -> Result<u64> {
                    // Smallest nonzero per-position factor; a degenerate
                    // bias forces one branch, whose factor is 1.
                    let a = beta.clone();
                    let b = &one - beta;
                    let m = match (a.is_zero(), b.is_zero()) {
                        (true, _) => b,
                        (_, true) => a,
                        _ => a.min(b),
                    };
                    m.positivity_exponent()
                };
                let mut prefix = vec![0u64];
                let mut acc = 0u64;
                for beta in biases {
                    acc += step(beta)?;
                    prefix.push(acc);
                }
                Ok(PositivityBound {
                    prefix,
                    tail_step: step(tail)?,
                })
            }
            ProbMeasure::Table { depth, values, .. } => {
                // Least valid exponent per length, by scanning the table.
                let mut prefix = Vec::with_capacity(depth + 1);
                for n in 0..=*depth {
                    let mut bits = 0u64;
                    for (w, v) in values.iter() {
                        if w.len() == n && !v.is_zero() {
                            bits = bits.max(v.positivity_exponent()?);
                        }
                    }
                    prefix.push(bits);
                }
                Ok(PositivityBound {
                    prefix,
                    tail_step: 1,
                })
            }
        }
    }
}

/// Lower-bound witness for nonzero measures: `ν(w) = 0` or
/// `ν(w) >= 2^{-bits(|w|)}`. Used to truncate series whose tails are
/// controlled by `1/ν(w)`.
#[derive(Clone, Debug)]
pub struct PositivityBound {
    /// `prefix[n]` is the exponent for length `n`, up to the stored horizon.
    prefix: Vec<u64>,
    /// Additional exponent per position past the horizon.
    tail_step: u64,
}

impl PositivityBound {
    /// Exponent `l(n)` such that every nonzero `ν(w)` with `|w| = n` is at
    /// least `2^{-l(n)}`.
    pub fn bits(&self, n: usize) -> u64 {
        let last = self.prefix.len() - 1;
        if n <= last {
            self.prefix[n]
        } else {
            self.prefix[last] + self.tail_step * (n - last) as u64
        }
    }
}

/// One additivity or normalization violation in a table measure.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureViolation {
    pub at: BitString,
    pub lhs: ExactRational,
    pub rhs: ExactRational,
}

/// Validation report for a table measure.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub depth: usize,
    pub violations: Vec<MeasureViolation>,
}

impl MeasureReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `ν(λ) = 1` and `ν(w) = ν(w0) + ν(w1)` for every interior node of
/// a table measure. Violations are reported, not raised: invalid tables are
/// first-class inputs for diagnostics.
pub fn validate_table_measure(nu: &ProbMeasure) -> Result<MeasureReport> {
    let (depth, values) = match nu {
        ProbMeasure::Table { depth, values, .. } => (*depth, values),
        _ => {
            return Err(Error::Precondition(
                "validate_table_measure takes a table measure".to_string(),
            ))
        }
    };
    let mut violations = Vec::new();
    let root = values
        .get(&BitString::empty())
        .cloned()
        .ok_or_else(|| Error::MissingTableEntry { w: "λ".to_string() })?;
    if root != ExactRational::one() {
        violations.push(MeasureViolation {
            at: BitString::empty(),
            lhs: root,
            rhs: ExactRational::one(),
        });
    }
    for n in 0..depth {
        for w in BitString::all_of_length(n) {
            let here = values.get(&w).cloned().unwrap_or_default();
            let left = values.get(&w.child(false)).cloned().unwrap_or_default();
            let right = values.get(&w.child(true)).cloned().unwrap_or_default();
            let sum = &left + &right;
            if here != sum {
                violations.push(MeasureViolation {
                    at: w,
                    lhs: here,
                    rhs: sum,
                });
            }
        }
    }
    Ok(MeasureReport { depth, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn rat(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    fn quarter() -> ProbMeasure {
        ProbMeasure::bernoulli(rat("1/4")).unwrap()
    }

    #[test]
    fn uniform_values() {
        let mu = ProbMeasure::uniform();
        assert_eq!(mu.measure_of(&bs("")).unwrap(), rat("1"));
        assert_eq!(mu.measure_of(&bs("0110")).unwrap(), rat("1/16"));
    }

    #[test]
    fn coin_toss_products() {
        let nu = quarter();
        // "10": one 1 (factor 1/4) then one 0 (factor 3/4).
        assert_eq!(nu.measure_of(&bs("10")).unwrap(), rat("3/16"));
        assert_eq!(nu.measure_of(&bs("00")).unwrap(), rat("9/16"));
        let half = ProbMeasure::bernoulli(rat("1/2")).unwrap();
        for w in BitString::all_up_to(6) {
            assert_eq!(
                half.measure_of(&w).unwrap(),
                ProbMeasure::uniform().measure_of(&w).unwrap()
            );
        }
    }

    #[test]
    fn mixed_bias_positions() {
        let nu = ProbMeasure::coin_toss(vec![rat("1/4"), rat("1/2")], rat("3/4")).unwrap();
        // Position 0 bias 1/4, position 1 bias 1/2, positions >= 2 bias 3/4.
        assert_eq!(nu.measure_of(&bs("1")).unwrap(), rat("1/4"));
        assert_eq!(nu.measure_of(&bs("11")).unwrap(), rat("1/8"));
        assert_eq!(nu.measure_of(&bs("111")).unwrap(), rat("3/32"));
        assert_eq!(nu.measure_of(&bs("110")).unwrap(), rat("1/32"));
    }

    #[test]
    fn degenerate_bias_zeroes() {
        let nu = ProbMeasure::bernoulli(rat("0")).unwrap();
        assert!(nu.is_zero_at(&bs("1")).unwrap());
        assert_eq!(nu.measure_of(&bs("00")).unwrap(), rat("1"));
    }

    fn two_point(depth: usize) -> ProbMeasure {
        // Mass 1/2 on each of the two constant rays; everything else null.
        let mut values = BTreeMap::new();
        values.insert(BitString::empty(), rat("1"));
        for n in 1..=depth {
            for w in BitString::all_of_length(n) {
                let constant = w.bits().iter().all(|&b| b == w.bit(0));
                let v = if constant { rat("1/2") } else { rat("0") };
                values.insert(w, v);
            }
        }
        ProbMeasure::table(depth, values, ExtensionRule::Reject).unwrap()
    }

    #[test]
    fn table_measure_and_conditional() {
        let nu = two_point(3);
        assert_eq!(nu.measure_of(&bs("000")).unwrap(), rat("1/2"));
        assert!(nu.is_zero_at(&bs("01")).unwrap());
        assert!(matches!(
            nu.measure_of(&bs("0000")),
            Err(Error::BeyondTableDepth { .. })
        ));
        assert!(matches!(
            nu.conditional(&bs("010"), &bs("01")),
            Err(Error::ZeroConditional { .. })
        ));
        assert_eq!(nu.conditional(&bs("00"), &bs("0")).unwrap(), rat("1"));
        let report = validate_table_measure(&nu).unwrap();
        assert!(report.is_valid());
    }

    #[test]
    fn proportional_extension_halves() {
        let mut values = BTreeMap::new();
        values.insert(BitString::empty(), rat("1"));
        values.insert(bs("0"), rat("1/3"));
        values.insert(bs("1"), rat("2/3"));
        let nu = ProbMeasure::table(1, values, ExtensionRule::Proportional).unwrap();
        assert_eq!(nu.measure_of(&bs("00")).unwrap(), rat("1/6"));
        assert_eq!(nu.measure_of(&bs("011")).unwrap(), rat("1/12"));
    }

    #[test]
    fn conditional_three_cases() {
        let mu = ProbMeasure::uniform();
        assert_eq!(mu.conditional(&bs("01"), &bs("0")).unwrap(), rat("1/2"));
        assert_eq!(mu.conditional(&bs("0"), &bs("01")).unwrap(), rat("1"));
        assert_eq!(mu.conditional(&bs("1"), &bs("0")).unwrap(), rat("0"));
        assert_eq!(mu.conditional(&bs("01"), &bs("01")).unwrap(), rat("1"));
    }

    #[test]
    fn invalid_table_reported_not_raised() {
        let mut values = BTreeMap::new();
        values.insert(BitString::empty(), rat("1"));
        values.insert(bs("0"), rat("1/3"));
        values.insert(bs("1"), rat("1/3"));
        let nu = ProbMeasure::table(1, values, ExtensionRule::Reject).unwrap();
        let report = validate_table_measure(&nu).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].at, BitString::empty());
        assert_eq!(report.violations[0].rhs, rat("2/3"));
    }

    #[test]
    fn positivity_bounds() {
        let mu = ProbMeasure::uniform();
        let b = mu.positivity_bound().unwrap();
        for n in 0..20 {
            assert_eq!(b.bits(n), n as u64);
        }

        let q = quarter().positivity_bound().unwrap();
        for n in 0..20 {
            assert_eq!(q.bits(n), 2 * n as u64);
        }

        // Mixed: positions 0 and 1 contribute 2 bits (bias 1/4), then the
        // 1/2 tail contributes 1 bit each.
        let nu = ProbMeasure::coin_toss(vec![rat("1/4"), rat("1/4")], rat("1/2")).unwrap();
        let b = nu.positivity_bound().unwrap();
        assert_eq!(b.bits(0), 0);
        assert_eq!(b.bits(1), 2);
        assert_eq!(b.bits(2), 4);
        assert_eq!(b.bits(4), 6);

        // Table: the two-point measure has every nonzero value 1/2 past the
        // root.
        let t = two_point(3).positivity_bound().unwrap();
        assert_eq!(t.bits(0), 0);
        assert_eq!(t.bits(3), 1);
    }

    #[test]
    fn positivity_bound_is_sound() {
        let measures = [
            ProbMeasure::uniform(),
            quarter(),
            ProbMeasure::coin_toss(vec![rat("1/3")], rat("2/5")).unwrap(),
            two_point(4),
        ];
        for nu in &measures {
            let bound = nu.positivity_bound().unwrap();
            for w in BitString::all_up_to(4) {
                let v = nu.measure_of(&w).unwrap();
                if !v.is_zero() {
                    assert!(
                        v >= ExactRational::pow2(-(bound.bits(w.len()) as i64)),
                        "bound too weak at {w} for {nu:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn table_requires_complete_entries() {
        let mut values = BTreeMap::new();
        values.insert(BitString::empty(), rat("1"));
        values.insert(bs("0"), rat("1/2"));
        let err = ProbMeasure::table(1, values, ExtensionRule::Reject).unwrap_err();
        assert!(matches!(err, Error::MissingTableEntry { .. }));
    }

    #[test]
    fn serde_round_trip() {
        let nu = ProbMeasure::coin_toss(vec![rat("1/4"), rat("1/2")], rat("3/4")).unwrap();
        let json = serde_json::to_string(&nu).unwrap();
        let back: ProbMeasure = serde_json::from_str(&json).unwrap();
        assert_eq!(nu, back);
        let parsed: ProbMeasure = serde_json::from_str(r#"{"kind":"uniform"}"#).unwrap();
        assert_eq!(parsed, ProbMeasure::uniform());
    }
}
