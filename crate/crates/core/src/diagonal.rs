//! Diagonalization against a martingale, and the zero-one block transform.
//!
//! The constructor walks away from a martingale's success set: it jumps to
//! a chosen root `w` and then repeatedly extends by the child whose
//! approximate value is smaller, so capital along the produced ray stays
//! bounded away from 1. The block transform rewires every heavy depth-`m`
//! subtree through one light leaf, collapsing initial capital while
//! preserving the fairness identity under product measures.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::cantor::BitString;
use crate::martingale::{EvalSession, Martingale, ZeroOneData};
use crate::measure::ProbMeasure;
use crate::numerics::{dyadic_approx, ExactRational};
use crate::{Error, Result};

/// Finite run of the diagonal constructor: the chosen slack exponent, the
/// final produced prefix, and every intermediate prefix with its exact
/// capital.
#[derive(Clone, Debug, Serialize)]
pub struct DiagonalRun {
    pub m: usize,
    pub prefix: BitString,
    pub trace: Vec<(BitString, ExactRational)>,
}

/// Walks `steps` applications of the constructor from the empty string.
///
/// Requires `d(λ) < ν(w)` exactly; the slack exponent `m` is minimal with
/// `d(w) ≤ 1 - 2^{1-m}` (and 1 when `d(w) = 0`). From any proper prefix of
/// `w` the constructor jumps straight to `w`; past `w` it extends by the
/// child whose floor approximation at `|x| + m + 2` bits is not larger,
/// preferring 0 on ties. Every value past `w` is checked against the
/// telescoping bound `d(w) + Σ_{i<j} 2^{-(i+m+1)}`, which stays strictly
/// below `1 - 2^{-m}`.
pub fn conserve_constructor(
    d: &Martingale,
    nu: &ProbMeasure,
    w: &BitString,
    steps: usize,
) -> Result<DiagonalRun> {
    if d.measure() != nu {
        return Err(Error::MeasureMismatch);
    }
    let d_lambda = d.initial_value()?;
    let nu_w = nu.measure_of(w)?;
    if d_lambda >= nu_w {
        return Err(Error::Precondition(format!(
            "initial capital {d_lambda} is not below the target cylinder's measure {nu_w}"
        )));
    }
    let d_w = d.eval_exact(w)?;
    if d_w >= ExactRational::one() {
        return Err(Error::Precondition(format!(
            "capital {d_w} at the root prefix leaves no slack below 1"
        )));
    }
    let mut m = 1usize;
    while d_w > &ExactRational::one() - &ExactRational::pow2(1 - m as i64) {
        m += 1;
    }

    let mut session = EvalSession::new(nu);
    let mut current = BitString::empty();
    let mut trace = vec![(current.clone(), d_lambda)];
    // Bit-steps taken after reaching w, for the telescoping bound.
    let mut past_w = 0usize;
    let mut bound = d_w.clone();
    for _ in 0..steps {
        if current.is_proper_prefix_of(w) {
            current = w.clone();
        } else {
            let a = (current.len() + m + 2) as u32;
            let v0 = d.eval_exact_with(&mut session, &current.child(false))?;
            let v1 = d.eval_exact_with(&mut session, &current.child(true))?;
            let a0 = dyadic_approx(&v0, a)?.to_rational();
            let a1 = dyadic_approx(&v1, a)?.to_rational();
            current = current.child(a0 > a1);
            bound += &ExactRational::pow2(-((past_w + m + 1) as i64));
            past_w += 1;
        }
        let value = d.eval_exact_with(&mut session, &current)?;
        if past_w > 0 {
            let hard_cap = &ExactRational::one() - &ExactRational::pow2(-(m as i64));
            if value > bound || value > hard_cap {
                return Err(Error::TraceBoundViolated {
                    step: trace.len(),
                    value: value.to_string(),
                    bound: bound.min(hard_cap).to_string(),
                });
            }
        }
        trace.push((current.clone(), value));
    }
    Ok(DiagonalRun {
        m,
        prefix: current,
        trace,
    })
}

/// Lexicographically least length-`m` string whose capital does not exceed
/// the initial capital; the fairness identity guarantees one exists for
/// every true martingale.
pub fn find_light_leaf(d: &Martingale, m: usize) -> Result<BitString> {
    let d_lambda = d.initial_value()?;
    let mut session = EvalSession::new(d.measure());
    for u in BitString::all_of_length(m) {
        if d.eval_exact_with(&mut session, &u)? <= d_lambda {
            return Ok(u);
        }
    }
    Err(Error::NoLightLeaf {
        m,
        initial: d_lambda.to_string(),
    })
}

/// Depth-`m` partition of a martingale's frontier: `heavy` strings carry
/// capital at least 1, `light` ones do not, and `u` is the light leaf the
/// transform substitutes for heavy prefixes.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroOneContext {
    pub m: usize,
    pub u: BitString,
    pub light: Vec<BitString>,
    pub heavy: Vec<BitString>,
}

pub fn zero_one_context(d: &Martingale, m: usize) -> Result<ZeroOneContext> {
    let u = find_light_leaf(d, m)?;
    let one = ExactRational::one();
    let mut session = EvalSession::new(d.measure());
    let mut light = Vec::new();
    let mut heavy = Vec::new();
    for w in BitString::all_of_length(m) {
        if d.eval_exact_with(&mut session, &w)? >= one {
            heavy.push(w);
        } else {
            light.push(w);
        }
    }
    Ok(ZeroOneContext { m, u, light, heavy })
}

/// The capital the transform provably does not exceed at the root: light
/// frontier mass kept as is, heavy frontier mass replaced by the light
/// leaf's capital.
pub fn two_sum_bound(
    d: &Martingale,
    nu: &ProbMeasure,
    ctx: &ZeroOneContext,
) -> Result<ExactRational> {
    let mut session = EvalSession::new(nu);
    let mut total = ExactRational::zero();
    for w in &ctx.light {
        total += &(&d.eval_exact_with(&mut session, w)? * &nu.measure_of(w)?);
    }
    let mut heavy_mass = ExactRational::zero();
    for w in &ctx.heavy {
        heavy_mass += &nu.measure_of(w)?;
    }
    total += &(&d.eval_exact_with(&mut session, &ctx.u)? * &heavy_mass);
    Ok(total)
}

/// Rewires every heavy depth-`m` subtree of `d` through the light leaf
/// and back-solves the interior so the result is again a `ν`-martingale.
///
/// Requires a product (coin-toss or uniform) measure: substitution only
/// preserves conditional mass ratios when every level is independent. The
/// operand is taken as given; callers wanting the regular-martingale
/// guarantees should regularize first.
pub fn zero_one_transform(
    d: &Martingale,
    nu: &ProbMeasure,
    m: usize,
) -> Result<Martingale> {
    if d.measure() != nu {
        return Err(Error::MeasureMismatch);
    }
    if matches!(nu, ProbMeasure::Table { .. }) {
        return Err(Error::NonProductMeasure {
            op: "zero_one_transform",
        });
    }
    let ctx = zero_one_context(d, m)?;
    let heavy: BTreeSet<BitString> = ctx.heavy.iter().cloned().collect();

    // Frontier values of the transform, then one weighted-average pass per
    // level down to the root. Zero-measure interior strings take value 0;
    // the identity at them is vacuous either way.
    let mut session = EvalSession::new(nu);
    let mut frontier: BTreeMap<BitString, ExactRational> = BTreeMap::new();
    for w in BitString::all_of_length(m) {
        let v = if heavy.contains(&w) {
            d.eval_exact_with(&mut session, &ctx.u)?
        } else {
            d.eval_exact_with(&mut session, &w)?
        };
        frontier.insert(w, v);
    }
    let mut below: BTreeMap<BitString, ExactRational> = BTreeMap::new();
    for level in (0..m).rev() {
        for v in BitString::all_of_length(level) {
            let child = |b: bool| -> Result<ExactRational> {
                let c = v.child(b);
                let value = if level + 1 == m {
                    frontier[&c].clone()
                } else {
                    below[&c].clone()
                };
                Ok(&value * &nu.measure_of(&c)?)
            };
            let mass = nu.measure_of(&v)?;
            let value = if mass.is_zero() {
                ExactRational::zero()
            } else {
                (&child(false)? + &child(true)?)
                    .checked_div(&mass)
                    .expect("nonzero mass")
            };
            below.insert(v, value);
        }
    }
    let data = ZeroOneData {
        inner: d.expr().clone(),
        m,
        u: ctx.u,
        heavy,
        below,
    };
    Ok(Martingale::zero_one(data, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::PrefixSet;
    use crate::martingale::{table_from, verify_martingale};
    use proptest::prelude::*;
    use std::collections::BTreeMap as Map;

    fn rat(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn uniform() -> ProbMeasure {
        ProbMeasure::uniform()
    }

    /// Capital 1/2 at the root, doubling along zeros, dead on ones.
    fn ladder(nu: &ProbMeasure) -> Martingale {
        table_from(
            nu,
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
        )
    }

    #[test]
    fn constructor_avoids_the_ladder() {
        let nu = uniform();
        let d = ladder(&nu);
        let run = conserve_constructor(&d, &nu, &BitString::empty(), 4).unwrap();
        assert_eq!(run.m, 2);
        assert_eq!(run.prefix, bs("1000"));
        let cap = &rat("1") - &rat("1/4");
        for (w, v) in &run.trace[1..] {
            assert!(v <= &cap, "trace value {v} at {w}");
        }
    }

    #[test]
    fn constructor_on_zero_martingale() {
        let nu = uniform();
        let d = Martingale::zero(&nu);
        let run = conserve_constructor(&d, &nu, &BitString::empty(), 5).unwrap();
        assert_eq!(run.m, 1);
        assert_eq!(run.prefix, BitString::repeated(false, 5));
        assert!(run.trace.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn constructor_rejects_saturated_capital() {
        let nu = uniform();
        let d = Martingale::unit(&nu);
        assert!(matches!(
            conserve_constructor(&d, &nu, &BitString::empty(), 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constructor_rejects_heavy_root_prefix() {
        // Not a fair table; the constructor only checks the preconditions
        // it needs, so this exercises the no-slack rejection.
        let nu = uniform();
        let d = table_from(&nu, 1, &[("", "1/4"), ("0", "2"), ("1", "0")]);
        assert!(matches!(
            conserve_constructor(&d, &nu, &bs("0"), 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constructor_jumps_through_the_root() {
        let nu = uniform();
        let d = Martingale::zero(&nu);
        let run = conserve_constructor(&d, &nu, &bs("01"), 3).unwrap();
        assert_eq!(run.prefix, bs("0100"));
        assert_eq!(run.trace[1].0, bs("01"));
    }

    #[test]
    fn light_leaf_examples() {
        let nu = uniform();
        assert_eq!(
            find_light_leaf(&Martingale::unit(&nu), 3).unwrap(),
            bs("000")
        );
        assert_eq!(find_light_leaf(&ladder(&nu), 2).unwrap(), bs("01"));
        let hitter =
            Martingale::from_prefix_set(PrefixSet::new([bs("0")]).unwrap(), &nu);
        assert_eq!(find_light_leaf(&hitter, 1).unwrap(), bs("1"));
    }

    #[test]
    fn light_leaf_missing_on_broken_table() {
        let nu = uniform();
        let d = table_from(&nu, 1, &[("", "0"), ("0", "1"), ("1", "2")]);
        assert!(matches!(
            find_light_leaf(&d, 1),
            Err(Error::NoLightLeaf { .. })
        ));
    }

    #[test]
    fn transform_fixes_the_unit() {
        let nu = uniform();
        let d = Martingale::unit(&nu);
        for m in 1..=3 {
            let t = zero_one_transform(&d, &nu, m).unwrap();
            for w in BitString::all_up_to(4) {
                assert_eq!(t.eval_exact(&w).unwrap(), rat("1"));
            }
        }
    }

    #[test]
    fn transform_collapses_the_regular_ladder() {
        let nu = uniform();
        let d = ladder(&nu).regularize().unwrap();
        let ctx = zero_one_context(&d, 1).unwrap();
        assert_eq!(ctx.u, bs("1"));
        assert_eq!(ctx.heavy, vec![bs("0")]);
        let t = zero_one_transform(&d, &nu, 1).unwrap();
        assert_eq!(t.initial_value().unwrap(), rat("0"));
        // Equality form of the two-sum bound.
        let bound = two_sum_bound(&d, &nu, &ctx).unwrap();
        assert_eq!(bound, rat("0"));
    }

    #[test]
    fn transform_is_a_martingale_under_coin_toss() {
        let beta = ProbMeasure::bernoulli(rat("1/4")).unwrap();
        let d = Martingale::from_prefix_set(PrefixSet::new([bs("0")]).unwrap(), &beta)
            .regularize()
            .unwrap();
        let t = zero_one_transform(&d, &beta, 2).unwrap();
        let report = verify_martingale(&t, &beta, 6).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn transform_rejects_table_measures() {
        let mut values = Map::new();
        values.insert(BitString::empty(), rat("1"));
        values.insert(bs("0"), rat("1/2"));
        values.insert(bs("1"), rat("1/2"));
        let nu =
            ProbMeasure::table(1, values, crate::measure::ExtensionRule::Proportional).unwrap();
        let d = Martingale::unit(&nu);
        assert!(matches!(
            zero_one_transform(&d, &nu, 1),
            Err(Error::NonProductMeasure { .. })
        ));
    }

    /// Forward construction of a fair dyadic table under the uniform
    /// measure: each node splits its capital by a supplied fraction.
    fn random_table(nu: &ProbMeasure, depth: usize, root: u8, splits: &[u8]) -> Martingale {
        let mut values: Map<BitString, ExactRational> = Map::new();
        values.insert(
            BitString::empty(),
            &ExactRational::from_integer(root as i64) / &ExactRational::from_integer(8),
        );
        let mut idx = 0;
        for level in 0..depth {
            for w in BitString::all_of_length(level) {
                let x = values[&w].clone();
                let t = &ExactRational::from_integer((splits[idx % splits.len()] % 9) as i64)
                    / &ExactRational::from_integer(8);
                idx += 1;
                let left = &(&rat("2") * &t) * &x;
                let right = &(&rat("2") * &(&rat("1") - &t)) * &x;
                values.insert(w.child(false), left);
                values.insert(w.child(true), right);
            }
        }
        Martingale::table(nu, depth, values).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn light_leaf_is_light(
            root in 1u8..16,
            splits in proptest::collection::vec(0u8..9, 7),
            m in 1usize..3,
        ) {
            let nu = uniform();
            let d = random_table(&nu, 3, root, &splits);
            let u = find_light_leaf(&d, m).unwrap();
            prop_assert!(d.eval_exact(&u).unwrap() <= d.initial_value().unwrap());
        }

        #[test]
        fn two_sum_holds_with_equality(
            root in 1u8..16,
            splits in proptest::collection::vec(0u8..9, 7),
            m in 1usize..4,
        ) {
            let nu = uniform();
            let d = random_table(&nu, 3, root, &splits);
            let ctx = zero_one_context(&d, m).unwrap();
            let t = zero_one_transform(&d, &nu, m).unwrap();
            let bound = two_sum_bound(&d, &nu, &ctx).unwrap();
            prop_assert_eq!(t.initial_value().unwrap(), bound);
        }

        #[test]
        fn transform_preserves_fairness(
            root in 1u8..16,
            splits in proptest::collection::vec(0u8..9, 7),
        ) {
            let nu = uniform();
            let d = random_table(&nu, 3, root, &splits);
            let t = zero_one_transform(&d, &nu, 2).unwrap();
            let report = verify_martingale(&t, &nu, 4).unwrap();
            prop_assert!(report.violations.is_empty());
        }
    }
}
