//! Brute-force finite-depth oracle: seeded generators, shared fixtures,
//! and a property-suite runner with machine-readable reports.
//!
//! Every randomized check derives its own ChaCha8 stream from the
//! configured seed and a fixed per-check salt, so checks are independent,
//! their order is irrelevant, and the assembled report is reproducible
//! byte for byte. No wall-clock data enters the report for the same
//! reason.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cantor::{
    classical_measure_clopen, standard_enumeration, BitString, ClopenSet, PrefixSet,
};
use crate::diagonal::{conserve_constructor, two_sum_bound, zero_one_context, zero_one_transform};
use crate::martingale::{
    regularity_report, robin_hood, verify_martingale, verify_martingale_with, EvalSession,
    Martingale,
};
use crate::measure::{validate_table_measure, ExtensionRule, ProbMeasure};
use crate::numerics::{dyadic_approx, dyadic_round, ExactRational};
use crate::splitting::{
    clopen_measurement, combine_pair, complement, completeness_measurement, cylinder_measurement,
    measurement_to_nullcover, null_cover_to_strong, null_sequence_union, sequence_intersection,
    sequence_union, success_to_measurement, verify_splitting, z3_cover, CheckStatus,
    ModulatedFamily, Monotonicity, SplittingOp, Target,
};
use crate::{Error, Result};

/// Schema tag stamped on every machine-readable document this crate emits.
pub const SCHEMA: &str = "rbmeasure/1";

/// Denominator of the random dyadic grids; kept small so generated
/// rationals stay cheap.
const GRID: i64 = 1 << 10;

// ---------------------------------------------------------------------------
// Fixtures

/// The three product measures the suite exercises side by side.
pub fn suite_measures() -> Vec<(&'static str, ProbMeasure)> {
    vec![
        ("uniform", ProbMeasure::uniform()),
        ("bernoulli-1/4", bernoulli_quarter()),
        ("mixed-bias", mixed_bias()),
    ]
}

/// Coin with head probability 1/4 at every position.
pub fn bernoulli_quarter() -> ProbMeasure {
    let quarter = ExactRational::new(1, 4).expect("static rational");
    ProbMeasure::bernoulli(quarter).expect("bias strictly inside (0, 1)")
}

/// Coin-toss measure whose first three positions carry distinct biases and
/// whose tail differs from all of them.
pub fn mixed_bias() -> ProbMeasure {
    let r = |n, d| ExactRational::new(n, d).expect("static rational");
    ProbMeasure::coin_toss(vec![r(1, 4), r(2, 3), r(3, 5)], r(1, 2))
        .expect("biases strictly inside (0, 1)")
}

/// Two-atom table measure: half the mass on the all-zeros branch, half on
/// the all-ones branch, zero everywhere else, defined down to `depth` and
/// rejecting queries beyond it.
pub fn two_point(depth: usize) -> ProbMeasure {
    let mut values = BTreeMap::new();
    values.insert(BitString::empty(), ExactRational::one());
    let half = ExactRational::new(1, 2).expect("static rational");
    for n in 1..=depth {
        for w in BitString::all_of_length(n) {
            let constant = w.bits().iter().all(|&b| b == w.bit(0));
            let v = if constant {
                half.clone()
            } else {
                ExactRational::zero()
            };
            values.insert(w, v);
        }
    }
    ProbMeasure::table(depth, values, ExtensionRule::Reject).expect("additive by construction")
}

/// Depth-2 doubling table: capital 1/2 at the root, doubled along the
/// all-zeros branch, broke everywhere else. Fair under the uniform
/// measure; its sole unit-capital branch makes it the standard subject for
/// the avoidance and collapse constructions.
pub fn ladder_martingale(nu: &ProbMeasure) -> Martingale {
    let entries: &[(&str, &str)] = &[
        ("", "1/2"),
        ("0", "1"),
        ("1", "0"),
        ("00", "2"),
        ("01", "0"),
        ("10", "0"),
        ("11", "0"),
    ];
    let mut values = BTreeMap::new();
    for (w, v) in entries {
        values.insert(
            w.parse().expect("static string"),
            v.parse().expect("static rational"),
        );
    }
    Martingale::table(nu, 2, values).expect("entries are nonnegative")
}

// ---------------------------------------------------------------------------
// Generators

fn grid_value(rng: &mut ChaCha8Rng, max_units: i64) -> ExactRational {
    ExactRational::new(rng.gen_range(0..=max_units), GRID).expect("positive denominator")
}

/// Table values satisfying the fairness identity under `nu` by forward
/// construction: the root draws from the dyadic grid over [0, 2]; at each
/// node of positive measure the conditional mass splits by a random grid
/// fraction; children of measure zero draw freely since the identity puts
/// no weight on them.
pub fn random_table_values(
    rng: &mut ChaCha8Rng,
    nu: &ProbMeasure,
    depth: usize,
) -> Result<BTreeMap<BitString, ExactRational>> {
    let mut values = BTreeMap::new();
    values.insert(BitString::empty(), grid_value(rng, 2 * GRID));
    for level in 0..depth {
        for w in BitString::all_of_length(level) {
            let x = values.get(&w).expect("parent filled first").clone();
            let left = w.child(false);
            let right = w.child(true);
            let m_w = nu.measure_of(&w)?;
            let m0 = nu.measure_of(&left)?;
            let m1 = nu.measure_of(&right)?;
            let (v0, v1) = if m_w.is_zero() {
                (grid_value(rng, 2 * GRID), grid_value(rng, 2 * GRID))
            } else if m0.is_zero() {
                let forced = (&x * &m_w).checked_div(&m1)?;
                (grid_value(rng, 2 * GRID), forced)
            } else if m1.is_zero() {
                let forced = (&x * &m_w).checked_div(&m0)?;
                (forced, grid_value(rng, 2 * GRID))
            } else {
                let t = grid_value(rng, GRID);
                let mass = &x * &m_w;
                let left_mass = &t * &mass;
                let v0 = left_mass.checked_div(&m0)?;
                let v1 = (&mass - &left_mass).checked_div(&m1)?;
                (v0, v1)
            };
            values.insert(left, v0);
            values.insert(right, v1);
        }
    }
    Ok(values)
}

/// Fresh random martingale from a dedicated stream seeded by `seed`.
pub fn random_martingale(nu: &ProbMeasure, depth: usize, seed: u64) -> Result<Martingale> {
    random_martingale_with(&mut ChaCha8Rng::seed_from_u64(seed), nu, depth)
}

/// Random martingale drawing from a caller-owned stream, for pools.
pub fn random_martingale_with(
    rng: &mut ChaCha8Rng,
    nu: &ProbMeasure,
    depth: usize,
) -> Result<Martingale> {
    Martingale::table(nu, depth, random_table_values(rng, nu, depth)?)
}

/// Random prefix-free set of strings no longer than `max_depth`, built by
/// a branching walk so prefix-freeness holds by construction. May be
/// empty.
pub fn random_prefix_set(rng: &mut ChaCha8Rng, max_depth: usize) -> PrefixSet {
    let mut members = Vec::new();
    let mut stack = vec![BitString::empty()];
    while let Some(w) = stack.pop() {
        if w.len() == max_depth {
            if rng.gen_bool(0.5) {
                members.push(w);
            }
            continue;
        }
        match rng.gen_range(0..4u32) {
            0 => members.push(w),
            1 => {}
            _ => {
                stack.push(w.child(false));
                stack.push(w.child(true));
            }
        }
    }
    PrefixSet::new(members).expect("walk emits incomparable strings")
}

/// Random clopen set at the given depth: each length-`depth` string joins
/// with probability 1/2.
pub fn random_clopen(rng: &mut ChaCha8Rng, depth: usize) -> ClopenSet {
    let selected: Vec<BitString> = BitString::all_of_length(depth)
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    ClopenSet::new(depth, selected).expect("strings have the declared length")
}

// ---------------------------------------------------------------------------
// Configuration and report

/// Suite knobs. Every field has a default, so a partial JSON document is a
/// valid configuration; unknown fields are rejected as parse errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Depth of exhaustive identity scans.
    pub identity_depth: usize,
    /// Depth bound of the operator-pair matrices; cost grows as 4^depth.
    pub pair_depth: usize,
    /// Random martingales in each identity pool.
    pub pool_size: usize,
    pub robin_hood_samples: usize,
    /// Random (martingale, prefix set) pairs for the capital bounds.
    pub capital_pairs: usize,
    /// Random clopen sets compared against classical measure.
    pub clopen_samples: usize,
    /// Random subjects for the two-sum bound.
    pub zero_one_samples: usize,
    /// Random subjects for initial-value preservation under smoothing.
    pub regular_samples: usize,
    /// Adds one deliberately unfair operator; exactly one check must fail.
    pub inject_broken_operator: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            identity_depth: 8,
            pair_depth: 4,
            pool_size: 50,
            robin_hood_samples: 10_000,
            capital_pairs: 1_000,
            clopen_samples: 200,
            zero_one_samples: 100,
            regular_samples: 200,
            inject_broken_operator: false,
        }
    }
}

/// One exact quantity worth reporting alongside a verdict, serialized as a
/// rational string so a reader can recompute it.
#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub what: String,
    pub value: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub details: String,
    pub residuals: Vec<Residual>,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SuiteCounts {
    pub pass: usize,
    pub fail: usize,
    pub untestable: usize,
}

/// Full suite outcome. Serialization is deterministic: checks are sorted
/// by name, maps are ordered, and nothing time-dependent is recorded.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: &'static str,
    pub suite: String,
    pub seed: u64,
    pub config: SuiteConfig,
    pub counts: SuiteCounts,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.counts.fail == 0
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Plain-text rendering: one line per check plus a count line.
    pub fn text_summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("suite: {} (seed {})\n", self.suite, self.seed));
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Untestable => "untestable",
            };
            out.push_str(&format!("[{tag}] {}: {}\n", c.name, c.details));
            for r in &c.residuals {
                out.push_str(&format!("         {} = {}\n", r.what, r.value));
            }
        }
        out.push_str(&format!(
            "{} pass, {} fail, {} untestable\n",
            self.counts.pass, self.counts.fail, self.counts.untestable
        ));
        out
    }
}

struct Outcome {
    details: String,
    residuals: Vec<Residual>,
}

fn ok(details: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        details: details.into(),
        residuals: Vec::new(),
    })
}

fn ok_with(details: impl Into<String>, residuals: Vec<Residual>) -> Result<Outcome> {
    Ok(Outcome {
        details: details.into(),
        residuals,
    })
}

fn fail(msg: String) -> Error {
    Error::Evidence(msg)
}

fn residual(what: &str, value: &ExactRational) -> Residual {
    Residual {
        what: what.into(),
        value: value.to_string(),
    }
}

/// Independent stream for one check: the salt keeps streams disjoint
/// without imposing an execution order.
fn rng_for(cfg: &SuiteConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Maps `f` over the items on every available core, preserving input
/// order in the output. Scans are pure over immutable operands, so the
/// only shared state is the work queue index; results land in their own
/// slots. Inputs must be generated before the call: anything drawn from a
/// sequential random stream cannot be produced inside `f`.
pub fn fan_out<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    let n = items.len();
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(n);
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot poisoned").expect("slot filled"))
        .collect()
}

// ---------------------------------------------------------------------------
// Suite runner

/// Runs every module's finite invariants at the configured depths and
/// sample counts. The report carries one entry per named check, sorted by
/// name; a check that finds a violation or hits an internal error is
/// recorded as failed with the reason, never dropped.
pub fn run_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    type Check<'a> = Box<dyn Fn() -> Result<Outcome> + Send + Sync + 'a>;
    let mut named: Vec<(&'static str, Check)> = vec![
        ("cantor/clopen-algebra", Box::new(|| check_clopen_algebra(cfg))),
        ("cantor/enumeration-round-trip", Box::new(check_enumeration)),
        ("cantor/scan-count", Box::new(|| check_scan_count(cfg))),
        ("cover/round-trip", Box::new(check_cover_round_trip)),
        ("cover/strong-closed-form", Box::new(check_strong_closed_form)),
        ("diagonal/conserve-ladder", Box::new(check_conserve_ladder)),
        ("diagonal/zero-one-collapse", Box::new(check_zero_one_collapse)),
        ("diagonal/zero-one-identity", Box::new(|| check_zero_one_identity(cfg))),
        ("diagonal/zero-one-two-sum", Box::new(|| check_zero_one_two_sum(cfg))),
        ("martingale/capital-bounds", Box::new(|| check_capital_bounds(cfg))),
        ("martingale/coverage-certificates", Box::new(check_coverage_certificates)),
        ("martingale/identity-artifacts", Box::new(|| check_identity_artifacts(cfg))),
        ("martingale/identity-null-branches", Box::new(|| check_identity_null_branches(cfg))),
        ("martingale/identity-pool", Box::new(|| check_identity_pool(cfg))),
        ("martingale/identity-split-outputs", Box::new(|| check_identity_split_outputs(cfg))),
        ("measure/conditional-cases", Box::new(check_conditional_cases)),
        ("measure/positivity-bounds", Box::new(check_positivity_bounds)),
        ("measure/table-validation", Box::new(check_table_validation)),
        ("numerics/dyadic-approx", Box::new(|| check_dyadic(cfg))),
        ("regular/initial-preserved", Box::new(|| check_initial_preserved(cfg))),
        ("regular/regularity-and-containment", Box::new(|| check_regularity_containment(cfg))),
        ("regular/robin-hood-random", Box::new(|| check_robin_hood_random(cfg))),
        ("regular/robin-hood-worked", Box::new(check_robin_hood_worked)),
        ("regular/unit-fixed", Box::new(|| check_unit_fixed(cfg))),
        ("sequence/de-morgan", Box::new(check_sequence_de_morgan)),
        ("sequence/disjoint-union", Box::new(check_disjoint_union)),
        ("sequence/monotone-convergence", Box::new(check_monotone_convergence)),
        ("sequence/null-union", Box::new(check_null_union)),
        ("splitting/capital-window", Box::new(|| check_capital_window(cfg))),
        ("splitting/classical-agreement", Box::new(|| check_classical_agreement(cfg))),
        ("splitting/cylinder-estimates", Box::new(|| check_cylinder_estimates(cfg))),
        ("splitting/inclusion-exclusion", Box::new(|| check_inclusion_exclusion(cfg))),
        ("splitting/same-set-constructions", Box::new(check_same_set_constructions)),
        ("splitting/verify-pairs", Box::new(|| check_verify_pairs(cfg))),
    ];
    if cfg.inject_broken_operator {
        named.push(("splitting/injected-broken-operator", Box::new(check_injected_broken)));
    }

    // Checks draw from salted streams, so results do not depend on the
    // execution order and the scan work can spread across cores.
    let mut checks = fan_out(named, |(name, body)| {
        let (status, details, residuals) = match body() {
            Ok(o) => (CheckStatus::Pass, o.details, o.residuals),
            Err(e) => (CheckStatus::Fail, e.to_string(), Vec::new()),
        };
        CheckResult {
            name: name.to_string(),
            status,
            details,
            residuals,
        }
    });

    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let mut counts = SuiteCounts::default();
    for c in &checks {
        match c.status {
            CheckStatus::Pass => counts.pass += 1,
            CheckStatus::Fail => counts.fail += 1,
            CheckStatus::Untestable => counts.untestable += 1,
        }
    }
    Ok(VerifyReport {
        schema: SCHEMA,
        suite: "rbmeasure property suite".to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        counts,
        checks,
    })
}

fn bs(s: &str) -> BitString {
    s.parse().expect("static bit string")
}

fn rat(s: &str) -> ExactRational {
    s.parse().expect("static rational")
}

// --- numerics ---------------------------------------------------------------

fn check_dyadic(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut rng = rng_for(cfg, 1);
    let mut worst_floor = ExactRational::zero();
    let mut worst_round = ExactRational::zero();
    for _ in 0..200 {
        let x = ExactRational::new(rng.gen_range(0..=3000), rng.gen_range(1..=997))?;
        for r in [1u32, 4, 9, 13] {
            let floor = dyadic_approx(&x, r)?.to_rational();
            let err = &x - &floor;
            if err.is_negative() || err >= ExactRational::pow2(-(r as i64)) {
                return Err(fail(format!(
                    "floor approximation of {x} at {r} bits off by {err}"
                )));
            }
            worst_floor = worst_floor.max(&err * &ExactRational::pow2(r as i64));
            let rounded = dyadic_round(&x, r)?.to_rational();
            let err = x.dist(&rounded);
            if err > ExactRational::pow2(-(r as i64 + 1)) {
                return Err(fail(format!(
                    "rounding of {x} at {r} bits off by {err}"
                )));
            }
            worst_round = worst_round.max(&err * &ExactRational::pow2(r as i64 + 1));
        }
    }
    ok_with(
        "200 rationals, floor within one step and round within half a step at 4 precisions",
        vec![
            residual("worst floor error in steps", &worst_floor),
            residual("worst rounding error in half-steps", &worst_round),
        ],
    )
}

// --- cantor ------------------------------------------------------------------

fn check_enumeration() -> Result<Outcome> {
    let expected = ["", "0", "1", "00", "01", "10", "11"];
    for (k, s) in expected.iter().enumerate() {
        if standard_enumeration(k as u64) != bs(s) {
            return Err(fail(format!("enumeration at {k} is not {s:?}")));
        }
    }
    let mut prev_len = 0usize;
    for k in 0..(1u64 << 12) {
        let w = standard_enumeration(k);
        if w.len() < prev_len {
            return Err(fail(format!("length order broken at index {k}")));
        }
        prev_len = w.len();
        if w.standard_index()? != k {
            return Err(fail(format!("round trip failed at index {k}")));
        }
    }
    ok("4096 indices round-trip in length-lexicographic order")
}

fn check_clopen_algebra(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut rng = rng_for(cfg, 2);
    let measures = [ProbMeasure::uniform(), bernoulli_quarter()];
    for i in 0..40 {
        let depth = 3 + (i % 3);
        let a = random_clopen(&mut rng, depth);
        let b = random_clopen(&mut rng, depth);
        if a.union(&b).complement() != a.complement().intersection(&b.complement()) {
            return Err(fail(format!("complement of a union splits wrong: {a:?} {b:?}")));
        }
        if a.intersection(&b).complement() != a.complement().union(&b.complement()) {
            return Err(fail(format!(
                "complement of an intersection splits wrong: {a:?} {b:?}"
            )));
        }
        if a.difference(&b) != a.intersection(&b.complement()) {
            return Err(fail(format!("difference disagrees: {a:?} {b:?}")));
        }
        for nu in &measures {
            let direct = classical_measure_clopen(&a, nu)?;
            let refined = classical_measure_clopen(&a.refine_to(depth + 2), nu)?;
            if direct != refined {
                return Err(fail(format!(
                    "refinement changed the measure: {direct} vs {refined}"
                )));
            }
            let co = classical_measure_clopen(&a.complement(), nu)?;
            if &direct + &co != ExactRational::one() {
                return Err(fail(format!(
                    "set and complement measures sum to {}",
                    &direct + &co
                )));
            }
        }
    }
    ok("40 random pairs: De Morgan, difference, refinement, and complement mass are exact")
}

fn check_scan_count(cfg: &SuiteConfig) -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let depth = cfg.identity_depth;
    let report = verify_martingale(&Martingale::unit(&mu), &mu, depth)?;
    let expected = (1usize << (depth + 1)) - 1;
    if report.strings_visited != expected {
        return Err(fail(format!(
            "scan to depth {depth} visited {} strings, expected {expected}",
            report.strings_visited
        )));
    }
    if !report.is_valid() {
        return Err(fail("unit martingale failed its own scan".to_string()));
    }
    ok(format!(
        "exhaustive depth-{depth} scan visits exactly {expected} strings"
    ))
}

// --- measure -----------------------------------------------------------------

fn check_table_validation() -> Result<Outcome> {
    let good = validate_table_measure(&two_point(6))?;
    if !good.is_valid() {
        return Err(fail("two-atom table flagged as inadditive".to_string()));
    }
    let mut values = BTreeMap::new();
    values.insert(bs(""), rat("1"));
    values.insert(bs("0"), rat("1/2"));
    values.insert(bs("1"), rat("1/4"));
    let broken = ProbMeasure::table(1, values, ExtensionRule::Reject)?;
    let report = validate_table_measure(&broken)?;
    if report.is_valid() || report.violations.len() != 1 {
        return Err(fail(format!(
            "planted additivity leak found {} violations, expected 1",
            report.violations.len()
        )));
    }
    ok("valid table accepted; planted mass leak reported exactly once")
}

fn check_conditional_cases() -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    if mu.conditional(&bs("01"), &bs("0"))? != rat("1/2") {
        return Err(fail("extension case misweighted".to_string()));
    }
    if mu.conditional(&bs("0"), &bs("01"))? != ExactRational::one() {
        return Err(fail("prefix case is not certain".to_string()));
    }
    if !mu.conditional(&bs("10"), &bs("01"))?.is_zero() {
        return Err(fail("incomparable case carries mass".to_string()));
    }
    let tp = two_point(4);
    match tp.conditional(&bs("010"), &bs("01")) {
        Err(Error::ZeroConditional { .. }) => {}
        other => {
            return Err(fail(format!(
                "conditioning on a null cylinder produced {other:?}"
            )))
        }
    }
    ok("extension, prefix, incomparable, and undefined cases all answer correctly")
}

fn check_positivity_bounds() -> Result<Outcome> {
    for (name, nu) in suite_measures() {
        let bound = nu.positivity_bound()?;
        for n in [0usize, 4, 8] {
            let floor = ExactRational::pow2(-(bound.bits(n) as i64));
            for w in BitString::all_of_length(n.min(6)) {
                let m = nu.measure_of(&w)?;
                if !m.is_zero() && m < floor {
                    return Err(fail(format!(
                        "{name}: mass {m} at {w} beats the declared floor {floor}"
                    )));
                }
            }
        }
    }
    ok("declared positivity floors hold on exhaustive scans for all three measures")
}

// --- martingale identity -----------------------------------------------------

fn check_identity_pool(cfg: &SuiteConfig) -> Result<Outcome> {
    let depth = cfg.identity_depth;
    let mut scans = 0usize;
    for (mi, (name, nu)) in suite_measures().into_iter().enumerate() {
        let mut rng = rng_for(cfg, 10 + mi as u64);
        let mut subjects: Vec<(String, Martingale)> = vec![
            ("unit".into(), Martingale::unit(&nu)),
            ("zero".into(), Martingale::zero(&nu)),
        ];
        for i in 0..cfg.pool_size {
            subjects.push((
                format!("random-{i}"),
                random_martingale_with(&mut rng, &nu, 5)?,
            ));
        }
        for i in 0..5 {
            let set = random_prefix_set(&mut rng, 6);
            subjects.push((
                format!("hitter-{i}"),
                Martingale::from_prefix_set(set, &nu),
            ));
        }
        let smoothed: Vec<Martingale> = subjects
            .iter()
            .skip(2)
            .take(10)
            .map(|(_, d)| d.regularize())
            .collect::<Result<_>>()?;
        for (i, d) in smoothed.iter().enumerate() {
            subjects.push((format!("smoothed-{i}"), d.clone()));
        }
        for (i, d) in smoothed.iter().take(5).enumerate() {
            subjects.push((format!("zero-one-{i}"), zero_one_transform(d, &nu, 2)?));
        }
        let outcomes = fan_out(subjects, |(label, d)| -> Result<()> {
            let report = verify_martingale(d, &nu, depth)?;
            if !report.is_valid() {
                return Err(fail(format!(
                    "{name}/{label}: {} identity violations at depth {depth}",
                    report.violations.len()
                )));
            }
            Ok(())
        });
        for outcome in outcomes {
            outcome?;
            scans += 1;
        }
    }
    ok(format!(
        "{scans} subjects scanned exactly to depth {depth} under three measures"
    ))
}

fn check_identity_artifacts(cfg: &SuiteConfig) -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let depth = cfg.identity_depth;
    let mut subjects: Vec<(String, Martingale)> = Vec::new();
    for r in [0u32, 1, 2, 5] {
        subjects.push((format!("zero-tail-{r}"), Martingale::z3_ladder(r)));
    }
    subjects.push(("cover-sum".into(), Martingale::z3_cover_sum()));
    for upto in [3u32, 6] {
        let parts: Vec<Martingale> = (0..=upto).map(Martingale::z3_ladder).collect();
        subjects.push((format!("partial-sum-{upto}"), Martingale::sum(&parts)?));
    }
    for (label, d) in &subjects {
        let report = verify_martingale(d, &mu, depth)?;
        if !report.is_valid() {
            return Err(fail(format!(
                "{label}: {} identity violations at depth {depth}",
                report.violations.len()
            )));
        }
    }
    ok(format!(
        "{} zero-tail artifacts scanned to depth {depth} under the uniform measure",
        subjects.len()
    ))
}

fn check_identity_null_branches(cfg: &SuiteConfig) -> Result<Outcome> {
    let nu = two_point(6);
    let mut rng = rng_for(cfg, 14);
    let base = random_table_values(&mut rng, &nu, 4)?;
    let mut bumped = base.clone();
    let mut changed = 0usize;
    for (w, v) in bumped.iter_mut() {
        if nu.measure_of(w)?.is_zero() {
            *v = &*v + &ExactRational::one();
            changed += 1;
        }
    }
    if changed == 0 {
        return Err(fail("fixture has no null branches to perturb".to_string()));
    }
    let d1 = Martingale::table(&nu, 4, base)?;
    let d2 = Martingale::table(&nu, 4, bumped)?;
    if !verify_martingale(&d1, &nu, 4)?.is_valid() || !verify_martingale(&d2, &nu, 4)?.is_valid() {
        return Err(fail(
            "identity depends on values along null branches".to_string(),
        ));
    }
    ok(format!(
        "perturbing {changed} null-branch values leaves the identity scan clean"
    ))
}

fn check_identity_split_outputs(cfg: &SuiteConfig) -> Result<Outcome> {
    let depth = cfg.identity_depth;
    let mut scans = 0usize;
    for (mi, (name, nu)) in suite_measures().into_iter().enumerate() {
        let mut rng = rng_for(cfg, 20 + mi as u64);
        let mut pool = vec![("unit".to_string(), Martingale::unit(&nu))];
        for i in 0..cfg.pool_size {
            pool.push((
                format!("random-{i}"),
                random_martingale_with(&mut rng, &nu, 5)?,
            ));
        }
        let c0 = cylinder_measurement(&bs("0"), &nu)?;
        let c01 = cylinder_measurement(&bs("01"), &nu)?;
        let pair = combine_pair(&c0, &c01)?;
        let mut ops: Vec<SplittingOp> = vec![
            cylinder_measurement(&BitString::empty(), &nu)?,
            c0.clone(),
            c01.clone(),
            complement(&c0),
            pair.x,
            pair.y,
            pair.intersection,
            pair.union,
            completeness_measurement(&success_to_measurement(&Martingale::zero(&nu))?)?,
        ];
        if pool.len() > 1 {
            ops.push(success_to_measurement(&pool[1].1)?);
        }
        // Every split half embeds the subject, so one session per subject
        // lets all operators reuse the subject's subtree values.
        let outcomes = fan_out(pool, |(label, d)| -> Result<usize> {
            let mut session = EvalSession::new(&nu);
            let mut scanned = 0usize;
            for op in &ops {
                let (plus, minus) = op.apply(4, d)?;
                let rp = verify_martingale_with(&mut session, &plus, &nu, depth)?;
                let rm = verify_martingale_with(&mut session, &minus, &nu, depth)?;
                if !rp.is_valid() || !rm.is_valid() {
                    return Err(fail(format!(
                        "{name}: {} applied to {label} breaks the identity at depth {depth}",
                        op.label()
                    )));
                }
                scanned += 2;
            }
            Ok(scanned)
        });
        for outcome in outcomes {
            scans += outcome?;
        }
    }
    ok(format!(
        "{scans} split halves scanned exactly to depth {depth} under three measures"
    ))
}

fn check_capital_bounds(cfg: &SuiteConfig) -> Result<Outcome> {
    let measures = suite_measures();
    let mut rng = rng_for(cfg, 30);
    // Draw every pair from the stream first; the verification fans out.
    let mut jobs = Vec::with_capacity(cfg.capital_pairs);
    for i in 0..cfg.capital_pairs {
        let depth = 2 + (i % 7);
        let (_, nu) = &measures[i % measures.len()];
        let d = random_martingale_with(&mut rng, nu, depth)?;
        let set = random_prefix_set(&mut rng, (depth + 2).min(10));
        jobs.push((i, nu.clone(), d, set, depth));
    }
    let one = ExactRational::one();
    let outcomes = fan_out(jobs, |(i, nu, d, set, depth)| -> Result<ExactRational> {
        let (sum, within) = d.prefix_sum_bound(set)?;
        if !within {
            return Err(fail(format!(
                "pair {i}: prefix-set mass {sum} exceeds the initial value"
            )));
        }
        let slack = &d.initial_value()? - &sum;

        let mut session = EvalSession::new(nu);
        let mut covered: BTreeMap<BitString, bool> = BTreeMap::new();
        let mut leaves = Vec::new();
        for w in BitString::all_up_to(*depth) {
            let own = d.eval_exact_with(&mut session, &w)? >= one;
            let inherited = w.parent().map(|p| covered[&p]).unwrap_or(false);
            let c = own || inherited;
            if w.len() == *depth && c {
                leaves.push(w.clone());
            }
            covered.insert(w, c);
        }
        let hit = classical_measure_clopen(&ClopenSet::new(*depth, leaves)?, nu)?;
        if hit > d.initial_value()? {
            return Err(fail(format!(
                "pair {i}: covered clopen mass {hit} exceeds the initial value"
            )));
        }
        Ok(slack)
    });
    let mut min_slack: Option<ExactRational> = None;
    for outcome in outcomes {
        let slack = outcome?;
        min_slack = Some(match min_slack {
            None => slack,
            Some(best) => best.min(slack),
        });
    }
    let residuals = match min_slack {
        Some(s) => vec![residual("smallest unused capital over all pairs", &s)],
        None => Vec::new(),
    };
    ok_with(
        format!(
            "{} pairs: prefix-set mass and covered clopen mass never exceed the start",
            cfg.capital_pairs
        ),
        residuals,
    )
}

fn check_coverage_certificates() -> Result<Outcome> {
    let d = Martingale::z3_ladder(1);
    let cert = d.covers(&bs("001"))?;
    match &cert.outcome {
        crate::martingale::CoverageOutcome::Witness { prefix, .. } if *prefix == bs("00") => {}
        other => return Err(fail(format!("expected a witness at 00, got {other:?}"))),
    }
    let mu = ProbMeasure::uniform();
    let hitter = Martingale::from_prefix_set(PrefixSet::new([bs("0")])?, &mu);
    let cert = hitter.covers(&bs("11"))?;
    if cert.is_covered() {
        return Err(fail("branch avoiding the prefix set reported covered".to_string()));
    }
    ok("witness pins the shortest unit-capital prefix; avoidance is refuted at full length")
}

// --- regularization ----------------------------------------------------------

fn check_robin_hood_worked() -> Result<Outcome> {
    let cases = [
        ("1/2", "1/2", "1/2", "1/2", "1/2"),
        ("1/2", "3/2", "3/4", "9/8", "9/8"),
        ("1/2", "3/2", "1/4", "1", "3/4"),
    ];
    for (alpha, s, t, s2, t2) in cases {
        let got = robin_hood(&rat(alpha), &rat(s), &rat(t))?;
        if got != (rat(s2), rat(t2)) {
            return Err(fail(format!(
                "redistribution of ({s}, {t}) at bias {alpha} gave ({}, {})",
                got.0, got.1
            )));
        }
    }
    ok("all three worked redistributions match exactly")
}

fn check_robin_hood_random(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut rng = rng_for(cfg, 31);
    let one = ExactRational::one();
    for i in 0..cfg.robin_hood_samples {
        let alpha = ExactRational::new(rng.gen_range(1..GRID), GRID)?;
        let s = grid_value(&mut rng, 4 * GRID);
        let t = grid_value(&mut rng, 4 * GRID);
        let m = &(&alpha * &s) + &(&(&one - &alpha) * &t);
        let (s2, t2) = robin_hood(&alpha, &s, &t)?;
        let m2 = &(&alpha * &s2) + &(&(&one - &alpha) * &t2);
        if m != m2 {
            return Err(fail(format!(
                "sample {i}: average moved from {m} to {m2}"
            )));
        }
        if s2.is_negative() || t2.is_negative() {
            return Err(fail(format!("sample {i}: overdraft to ({s2}, {t2})")));
        }
        if m >= one && (s2 < one || t2 < one) {
            return Err(fail(format!(
                "sample {i}: rich average {m} left a poor side ({s2}, {t2})"
            )));
        }
        if s <= one && t <= one && (s2 != s || t2 != t) {
            return Err(fail(format!(
                "sample {i}: unit square point ({s}, {t}) moved"
            )));
        }
    }
    // Points with a negative coordinate are legal exactly when the average
    // already reaches 1; both outcomes are pinned.
    for i in 0..cfg.robin_hood_samples / 5 {
        let alpha = ExactRational::new(rng.gen_range(1..GRID), GRID)?;
        let s = ExactRational::new(rng.gen_range(-2 * GRID..0), GRID)?;
        let t = grid_value(&mut rng, 4 * GRID);
        let m = &(&alpha * &s) + &(&(&one - &alpha) * &t);
        match robin_hood(&alpha, &s, &t) {
            Ok((s2, t2)) => {
                if m < one {
                    return Err(fail(format!(
                        "sample {i}: accepted a poor point with a debt coordinate"
                    )));
                }
                if s2 < one || t2 < one {
                    return Err(fail(format!(
                        "sample {i}: rich debtor landed at ({s2}, {t2})"
                    )));
                }
            }
            Err(Error::OutsideRobinHoodDomain { .. }) => {
                if m >= one {
                    return Err(fail(format!(
                        "sample {i}: rejected a rich point with average {m}"
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
    ok(format!(
        "{} grid samples: average exact, no overdraft, rich pairs lifted, unit square fixed",
        cfg.robin_hood_samples
    ))
}

fn check_unit_fixed(cfg: &SuiteConfig) -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let unit = Martingale::unit(&mu);
    let smoothed = unit.regularize()?;
    let mut session = EvalSession::new(&mu);
    let one = ExactRational::one();
    for w in BitString::all_up_to(cfg.identity_depth) {
        if smoothed.eval_exact_with(&mut session, &w)? != one {
            return Err(fail(format!("smoothing moved the unit martingale at {w}")));
        }
    }
    if !regularity_report(&smoothed, cfg.identity_depth)?.is_regular() {
        return Err(fail("smoothed unit martingale is not regular".to_string()));
    }
    ok(format!(
        "smoothing fixes the unit martingale at every string to depth {}",
        cfg.identity_depth
    ))
}

fn check_initial_preserved(cfg: &SuiteConfig) -> Result<Outcome> {
    let measures = suite_measures();
    let mut rng = rng_for(cfg, 32);
    for i in 0..cfg.regular_samples {
        let (_, nu) = &measures[i % measures.len()];
        let d = random_martingale_with(&mut rng, nu, 4)?;
        let smoothed = d.regularize()?;
        if smoothed.initial_value()? != d.initial_value()? {
            return Err(fail(format!(
                "subject {i}: initial value moved from {} to {}",
                d.initial_value()?,
                smoothed.initial_value()?
            )));
        }
    }
    ok(format!(
        "{} random subjects keep their initial value under smoothing",
        cfg.regular_samples
    ))
}

fn check_regularity_containment(cfg: &SuiteConfig) -> Result<Outcome> {
    let measures = suite_measures();
    let mut rng = rng_for(cfg, 33);
    let depth = cfg.identity_depth;
    let one = ExactRational::one();
    for i in 0..40 {
        let (name, nu) = &measures[i % measures.len()];
        let d = random_martingale_with(&mut rng, nu, 5)?;
        let smoothed = d.regularize()?;
        if !regularity_report(&smoothed, depth)?.is_regular() {
            return Err(fail(format!(
                "subject {i} under {name}: smoothing left a capital drop below 1"
            )));
        }
        // Success containment: every string the input covers, the smoothed
        // martingale covers as well.
        let mut session = EvalSession::new(nu);
        let mut covered_d: BTreeMap<BitString, bool> = BTreeMap::new();
        let mut covered_s: BTreeMap<BitString, bool> = BTreeMap::new();
        for w in BitString::all_up_to(depth) {
            let inherited = |map: &BTreeMap<BitString, bool>| {
                w.parent().map(|p| map[&p]).unwrap_or(false)
            };
            let cd = inherited(&covered_d) || d.eval_exact_with(&mut session, &w)? >= one;
            let cs =
                inherited(&covered_s) || smoothed.eval_exact_with(&mut session, &w)? >= one;
            if cd && !cs {
                return Err(fail(format!(
                    "subject {i} under {name}: {w} is covered before smoothing but not after"
                )));
            }
            covered_d.insert(w.clone(), cd);
            covered_s.insert(w, cs);
        }
    }
    ok(format!(
        "40 subjects: smoothing is regular and never loses a covered string to depth {depth}"
    ))
}

// --- splitting ---------------------------------------------------------------

fn check_cylinder_estimates(cfg: &SuiteConfig) -> Result<Outcome> {
    for (name, nu) in [
        ("uniform", ProbMeasure::uniform()),
        ("bernoulli-1/4", bernoulli_quarter()),
    ] {
        for w in BitString::all_up_to(cfg.pair_depth) {
            let op = cylinder_measurement(&w, &nu)?;
            let mass = nu.measure_of(&w)?;
            for r in [4u32, 8] {
                let est = op.estimate(r)?;
                if est.plus_value != mass {
                    return Err(fail(format!(
                        "{name}: cylinder at {w} estimated {} instead of {mass} at precision {r}",
                        est.plus_value
                    )));
                }
                if !est.agrees || est.lo > mass || mass > est.hi {
                    return Err(fail(format!(
                        "{name}: window [{}, {}] misses {mass} at {w}",
                        est.lo, est.hi
                    )));
                }
            }
        }
    }
    let tp = two_point(4);
    let est = cylinder_measurement(&bs("01"), &tp)?.estimate(8)?;
    if !est.plus_value.is_zero() || !est.hi.is_zero() {
        return Err(fail(format!(
            "null cylinder under the two-atom measure estimated {}",
            est.plus_value
        )));
    }
    ok(format!(
        "every cylinder to depth {} is estimated exactly at both precisions",
        cfg.pair_depth
    ))
}

fn check_inclusion_exclusion(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut pairs = 0usize;
    for (name, nu) in [
        ("uniform", ProbMeasure::uniform()),
        ("bernoulli-1/4", bernoulli_quarter()),
    ] {
        let cyls: Vec<(BitString, SplittingOp)> = BitString::all_up_to(cfg.pair_depth)
            .map(|w| cylinder_measurement(&w, &nu).map(|op| (w, op)))
            .collect::<Result<_>>()?;
        for i in 0..cyls.len() {
            for j in i..cyls.len() {
                let pair = combine_pair(&cyls[i].1, &cyls[j].1)?;
                pairs += 1;
                for r in [4u32, 8, 16] {
                    let tol = ExactRational::pow2(1 - r as i64);
                    let ex = pair.x.estimate(r)?.plus_value;
                    let ey = pair.y.estimate(r)?.plus_value;
                    let ei = pair.intersection.estimate(r)?.plus_value;
                    let eu = pair.union.estimate(r)?.plus_value;
                    if (&ex + &ey).dist(&(&ei + &eu)) > tol {
                        return Err(fail(format!(
                            "{name}: inclusion-exclusion off for {} and {} at precision {r}",
                            cyls[i].0, cyls[j].0
                        )));
                    }
                    if let Target::Clopen(set) = pair.union.target() {
                        let classical = classical_measure_clopen(set, &nu)?;
                        if eu.dist(&classical) > tol {
                            return Err(fail(format!(
                                "{name}: union of {} and {} estimates {eu}, classically {classical}",
                                cyls[i].0, cyls[j].0
                            )));
                        }
                    }
                }
            }
        }
    }
    ok(format!(
        "{pairs} cylinder pairs satisfy inclusion-exclusion at precisions 4, 8, 16"
    ))
}

fn check_verify_pairs(cfg: &SuiteConfig) -> Result<Outcome> {
    let mut verified = 0usize;
    for (name, nu) in [
        ("uniform", ProbMeasure::uniform()),
        ("bernoulli-1/4", bernoulli_quarter()),
    ] {
        let unit = Martingale::unit(&nu);
        let cyls: Vec<(BitString, SplittingOp)> = BitString::all_up_to(cfg.pair_depth)
            .map(|w| cylinder_measurement(&w, &nu).map(|op| (w, op)))
            .collect::<Result<_>>()?;
        for i in 0..cyls.len() {
            for j in i..cyls.len() {
                let pair = combine_pair(&cyls[i].1, &cyls[j].1)?;
                for op in [&pair.x, &pair.y, &pair.intersection, &pair.union] {
                    let report = verify_splitting(op, &unit, 4, cfg.pair_depth + 1)?;
                    if !report.all_pass() {
                        return Err(fail(format!(
                            "{name}: {} fails its splitting conditions on the unit input",
                            op.label()
                        )));
                    }
                    verified += 1;
                }
            }
        }
    }
    ok(format!(
        "{verified} combined operators satisfy coverage and the capital budget"
    ))
}

fn check_capital_window(cfg: &SuiteConfig) -> Result<Outcome> {
    let measures = [ProbMeasure::uniform(), bernoulli_quarter()];
    let mut rng = rng_for(cfg, 34);
    let lam = BitString::empty();
    for i in 0..30 {
        let nu = &measures[i % measures.len()];
        let set = random_clopen(&mut rng, 3 + (i % 3));
        let op = clopen_measurement(&set, nu)?;
        let subjects = [
            Martingale::unit(nu),
            random_martingale_with(&mut rng, nu, 3)?,
        ];
        for d in &subjects {
            let start = d.initial_value()?;
            for r in [4u32, 8] {
                let (plus, minus) = op.apply(r, d)?;
                let total = &plus.eval_exact(&lam)? + &minus.eval_exact(&lam)?;
                let cap = &start + &ExactRational::pow2(-(r as i64));
                if total < start || total > cap {
                    return Err(fail(format!(
                        "set {i}: halves start at {total}, outside [{start}, {cap}]"
                    )));
                }
            }
        }
    }
    ok("30 random clopen measurements keep both halves inside the capital window")
}

fn check_classical_agreement(cfg: &SuiteConfig) -> Result<Outcome> {
    let measures = [ProbMeasure::uniform(), bernoulli_quarter()];
    let mut rng = rng_for(cfg, 35);
    let r = 8u32;
    let tol = ExactRational::pow2(1 - r as i64);
    let mut worst = ExactRational::zero();
    for i in 0..cfg.clopen_samples {
        let nu = &measures[i % measures.len()];
        let set = random_clopen(&mut rng, 3 + (i % 3));
        let est = clopen_measurement(&set, nu)?.estimate(r)?;
        let classical = classical_measure_clopen(&set, nu)?;
        let gap = est.plus_value.dist(&classical);
        if gap > tol {
            return Err(fail(format!(
                "set {i}: estimate {} vs classical {classical}",
                est.plus_value
            )));
        }
        if est.lo > classical || classical > est.hi {
            return Err(fail(format!(
                "set {i}: classical value {classical} escapes [{}, {}]",
                est.lo, est.hi
            )));
        }
        worst = worst.max(gap);
    }
    ok_with(
        format!(
            "{} random clopen sets agree with classical measure at precision {r}",
            cfg.clopen_samples
        ),
        vec![residual("largest estimate gap", &worst)],
    )
}

fn check_same_set_constructions() -> Result<Outcome> {
    for nu in [ProbMeasure::uniform(), bernoulli_quarter()] {
        let union_of = |a: &BitString, b: &BitString| -> Result<SplittingOp> {
            let ca = cylinder_measurement(a, &nu)?;
            let cb = cylinder_measurement(b, &nu)?;
            Ok(combine_pair(&ca, &cb)?.union)
        };
        let cases: Vec<(SplittingOp, SplittingOp)> = vec![
            (
                cylinder_measurement(&bs("0"), &nu)?,
                union_of(&bs("00"), &bs("01"))?,
            ),
            (
                cylinder_measurement(&BitString::empty(), &nu)?,
                union_of(&bs("0"), &bs("1"))?,
            ),
            (
                cylinder_measurement(&bs("01"), &nu)?,
                clopen_measurement(&ClopenSet::cylinder(&bs("01")), &nu)?,
            ),
        ];
        for (a, b) in &cases {
            for r in [4u32, 8] {
                let tol = ExactRational::pow2(1 - r as i64);
                let va = a.estimate(r)?.plus_value;
                let vb = b.estimate(r)?.plus_value;
                if va.dist(&vb) > tol {
                    return Err(fail(format!(
                        "{} and {} disagree: {va} vs {vb} at precision {r}",
                        a.label(),
                        b.label()
                    )));
                }
            }
        }
    }
    ok("alternative constructions of the same set agree within tolerance")
}

// --- sequences ---------------------------------------------------------------

fn check_disjoint_union() -> Result<Outcome> {
    let fam = ModulatedFamily::disjoint_tails();
    let op = sequence_union(&fam)?;
    let one = ExactRational::one();
    for r in [4u32, 8, 16] {
        let est = op.estimate(r)?;
        let tol = ExactRational::pow2(1 - r as i64);
        if est.plus_value.dist(&one) > tol {
            return Err(fail(format!(
                "union of disjoint tails estimates {} at precision {r}",
                est.plus_value
            )));
        }
    }
    ok("union of the disjoint tail family reaches full measure at precisions 4, 8, 16")
}

fn check_monotone_convergence() -> Result<Outcome> {
    let fam = ModulatedFamily::disjoint_tails();
    let unit = Martingale::unit(fam.measure());
    let lam = BitString::empty();
    let mut prev: Option<ExactRational> = None;
    for k in 0..7u64 {
        let (plus, _) = fam.stage(k, 4, &unit)?;
        let v = plus.eval_exact(&lam)?;
        let expected = &ExactRational::one() - &ExactRational::pow2(-(k as i64 + 1));
        if v != expected {
            return Err(fail(format!("stage {k} carries {v}, expected {expected}")));
        }
        if let Some(p) = prev {
            if v < p {
                return Err(fail(format!("stage {k} dropped from {p} to {v}")));
            }
        }
        prev = Some(v);
    }
    ok("stage values increase and match the closed form exactly for 7 stages")
}

fn check_sequence_de_morgan() -> Result<Outcome> {
    let nu = ProbMeasure::uniform();
    let c0 = cylinder_measurement(&bs("0"), &nu)?;
    let union = sequence_union(&ModulatedFamily::constant(&c0, Monotonicity::Union))?;
    let inter = sequence_intersection(&ModulatedFamily::constant(&c0, Monotonicity::Intersection))?;
    let co_inter = sequence_intersection(&ModulatedFamily::constant(
        &complement(&c0),
        Monotonicity::Intersection,
    ))?;
    let half = rat("1/2");
    for r in [6u32, 10] {
        let tol = ExactRational::pow2(1 - r as i64);
        for (what, op) in [
            ("constant union", &union),
            ("constant intersection", &inter),
            ("intersection of complements", &co_inter),
        ] {
            let est = op.estimate(r)?;
            if est.plus_value.dist(&half) > tol {
                return Err(fail(format!(
                    "{what} estimates {} instead of 1/2 at precision {r}",
                    est.plus_value
                )));
            }
        }
        // Complemented union and intersected complements describe the same
        // set; their estimates must agree to the shared tolerance.
        let a = complement(&union).estimate(r)?.plus_value;
        let b = co_inter.estimate(r)?.plus_value;
        if a.dist(&b) > &tol + &tol {
            return Err(fail(format!(
                "complement routes disagree: {a} vs {b} at precision {r}"
            )));
        }
    }
    ok("constant families and their complement routes agree at precisions 6 and 10")
}

fn check_null_union() -> Result<Outcome> {
    let nu = ProbMeasure::uniform();
    let strong = null_cover_to_strong(&z3_cover(), &nu)?;
    let members: Vec<SplittingOp> = (0..3)
        .map(|_| success_to_measurement(&strong))
        .collect::<Result<_>>()?;
    let fam = null_sequence_union(&members, &nu)?;
    let op = sequence_union(&fam)?;
    for r in [4u32, 8, 16] {
        let est = op.estimate(r)?;
        let cap = ExactRational::pow2(-(r as i64));
        if est.plus_value > cap {
            return Err(fail(format!(
                "null union estimates {} above 2^-{r}",
                est.plus_value
            )));
        }
    }
    ok("a union of three certified null measurements stays below 2^-r at 4, 8, 16")
}

// --- null covers -------------------------------------------------------------

fn check_strong_closed_form() -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let strong = null_cover_to_strong(&z3_cover(), &mu)?;
    if strong.initial_value()? != ExactRational::one() {
        return Err(fail(format!(
            "cover sum starts at {}",
            strong.initial_value()?
        )));
    }
    for n in 0..=10usize {
        let w = BitString::repeated(false, n);
        let v = strong.eval_exact(&w)?;
        let expected = ExactRational::from_integer(n as i64 + 1);
        if v != expected {
            return Err(fail(format!(
                "cover sum at {n} zeros is {v}, expected {expected}"
            )));
        }
    }
    if strong.eval_exact(&bs("001"))? != rat("2") {
        return Err(fail("value after leaving the zero branch is wrong".to_string()));
    }
    ok("cover sum matches its closed form along and off the zero branch up to length 10")
}

fn check_cover_round_trip() -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let strong = null_cover_to_strong(&z3_cover(), &mu)?;
    let op = success_to_measurement(&strong)?;
    let cover = measurement_to_nullcover(&op)?;
    let lam = BitString::empty();
    for r in 0..=10u32 {
        let cap = ExactRational::pow2(-(r as i64));
        let est = op.estimate(r)?;
        if est.plus_value > cap {
            return Err(fail(format!(
                "measurement of the success set weighs {} at precision {r}",
                est.plus_value
            )));
        }
        let member = cover.member(r)?;
        if member.eval_exact(&lam)? > cap {
            return Err(fail(format!(
                "recovered cover member {r} starts at {}",
                member.eval_exact(&lam)?
            )));
        }
    }
    ok("success set measures null and converts back to a certified cover for r up to 10")
}

// --- diagonal ----------------------------------------------------------------

fn check_conserve_ladder() -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let ladder = ladder_martingale(&mu);
    let run = conserve_constructor(&ladder, &mu, &BitString::empty(), 16)?;
    if run.m != 2 {
        return Err(fail(format!("slack exponent is {}, expected 2", run.m)));
    }
    if run.trace.len() != 17 {
        return Err(fail(format!("trace has {} entries", run.trace.len())));
    }
    let cap = rat("3/4");
    let d_w = run.trace[0].1.clone();
    let mut allowance = ExactRational::zero();
    for (j, (x, v)) in run.trace.iter().enumerate() {
        if *v > cap {
            return Err(fail(format!("value {v} at {x} breaks the 3/4 ceiling")));
        }
        if j > 0 {
            allowance += &ExactRational::pow2(-(j as i64 - 1 + run.m as i64 + 1));
        }
        if *v > &d_w + &allowance {
            return Err(fail(format!(
                "value {v} at step {j} exceeds the telescoped allowance"
            )));
        }
    }
    if ladder.covers(&run.prefix)?.is_covered() {
        return Err(fail("constructed branch is covered anyway".to_string()));
    }
    let expected: BitString = {
        let mut bits = vec![true];
        bits.extend(std::iter::repeat(false).take(15));
        BitString::from_bits(bits)
    };
    if run.prefix != expected {
        return Err(fail(format!("walk ended at {}, expected {expected}", run.prefix)));
    }
    ok("16 diagonal steps stay under 3/4, inside the telescoped allowance, and avoid coverage")
}

fn check_zero_one_identity(cfg: &SuiteConfig) -> Result<Outcome> {
    let coin_toss = [("bernoulli-1/4", bernoulli_quarter()), ("mixed-bias", mixed_bias())];
    let mut scans = 0usize;
    for (salt, (name, nu)) in coin_toss.into_iter().enumerate() {
        let mut rng = rng_for(cfg, 37 + salt as u64);
        for i in 0..3 {
            let d = random_martingale_with(&mut rng, &nu, 4)?.regularize()?;
            let t = zero_one_transform(&d, &nu, 2)?;
            let report = verify_martingale(&t, &nu, 6)?;
            if !report.is_valid() {
                return Err(fail(format!(
                    "{name}: transform of subject {i} breaks the identity at depth 6"
                )));
            }
            scans += 1;
        }
    }
    ok(format!(
        "{scans} transformed subjects pass the depth-6 identity under two coin-toss measures"
    ))
}

fn check_zero_one_two_sum(cfg: &SuiteConfig) -> Result<Outcome> {
    let measures = suite_measures();
    let mut rng = rng_for(cfg, 36);
    let lam = BitString::empty();
    let mut worst = ExactRational::zero();
    for i in 0..cfg.zero_one_samples {
        let (name, nu) = &measures[i % measures.len()];
        let m = 1 + (i % 4);
        let d = random_martingale_with(&mut rng, nu, 4)?.regularize()?;
        let ctx = zero_one_context(&d, m)?;
        let bound = two_sum_bound(&d, nu, &ctx)?;
        let t = zero_one_transform(&d, nu, m)?;
        let start = t.eval_exact(&lam)?;
        if start > bound {
            return Err(fail(format!(
                "subject {i} under {name}: transform starts at {start}, above the two-sum {bound}"
            )));
        }
        worst = worst.max(&bound - &start);
    }
    ok_with(
        format!(
            "{} random subjects start at or below their two-sum bound",
            cfg.zero_one_samples
        ),
        vec![residual("largest gap below the bound", &worst)],
    )
}

fn check_zero_one_collapse() -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let smoothed = ladder_martingale(&mu).regularize()?;
    let t = zero_one_transform(&smoothed, &mu, 2)?;
    let mut session = EvalSession::new(&mu);
    for w in BitString::all_up_to(4) {
        if !t.eval_exact_with(&mut session, &w)?.is_zero() {
            return Err(fail(format!("collapse left capital at {w}")));
        }
    }
    ok("transform of the smoothed ladder collapses to the zero martingale through depth 4")
}

// --- fault injection ----------------------------------------------------------

fn check_injected_broken() -> Result<Outcome> {
    let mu = ProbMeasure::uniform();
    let op = SplittingOp::from_parts(
        "broken[keep-everything]",
        mu.clone(),
        Target::Clopen(ClopenSet::full()),
        std::sync::Arc::new(|_r, d: &Martingale| Ok((d.clone(), d.clone()))),
    );
    let report = verify_splitting(&op, &Martingale::unit(&mu), 4, 3)?;
    if report.all_pass() {
        return Err(fail(
            "operator that returns its input twice passed the capital budget".to_string(),
        ));
    }
    // The injection is meant to surface as a failure; report it as one.
    Err(fail(format!(
        "injected operator correctly rejected: condition (iii) sums {} against cap {}",
        report.budget_sum, report.budget_cap
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SuiteConfig {
        SuiteConfig {
            seed: 7,
            identity_depth: 4,
            pair_depth: 2,
            pool_size: 4,
            robin_hood_samples: 300,
            capital_pairs: 40,
            clopen_samples: 16,
            zero_one_samples: 12,
            regular_samples: 12,
            inject_broken_operator: false,
        }
    }

    #[test]
    fn random_martingales_verify_under_each_measure() {
        for (seed, (_, nu)) in suite_measures().into_iter().enumerate() {
            let d = random_martingale(&nu, 5, seed as u64).unwrap();
            assert!(verify_martingale(&d, &nu, 5).unwrap().is_valid());
        }
        let tp = two_point(6);
        let d = random_martingale(&tp, 4, 9).unwrap();
        assert!(verify_martingale(&d, &tp, 4).unwrap().is_valid());
    }

    #[test]
    fn zero_root_draw_gives_the_zero_martingale() {
        let mu = ProbMeasure::uniform();
        let seed = (0..)
            .find(|s| {
                ChaCha8Rng::seed_from_u64(*s).gen_range(0..=2 * GRID) == 0
            })
            .unwrap();
        let d = random_martingale(&mu, 3, seed).unwrap();
        for w in BitString::all_up_to(3) {
            assert!(d.eval_exact(&w).unwrap().is_zero(), "value at {w}");
        }
    }

    #[test]
    fn root_draw_lives_on_the_grid() {
        let mu = ProbMeasure::uniform();
        for seed in 0..10 {
            let d = random_martingale(&mu, 2, seed).unwrap();
            let two = ExactRational::from_integer(2);
            let v = d.initial_value().unwrap();
            assert!(v <= two);
            let scaled = &v * &ExactRational::from_integer(GRID);
            assert!(scaled.is_integer(), "initial value {v} off the grid");
        }
    }

    #[test]
    fn generated_prefix_sets_are_prefix_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let set = random_prefix_set(&mut rng, 6);
            assert!(crate::cantor::is_prefix_set(set.members()));
        }
    }

    #[test]
    fn null_branch_values_do_not_matter() {
        let out = check_identity_null_branches(&small_config()).unwrap();
        assert!(out.details.contains("leaves the identity scan clean"));
    }

    #[test]
    fn reduced_suite_is_all_green() {
        let report = run_suite(&small_config()).unwrap();
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status != CheckStatus::Pass)
            .map(|c| c.name.as_str())
            .collect();
        assert!(failing.is_empty(), "failing checks: {failing:?}");
        assert!(report.passed());
        assert_eq!(report.counts.pass, report.checks.len());
        let mut names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        let sorted = {
            let mut s = names.clone();
            s.sort();
            s
        };
        assert_eq!(names, sorted, "checks are not name-sorted");
        names.dedup();
        assert_eq!(names.len(), report.checks.len(), "duplicate check names");
    }

    #[test]
    fn injected_fault_fails_exactly_once_by_name() {
        let mut cfg = small_config();
        cfg.inject_broken_operator = true;
        let report = run_suite(&cfg).unwrap();
        assert_eq!(report.counts.fail, 1);
        let broken: Vec<&CheckResult> = report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .collect();
        assert_eq!(broken.len(), 1);
        assert_eq!(broken[0].name, "splitting/injected-broken-operator");
        assert!(!report.passed());
    }

    #[test]
    fn depth_zero_config_passes_vacuously() {
        let cfg = SuiteConfig {
            seed: 1,
            identity_depth: 0,
            pair_depth: 0,
            pool_size: 0,
            robin_hood_samples: 0,
            capital_pairs: 0,
            clopen_samples: 0,
            zero_one_samples: 0,
            regular_samples: 0,
            inject_broken_operator: false,
        };
        let report = run_suite(&cfg).unwrap();
        assert!(report.passed(), "{}", report.text_summary());
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let cfg = small_config();
        let a = run_suite(&cfg).unwrap().to_json().unwrap();
        let b = run_suite(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema\": \"rbmeasure/1\""));
        assert!(!a.to_lowercase().contains("time"));
    }

    #[test]
    fn partial_config_fills_defaults_and_rejects_unknowns() {
        let cfg: SuiteConfig = serde_json::from_str("{\"seed\": 9}").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.identity_depth, SuiteConfig::default().identity_depth);
        assert!(serde_json::from_str::<SuiteConfig>("{\"sede\": 9}").is_err());
    }

    #[test]
    fn text_summary_lists_every_check() {
        let report = run_suite(&small_config()).unwrap();
        let text = report.text_summary();
        for c in &report.checks {
            assert!(text.contains(&c.name));
        }
        assert!(text.ends_with("untestable\n"));
    }
}
