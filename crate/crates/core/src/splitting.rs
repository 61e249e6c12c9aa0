//! Splitting operators and the measurement algebra.
//!
//! A splitting operator divides a martingale `d` into a pair `(d⁺, d⁻)`
//! whose unitary success sets cover a target set and its complement, with
//! initial capital `d⁺(λ) + d⁻(λ) ≤ d(λ) + 2^{-r}`. On top of that single
//! notion this module builds cylinder measurements, complementation, the
//! four pairwise combinations (both operands, intersection, union),
//! completeness over null sets, modulated sequence unions and
//! intersections, null covers with their conversions to and from
//! measurements, bicovers, and two-sided measure estimation.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::cantor::{BitString, ClopenSet};
use crate::martingale::{DynamicMartingale, Martingale};
use crate::measure::{PositivityBound, ProbMeasure};
use crate::numerics::ExactRational;
use crate::{Error, Result};

type ApplyFn = Arc<dyn Fn(u32, &Martingale) -> Result<(Martingale, Martingale)> + Send + Sync>;
type FamilyFn =
    Arc<dyn Fn(u64, u32, &Martingale) -> Result<(Martingale, Martingale)> + Send + Sync>;
type ModulusFn = Arc<dyn Fn(u32, u32, &Martingale, &BitString) -> u64 + Send + Sync>;
type MemberFn = Arc<dyn Fn(u32) -> Result<Martingale> + Send + Sync>;

/// What a splitting operator claims to measure. Clopen targets admit finite
/// coverage verification; abstract ones only the capital inequality.
#[derive(Clone, Debug)]
pub enum Target {
    Clopen(ClopenSet),
    Abstract(String),
}

impl Target {
    fn complemented(&self) -> Target {
        match self {
            Target::Clopen(set) => Target::Clopen(set.complement()),
            Target::Abstract(s) => Target::Abstract(format!("complement of {s}")),
        }
    }

    pub fn as_clopen(&self) -> Option<&ClopenSet> {
        match self {
            Target::Clopen(set) => Some(set),
            Target::Abstract(_) => None,
        }
    }
}

/// A splitting operator: `apply(r, d)` yields the pair `(d⁺, d⁻)`.
///
/// Operators are immutable values closing over immutable inputs; `apply`
/// is pure, so a single operator may be applied at many precisions and to
/// many martingales without interference.
#[derive(Clone)]
pub struct SplittingOp {
    label: String,
    measure: ProbMeasure,
    target: Target,
    apply_fn: ApplyFn,
}

impl SplittingOp {
    /// Assembles an operator from raw parts. No conditions are checked;
    /// `verify_splitting` exists to interrogate arbitrary candidates,
    /// including deliberately broken ones.
    pub fn from_parts(
        label: impl Into<String>,
        measure: ProbMeasure,
        target: Target,
        apply_fn: ApplyFn,
    ) -> Self {
        SplittingOp {
            label: label.into(),
            measure,
            target,
            apply_fn,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn measure(&self) -> &ProbMeasure {
        &self.measure
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    /// Splits `d` at precision budget `2^{-r}`.
    pub fn apply(&self, r: u32, d: &Martingale) -> Result<(Martingale, Martingale)> {
        if d.measure() != &self.measure {
            return Err(Error::MeasureMismatch);
        }
        (self.apply_fn)(r, d)
    }

    /// Two-sided estimate of the target's measure at precision `r`.
    pub fn estimate(&self, r: u32) -> Result<MeasureEstimate> {
        measure_estimate(self, r)
    }
}

impl std::fmt::Debug for SplittingOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplittingOp")
            .field("label", &self.label)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

/// Exact value of `mart` at `w`, resolving limit nodes at precision `t`
/// first when the tree is not already exact.
fn exact_at(mart: &Martingale, w: &BitString, t: u32) -> Result<ExactRational> {
    if mart.is_exact() {
        mart.eval_exact(w)
    } else {
        mart.resolve_exact(t)?.eval_exact(w)
    }
}

/// Measurement of the cylinder at `w` under `nu`.
///
/// When `ν(w) = 0` the positive side is the 0/1 indicator of the cylinder
/// and the negative side returns `d` unchanged. Otherwise the operand is
/// regularized first and its capital split proportionally to the
/// conditional measure of `w`; in both cases the returned pair does not
/// depend on `r`, and the positive estimate equals `ν(w)` exactly at every
/// precision.
pub fn cylinder_measurement(w: &BitString, nu: &ProbMeasure) -> Result<SplittingOp> {
    // The bound itself is unused here, but covers built from these
    // measurements need it, so fail early if the measure cannot supply one.
    nu.positivity_bound()?;
    let zero_mass = nu.is_zero_at(w)?;
    let target = Target::Clopen(ClopenSet::cylinder(w));
    let label = format!("cylinder({w})");
    let measure = nu.clone();
    let w = w.clone();
    let apply: ApplyFn = if zero_mass {
        let nu = nu.clone();
        Arc::new(move |_r, d| {
            let plus = Martingale::cylinder_indicator(&w, &nu);
            Ok((plus, d.clone()))
        })
    } else {
        Arc::new(move |_r, d| {
            let reg = d.regularize()?;
            let plus = Martingale::split_plus(&w, &reg)?;
            let minus = Martingale::split_minus(&w, &reg)?;
            Ok((plus, minus))
        })
    };
    Ok(SplittingOp::from_parts(label, measure, target, apply))
}

/// Swaps the two sides, measuring the complement of the original target.
pub fn complement(op: &SplittingOp) -> SplittingOp {
    let inner = op.clone();
    let apply: ApplyFn = Arc::new(move |r, d| {
        let (plus, minus) = inner.apply(r, d)?;
        Ok((minus, plus))
    });
    SplittingOp::from_parts(
        format!("not[{}]", op.label),
        op.measure.clone(),
        op.target.complemented(),
        apply,
    )
}

/// The four measurements produced by combining two operators: each original
/// target rebudgeted, their intersection, and their union.
#[derive(Clone, Debug)]
pub struct CombinedPair {
    pub x: SplittingOp,
    pub y: SplittingOp,
    pub intersection: SplittingOp,
    pub union: SplittingOp,
}

#[derive(Clone, Copy)]
enum Select {
    First,
    Second,
    Intersection,
    Union,
}

/// Combines two operators over the same measure.
///
/// The budget chain applies the first operator at `r + 1` and the second
/// at `r + 2` to each half, so the four quadrant capitals sum to at most
/// `d(λ) + 2^{-r}`. The first operator runs once per apply and its outputs
/// are shared between the two second-stage splits, which keeps towers of
/// combinations linear in depth rather than exponential.
pub fn combine_pair(first: &SplittingOp, second: &SplittingOp) -> Result<CombinedPair> {
    if first.measure != second.measure {
        return Err(Error::MeasureMismatch);
    }
    let make = |sel: Select, label: String, target: Target| -> SplittingOp {
        let a = first.clone();
        let b = second.clone();
        let apply: ApplyFn = Arc::new(move |r, d| {
            let (p, m) = a.apply(r + 1, d)?;
            let (pp, pm) = b.apply(r + 2, &p)?;
            let (mp, mm) = b.apply(r + 2, &m)?;
            Ok(match sel {
                Select::First => (Martingale::add(&pp, &pm)?, Martingale::add(&mp, &mm)?),
                Select::Second => (Martingale::add(&pp, &mp)?, Martingale::add(&pm, &mm)?),
                Select::Intersection => (pp, Martingale::sum(&[pm, mp, mm])?),
                Select::Union => (Martingale::sum(&[pp, pm, mp])?, mm),
            })
        });
        SplittingOp::from_parts(label, first.measure.clone(), target, apply)
    };
    let clopen_pair = match (&first.target, &second.target) {
        (Target::Clopen(a), Target::Clopen(b)) => Some((a.clone(), b.clone())),
        _ => None,
    };
    let (t_int, t_uni) = match &clopen_pair {
        Some((a, b)) => (
            Target::Clopen(a.intersection(b)),
            Target::Clopen(a.union(b)),
        ),
        None => (
            Target::Abstract(format!("{} and {}", first.label, second.label)),
            Target::Abstract(format!("{} or {}", first.label, second.label)),
        ),
    };
    let (la, lb) = (first.label.clone(), second.label.clone());
    Ok(CombinedPair {
        x: make(Select::First, format!("x[{la}]"), first.target.clone()),
        y: make(Select::Second, format!("y[{lb}]"), second.target.clone()),
        intersection: make(Select::Intersection, format!("and[{la},{lb}]"), t_int),
        union: make(Select::Union, format!("or[{la},{lb}]"), t_uni),
    })
}

/// Measurement of an arbitrary clopen set, folded from cylinder
/// measurements of its maximal-subtree decomposition.
pub fn clopen_measurement(set: &ClopenSet, nu: &ProbMeasure) -> Result<SplittingOp> {
    if set.is_empty_set() {
        let measure = nu.clone();
        let zero_measure = nu.clone();
        let apply: ApplyFn = Arc::new(move |_r, d| {
            Ok((Martingale::zero(&zero_measure), d.clone()))
        });
        return Ok(SplittingOp::from_parts(
            "clopen(empty)",
            measure,
            Target::Clopen(ClopenSet::empty()),
            apply,
        ));
    }
    let cylinders = set.to_prefix_set();
    let mut acc: Option<SplittingOp> = None;
    for w in cylinders.iter() {
        let cyl = cylinder_measurement(w, nu)?;
        acc = Some(match acc {
            None => cyl,
            Some(prev) => combine_pair(&prev, &cyl)?.union,
        });
    }
    let mut op = acc.expect("nonempty clopen set has at least one cylinder");
    op.label = format!("clopen({} cylinders)", cylinders.len());
    op.target = Target::Clopen(set.clone());
    Ok(op)
}

/// Exact positive estimate `d⁺(λ)` of `op` applied to the unit martingale,
/// resolving limit stages at precision `t` when necessary.
fn plus_initial(op: &SplittingOp, r: u32, t: u32) -> Result<ExactRational> {
    let unit = Martingale::unit(&op.measure);
    let (plus, _) = op.apply(r, &unit)?;
    exact_at(&plus, &BitString::empty(), t)
}

/// Precisions probed eagerly when an operator must certify a zero estimate
/// before it may be used. A fixed probe cannot certify all precisions, so
/// every later use re-checks the precision it actually needs.
const EVIDENCE_PROBE: u32 = 4;

fn require_null_evidence(op: &SplittingOp, what: &str) -> Result<()> {
    for r in 0..=EVIDENCE_PROBE {
        let v = plus_initial(op, r, r + 1)?;
        if v > ExactRational::pow2(-(r as i64)) {
            return Err(Error::Evidence(format!(
                "{what}: estimate {v} at precision {r} exceeds 2^-{r}"
            )));
        }
    }
    Ok(())
}

/// Measurement valid for any subset of the null set measured by `inner`.
///
/// The positive side is `inner`'s positive part applied to the unit
/// martingale, so it ignores the operand entirely; the negative side
/// returns the operand unchanged. Each application re-checks the zero
/// estimate at the precision it uses.
pub fn completeness_measurement(inner: &SplittingOp) -> Result<SplittingOp> {
    require_null_evidence(inner, "completeness")?;
    let src = inner.clone();
    let apply: ApplyFn = Arc::new(move |r, d| {
        let unit = Martingale::unit(&src.measure);
        let (plus, _) = src.apply(r, &unit)?;
        let plus = if plus.is_exact() {
            plus
        } else {
            plus.resolve_exact(r + 1)?
        };
        let v = plus.initial_value()?;
        if v > ExactRational::pow2(-(r as i64)) {
            return Err(Error::Evidence(format!(
                "completeness: estimate {v} at precision {r} exceeds 2^-{r}"
            )));
        }
        Ok((plus, d.clone()))
    });
    Ok(SplittingOp::from_parts(
        format!("subset-of[{}]", inner.label),
        inner.measure.clone(),
        Target::Abstract(format!("subsets of the null target of {}", inner.label)),
        apply,
    ))
}

/// Two-sided measure estimate: the interval `[d⁺(λ) - 2^{-r}, d⁺(λ)]`
/// clamped to `[0, 1]`, together with the complementary reading
/// `1 - d⁻(λ)`, which must agree within `2^{1-r}` for a valid measurement.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureEstimate {
    pub lo: ExactRational,
    pub hi: ExactRational,
    pub plus_value: ExactRational,
    pub minus_value: ExactRational,
    pub complementary_gap: ExactRational,
    pub agrees: bool,
}

fn clamp01(x: ExactRational) -> ExactRational {
    x.max(ExactRational::zero()).min(ExactRational::one())
}

pub fn measure_estimate(op: &SplittingOp, r: u32) -> Result<MeasureEstimate> {
    let unit = Martingale::unit(&op.measure);
    let (plus, minus) = op.apply(r, &unit)?;
    let lam = BitString::empty();
    let p = plus.evaluate(&lam, r + 2)?.as_rational();
    let m = minus.evaluate(&lam, r + 2)?.as_rational();
    let step = ExactRational::pow2(-(r as i64));
    let lo = clamp01(p.sub_clamped(&step));
    let hi = clamp01(p.clone());
    let complementary = ExactRational::one().sub_clamped(&m);
    let gap = p.dist(&complementary);
    let agrees = gap <= ExactRational::pow2(1 - r as i64);
    Ok(MeasureEstimate {
        lo,
        hi,
        plus_value: p,
        minus_value: m,
        complementary_gap: gap,
        agrees,
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Untestable,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageViolation {
    pub w: BitString,
    pub side: char,
}

/// Outcome of checking one operator against one operand at one precision.
#[derive(Clone, Debug, Serialize)]
pub struct SplittingReport {
    pub label: String,
    pub budget_sum: ExactRational,
    pub budget_cap: ExactRational,
    pub condition_i: CheckStatus,
    pub condition_ii: CheckStatus,
    pub condition_iii: CheckStatus,
    pub violations: Vec<CoverageViolation>,
    pub strings_checked: usize,
}

impl SplittingReport {
    pub fn all_pass(&self) -> bool {
        self.condition_iii == CheckStatus::Pass
            && self.condition_i != CheckStatus::Fail
            && self.condition_ii != CheckStatus::Fail
    }
}

/// Checks the splitting conditions finitely.
///
/// The capital inequality is decided exactly at the root. Coverage is
/// checked at `depth`: every length-`depth` string reached by `d` with
/// capital 1 whose cylinder lies inside the target (resp. outside) must be
/// reached the same way by `d⁺` (resp. `d⁻`). Operators with abstract
/// targets get `Untestable` coverage, since no sound finite refutation
/// exists for them.
pub fn verify_splitting(
    op: &SplittingOp,
    d: &Martingale,
    r: u32,
    depth: usize,
) -> Result<SplittingReport> {
    let (plus_raw, minus_raw) = op.apply(r, d)?;
    let resolve = |m: Martingale| -> Result<Martingale> {
        if m.is_exact() {
            Ok(m)
        } else {
            m.resolve_exact(r + 1)
        }
    };
    let plus = resolve(plus_raw)?;
    let minus = resolve(minus_raw)?;
    let lam = BitString::empty();
    let budget_sum = plus.eval_exact(&lam)? + minus.eval_exact(&lam)?;
    let budget_cap = d.eval_exact(&lam)? + ExactRational::pow2(-(r as i64));
    let condition_iii = if budget_sum <= budget_cap {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };

    let mut violations = Vec::new();
    let mut strings_checked = 0;
    let (condition_i, condition_ii) = match &op.target {
        Target::Abstract(_) => (CheckStatus::Untestable, CheckStatus::Untestable),
        Target::Clopen(x_plus) => {
            let x_minus = x_plus.complement();
            let one = ExactRational::one();
            // Shared session: the three martingales are scanned over the
            // same prefix tree, so memoized node values carry across.
            let mut session = crate::martingale::EvalSession::new(&op.measure);
            let mut covers = |m: &Martingale, w: &BitString| -> Result<bool> {
                for v in w.prefixes() {
                    if m.eval_exact_with(&mut session, &v)? >= one {
                        return Ok(true);
                    }
                }
                Ok(false)
            };
            let mut bad_plus = false;
            let mut bad_minus = false;
            for w in BitString::all_of_length(depth) {
                strings_checked += 1;
                if !covers(d, &w)? {
                    continue;
                }
                if x_plus.contains_cylinder(&w) && !covers(&plus, &w)? {
                    bad_plus = true;
                    violations.push(CoverageViolation { w: w.clone(), side: '+' });
                }
                if x_minus.contains_cylinder(&w) && !covers(&minus, &w)? {
                    bad_minus = true;
                    violations.push(CoverageViolation { w, side: '-' });
                }
            }
            let grade = |bad| if bad { CheckStatus::Fail } else { CheckStatus::Pass };
            (grade(bad_plus), grade(bad_minus))
        }
    };
    Ok(SplittingReport {
        label: op.label.clone(),
        budget_sum,
        budget_cap,
        condition_i,
        condition_ii,
        condition_iii,
        violations,
        strings_checked,
    })
}

/// Whether the stage index grows a union from inside or shrinks an
/// intersection from outside; fixes the direction of stage monotonicity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Monotonicity {
    Union,
    Intersection,
}

/// An indexed family of splitting pairs with a convergence modulus: past
/// stage `Γ(t, r, d, w)` the stage values at `w` sit within `2^{-t}` of
/// their limit, monotonically in the declared direction.
#[derive(Clone)]
pub struct ModulatedFamily {
    label: String,
    measure: ProbMeasure,
    direction: Monotonicity,
    family: FamilyFn,
    modulus: ModulusFn,
    w_independent: bool,
    validate: bool,
}

impl ModulatedFamily {
    pub fn new(
        label: impl Into<String>,
        measure: ProbMeasure,
        direction: Monotonicity,
        family: FamilyFn,
        modulus: ModulusFn,
        w_independent: bool,
    ) -> Self {
        ModulatedFamily {
            label: label.into(),
            measure,
            direction,
            family,
            modulus,
            w_independent,
            validate: true,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn measure(&self) -> &ProbMeasure {
        &self.measure
    }

    pub fn direction(&self) -> Monotonicity {
        self.direction
    }

    /// Disables the stage-monotonicity spot check during application.
    pub fn without_validation(mut self) -> Self {
        self.validate = false;
        self
    }

    /// The `k`-th stage pair at precision `r`.
    pub fn stage(&self, k: u64, r: u32, d: &Martingale) -> Result<(Martingale, Martingale)> {
        (self.family)(k, r, d)
    }

    /// Stage index past which values at `w` are within `2^{-t}` of the limit.
    pub fn modulus(&self, t: u32, r: u32, d: &Martingale, w: &BitString) -> u64 {
        (self.modulus)(t, r, d, w)
    }

    /// The same family measuring the complements: sides swapped, union and
    /// intersection exchanged, modulus unchanged.
    pub fn complemented(&self) -> ModulatedFamily {
        let inner = self.family.clone();
        let family: FamilyFn = Arc::new(move |k, r, d| {
            let (plus, minus) = inner(k, r, d)?;
            Ok((minus, plus))
        });
        ModulatedFamily {
            label: format!("not[{}]", self.label),
            measure: self.measure.clone(),
            direction: match self.direction {
                Monotonicity::Union => Monotonicity::Intersection,
                Monotonicity::Intersection => Monotonicity::Union,
            },
            family,
            modulus: self.modulus.clone(),
            w_independent: self.w_independent,
            validate: self.validate,
        }
    }

    /// Constant family: every stage is `op`, modulus identically zero.
    pub fn constant(op: &SplittingOp, direction: Monotonicity) -> ModulatedFamily {
        let inner = op.clone();
        let family: FamilyFn = Arc::new(move |_k, r, d| inner.apply(r, d));
        ModulatedFamily::new(
            format!("constant[{}]", op.label()),
            op.measure().clone(),
            direction,
            family,
            Arc::new(|_t, _r, _d, _w| 0),
            true,
        )
    }

    /// The nested unions of the disjoint cylinders at `0^k 1` under the
    /// uniform measure: stage `k` measures strings with a one among their
    /// first `k + 1` bits. Stage operators are folded unions of cylinder
    /// measurements, built once and cached. The tail past stage `k` has
    /// measure `2^{-(k+1)}`, so `Γ(t, ·, ·, ·) = t` is a valid modulus for
    /// operands bounded by the unit martingale.
    pub fn disjoint_tails() -> ModulatedFamily {
        let uniform = ProbMeasure::uniform();
        let cache: Arc<Mutex<Vec<SplittingOp>>> = Arc::new(Mutex::new(Vec::new()));
        let measure = uniform.clone();
        let family: FamilyFn = Arc::new(move |k, r, d| {
            let op = {
                let mut stages = cache.lock().expect("stage cache poisoned");
                while stages.len() <= k as usize {
                    let j = stages.len();
                    let w = BitString::repeated(false, j).child(true);
                    let cyl = cylinder_measurement(&w, &uniform)?;
                    let mut next = match stages.last() {
                        None => cyl,
                        Some(prev) => combine_pair(prev, &cyl)?.union,
                    };
                    // The stage target written out as a clopen set keeps one
                    // selected string per leaf it covers, so it doubles with
                    // every fold. An opaque label keeps stage construction
                    // and cloning linear in the stage index.
                    next.target = Target::Abstract(format!("tails through {j}"));
                    stages.push(next);
                }
                stages[k as usize].clone()
            };
            op.apply(r, d)
        });
        ModulatedFamily::new(
            "disjoint-tails",
            measure,
            Monotonicity::Union,
            family,
            Arc::new(|t, _r, _d, _w| t as u64),
            true,
        )
    }
}

/// Spot check run on application: one extra stage past the chosen index
/// must move in the declared direction and stay within the modulus band.
fn validate_stages(fam: &ModulatedFamily, m: u64, r: u32, d: &Martingale) -> Result<()> {
    let lam = BitString::empty();
    let value_at = |k: u64| -> Result<ExactRational> {
        let (plus, _) = fam.stage(k, r + 1, d)?;
        exact_at(&plus, &lam, r + 2)
    };
    let v_m = value_at(m)?;
    let v_next = value_at(m + 1)?;
    let slack = ExactRational::pow2(-(r as i64 + 1));
    let directional = match fam.direction {
        Monotonicity::Union => v_next >= v_m.sub_clamped(&slack),
        Monotonicity::Intersection => v_next <= &v_m + &slack,
    };
    if !directional {
        return Err(Error::ModulusViolation(format!(
            "{}: stages {m} -> {} move against the declared direction ({v_m} to {v_next})",
            fam.label,
            m + 1
        )));
    }
    if v_m.dist(&v_next) > ExactRational::pow2(-(r as i64)) {
        return Err(Error::ModulusViolation(format!(
            "{}: stages {m} and {} differ by {} past the modulus band 2^-{r}",
            fam.label,
            m + 1,
            v_m.dist(&v_next)
        )));
    }
    Ok(())
}

/// Limit of the positive stages, evaluated by resolving the modulus at the
/// precision each query asks for.
struct StageLimit {
    fam: ModulatedFamily,
    r: u32,
    d: Martingale,
}

impl DynamicMartingale for StageLimit {
    fn kind(&self) -> String {
        format!("stage_limit[{}]", self.fam.label)
    }

    fn eval_within(&self, w: &BitString, t: u32) -> Result<ExactRational> {
        // Stage error at most 2^{-(t+1)}, stage evaluation the same again.
        let k = self.fam.modulus(t + 1, self.r + 1, &self.d, w);
        let (plus, _) = self.fam.stage(k, self.r + 1, &self.d)?;
        if plus.is_exact() {
            plus.eval_exact(w)
        } else {
            plus.eval_within(w, t + 1)
        }
    }

    fn resolve_exact(&self, t: u32) -> Result<Option<Martingale>> {
        if !self.fam.w_independent {
            return Ok(None);
        }
        let k = self.fam.modulus(t, self.r + 1, &self.d, &BitString::empty());
        let (plus, _) = self.fam.stage(k, self.r + 1, &self.d)?;
        Ok(if plus.is_exact() { Some(plus) } else { None })
    }
}

/// Measurement of the union along a union-monotone family.
///
/// The negative side is the fixed stage at the root modulus for `r + 1`;
/// the positive side is the stage limit, resolved per query. Their
/// capitals overrun `d(λ)` by at most `2^{-(r+1)} + 2^{-(r+1)} = 2^{-r}`.
pub fn sequence_union(fam: &ModulatedFamily) -> Result<SplittingOp> {
    if fam.direction != Monotonicity::Union {
        return Err(Error::Precondition(
            "sequence_union requires a union-monotone family".into(),
        ));
    }
    let f = fam.clone();
    let apply: ApplyFn = Arc::new(move |r, d| {
        let lam = BitString::empty();
        let m = f.modulus(r + 1, r + 1, d, &lam);
        if f.validate {
            validate_stages(&f, m, r, d)?;
        }
        let (_, minus) = f.stage(m, r + 1, d)?;
        let plus = Martingale::dynamic(
            Arc::new(StageLimit {
                fam: f.clone(),
                r,
                d: d.clone(),
            }),
            &f.measure,
        );
        Ok((plus, minus))
    });
    Ok(SplittingOp::from_parts(
        format!("seq-union[{}]", fam.label),
        fam.measure.clone(),
        Target::Abstract(format!("union along {}", fam.label)),
        apply,
    ))
}

/// Measurement of the intersection along an intersection-monotone family,
/// via the complement of the union of complements.
pub fn sequence_intersection(fam: &ModulatedFamily) -> Result<SplittingOp> {
    if fam.direction != Monotonicity::Intersection {
        return Err(Error::Precondition(
            "sequence_intersection requires an intersection-monotone family".into(),
        ));
    }
    let union = sequence_union(&fam.complemented())?;
    let mut op = complement(&union);
    op.label = format!("seq-intersection[{}]", fam.label);
    op.target = Target::Abstract(format!("intersection along {}", fam.label));
    Ok(op)
}

/// Union family for a finite list of null measurements: stage `k`'s
/// positive side is the sum of the first `k + 1` members' positive parts,
/// member `j` taken at precision `j + r + 1` and certified `≤ 2^{-(j+r+1)}`
/// there, so every stage estimate stays below `2^{-r}`. The family is
/// stationary past the last member.
pub fn null_sequence_union(
    members: &[SplittingOp],
    nu: &ProbMeasure,
) -> Result<ModulatedFamily> {
    for m in members {
        if m.measure() != nu {
            return Err(Error::MeasureMismatch);
        }
    }
    let members: Arc<Vec<SplittingOp>> = Arc::new(members.to_vec());
    let n = members.len() as u64;
    let measure = nu.clone();
    let cache: Arc<Mutex<BTreeMap<(u64, u32), Martingale>>> =
        Arc::new(Mutex::new(BTreeMap::new()));
    let fam_measure = measure.clone();
    let family: FamilyFn = Arc::new(move |k, r, d| {
        let upto = if n == 0 { 0 } else { k.min(n - 1) + 1 };
        let mut parts = Vec::new();
        for j in 0..upto {
            let key = (j, r);
            let cached = cache.lock().expect("member cache poisoned").get(&key).cloned();
            let part = match cached {
                Some(p) => p,
                None => {
                    let prec = j as u32 + r + 1;
                    let unit = Martingale::unit(&fam_measure);
                    let (plus, _) = members[j as usize].apply(prec, &unit)?;
                    let plus = if plus.is_exact() {
                        plus
                    } else {
                        plus.resolve_exact(prec + 1)?
                    };
                    let v = plus.initial_value()?;
                    if v > ExactRational::pow2(-(prec as i64)) {
                        return Err(Error::Evidence(format!(
                            "member {j}: estimate {v} exceeds 2^-{prec}"
                        )));
                    }
                    cache
                        .lock()
                        .expect("member cache poisoned")
                        .insert(key, plus.clone());
                    plus
                }
            };
            parts.push(part);
        }
        let plus = if parts.is_empty() {
            Martingale::zero(&fam_measure)
        } else {
            Martingale::sum(&parts)?
        };
        Ok((plus, d.clone()))
    });
    Ok(ModulatedFamily::new(
        format!("null-union({n} members)"),
        measure,
        Monotonicity::Union,
        family,
        Arc::new(move |_t, _r, _d, _w| n.saturating_sub(1)),
        true,
    ))
}

/// Cap on how many cover members a truncated series evaluation may touch.
const COVER_TERM_CAP: usize = 4096;

#[derive(Clone)]
enum CoverKind {
    ZeroTail,
    Indexed(MemberFn),
}

/// A family `r ↦ d_r` of martingales with `d_r(λ) ≤ 2^{-r}`, certified on
/// every member actually requested.
#[derive(Clone)]
pub struct NullCover {
    kind: CoverKind,
    regular: bool,
    measure: ProbMeasure,
    max_terms: usize,
}

impl NullCover {
    /// Cover of the all-zeros ray under the uniform measure by capital
    /// ladders: member `r` starts at `2^{-(r+1)}` and doubles along zeros.
    pub fn zero_tail() -> NullCover {
        NullCover {
            kind: CoverKind::ZeroTail,
            regular: true,
            measure: ProbMeasure::uniform(),
            max_terms: COVER_TERM_CAP,
        }
    }

    /// Cover from an explicit member function. The regularity flag is the
    /// caller's claim that every member keeps capital at least 1 once it
    /// reaches 1; only regular covers admit the strong-success conversion.
    pub fn indexed(members: MemberFn, regular: bool, measure: ProbMeasure) -> NullCover {
        NullCover {
            kind: CoverKind::Indexed(members),
            regular,
            measure,
            max_terms: COVER_TERM_CAP,
        }
    }

    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn measure(&self) -> &ProbMeasure {
        &self.measure
    }

    /// The `r`-th member, with its initial bound checked exactly.
    pub fn member(&self, r: u32) -> Result<Martingale> {
        let d = match &self.kind {
            CoverKind::ZeroTail => Martingale::z3_ladder(r),
            CoverKind::Indexed(f) => f(r)?,
        };
        let v = exact_at(&d, &BitString::empty(), r + 1)?;
        if v > ExactRational::pow2(-(r as i64)) {
            return Err(Error::Evidence(format!(
                "cover member {r} has initial value {v} > 2^-{r}"
            )));
        }
        Ok(d)
    }
}

/// Truncated series over a cover's members: the tail past
/// `R = t + l(|w|)` is bounded by `2^{-R} / ν(w) ≤ 2^{-t}`, where `l` is
/// the measure's positivity modulus.
struct CoverSum {
    cover: NullCover,
    bound: PositivityBound,
}

impl DynamicMartingale for CoverSum {
    fn kind(&self) -> String {
        "cover_sum".into()
    }

    fn eval_within(&self, w: &BitString, t: u32) -> Result<ExactRational> {
        if self.cover.measure.is_zero_at(w)? {
            return Ok(ExactRational::from_integer(w.len() as i64));
        }
        let needed = t as u64 + self.bound.bits(w.len());
        if needed > self.cover.max_terms as u64 {
            return Err(Error::TruncationExhausted {
                needed: needed as usize,
                cap: self.cover.max_terms,
            });
        }
        let mut total = ExactRational::zero();
        for r in 0..=needed as u32 {
            total += &self.cover.member(r)?.eval_exact(w)?;
        }
        Ok(total)
    }

    fn resolve_exact(&self, _t: u32) -> Result<Option<Martingale>> {
        Ok(None)
    }
}

/// The uniform-measure cover of the all-zeros ray.
pub fn z3_cover() -> NullCover {
    NullCover::zero_tail()
}

/// Sums a regular cover into one martingale succeeding strongly on the
/// covered set: evaluation truncates the series under the positivity
/// modulus, and strings of measure zero take the value `|w|` directly.
/// The all-zeros cover has a closed form and returns it exactly.
pub fn null_cover_to_strong(cover: &NullCover, nu: &ProbMeasure) -> Result<Martingale> {
    if !cover.regular {
        return Err(Error::Precondition(
            "strong-success conversion requires a regular cover".into(),
        ));
    }
    if cover.measure() != nu {
        return Err(Error::MeasureMismatch);
    }
    match &cover.kind {
        CoverKind::ZeroTail => Ok(Martingale::z3_cover_sum()),
        CoverKind::Indexed(_) => {
            let bound = nu.positivity_bound()?;
            Ok(Martingale::dynamic(
                Arc::new(CoverSum {
                    cover: cover.clone(),
                    bound,
                }),
                nu,
            ))
        }
    }
}

/// Measurement of the success set of `d` as a null set: the positive side
/// scales `d` down to initial capital at most `2^{-r}`, the negative side
/// returns the operand unchanged.
pub fn success_to_measurement(d: &Martingale) -> Result<SplittingOp> {
    let e = d.initial_value()?;
    let denom = &ExactRational::one() + &e;
    let src = d.clone();
    let apply: ApplyFn = Arc::new(move |r, input| {
        let c = ExactRational::pow2(-(r as i64))
            .checked_div(&denom)
            .expect("1 + d(lambda) is positive");
        let plus = Martingale::scale(&c, &src)?;
        Ok((plus, input.clone()))
    });
    Ok(SplittingOp::from_parts(
        "success-null",
        d.measure().clone(),
        Target::Abstract(format!("success set of a martingale with initial value {e}")),
        apply,
    ))
}

/// Reads a zero-estimate measurement as a null cover: member `r` is the
/// positive part applied to the unit martingale at precision `r`.
pub fn measurement_to_nullcover(op: &SplittingOp) -> Result<NullCover> {
    require_null_evidence(op, "null cover conversion")?;
    let src = op.clone();
    let members: MemberFn = Arc::new(move |r| {
        let unit = Martingale::unit(src.measure());
        let (plus, _) = src.apply(r, &unit)?;
        if plus.is_exact() {
            Ok(plus)
        } else {
            plus.resolve_exact(r + 1)
        }
    });
    Ok(NullCover::indexed(members, false, op.measure().clone()))
}

/// The two unit-capital sides of a measurement, indexed by precision:
/// `plus(r)(λ) + minus(r)(λ) ≤ 1 + 2^{-r}`.
#[derive(Clone)]
pub struct Bicover {
    op: SplittingOp,
}

impl Bicover {
    pub fn plus(&self, r: u32) -> Result<Martingale> {
        Ok(self.sides(r)?.0)
    }

    pub fn minus(&self, r: u32) -> Result<Martingale> {
        Ok(self.sides(r)?.1)
    }

    fn sides(&self, r: u32) -> Result<(Martingale, Martingale)> {
        let unit = Martingale::unit(self.op.measure());
        self.op.apply(r, &unit)
    }

    /// Exact root capitals at precision `r`, checked against `1 + 2^{-r}`.
    pub fn bound_check(&self, r: u32) -> Result<(ExactRational, ExactRational)> {
        let (plus, minus) = self.sides(r)?;
        let lam = BitString::empty();
        let p = exact_at(&plus, &lam, r + 1)?;
        let m = exact_at(&minus, &lam, r + 1)?;
        let cap = &ExactRational::one() + &ExactRational::pow2(-(r as i64));
        if &(&p + &m) > &cap {
            return Err(Error::Evidence(format!(
                "bicover capitals {p} + {m} exceed 1 + 2^-{r}"
            )));
        }
        Ok((p, m))
    }
}

pub fn bicover_from_measurement(op: &SplittingOp) -> Bicover {
    Bicover { op: op.clone() }
}
