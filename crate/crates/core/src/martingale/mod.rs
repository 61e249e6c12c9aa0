//! Martingales as expression trees with exact evaluation.
//!
//! A martingale over a measure `ν` is a nonnegative function `d` on finite
//! strings satisfying the fairness identity
//!
//! ```text
//! d(w) ν(w) = d(w0) ν(w0) + d(w1) ν(w1)
//! ```
//!
//! at every string `w`. Values here are first-class expression trees:
//! leaves (the constant-1 martingale, finite tables, prefix-set hitters,
//! ladders) combined by scaling, sums, cylinder splits, regularization, and
//! the zero-one transform. Shared subtrees are real shared nodes, and every
//! evaluation session memoizes by node identity, so the operator algebra
//! can stack without blowup.
//!
//! Exact nodes evaluate to exact rationals. A tree containing an inherently
//! approximate node (a truncated series, a stage-resolved limit) evaluates
//! to a [`DyadicApprox`] whose total error is strictly below the requested
//! `2^{-r}`, with the budget split across sum nodes.

mod regular;
mod verify;

pub use regular::{regularity_report, robin_hood, RegularityReport};
pub use verify::{
    verify_martingale, verify_martingale_with, CoverageCertificate, CoverageOutcome,
    MartingaleReport, MartingaleViolation, ViolationKind,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::cantor::{BitString, PrefixSet};
use crate::measure::ProbMeasure;
use crate::numerics::{dyadic_round, DyadicApprox, ExactRational};
use crate::{Error, Result};

/// Result of evaluating a martingale: exact when every node in the tree is
/// exact, otherwise a tagged dyadic approximation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Exact(ExactRational),
    Approx(DyadicApprox),
}

impl Value {
    /// The carried rational, discarding the precision tag.
    pub fn as_rational(&self) -> ExactRational {
        match self {
            Value::Exact(x) => x.clone(),
            Value::Approx(d) => d.to_rational(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(x) => write!(f, "{x}"),
            Value::Approx(d) => write!(f, "{d}"),
        }
    }
}

/// A node whose value is only available to finite precision: truncated
/// infinite sums and limits resolved through a convergence modulus. The
/// splitting layer implements this trait; the evaluator treats it opaquely.
pub trait DynamicMartingale: Send + Sync {
    /// Short node tag for error messages.
    fn kind(&self) -> String;

    /// Estimate at `w` with absolute error at most `2^{-t}`.
    fn eval_within(&self, w: &BitString, t: u32) -> Result<ExactRational>;

    /// Exact stage standing in for this node at precision `t`, when the
    /// node has one (limits do; truncated series do not).
    fn resolve_exact(&self, t: u32) -> Result<Option<Martingale>>;
}

/// Finite value table with constant continuation: past its depth,
/// `d(w) = d(w restricted to depth)`, which satisfies the fairness identity
/// under every measure.
#[derive(Clone, Debug)]
pub struct TableMartingale {
    depth: usize,
    values: BTreeMap<BitString, ExactRational>,
}

impl TableMartingale {
    fn value_at(&self, w: &BitString) -> Result<ExactRational> {
        let key = if w.len() <= self.depth {
            w.clone()
        } else {
            w.prefix(self.depth)
        };
        self.values
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::MissingTableEntry { w: key.to_string() })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &BTreeMap<BitString, ExactRational> {
        &self.values
    }
}

/// Data of a zero-one transform node, fixed at construction time by the
/// diagonal layer: block length `m`, the light leaf `u`, the set of heavy
/// length-`m` prefixes whose subtrees are redirected through `u`, and the
/// back-solved values below depth `m`.
#[derive(Clone)]
pub(crate) struct ZeroOneData {
    pub(crate) inner: Arc<Expr>,
    pub(crate) m: usize,
    pub(crate) u: BitString,
    pub(crate) heavy: BTreeSet<BitString>,
    pub(crate) below: BTreeMap<BitString, ExactRational>,
}

/// Expression-tree node. Constructors on [`Martingale`] maintain the
/// invariants (nonnegative scalars, matching measures, complete tables).
pub(crate) enum Expr {
    Unit,
    Table(TableMartingale),
    Scale(ExactRational, Arc<Expr>),
    Sum(Arc<Expr>, Arc<Expr>),
    /// `d(w) = Σ_{u in A} ν(u|w)`, and 1 on zero-measure strings.
    FromPrefixSet(PrefixSet),
    /// 0/1 indicator of the cylinder at `w`; a martingale exactly when
    /// `ν(w) = 0`.
    CylinderIndicator(BitString),
    /// Positive-measure cylinder split, plus side.
    CylinderSplitPlus { w: BitString, inner: Arc<Expr> },
    /// Positive-measure cylinder split, minus side: `inner - plus`.
    CylinderSplitMinus { w: BitString, inner: Arc<Expr> },
    /// Robin Hood regularization of the inner martingale.
    Regularized(Arc<Expr>),
    ZeroOne(ZeroOneData),
    /// The capital ladder climbing the all-zeros branch: value
    /// `2^{|w|-(r+1)}` on prefixes of the all-zeros string, 1 past depth
    /// `r+1` on that branch, 0 elsewhere. A martingale under the uniform
    /// measure only.
    Z3Ladder { r: u32 },
    /// Exact sum of the ladder family over all `r`: `|w|+1` on the
    /// all-zeros branch, else the index of the first 1.
    Z3CoverSum,
    Dynamic(Arc<dyn DynamicMartingale>),
}

impl Expr {
    fn kind(&self) -> String {
        match self {
            Expr::Unit => "unit".into(),
            Expr::Table(_) => "table".into(),
            Expr::Scale(..) => "scale".into(),
            Expr::Sum(..) => "sum".into(),
            Expr::FromPrefixSet(_) => "from_prefix_set".into(),
            Expr::CylinderIndicator(_) => "cylinder_indicator".into(),
            Expr::CylinderSplitPlus { .. } => "cylinder_split_plus".into(),
            Expr::CylinderSplitMinus { .. } => "cylinder_split_minus".into(),
            Expr::Regularized(_) => "regularized".into(),
            Expr::ZeroOne(_) => "zero_one_transform".into(),
            Expr::Z3Ladder { .. } => "ladder".into(),
            Expr::Z3CoverSum => "ladder_cover_sum".into(),
            Expr::Dynamic(d) => d.kind(),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind())
    }
}

fn is_exact(expr: &Arc<Expr>, seen: &mut HashMap<usize, bool>) -> bool {
    let key = Arc::as_ptr(expr) as usize;
    if let Some(&v) = seen.get(&key) {
        return v;
    }
    let v = match &**expr {
        Expr::Dynamic(_) => false,
        Expr::Scale(_, inner) | Expr::Regularized(inner) => is_exact(inner, seen),
        Expr::Sum(a, b) => is_exact(a, seen) && is_exact(b, seen),
        Expr::CylinderSplitPlus { inner, .. } | Expr::CylinderSplitMinus { inner, .. } => {
            is_exact(inner, seen)
        }
        Expr::ZeroOne(z) => is_exact(&z.inner, seen),
        _ => true,
    };
    seen.insert(key, v);
    v
}

/// Memoizing evaluation session. Keyed by node identity and string, so any
/// number of martingales over the same measure can share one session and
/// reuse each other's subtree values.
pub struct EvalSession {
    measure: ProbMeasure,
    memo: HashMap<(usize, BitString), ExactRational>,
}

impl EvalSession {
    pub fn new(measure: &ProbMeasure) -> Self {
        EvalSession {
            measure: measure.clone(),
            memo: HashMap::new(),
        }
    }

    pub(crate) fn measure(&self) -> &ProbMeasure {
        &self.measure
    }

    pub fn strings_visited(&self) -> usize {
        self.memo.len()
    }
}

pub(crate) fn eval_expr(
    expr: &Arc<Expr>,
    s: &mut EvalSession,
    w: &BitString,
) -> Result<ExactRational> {
    let key = (Arc::as_ptr(expr) as usize, w.clone());
    if let Some(v) = s.memo.get(&key) {
        return Ok(v.clone());
    }
    let one = ExactRational::one();
    let val = match &**expr {
        Expr::Unit => one,
        Expr::Table(t) => t.value_at(w)?,
        Expr::Scale(c, inner) => c * &eval_expr(inner, s, w)?,
        Expr::Sum(a, b) => &eval_expr(a, s, w)? + &eval_expr(b, s, w)?,
        Expr::FromPrefixSet(set) => {
            if s.measure.is_zero_at(w)? {
                one
            } else {
                let mut acc = ExactRational::zero();
                for u in set.iter() {
                    acc += &s.measure.conditional(u, w)?;
                }
                acc
            }
        }
        Expr::CylinderIndicator(u) => {
            if u.is_prefix_of(w) {
                one
            } else {
                ExactRational::zero()
            }
        }
        Expr::CylinderSplitPlus { w: cw, inner } => split_plus_value(cw, inner, s, w)?,
        Expr::CylinderSplitMinus { w: cw, inner } => {
            let whole = eval_expr(inner, s, w)?;
            let plus = split_plus_value(cw, inner, s, w)?;
            whole.sub_guarded(&plus)?
        }
        Expr::Regularized(inner) => regular::lambda_value(expr, inner, s, w)?,
        Expr::ZeroOne(z) => {
            if w.len() < z.m {
                z.below
                    .get(w)
                    .cloned()
                    .ok_or_else(|| Error::MissingTableEntry { w: w.to_string() })?
            } else if z.heavy.contains(&w.prefix(z.m)) {
                eval_expr(&z.inner, s, &w.substitute_prefix(&z.u))?
            } else {
                eval_expr(&z.inner, s, w)?
            }
        }
        Expr::Z3Ladder { r } => {
            let horizon = (*r as usize + 1).min(w.len());
            if w.bits()[..horizon].iter().any(|&b| b) {
                ExactRational::zero()
            } else if w.len() >= *r as usize + 1 {
                one
            } else {
                ExactRational::pow2(w.len() as i64 - (*r as i64 + 1))
            }
        }
        Expr::Z3CoverSum => match w.bits().iter().position(|&b| b) {
            None => ExactRational::from_integer(w.len() as i64 + 1),
            Some(p) => ExactRational::from_integer(p as i64),
        },
        Expr::Dynamic(node) => {
            return Err(Error::InexactNode { node: node.kind() });
        }
    };
    s.memo.insert(key, val.clone());
    Ok(val)
}

/// Positive-measure cylinder split, plus side:
/// `d(w) ν(w|v)` below the pivot, `d(v)` at and beyond it, 0 off it.
fn split_plus_value(
    cw: &BitString,
    inner: &Arc<Expr>,
    s: &mut EvalSession,
    v: &BitString,
) -> Result<ExactRational> {
    if s.measure.is_zero_at(cw)? {
        return Err(Error::Precondition(format!(
            "positive-measure cylinder split at {cw}, which has measure zero"
        )));
    }
    if cw.is_prefix_of(v) {
        eval_expr(inner, s, v)
    } else if v.is_prefix_of(cw) {
        let at_pivot = eval_expr(inner, s, cw)?;
        Ok(&at_pivot * &s.measure.conditional(cw, v)?)
    } else {
        Ok(ExactRational::zero())
    }
}

/// Approximate evaluation with total error at most `2^{-t}`, splitting the
/// budget across sums and rescaling it through scalar factors.
fn eval_expr_within(
    expr: &Arc<Expr>,
    s: &mut EvalSession,
    w: &BitString,
    t: u32,
) -> Result<ExactRational> {
    let mut seen = HashMap::new();
    if is_exact(expr, &mut seen) {
        return eval_expr(expr, s, w);
    }
    match &**expr {
        Expr::Sum(a, b) => {
            Ok(&eval_expr_within(a, s, w, t + 1)? + &eval_expr_within(b, s, w, t + 1)?)
        }
        Expr::Scale(c, inner) => {
            let mut extra = 0u32;
            let mut bound = ExactRational::one();
            while *c > bound {
                bound = &bound + &bound;
                extra += 1;
            }
            Ok(c * &eval_expr_within(inner, s, w, t + extra)?)
        }
        Expr::Dynamic(node) => node.eval_within(w, t),
        other => Err(Error::InexactNode { node: other.kind() }),
    }
}

/// A martingale: an expression tree paired with the measure it bets
/// against.
#[derive(Clone)]
pub struct Martingale {
    expr: Arc<Expr>,
    measure: ProbMeasure,
    exact: bool,
}

impl fmt::Debug for Martingale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Martingale({:?})", self.expr)
    }
}

impl Martingale {
    pub(crate) fn from_parts(expr: Arc<Expr>, measure: ProbMeasure) -> Self {
        let exact = is_exact(&expr, &mut HashMap::new());
        Martingale {
            expr,
            measure,
            exact,
        }
    }

    pub(crate) fn expr(&self) -> &Arc<Expr> {
        &self.expr
    }

    /// The constant-1 martingale.
    pub fn unit(measure: &ProbMeasure) -> Self {
        Self::from_parts(Arc::new(Expr::Unit), measure.clone())
    }

    /// The constant-0 martingale.
    pub fn zero(measure: &ProbMeasure) -> Self {
        Self::from_parts(
            Arc::new(Expr::Scale(ExactRational::zero(), Arc::new(Expr::Unit))),
            measure.clone(),
        )
    }

    /// Finite table with constant continuation beyond its depth. Requires a
    /// nonnegative entry for every string of length at most `depth`; the
    /// fairness identity is the author's responsibility and is checked by
    /// [`verify_martingale`], so invalid tables are representable.
    pub fn table(
        measure: &ProbMeasure,
        depth: usize,
        values: BTreeMap<BitString, ExactRational>,
    ) -> Result<Self> {
        for w in BitString::all_up_to(depth) {
            match values.get(&w) {
                None => return Err(Error::MissingTableEntry { w: w.to_string() }),
                Some(v) => v.require_nonnegative()?,
            }
        }
        Ok(Self::from_parts(
            Arc::new(Expr::Table(TableMartingale { depth, values })),
            measure.clone(),
        ))
    }

    /// `c * d` for a nonnegative scalar.
    pub fn scale(c: &ExactRational, d: &Martingale) -> Result<Self> {
        c.require_nonnegative()?;
        Ok(Self::from_parts(
            Arc::new(Expr::Scale(c.clone(), d.expr.clone())),
            d.measure.clone(),
        ))
    }

    /// Pointwise sum; both operands must live over the same measure.
    pub fn add(a: &Martingale, b: &Martingale) -> Result<Self> {
        if a.measure != b.measure {
            return Err(Error::MeasureMismatch);
        }
        Ok(Self::from_parts(
            Arc::new(Expr::Sum(a.expr.clone(), b.expr.clone())),
            a.measure.clone(),
        ))
    }

    /// Sums a nonempty list of martingales over a common measure.
    pub fn sum(parts: &[Martingale]) -> Result<Self> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Precondition("sum of an empty list".to_string()))?;
        let mut acc = first.clone();
        for p in rest {
            acc = Self::add(&acc, p)?;
        }
        Ok(acc)
    }

    /// The canonical martingale succeeding on the cylinders of a prefix
    /// set: `d(w) = Σ_{u in A} ν(u|w)`, set to 1 on zero-measure strings.
    /// Its initial value is the total measure of the set.
    pub fn from_prefix_set(set: PrefixSet, measure: &ProbMeasure) -> Self {
        Self::from_parts(Arc::new(Expr::FromPrefixSet(set)), measure.clone())
    }

    /// The ladder martingale with initial capital `2^{-(r+1)}` that doubles
    /// along the all-zeros branch and holds 1 from depth `r+1` on. Uniform
    /// measure only; its unitary success set is the cylinder at `0^{r+1}`.
    pub fn z3_ladder(r: u32) -> Self {
        Self::from_parts(Arc::new(Expr::Z3Ladder { r }), ProbMeasure::uniform())
    }

    /// Exact sum of the whole ladder family. Initial value 1; value `n+1`
    /// after `n` zeros; constant after the first 1.
    pub fn z3_cover_sum() -> Self {
        Self::from_parts(Arc::new(Expr::Z3CoverSum), ProbMeasure::uniform())
    }

    /// 0/1 indicator of the cylinder at `w`; a martingale exactly when
    /// `ν(w) = 0`.
    pub(crate) fn cylinder_indicator(w: &BitString, measure: &ProbMeasure) -> Self {
        Self::from_parts(Arc::new(Expr::CylinderIndicator(w.clone())), measure.clone())
    }

    pub(crate) fn split_plus(w: &BitString, inner: &Martingale) -> Result<Self> {
        inner.require_exact("cylinder split")?;
        Ok(Self::from_parts(
            Arc::new(Expr::CylinderSplitPlus {
                w: w.clone(),
                inner: inner.expr.clone(),
            }),
            inner.measure.clone(),
        ))
    }

    pub(crate) fn split_minus(w: &BitString, inner: &Martingale) -> Result<Self> {
        inner.require_exact("cylinder split")?;
        Ok(Self::from_parts(
            Arc::new(Expr::CylinderSplitMinus {
                w: w.clone(),
                inner: inner.expr.clone(),
            }),
            inner.measure.clone(),
        ))
    }

    /// Robin Hood regularization: a regular martingale with the same
    /// initial value whose unitary success set contains the operand's.
    pub fn regularize(&self) -> Result<Self> {
        self.require_exact("regularization")?;
        Ok(Self::from_parts(
            Arc::new(Expr::Regularized(self.expr.clone())),
            self.measure.clone(),
        ))
    }

    pub(crate) fn zero_one(data: ZeroOneData, measure: &ProbMeasure) -> Self {
        Self::from_parts(Arc::new(Expr::ZeroOne(data)), measure.clone())
    }

    pub(crate) fn dynamic(node: Arc<dyn DynamicMartingale>, measure: &ProbMeasure) -> Self {
        Self::from_parts(Arc::new(Expr::Dynamic(node)), measure.clone())
    }

    pub fn measure(&self) -> &ProbMeasure {
        &self.measure
    }

    /// Whether every node evaluates exactly.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    fn require_exact(&self, what: &str) -> Result<()> {
        if self.exact {
            Ok(())
        } else {
            Err(Error::InexactNode {
                node: format!("{what} requires an exact operand, got {:?}", self.expr),
            })
        }
    }

    /// Evaluate at `w`: exact when the tree is exact, otherwise a dyadic
    /// approximation with error strictly below `2^{-r}`.
    pub fn evaluate(&self, w: &BitString, r: u32) -> Result<Value> {
        if self.exact {
            Ok(Value::Exact(self.eval_exact(w)?))
        } else {
            let est = self.eval_within(w, r + 2)?;
            Ok(Value::Approx(dyadic_round(&est, r)?))
        }
    }

    /// Exact value at `w`. Fails on trees with approximate nodes.
    pub fn eval_exact(&self, w: &BitString) -> Result<ExactRational> {
        let mut s = EvalSession::new(&self.measure);
        self.eval_exact_with(&mut s, w)
    }

    /// Exact value using a shared session for cross-martingale memoization.
    pub fn eval_exact_with(&self, s: &mut EvalSession, w: &BitString) -> Result<ExactRational> {
        if self.measure != s.measure {
            return Err(Error::MeasureMismatch);
        }
        eval_expr(&self.expr, s, w)
    }

    /// Rational estimate with error at most `2^{-t}`; exact subtrees
    /// contribute no error.
    pub fn eval_within(&self, w: &BitString, t: u32) -> Result<ExactRational> {
        let mut s = EvalSession::new(&self.measure);
        eval_expr_within(&self.expr, &mut s, w, t)
    }

    /// `d(λ)`, the initial capital.
    pub fn initial_value(&self) -> Result<ExactRational> {
        self.eval_exact(&BitString::empty())
    }

    /// Replaces approximate nodes by their exact stand-ins at precision
    /// `t`, when they have one.
    pub fn resolve_exact(&self, t: u32) -> Result<Martingale> {
        if self.exact {
            return Ok(self.clone());
        }
        let expr = resolve_expr(&self.expr, &self.measure, t)?;
        Ok(Self::from_parts(expr, self.measure.clone()))
    }
}

fn resolve_expr(expr: &Arc<Expr>, measure: &ProbMeasure, t: u32) -> Result<Arc<Expr>> {
    if is_exact(expr, &mut HashMap::new()) {
        return Ok(expr.clone());
    }
    match &**expr {
        Expr::Sum(a, b) => Ok(Arc::new(Expr::Sum(
            resolve_expr(a, measure, t)?,
            resolve_expr(b, measure, t)?,
        ))),
        Expr::Scale(c, inner) => Ok(Arc::new(Expr::Scale(
            c.clone(),
            resolve_expr(inner, measure, t)?,
        ))),
        Expr::Dynamic(node) => {
            let resolved = node.resolve_exact(t)?.ok_or(Error::InexactNode {
                node: node.kind(),
            })?;
            if resolved.measure != *measure {
                return Err(Error::MeasureMismatch);
            }
            Ok(resolved.expr.clone())
        }
        other => Err(Error::InexactNode { node: other.kind() }),
    }
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

    pub(crate) fn table_from(
        measure: &ProbMeasure,
        depth: usize,
        entries: &[(&str, &str)],
    ) -> Martingale {
        let values: BTreeMap<BitString, ExactRational> = entries
            .iter()
            .map(|(w, v)| (bs(w), rat(v)))
            .collect();
        Martingale::table(measure, depth, values).unwrap()
    }

    #[test]
    fn unit_is_constant_one() {
        let mu = ProbMeasure::uniform();
        let d = Martingale::unit(&mu);
        for w in BitString::all_up_to(5) {
            assert_eq!(d.eval_exact(&w).unwrap(), rat("1"));
        }
        assert!(d.is_exact());
    }

    #[test]
    fn table_constant_continuation() {
        let mu = ProbMeasure::uniform();
        let d = table_from(&mu, 1, &[("", "1"), ("0", "3/2"), ("1", "1/2")]);
        assert_eq!(d.eval_exact(&bs("0")).unwrap(), rat("3/2"));
        assert_eq!(d.eval_exact(&bs("0110")).unwrap(), rat("3/2"));
        assert_eq!(d.eval_exact(&bs("11")).unwrap(), rat("1/2"));
    }

    #[test]
    fn scale_and_sum_are_pointwise() {
        let mu = ProbMeasure::uniform();
        let d = table_from(&mu, 1, &[("", "1"), ("0", "2"), ("1", "0")]);
        let e = Martingale::unit(&mu);
        let s = Martingale::add(&d, &e).unwrap();
        assert_eq!(s.eval_exact(&bs("0")).unwrap(), rat("3"));
        let scaled = Martingale::scale(&rat("1/4"), &s).unwrap();
        assert_eq!(scaled.eval_exact(&bs("0")).unwrap(), rat("3/4"));
        assert!(Martingale::scale(&rat("-1"), &s).is_err());
    }

    #[test]
    fn sum_requires_matching_measures() {
        let mu = ProbMeasure::uniform();
        let nu = ProbMeasure::bernoulli(rat("1/4")).unwrap();
        let err = Martingale::add(&Martingale::unit(&mu), &Martingale::unit(&nu)).unwrap_err();
        assert!(matches!(err, Error::MeasureMismatch));
    }

    #[test]
    fn prefix_set_hitter_values() {
        let mu = ProbMeasure::uniform();
        let d = Martingale::from_prefix_set(PrefixSet::new([bs("0")]).unwrap(), &mu);
        assert_eq!(d.initial_value().unwrap(), rat("1/2"));
        assert_eq!(d.eval_exact(&bs("0")).unwrap(), rat("1"));
        assert_eq!(d.eval_exact(&bs("00")).unwrap(), rat("1"));
        assert_eq!(d.eval_exact(&bs("1")).unwrap(), rat("0"));
    }

    #[test]
    fn ladder_values() {
        let d = Martingale::z3_ladder(1);
        assert_eq!(d.initial_value().unwrap(), rat("1/4"));
        assert_eq!(d.eval_exact(&bs("0")).unwrap(), rat("1/2"));
        assert_eq!(d.eval_exact(&bs("00")).unwrap(), rat("1"));
        assert_eq!(d.eval_exact(&bs("000")).unwrap(), rat("1"));
        assert_eq!(d.eval_exact(&bs("001")).unwrap(), rat("1"));
        assert_eq!(d.eval_exact(&bs("01")).unwrap(), rat("0"));
        assert_eq!(d.eval_exact(&bs("1")).unwrap(), rat("0"));
    }

    #[test]
    fn ladder_cover_sum_closed_form() {
        let d = Martingale::z3_cover_sum();
        assert_eq!(d.initial_value().unwrap(), rat("1"));
        for n in 0..=10usize {
            let w = BitString::repeated(false, n);
            assert_eq!(
                d.eval_exact(&w).unwrap(),
                ExactRational::from_integer(n as i64 + 1)
            );
        }
        assert_eq!(d.eval_exact(&bs("1")).unwrap(), rat("0"));
        assert_eq!(d.eval_exact(&bs("0001")).unwrap(), rat("3"));
        assert_eq!(d.eval_exact(&bs("00010110")).unwrap(), rat("3"));
    }

    #[test]
    fn evaluate_wraps_exactness() {
        let mu = ProbMeasure::uniform();
        let d = Martingale::unit(&mu);
        match d.evaluate(&bs("0101"), 10).unwrap() {
            Value::Exact(x) => assert_eq!(x, rat("1")),
            Value::Approx(_) => panic!("unit is exact"),
        }
    }

    #[test]
    fn shared_session_reuses_values() {
        let mu = ProbMeasure::uniform();
        let d = table_from(&mu, 1, &[("", "1"), ("0", "2"), ("1", "0")]);
        let sum = Martingale::add(&d, &d).unwrap();
        let mut s = EvalSession::new(&mu);
        assert_eq!(sum.eval_exact_with(&mut s, &bs("0")).unwrap(), rat("4"));
        assert_eq!(d.eval_exact_with(&mut s, &bs("0")).unwrap(), rat("2"));
    }
}

#[cfg(test)]
pub(crate) use tests::table_from;
