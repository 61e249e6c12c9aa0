//! Declarative JSON dialect wiring measures, martingales, and measurement
//! operators into a named DAG, plus an ordered command list driving
//! evaluations, estimates, and verification runs.
//!
//! A document is plain data. [`Pipeline::build`] resolves every reference
//! eagerly, rejecting unknown names and cycles, so a loaded pipeline
//! answers queries without further validation. Execution is pure and
//! carries no wall-clock data: identical documents give identical reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cantor::{BitString, ClopenSet, PrefixSet};
use crate::diagonal::{conserve_constructor, two_sum_bound, zero_one_context, zero_one_transform};
use crate::harness::{run_suite, SuiteConfig, VerifyReport, SCHEMA};
use crate::martingale::{regularity_report, verify_martingale, Martingale, Value};
use crate::measure::{validate_table_measure, ProbMeasure};
use crate::numerics::ExactRational;
use crate::splitting::{
    clopen_measurement, combine_pair, complement, completeness_measurement, cylinder_measurement,
    measurement_to_nullcover, null_cover_to_strong, null_sequence_union, sequence_union,
    success_to_measurement, z3_cover, MeasureEstimate, ModulatedFamily, SplittingOp,
};
use crate::{Error, Result};

/// A pipeline document: three named sections and the commands to run
/// against them. Section values may reference entries of any section by
/// name; the reference graph must be acyclic.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDoc {
    /// Must equal [`SCHEMA`].
    pub schema: String,
    #[serde(default)]
    pub measures: BTreeMap<String, ProbMeasure>,
    #[serde(default)]
    pub martingales: BTreeMap<String, MartingaleSpec>,
    #[serde(default)]
    pub operators: BTreeMap<String, OperatorSpec>,
    #[serde(default)]
    pub commands: Vec<Command>,
}

impl PipelineDoc {
    pub fn from_json(text: &str) -> Result<PipelineDoc> {
        Ok(serde_json::from_str(text)?)
    }

    /// An empty document under the current schema.
    pub fn empty() -> PipelineDoc {
        PipelineDoc {
            schema: SCHEMA.to_string(),
            measures: BTreeMap::new(),
            martingales: BTreeMap::new(),
            operators: BTreeMap::new(),
            commands: Vec::new(),
        }
    }
}

/// Which half of a splitting operator's output to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

/// Martingale constructors available to documents.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MartingaleSpec {
    Unit { measure: String },
    Zero { measure: String },
    /// Explicit values for every string up to `depth`.
    Table {
        measure: String,
        depth: usize,
        values: BTreeMap<BitString, ExactRational>,
    },
    Scale { by: ExactRational, of: String },
    Sum { of: Vec<String> },
    /// Capital doubling toward a prefix-free target set.
    FromPrefixSet { measure: String, members: PrefixSet },
    /// Member `index` of the zero-tail cover: starts at `2^{-(index+1)}`
    /// and doubles along zeros.
    Z3Ladder { index: u32 },
    /// The summed zero-tail cover as one martingale.
    Z3CoverSum,
    /// Strong-success form of the zero-tail cover.
    Z3StrongCover,
    /// Strong-success cover recovered from a null measurement.
    StrongCoverFromMeasurement { operator: String },
    Regularized { of: String },
    /// Block transform rewiring heavy depth-`block` subtrees through a
    /// light leaf.
    ZeroOne { of: String, block: usize },
    /// One half of a splitting operator applied to a martingale.
    Apply {
        operator: String,
        to: String,
        precision: u32,
        side: Side,
    },
}

/// Which output of a combined pair to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    First,
    Second,
    Intersection,
    Union,
}

/// Measurement-operator constructors available to documents.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Cylinder { measure: String, prefix: BitString },
    Clopen {
        measure: String,
        depth: usize,
        selected: Vec<BitString>,
    },
    Complement { of: String },
    Combine {
        first: String,
        second: String,
        keep: Keep,
    },
    Completeness { of: String },
    /// Measurement of a martingale's unitary success set.
    SuccessMeasurement { of: String },
    /// Union of the built-in disjoint cylinder family at `0^k 1`.
    TailsUnion,
    /// Union of finitely many null measurements, certified null.
    NullUnion { of: Vec<String> },
}

/// One action against the built sections. String positions default to the
/// empty string when omitted.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Eval {
        martingale: String,
        #[serde(default)]
        at: Option<BitString>,
        #[serde(default)]
        precision: Option<u32>,
    },
    Measure { operator: String, precision: u32 },
    Split {
        operator: String,
        to: String,
        precision: u32,
        #[serde(default)]
        at: Option<BitString>,
    },
    Regularize { martingale: String, depth: usize },
    Diagonalize {
        martingale: String,
        #[serde(default)]
        cylinder: Option<BitString>,
        steps: usize,
    },
    ZeroOne {
        martingale: String,
        block: usize,
        depth: usize,
    },
    Verify {
        #[serde(default)]
        config: SuiteConfig,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub prefix: BitString,
    pub value: ExactRational,
}

/// Result of one command, all numerics exact or precision-tagged.
#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandOutput {
    Eval {
        martingale: String,
        at: BitString,
        value: Value,
    },
    Measure {
        operator: String,
        precision: u32,
        estimate: MeasureEstimate,
    },
    Split {
        operator: String,
        to: String,
        at: BitString,
        precision: u32,
        plus: Value,
        minus: Value,
    },
    Regularize {
        martingale: String,
        depth: usize,
        initial: ExactRational,
        regular: bool,
    },
    Diagonalize {
        martingale: String,
        block: usize,
        prefix: BitString,
        trace: Vec<TraceRow>,
    },
    ZeroOne {
        martingale: String,
        block: usize,
        depth: usize,
        initial: ExactRational,
        bound: ExactRational,
        valid: bool,
    },
    Verify { report: VerifyReport },
}

impl CommandOutput {
    /// Whether the command's embedded verdict, if any, came out clean.
    pub fn passed(&self) -> bool {
        match self {
            CommandOutput::Eval { .. }
            | CommandOutput::Split { .. }
            | CommandOutput::Diagonalize { .. } => true,
            CommandOutput::Measure { estimate, .. } => estimate.agrees,
            CommandOutput::Regularize { regular, .. } => *regular,
            CommandOutput::ZeroOne { valid, .. } => *valid,
            CommandOutput::Verify { report } => report.passed(),
        }
    }

    /// Human-readable rendering, one block per command.
    pub fn text(&self) -> String {
        match self {
            CommandOutput::Eval { martingale, at, value } => {
                format!("eval {martingale} at {at}: {value}")
            }
            CommandOutput::Measure {
                operator,
                precision,
                estimate,
            } => format!(
                "measure {operator} at precision {precision}: [{}, {}] complementary gap {}{}",
                estimate.lo,
                estimate.hi,
                estimate.complementary_gap,
                if estimate.agrees { "" } else { " (DISAGREES)" },
            ),
            CommandOutput::Split {
                operator,
                to,
                at,
                precision,
                plus,
                minus,
            } => format!(
                "split {operator} of {to} at {at}, precision {precision}: plus {plus}, minus {minus}"
            ),
            CommandOutput::Regularize {
                martingale,
                depth,
                initial,
                regular,
            } => format!(
                "regularize {martingale}: initial {initial}, depth {depth} {}",
                if *regular { "regular" } else { "NOT regular" },
            ),
            CommandOutput::Diagonalize {
                martingale,
                block,
                prefix,
                trace,
            } => {
                let mut s = format!(
                    "diagonalize {martingale}: block {block}, reached {prefix}\n"
                );
                for row in trace {
                    s.push_str(&format!("  {} {}\n", row.prefix, row.value));
                }
                s.pop();
                s
            }
            CommandOutput::ZeroOne {
                martingale,
                block,
                depth,
                initial,
                bound,
                valid,
            } => format!(
                "zero-one {martingale} at block {block}: initial {initial}, bound {bound}, depth {depth} {}",
                if *valid { "valid" } else { "INVALID" },
            ),
            CommandOutput::Verify { report } => report.text_summary(),
        }
    }
}

/// Outputs of a full document run.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub results: Vec<CommandOutput>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(CommandOutput::passed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn text_summary(&self) -> String {
        let mut s = String::new();
        for out in &self.results {
            s.push_str(&out.text());
            s.push('\n');
        }
        s
    }
}

/// Fully resolved sections of a document.
pub struct Pipeline {
    measures: BTreeMap<String, ProbMeasure>,
    martingales: BTreeMap<String, Martingale>,
    operators: BTreeMap<String, SplittingOp>,
}

impl Pipeline {
    /// Resolves every named entry, failing on schema mismatch, unknown
    /// names, invalid constructions, or reference cycles.
    pub fn build(doc: &PipelineDoc) -> Result<Pipeline> {
        if doc.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                doc.schema
            )));
        }
        let mut b = Builder {
            doc,
            measures: BTreeMap::new(),
            martingales: BTreeMap::new(),
            operators: BTreeMap::new(),
            in_progress: BTreeSet::new(),
        };
        for name in doc.measures.keys() {
            b.measure(name)?;
        }
        for name in doc.martingales.keys() {
            b.martingale(name)?;
        }
        for name in doc.operators.keys() {
            b.operator(name)?;
        }
        Ok(Pipeline {
            measures: b.measures,
            martingales: b.martingales,
            operators: b.operators,
        })
    }

    pub fn measure(&self, name: &str) -> Result<&ProbMeasure> {
        self.measures.get(name).ok_or_else(|| Error::UnknownName {
            section: "measures",
            name: name.to_string(),
        })
    }

    pub fn martingale(&self, name: &str) -> Result<&Martingale> {
        self.martingales.get(name).ok_or_else(|| Error::UnknownName {
            section: "martingales",
            name: name.to_string(),
        })
    }

    pub fn operator(&self, name: &str) -> Result<&SplittingOp> {
        self.operators.get(name).ok_or_else(|| Error::UnknownName {
            section: "operators",
            name: name.to_string(),
        })
    }

    /// Runs one command against the built sections.
    pub fn run(&self, cmd: &Command) -> Result<CommandOutput> {
        match cmd {
            Command::Eval {
                martingale,
                at,
                precision,
            } => {
                let d = self.martingale(martingale)?;
                let at = at.clone().unwrap_or_else(BitString::empty);
                let value = match precision {
                    Some(r) => d.evaluate(&at, *r)?,
                    None if d.is_exact() => Value::Exact(d.eval_exact(&at)?),
                    None => {
                        return Err(Error::Config(format!(
                            "martingale {martingale:?} is approximate; give a precision"
                        )))
                    }
                };
                Ok(CommandOutput::Eval {
                    martingale: martingale.clone(),
                    at,
                    value,
                })
            }
            Command::Measure {
                operator,
                precision,
            } => Ok(CommandOutput::Measure {
                operator: operator.clone(),
                precision: *precision,
                estimate: self.operator(operator)?.estimate(*precision)?,
            }),
            Command::Split {
                operator,
                to,
                precision,
                at,
            } => {
                let op = self.operator(operator)?;
                let d = self.martingale(to)?;
                let at = at.clone().unwrap_or_else(BitString::empty);
                let (plus, minus) = op.apply(*precision, d)?;
                Ok(CommandOutput::Split {
                    operator: operator.clone(),
                    to: to.clone(),
                    at: at.clone(),
                    precision: *precision,
                    plus: plus.evaluate(&at, *precision)?,
                    minus: minus.evaluate(&at, *precision)?,
                })
            }
            Command::Regularize { martingale, depth } => {
                let reg = self.martingale(martingale)?.regularize()?;
                let report = regularity_report(&reg, *depth)?;
                Ok(CommandOutput::Regularize {
                    martingale: martingale.clone(),
                    depth: *depth,
                    initial: reg.eval_exact(&BitString::empty())?,
                    regular: report.is_regular(),
                })
            }
            Command::Diagonalize {
                martingale,
                cylinder,
                steps,
            } => {
                let d = self.martingale(martingale)?;
                let w = cylinder.clone().unwrap_or_else(BitString::empty);
                let run = conserve_constructor(d, d.measure(), &w, *steps)?;
                Ok(CommandOutput::Diagonalize {
                    martingale: martingale.clone(),
                    block: run.m,
                    prefix: run.prefix,
                    trace: run
                        .trace
                        .into_iter()
                        .map(|(prefix, value)| TraceRow { prefix, value })
                        .collect(),
                })
            }
            Command::ZeroOne {
                martingale,
                block,
                depth,
            } => {
                let d = self.martingale(martingale)?;
                let nu = d.measure().clone();
                let ctx = zero_one_context(d, *block)?;
                let bound = two_sum_bound(d, &nu, &ctx)?;
                let transformed = zero_one_transform(d, &nu, *block)?;
                let initial = transformed.eval_exact(&BitString::empty())?;
                let identity_ok = verify_martingale(&transformed, &nu, *depth)?.is_valid();
                let valid = identity_ok && initial <= bound;
                Ok(CommandOutput::ZeroOne {
                    martingale: martingale.clone(),
                    block: *block,
                    depth: *depth,
                    initial,
                    bound,
                    valid,
                })
            }
            Command::Verify { config } => Ok(CommandOutput::Verify {
                report: run_suite(config)?,
            }),
        }
    }
}

/// Parses and runs a whole document.
pub fn run_doc(doc: &PipelineDoc) -> Result<RunReport> {
    let pipeline = Pipeline::build(doc)?;
    let mut results = Vec::with_capacity(doc.commands.len());
    for cmd in &doc.commands {
        results.push(pipeline.run(cmd)?);
    }
    Ok(RunReport {
        schema: SCHEMA,
        results,
    })
}

struct Builder<'a> {
    doc: &'a PipelineDoc,
    measures: BTreeMap<String, ProbMeasure>,
    martingales: BTreeMap<String, Martingale>,
    operators: BTreeMap<String, SplittingOp>,
    /// (section, name) pairs currently being resolved; re-entry is a cycle.
    in_progress: BTreeSet<(&'static str, String)>,
}

impl<'a> Builder<'a> {
    fn enter(&mut self, section: &'static str, name: &str) -> Result<()> {
        if !self.in_progress.insert((section, name.to_string())) {
            return Err(Error::CyclicReference {
                name: format!("{section}/{name}"),
            });
        }
        Ok(())
    }

    fn leave(&mut self, section: &'static str, name: &str) {
        self.in_progress.remove(&(section, name.to_string()));
    }

    fn measure(&mut self, name: &str) -> Result<ProbMeasure> {
        if let Some(m) = self.measures.get(name) {
            return Ok(m.clone());
        }
        let doc = self.doc;
        let spec = doc.measures.get(name).ok_or_else(|| Error::UnknownName {
            section: "measures",
            name: name.to_string(),
        })?;
        // Wire values bypass the checked constructors, so rebuild through
        // them to enforce bias ranges and table additivity.
        let built = match spec {
            ProbMeasure::Uniform => ProbMeasure::uniform(),
            ProbMeasure::CoinToss { biases, tail } => {
                ProbMeasure::coin_toss(biases.clone(), tail.clone())?
            }
            ProbMeasure::Table {
                depth,
                values,
                extension,
            } => {
                let m = ProbMeasure::table(*depth, values.clone(), *extension)?;
                let report = validate_table_measure(&m)?;
                if !report.is_valid() {
                    return Err(Error::Config(format!(
                        "measure {name:?} breaks additivity at {} strings",
                        report.violations.len()
                    )));
                }
                m
            }
        };
        self.measures.insert(name.to_string(), built.clone());
        Ok(built)
    }

    fn martingale(&mut self, name: &str) -> Result<Martingale> {
        if let Some(d) = self.martingales.get(name) {
            return Ok(d.clone());
        }
        let doc = self.doc;
        let spec = doc
            .martingales
            .get(name)
            .ok_or_else(|| Error::UnknownName {
                section: "martingales",
                name: name.to_string(),
            })?;
        self.enter("martingales", name)?;
        let built = self.build_martingale(spec);
        self.leave("martingales", name);
        let built = built?;
        self.martingales.insert(name.to_string(), built.clone());
        Ok(built)
    }

    fn build_martingale(&mut self, spec: &MartingaleSpec) -> Result<Martingale> {
        Ok(match spec {
            MartingaleSpec::Unit { measure } => Martingale::unit(&self.measure(measure)?),
            MartingaleSpec::Zero { measure } => Martingale::zero(&self.measure(measure)?),
            MartingaleSpec::Table {
                measure,
                depth,
                values,
            } => Martingale::table(&self.measure(measure)?, *depth, values.clone())?,
            MartingaleSpec::Scale { by, of } => Martingale::scale(by, &self.martingale(of)?)?,
            MartingaleSpec::Sum { of } => {
                let parts = of
                    .iter()
                    .map(|n| self.martingale(n))
                    .collect::<Result<Vec<_>>>()?;
                Martingale::sum(&parts)?
            }
            MartingaleSpec::FromPrefixSet { measure, members } => {
                Martingale::from_prefix_set(members.clone(), &self.measure(measure)?)
            }
            MartingaleSpec::Z3Ladder { index } => Martingale::z3_ladder(*index),
            MartingaleSpec::Z3CoverSum => Martingale::z3_cover_sum(),
            MartingaleSpec::Z3StrongCover => {
                null_cover_to_strong(&z3_cover(), &ProbMeasure::uniform())?
            }
            MartingaleSpec::StrongCoverFromMeasurement { operator } => {
                let op = self.operator(operator)?;
                let cover = measurement_to_nullcover(&op)?;
                null_cover_to_strong(&cover, op.measure())?
            }
            MartingaleSpec::Regularized { of } => self.martingale(of)?.regularize()?,
            MartingaleSpec::ZeroOne { of, block } => {
                let d = self.martingale(of)?;
                let nu = d.measure().clone();
                zero_one_transform(&d, &nu, *block)?
            }
            MartingaleSpec::Apply {
                operator,
                to,
                precision,
                side,
            } => {
                let op = self.operator(operator)?;
                let d = self.martingale(to)?;
                let (plus, minus) = op.apply(*precision, &d)?;
                match side {
                    Side::Plus => plus,
                    Side::Minus => minus,
                }
            }
        })
    }

    fn operator(&mut self, name: &str) -> Result<SplittingOp> {
        if let Some(op) = self.operators.get(name) {
            return Ok(op.clone());
        }
        let doc = self.doc;
        let spec = doc.operators.get(name).ok_or_else(|| Error::UnknownName {
            section: "operators",
            name: name.to_string(),
        })?;
        self.enter("operators", name)?;
        let built = self.build_operator(spec);
        self.leave("operators", name);
        let built = built?;
        self.operators.insert(name.to_string(), built.clone());
        Ok(built)
    }

    fn build_operator(&mut self, spec: &OperatorSpec) -> Result<SplittingOp> {
        Ok(match spec {
            OperatorSpec::Cylinder { measure, prefix } => {
                cylinder_measurement(prefix, &self.measure(measure)?)?
            }
            OperatorSpec::Clopen {
                measure,
                depth,
                selected,
            } => {
                let set = ClopenSet::new(*depth, selected.iter().cloned())?;
                clopen_measurement(&set, &self.measure(measure)?)?
            }
            OperatorSpec::Complement { of } => complement(&self.operator(of)?),
            OperatorSpec::Combine {
                first,
                second,
                keep,
            } => {
                let pair = combine_pair(&self.operator(first)?, &self.operator(second)?)?;
                match keep {
                    Keep::First => pair.x,
                    Keep::Second => pair.y,
                    Keep::Intersection => pair.intersection,
                    Keep::Union => pair.union,
                }
            }
            OperatorSpec::Completeness { of } => completeness_measurement(&self.operator(of)?)?,
            OperatorSpec::SuccessMeasurement { of } => {
                success_to_measurement(&self.martingale(of)?)?
            }
            OperatorSpec::TailsUnion => sequence_union(&ModulatedFamily::disjoint_tails())?,
            OperatorSpec::NullUnion { of } => {
                let members = of
                    .iter()
                    .map(|n| self.operator(n))
                    .collect::<Result<Vec<_>>>()?;
                let first = members.first().ok_or_else(|| {
                    Error::Config("null_union needs at least one member".into())
                })?;
                let nu = first.measure().clone();
                let fam = null_sequence_union(&members, &nu)?;
                sequence_union(&fam)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_doc() -> PipelineDoc {
        let text = r#"{
            "schema": "rbmeasure/1",
            "measures": {
                "mu": { "kind": "uniform" },
                "quarter": { "kind": "coin_toss", "biases": [], "tail": "1/4" }
            },
            "martingales": {
                "half": {
                    "from_prefix_set": { "measure": "mu", "members": ["0"] }
                },
                "one": { "unit": { "measure": "mu" } },
                "lad": { "z3_ladder": { "index": 1 } },
                "smooth": { "regularized": { "of": "half" } },
                "plus-half": {
                    "apply": {
                        "operator": "c0", "to": "one",
                        "precision": 6, "side": "plus"
                    }
                }
            },
            "operators": {
                "c0": { "cylinder": { "measure": "mu", "prefix": "0" } },
                "c01": { "cylinder": { "measure": "mu", "prefix": "01" } },
                "not01": { "complement": { "of": "c01" } },
                "both": {
                    "combine": { "first": "c0", "second": "c01", "keep": "union" }
                }
            },
            "commands": [
                { "eval": { "martingale": "half" } },
                { "eval": { "martingale": "lad", "at": "00" } },
                { "measure": { "operator": "c01", "precision": 10 } },
                { "split": { "operator": "c0", "to": "one", "precision": 6 } }
            ]
        }"#;
        PipelineDoc::from_json(text).unwrap()
    }

    #[test]
    fn sample_doc_builds_and_runs() {
        let doc = sample_doc();
        let report = run_doc(&doc).unwrap();
        assert!(report.passed());
        assert_eq!(report.results.len(), 4);
        match &report.results[0] {
            CommandOutput::Eval { value, .. } => {
                assert_eq!(value.as_rational(), ExactRational::new(1, 2).unwrap());
            }
            other => panic!("unexpected output {other:?}"),
        }
        match &report.results[1] {
            CommandOutput::Eval { value, .. } => {
                assert_eq!(value.as_rational(), ExactRational::one());
            }
            other => panic!("unexpected output {other:?}"),
        }
        match &report.results[2] {
            CommandOutput::Measure { estimate, .. } => {
                assert_eq!(estimate.hi, ExactRational::new(1, 4).unwrap());
                assert_eq!(estimate.lo, ExactRational::new(255, 1024).unwrap());
                assert!(estimate.agrees);
            }
            other => panic!("unexpected output {other:?}"),
        }
        match &report.results[3] {
            CommandOutput::Split { plus, minus, .. } => {
                assert_eq!(plus.as_rational(), ExactRational::new(1, 2).unwrap());
                assert_eq!(minus.as_rational(), ExactRational::new(1, 2).unwrap());
            }
            other => panic!("unexpected output {other:?}"),
        }
    }

    #[test]
    fn runs_are_byte_identical() {
        let doc = sample_doc();
        let a = run_doc(&doc).unwrap().to_json().unwrap();
        let b = run_doc(&doc).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_names_carry_their_section() {
        let mut doc = PipelineDoc::empty();
        doc.martingales.insert(
            "d".into(),
            MartingaleSpec::Unit {
                measure: "nope".into(),
            },
        );
        match Pipeline::build(&doc) {
            Err(Error::UnknownName { section, name }) => {
                assert_eq!(section, "measures");
                assert_eq!(name, "nope");
            }
            Err(e) => panic!("expected unknown name, got {e}"),
            Ok(_) => panic!("expected unknown name, got a built pipeline"),
        }
    }

    #[test]
    fn cycles_are_rejected_across_sections() {
        let mut doc = PipelineDoc::empty();
        doc.operators.insert(
            "s".into(),
            OperatorSpec::SuccessMeasurement { of: "d".into() },
        );
        doc.martingales.insert(
            "d".into(),
            MartingaleSpec::Apply {
                operator: "s".into(),
                to: "d".into(),
                precision: 4,
                side: Side::Plus,
            },
        );
        match Pipeline::build(&doc) {
            Err(Error::CyclicReference { name }) => {
                assert!(name.contains('/'), "section-qualified name, got {name}");
            }
            Err(e) => panic!("expected cycle, got {e}"),
            Ok(_) => panic!("expected cycle, got a built pipeline"),
        }
    }

    #[test]
    fn direct_operator_cycles_are_rejected() {
        let mut doc = PipelineDoc::empty();
        doc.operators
            .insert("a".into(), OperatorSpec::Complement { of: "b".into() });
        doc.operators
            .insert("b".into(), OperatorSpec::Complement { of: "a".into() });
        assert!(matches!(
            Pipeline::build(&doc),
            Err(Error::CyclicReference { .. })
        ));
    }

    #[test]
    fn schema_mismatch_is_a_config_error() {
        let mut doc = PipelineDoc::empty();
        doc.schema = "rbmeasure/0".into();
        assert!(matches!(Pipeline::build(&doc), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{ "schema": "rbmeasure/1", "extra": 3 }"#;
        assert!(matches!(
            PipelineDoc::from_json(text),
            Err(Error::Json(_))
        ));
    }

    #[test]
    fn eval_defaults_to_the_root() {
        let doc = sample_doc();
        let p = Pipeline::build(&doc).unwrap();
        let out = p
            .run(&Command::Eval {
                martingale: "smooth".into(),
                at: None,
                precision: None,
            })
            .unwrap();
        match out {
            CommandOutput::Eval { at, value, .. } => {
                assert!(at.is_empty());
                assert_eq!(value.as_rational(), ExactRational::new(1, 2).unwrap());
            }
            other => panic!("unexpected output {other:?}"),
        }
    }

    #[test]
    fn wire_measures_are_revalidated() {
        let text = r#"{
            "schema": "rbmeasure/1",
            "measures": {
                "bad": { "kind": "coin_toss", "biases": [], "tail": "3/2" }
            }
        }"#;
        let doc = PipelineDoc::from_json(text).unwrap();
        assert!(Pipeline::build(&doc).is_err());
    }

    #[test]
    fn diagonalize_reports_the_trace_rows() {
        let mut doc = PipelineDoc::empty();
        doc.measures.insert("mu".into(), ProbMeasure::Uniform);
        doc.martingales.insert(
            "half".into(),
            MartingaleSpec::FromPrefixSet {
                measure: "mu".into(),
                members: PrefixSet::new(["0".parse::<BitString>().unwrap()]).unwrap(),
            },
        );
        doc.commands.push(Command::Diagonalize {
            martingale: "half".into(),
            cylinder: None,
            steps: 6,
        });
        let report = run_doc(&doc).unwrap();
        match &report.results[0] {
            CommandOutput::Diagonalize { trace, prefix, .. } => {
                assert_eq!(trace.len(), 7, "starting row plus one per step");
                assert_eq!(prefix.len(), 6);
                let one = ExactRational::one();
                assert!(trace.iter().all(|row| row.value < one));
            }
            other => panic!("unexpected output {other:?}"),
        }
    }

    #[test]
    fn null_union_of_success_measurements_is_small() {
        let mut doc = PipelineDoc::empty();
        doc.measures.insert("mu".into(), ProbMeasure::Uniform);
        doc.martingales
            .insert("strong".into(), MartingaleSpec::Z3StrongCover);
        doc.operators.insert(
            "hit".into(),
            OperatorSpec::SuccessMeasurement { of: "strong".into() },
        );
        doc.operators.insert(
            "un".into(),
            OperatorSpec::NullUnion {
                of: vec!["hit".into(), "hit".into()],
            },
        );
        doc.commands.push(Command::Measure {
            operator: "un".into(),
            precision: 6,
        });
        let report = run_doc(&doc).unwrap();
        match &report.results[0] {
            CommandOutput::Measure { estimate, .. } => {
                assert!(estimate.hi <= ExactRational::new(1, 64).unwrap());
            }
            other => panic!("unexpected output {other:?}"),
        }
    }
}
