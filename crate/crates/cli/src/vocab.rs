//! Inline construction vocabulary for positional arguments.
//!
//! A positional argument first tries to name an entry of the loaded
//! document; names from the file always win. Anything else goes through
//! a small expression grammar:
//!
//! ```text
//! martingale  unit | zero | z3_cover_sum | z3_ladder(N)
//!             | from_prefix_set({W, ...}[, MEASURE])
//! operator    full | tails_union | C_W | cylinder(W[, MEASURE])
//!             | complement(OP) | union(OP, OP) | intersection(OP, OP)
//!             | completeness(OP) | success(MARTINGALE)
//! measure     mu | uniform | bernoulli(P)
//! ```
//!
//! Strings are bare bits, optionally quoted; the empty string spells
//! itself as lambda (the letter works too) or "". Rationals are p/q or
//! integers. Omitted measures default to the uniform one. Every parsed
//! expression is installed as a synthetic document entry, so a single
//! build pass resolves file names and command-line expressions alike.

use rbmeasure::cantor::{BitString, PrefixSet};
use rbmeasure::measure::ProbMeasure;
use rbmeasure::pipeline::{Keep, MartingaleSpec, OperatorSpec, PipelineDoc};
use rbmeasure::{Error, Result};

pub struct Vocab<'a> {
    doc: &'a mut PipelineDoc,
    counter: usize,
    /// Name of the installed default measure, once something needed it.
    ambient: Option<String>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Strips one layer of matching single or double quotes.
fn unquote(t: &str) -> &str {
    let b = t.as_bytes();
    if b.len() >= 2
        && ((b[0] == b'"' && b[b.len() - 1] == b'"')
            || (b[0] == b'\'' && b[b.len() - 1] == b'\''))
    {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

/// Turns a command-line string position into a bit string. Accepts bare
/// bits, quoted bits, and the lambda spellings of the empty string.
pub fn parse_bits(token: &str) -> Result<BitString> {
    let t = unquote(token.trim());
    if t.eq_ignore_ascii_case("lambda") {
        return Ok(BitString::empty());
    }
    t.parse()
}

/// The argument list of `head(...)`, if the token is such a call.
fn call<'s>(token: &'s str, head: &str) -> Option<&'s str> {
    let rest = token.strip_prefix(head)?.trim_start();
    Some(rest.strip_prefix('(')?.strip_suffix(')')?.trim())
}

/// Splits on commas outside parentheses, braces, and quotes.
fn top_split(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (Some(q), _) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '(' | '{') => depth += 1,
            (None, ')' | '}') => depth = depth.saturating_sub(1),
            (None, ',') if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !last.is_empty() || !parts.is_empty() {
        parts.push(last);
    }
    parts
}

impl<'a> Vocab<'a> {
    pub fn new(doc: &'a mut PipelineDoc) -> Self {
        Vocab {
            doc,
            counter: 0,
            ambient: None,
        }
    }

    /// Expressions are installed under their own spelling so reports echo
    /// what the user typed; the spelling is free (lookup ran first).
    fn fresh(&mut self, token: &str) -> String {
        if !token.is_empty() && !token.starts_with('@') {
            return token.to_string();
        }
        loop {
            let name = format!("@inline{}", self.counter);
            self.counter += 1;
            if !self.doc.measures.contains_key(&name)
                && !self.doc.martingales.contains_key(&name)
                && !self.doc.operators.contains_key(&name)
            {
                return name;
            }
        }
    }

    fn uniform(&mut self) -> String {
        if let Some(name) = &self.ambient {
            return name.clone();
        }
        let name = self.fresh("@");
        self.doc
            .measures
            .insert(name.clone(), ProbMeasure::uniform());
        self.ambient = Some(name.clone());
        name
    }

    pub fn measure(&mut self, token: &str) -> Result<String> {
        let t = token.trim();
        if self.doc.measures.contains_key(t) {
            return Ok(t.to_string());
        }
        let m = if matches!(t, "\u{3bc}" | "mu" | "uniform") {
            ProbMeasure::uniform()
        } else if let Some(inner) = call(t, "bernoulli") {
            ProbMeasure::coin_toss(Vec::new(), inner.parse()?)?
        } else {
            return Err(usage(format!(
                "unknown measure {t:?}: expected a document name, mu, uniform, or bernoulli(P)"
            )));
        };
        let name = self.fresh(t);
        self.doc.measures.insert(name.clone(), m);
        Ok(name)
    }

    pub fn martingale(&mut self, token: &str) -> Result<String> {
        let t = token.trim();
        if self.doc.martingales.contains_key(t) {
            return Ok(t.to_string());
        }
        let spec = if t == "unit" {
            let measure = self.uniform();
            MartingaleSpec::Unit { measure }
        } else if t == "zero" {
            let measure = self.uniform();
            MartingaleSpec::Zero { measure }
        } else if t == "z3_cover_sum" {
            MartingaleSpec::Z3CoverSum
        } else if let Some(inner) = call(t, "z3_ladder") {
            let index = inner
                .parse()
                .map_err(|_| usage(format!("z3_ladder wants a nonnegative index, got {inner:?}")))?;
            MartingaleSpec::Z3Ladder { index }
        } else if let Some(inner) = call(t, "from_prefix_set") {
            let args = top_split(inner);
            let (set_arg, measure) = match args.as_slice() {
                [set] => (*set, self.uniform()),
                [set, m] => (*set, self.measure(m)?),
                _ => {
                    return Err(usage(
                        "from_prefix_set wants a {...} set and at most one measure".to_string(),
                    ))
                }
            };
            let inner_set = set_arg
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(|| usage(format!("expected a {{...}} set, got {set_arg:?}")))?;
            let members = top_split(inner_set)
                .into_iter()
                .map(parse_bits)
                .collect::<Result<Vec<_>>>()?;
            MartingaleSpec::FromPrefixSet {
                measure,
                members: PrefixSet::new(members)?,
            }
        } else {
            return Err(usage(format!(
                "unknown martingale {t:?}: expected a document name, unit, zero, \
                 z3_cover_sum, z3_ladder(N), or from_prefix_set({{...}})"
            )));
        };
        let name = self.fresh(t);
        self.doc.martingales.insert(name.clone(), spec);
        Ok(name)
    }

    pub fn operator(&mut self, token: &str) -> Result<String> {
        let t = token.trim();
        if self.doc.operators.contains_key(t) {
            return Ok(t.to_string());
        }
        let spec = if t == "full" {
            let measure = self.uniform();
            OperatorSpec::Cylinder {
                measure,
                prefix: BitString::empty(),
            }
        } else if t == "tails_union" {
            OperatorSpec::TailsUnion
        } else if let Some(rest) = t.strip_prefix("C_") {
            let prefix = parse_bits(rest)?;
            let measure = self.uniform();
            OperatorSpec::Cylinder { measure, prefix }
        } else if let Some(inner) = call(t, "cylinder") {
            let args = top_split(inner);
            let (prefix, measure) = match args.as_slice() {
                [w] => (parse_bits(w)?, self.uniform()),
                [w, m] => (parse_bits(w)?, self.measure(m)?),
                _ => {
                    return Err(usage(
                        "cylinder wants a string and at most one measure".to_string(),
                    ))
                }
            };
            OperatorSpec::Cylinder { measure, prefix }
        } else if let Some(inner) = call(t, "complement") {
            let of = self.operator(inner)?;
            OperatorSpec::Complement { of }
        } else if let Some(inner) = call(t, "completeness") {
            let of = self.operator(inner)?;
            OperatorSpec::Completeness { of }
        } else if let Some(inner) = call(t, "success") {
            let of = self.martingale(inner)?;
            OperatorSpec::SuccessMeasurement { of }
        } else if let Some((keep, inner)) = call(t, "union")
            .map(|i| (Keep::Union, i))
            .or_else(|| call(t, "intersection").map(|i| (Keep::Intersection, i)))
        {
            let args = top_split(inner);
            let [a, b] = args.as_slice() else {
                return Err(usage("union/intersection want exactly two operators".to_string()));
            };
            let first = self.operator(a)?;
            let second = self.operator(b)?;
            OperatorSpec::Combine {
                first,
                second,
                keep,
            }
        } else {
            return Err(usage(format!(
                "unknown operator {t:?}: expected a document name, full, tails_union, C_W, \
                 cylinder(W), complement(OP), union(OP, OP), intersection(OP, OP), \
                 completeness(OP), or success(MARTINGALE)"
            )));
        };
        let name = self.fresh(t);
        self.doc.operators.insert(name.clone(), spec);
        Ok(name)
    }
}
