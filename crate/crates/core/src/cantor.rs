//! Finite binary strings and the finite subsets of Cantor space they name.
//!
//! A [`BitString`] `w` names the cylinder `C_w` of infinite sequences that
//! extend it. [`PrefixSet`]s are pairwise prefix-incomparable families, so
//! their cylinders are disjoint; [`ClopenSet`]s are finite unions of
//! cylinders kept in a canonical minimal-depth form. The standard
//! enumeration orders strings by length and then lexicographically, starting
//! from the empty string.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::measure::ProbMeasure;
use crate::numerics::ExactRational;
use crate::{Error, Result};

/// Finite binary string, zero-indexed. The empty string is rendered as
/// `λ` in human-readable output and as `""` in JSON.
///
/// Ordering is by length, then lexicographic: exactly the standard
/// enumeration order.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// `n` copies of `bit`.
    pub fn repeated(bit: bool, n: usize) -> Self {
        BitString {
            bits: vec![bit; n],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn child(&self, bit: bool) -> Self {
        let mut bits = self.bits.clone();
        bits.push(bit);
        BitString { bits }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.is_empty() {
            None
        } else {
            Some(BitString {
                bits: self.bits[..self.len() - 1].to_vec(),
            })
        }
    }

    /// The string differing in the last bit.
    pub fn sibling(&self) -> Option<Self> {
        if self.is_empty() {
            None
        } else {
            let mut bits = self.bits.clone();
            let last = bits.len() - 1;
            bits[last] = !bits[last];
            Some(BitString { bits })
        }
    }

    pub fn prefix(&self, len: usize) -> Self {
        BitString {
            bits: self.bits[..len].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &Self) -> bool {
        self.len() <= other.len() && other.bits[..self.len()] == self.bits[..]
    }

    pub fn is_proper_prefix_of(&self, other: &Self) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    pub fn comparable(&self, other: &Self) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitString { bits }
    }

    /// Replaces the first `|u|` bits by `u`. Requires `|u| <= |self|`.
    pub fn substitute_prefix(&self, u: &Self) -> Self {
        assert!(u.len() <= self.len(), "substituted prefix longer than host");
        let mut bits = u.bits.clone();
        bits.extend_from_slice(&self.bits[u.len()..]);
        BitString { bits }
    }

    /// All prefixes from the empty string up to the string itself.
    pub fn prefixes(&self) -> impl Iterator<Item = BitString> + '_ {
        (0..=self.len()).map(move |i| self.prefix(i))
    }

    /// All strings of the given length, in lexicographic order.
    pub fn all_of_length(n: usize) -> impl Iterator<Item = BitString> {
        assert!(n < 64, "exhaustive level enumeration capped at length 63");
        (0u64..(1u64 << n)).map(move |v| {
            let bits = (0..n).map(|i| (v >> (n - 1 - i)) & 1 == 1).collect();
            BitString { bits }
        })
    }

    /// All strings of length at most `n`, in enumeration order.
    pub fn all_up_to(n: usize) -> impl Iterator<Item = BitString> {
        (0..=n).flat_map(BitString::all_of_length)
    }

    /// Position of this string in the standard enumeration.
    pub fn standard_index(&self) -> Result<u64> {
        let n = self.len();
        if n > 62 {
            return Err(Error::EnumerationOverflow);
        }
        let mut value: u64 = 0;
        for &b in &self.bits {
            value = (value << 1) | b as u64;
        }
        Ok(((1u64 << n) - 1) + value)
    }
}

/// The `k`-th string of the standard enumeration: empty string first, then
/// each length block in lexicographic order.
pub fn standard_enumeration(k: u64) -> BitString {
    // Block of length n covers indices [2^n - 1, 2^{n+1} - 1).
    let mut n = 0usize;
    while ((1u64 << (n + 1)) - 1) <= k {
        n += 1;
    }
    let offset = k - ((1u64 << n) - 1);
    let bits = (0..n).map(|i| (offset >> (n - 1 - i)) & 1 == 1).collect();
    BitString { bits }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BitString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "λ");
        }
        for &b in &self.bits {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for BitString {
    type Err = Error;

    /// Accepts a string of `0`/`1` characters; `""` and `"λ"` both denote
    /// the empty string.
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s == "λ" {
            return Ok(BitString::empty());
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(Error::Parse {
                        what: "bit string",
                        input: s.to_string(),
                    })
                }
            }
        }
        Ok(BitString { bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let raw: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        serializer.serialize_str(&raw)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pairwise prefix-incomparable family of strings, kept sorted in
/// enumeration order. The named cylinders are pairwise disjoint.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct PrefixSet {
    members: Vec<BitString>,
}

impl PrefixSet {
    pub fn new(members: impl IntoIterator<Item = BitString>) -> Result<Self> {
        let mut members: Vec<BitString> = members.into_iter().collect();
        members.sort();
        members.dedup();
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                if members[i].is_prefix_of(&members[j]) {
                    return Err(Error::NotPrefixSet {
                        member: members[i].to_string(),
                        other: members[j].to_string(),
                    });
                }
            }
        }
        Ok(PrefixSet { members })
    }

    pub fn empty() -> Self {
        PrefixSet { members: Vec::new() }
    }

    pub fn members(&self) -> &[BitString] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BitString> {
        self.members.iter()
    }
}

impl<'de> Deserialize<'de> for PrefixSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let members = Vec::<BitString>::deserialize(deserializer)?;
        PrefixSet::new(members).map_err(serde::de::Error::custom)
    }
}

/// Checks the prefix-freeness condition without building the set.
pub fn is_prefix_set(members: &[BitString]) -> bool {
    for (i, a) in members.iter().enumerate() {
        for b in members.iter().skip(i + 1) {
            if a.is_prefix_of(b) || b.is_prefix_of(a) {
                return false;
            }
        }
    }
    true
}

/// Finite union of cylinders, stored as the selected strings of a single
/// depth and kept canonical: whenever every selected string's sibling is
/// also selected, the whole level merges one step up, so the stored depth
/// is minimal. The empty set canonicalizes to depth 0 with no selection;
/// the full space is depth 0 selecting the empty string.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct ClopenSet {
    depth: usize,
    selected: BTreeSet<BitString>,
}

impl<'de> Deserialize<'de> for ClopenSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            depth: usize,
            selected: Vec<BitString>,
        }
        let wire = Wire::deserialize(deserializer)?;
        ClopenSet::new(wire.depth, wire.selected).map_err(serde::de::Error::custom)
    }
}

impl ClopenSet {
    pub fn new(depth: usize, selected: impl IntoIterator<Item = BitString>) -> Result<Self> {
        let selected: BTreeSet<BitString> = selected.into_iter().collect();
        for w in &selected {
            if w.len() != depth {
                return Err(Error::DepthMismatch {
                    len: w.len(),
                    depth,
                });
            }
        }
        let mut set = ClopenSet { depth, selected };
        set.canonicalize();
        Ok(set)
    }

    pub fn empty() -> Self {
        ClopenSet {
            depth: 0,
            selected: BTreeSet::new(),
        }
    }

    pub fn full() -> Self {
        ClopenSet {
            depth: 0,
            selected: BTreeSet::from([BitString::empty()]),
        }
    }

    /// The single cylinder `C_w`.
    pub fn cylinder(w: &BitString) -> Self {
        ClopenSet {
            depth: w.len(),
            selected: BTreeSet::from([w.clone()]),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn selected(&self) -> &BTreeSet<BitString> {
        &self.selected
    }

    pub fn is_empty_set(&self) -> bool {
        self.selected.is_empty()
    }

    fn canonicalize(&mut self) {
        if self.selected.is_empty() {
            self.depth = 0;
            return;
        }
        while self.depth > 0 {
            let closed = self
                .selected
                .iter()
                .all(|w| self.selected.contains(&w.sibling().expect("depth > 0")));
            if !closed {
                break;
            }
            let merged: BTreeSet<BitString> =
                self.selected.iter().map(|w| w.prefix(w.len() - 1)).collect();
            self.selected = merged;
            self.depth -= 1;
        }
    }

    /// Re-expresses the set at a deeper level. Representation-changing only;
    /// the named subset of Cantor space is unchanged.
    pub fn refine_to(&self, depth: usize) -> ClopenSet {
        assert!(depth >= self.depth, "refinement must not lose depth");
        let extra = depth - self.depth;
        let mut selected = BTreeSet::new();
        for w in &self.selected {
            for ext in BitString::all_of_length(extra) {
                selected.insert(w.concat(&ext));
            }
        }
        ClopenSet { depth, selected }
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        let depth = self.depth.max(other.depth);
        let a = self.refine_to(depth);
        let b = other.refine_to(depth);
        let mut set = ClopenSet {
            depth,
            selected: a.selected.union(&b.selected).cloned().collect(),
        };
        set.canonicalize();
        set
    }

    pub fn intersection(&self, other: &ClopenSet) -> ClopenSet {
        let depth = self.depth.max(other.depth);
        let a = self.refine_to(depth);
        let b = other.refine_to(depth);
        let mut set = ClopenSet {
            depth,
            selected: a.selected.intersection(&b.selected).cloned().collect(),
        };
        set.canonicalize();
        set
    }

    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        let depth = self.depth.max(other.depth);
        let a = self.refine_to(depth);
        let b = other.refine_to(depth);
        let mut set = ClopenSet {
            depth,
            selected: a.selected.difference(&b.selected).cloned().collect(),
        };
        set.canonicalize();
        set
    }

    pub fn complement(&self) -> ClopenSet {
        let mut selected = BTreeSet::new();
        for w in BitString::all_of_length(self.depth) {
            if !self.selected.contains(&w) {
                selected.insert(w);
            }
        }
        let mut set = ClopenSet {
            depth: self.depth,
            selected,
        };
        set.canonicalize();
        set
    }

    /// Does the whole cylinder `C_w` lie inside the set?
    pub fn contains_cylinder(&self, w: &BitString) -> bool {
        if w.len() >= self.depth {
            self.selected.contains(&w.prefix(self.depth))
        } else {
            let extra = self.depth - w.len();
            BitString::all_of_length(extra).all(|ext| self.selected.contains(&w.concat(&ext)))
        }
    }

    /// Minimal prefix-set representation: maximal fully-selected subtrees.
    pub fn to_prefix_set(&self) -> PrefixSet {
        let mut members = Vec::new();
        self.collect_subtrees(&BitString::empty(), &mut members);
        PrefixSet::new(members).expect("subtree roots are prefix-incomparable")
    }

    fn collect_subtrees(&self, prefix: &BitString, out: &mut Vec<BitString>) {
        if prefix.len() == self.depth {
            if self.selected.contains(prefix) {
                out.push(prefix.clone());
            }
            return;
        }
        let extra = self.depth - prefix.len();
        let full = BitString::all_of_length(extra)
            .all(|ext| self.selected.contains(&prefix.concat(&ext)));
        if full {
            out.push(prefix.clone());
            return;
        }
        let any = self
            .selected
            .iter()
            .any(|w| prefix.is_prefix_of(w));
        if !any {
            return;
        }
        self.collect_subtrees(&prefix.child(false), out);
        self.collect_subtrees(&prefix.child(true), out);
    }
}

/// Total measure of the disjoint cylinders named by a prefix set.
pub fn classical_measure(set: &PrefixSet, nu: &ProbMeasure) -> Result<ExactRational> {
    let mut total = ExactRational::zero();
    for w in set.iter() {
        total += &nu.measure_of(w)?;
    }
    Ok(total)
}

/// Total measure of a clopen set, via its minimal prefix-set form. The
/// result is representation-independent: refining a clopen set first does
/// not change the value.
pub fn classical_measure_clopen(set: &ClopenSet, nu: &ProbMeasure) -> Result<ExactRational> {
    classical_measure(&set.to_prefix_set(), nu)
}
