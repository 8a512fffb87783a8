//! Primary and secondary structures.
//!
//! A [`PrimarySequence`] is the unfolded chain; backbone bonds are implied by
//! adjacency. A [`SecondaryStructure`] adds a set of base pairs on top of it.
//! Structures are immutable: every operation that adds or removes pairs
//! returns a new value.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Nucleotide {
    A,
    C,
    G,
    U,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::U];

    /// Case-insensitive; `T` reads as `U`.
    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(Nucleotide::A),
            'C' => Some(Nucleotide::C),
            'G' => Some(Nucleotide::G),
            'U' | 'T' => Some(Nucleotide::U),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Nucleotide::A => 'A',
            Nucleotide::C => 'C',
            Nucleotide::G => 'G',
            Nucleotide::U => 'U',
        }
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// G-C, A-U and G-U, in either orientation.
pub fn is_admissible_pair(a: Nucleotide, b: Nucleotide) -> bool {
    use Nucleotide::*;
    matches!((a, b), (G, C) | (C, G) | (A, U) | (U, A) | (G, U) | (U, G))
}

/// The six admissible pair types, read 5' to 3' (`(seq[i], seq[j])`, `i < j`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairType {
    AU,
    CG,
    GC,
    UA,
    GU,
    UG,
}

impl PairType {
    pub const ALL: [PairType; 6] = [PairType::AU, PairType::CG, PairType::GC, PairType::UA, PairType::GU, PairType::UG];

    pub fn of(five: Nucleotide, three: Nucleotide) -> Option<Self> {
        use Nucleotide::*;
        Some(match (five, three) {
            (A, U) => PairType::AU,
            (C, G) => PairType::CG,
            (G, C) => PairType::GC,
            (U, A) => PairType::UA,
            (G, U) => PairType::GU,
            (U, G) => PairType::UG,
            _ => return None,
        })
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PairType::AU => "AU",
            PairType::CG => "CG",
            PairType::GC => "GC",
            PairType::UA => "UA",
            PairType::GU => "GU",
            PairType::UG => "UG",
        }
    }
}

impl FromStr for PairType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let mut chars = s.chars();
        let (Some(a), Some(b), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(());
        };
        let a = Nucleotide::from_char(a).ok_or(())?;
        let b = Nucleotide::from_char(b).ok_or(())?;
        PairType::of(a, b).ok_or(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("invalid nucleotide {ch:?} at position {position}")]
    InvalidCharacter { ch: char, position: usize },
    #[error("structure length {found} does not match sequence length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid dot-bracket character {ch:?} at position {position}")]
    InvalidBracket { ch: char, position: usize },
    #[error("unbalanced brackets at position {position}")]
    Unbalanced { position: usize },
    #[error("invalid structure: {0}")]
    Invalid(ValidationReport),
    #[error("cannot add pair {pair}: {violation}")]
    Rejected { pair: BasePair, violation: Violation },
    #[error("pair {0} is not present")]
    PairNotPresent(BasePair),
}

/// The unfolded chain `G_0`: positions `0..n`, backbone between neighbours.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimarySequence {
    bases: Vec<Nucleotide>,
    name: Option<String>,
}

impl PrimarySequence {
    pub fn new(bases: Vec<Nucleotide>, name: Option<String>) -> Result<Self, StructureError> {
        if bases.is_empty() {
            return Err(StructureError::EmptySequence);
        }
        Ok(PrimarySequence { bases, name })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn bases(&self) -> &[Nucleotide] {
        &self.bases
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn base(&self, i: usize) -> Nucleotide {
        self.bases[i]
    }

    pub fn pair_type(&self, pair: BasePair) -> Option<PairType> {
        PairType::of(self.bases[pair.i], self.bases[pair.j])
    }
}

impl fmt::Display for PrimarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bases {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

impl FromStr for PrimarySequence {
    type Err = StructureError;

    fn from_str(s: &str) -> Result<Self, StructureError> {
        parse_sequence(s)
    }
}

fn parse_record(name: Option<String>, lines: &[&str]) -> Result<PrimarySequence, StructureError> {
    let mut bases = Vec::new();
    for ch in lines.iter().flat_map(|l| l.chars()).filter(|c| !c.is_whitespace()) {
        let nt = Nucleotide::from_char(ch).ok_or(StructureError::InvalidCharacter { ch, position: bases.len() })?;
        bases.push(nt);
    }
    PrimarySequence::new(bases, name)
}

/// Parses every record of a FASTA-like text. Text without any `>` header is
/// a single unnamed record.
pub fn parse_fasta_records(text: &str) -> Result<Vec<PrimarySequence>, StructureError> {
    let mut records = Vec::new();
    let mut name: Option<String> = None;
    let mut lines: Vec<&str> = Vec::new();
    let mut seen_header = false;
    for line in text.lines() {
        let line = line.trim();
        if let Some(header) = line.strip_prefix('>') {
            if seen_header || !lines.is_empty() {
                records.push(parse_record(name.take(), &lines)?);
                lines.clear();
            }
            seen_header = true;
            let header = header.trim();
            name = (!header.is_empty()).then(|| header.to_string());
        } else if !line.is_empty() {
            lines.push(line);
        }
    }
    if seen_header || !lines.is_empty() {
        records.push(parse_record(name, &lines)?);
    }
    if records.is_empty() {
        return Err(StructureError::EmptySequence);
    }
    Ok(records)
}

/// Parses a bare base string or the first record of a FASTA-like text.
pub fn parse_sequence(text: &str) -> Result<PrimarySequence, StructureError> {
    parse_fasta_records(text).map(|mut r| r.swap_remove(0))
}

/// A base pair `(i, j)` with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasePair {
    pub i: usize,
    pub j: usize,
}

impl BasePair {
    /// Orders the endpoints.
    ///
    /// # Panics
    /// When `a == b`.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "a base pair needs two distinct positions");
        BasePair { i: a.min(b), j: a.max(b) }
    }

    /// Strictly encloses `other`.
    pub fn encloses(self, other: BasePair) -> bool {
        self.i < other.i && other.j < self.j
    }

    pub fn crosses(self, other: BasePair) -> bool {
        (self.i < other.i && other.i < self.j && self.j < other.j)
            || (other.i < self.i && self.i < other.j && other.j < self.j)
    }

    pub fn shares_position(self, other: BasePair) -> bool {
        self.i == other.i || self.i == other.j || self.j == other.i || self.j == other.j
    }
}

impl fmt::Display for BasePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

impl From<(usize, usize)> for BasePair {
    fn from((a, b): (usize, usize)) -> Self {
        BasePair::new(a, b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Violation {
    IndexOutOfRange { pair: BasePair },
    InadmissiblePair { pair: BasePair, left: Nucleotide, right: Nucleotide },
    PairedTwice { position: usize },
    Crossing { a: BasePair, b: BasePair },
    HairpinTooSmall { pair: BasePair, enclosed: usize, min: usize },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::IndexOutOfRange { .. } => "index-out-of-range",
            Violation::InadmissiblePair { .. } => "inadmissible-pair",
            Violation::PairedTwice { .. } => "position-already-paired",
            Violation::Crossing { .. } => "crossing",
            Violation::HairpinTooSmall { .. } => "hairpin-too-small",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { pair } => write!(f, "{}: pair {}", self.kind(), pair),
            Violation::InadmissiblePair { pair, left, right } => {
                write!(f, "{}: pair {} is {}-{}", self.kind(), pair, left, right)
            }
            Violation::PairedTwice { position } => {
                write!(f, "{}: position {}", self.kind(), position)
            }
            Violation::Crossing { a, b } => write!(f, "{}: {} and {}", self.kind(), a, b),
            Violation::HairpinTooSmall { pair, enclosed, min } => {
                write!(f, "{}: pair {} encloses {} unpaired, minimum {}", self.kind(), pair, enclosed, min)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: &str) -> bool {
        self.violations.iter().any(|v| v.kind() == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}", v)?;
        }
        Ok(())
    }
}

/// Canonical identity of a structure over a fixed sequence: its dot-bracket.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructureKey(String);

impl StructureKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn from_raw(key: &str) -> Self {
        StructureKey(key.to_string())
    }
}

impl fmt::Display for StructureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A sequence plus a set of base pairs.
///
/// Values built through the checked constructors are valid (see
/// [`validate_structure`]); the `unchecked` constructor exists for building
/// counterexamples.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SecondaryStructure {
    sequence: Arc<PrimarySequence>,
    pairs: Vec<BasePair>,
    partner: Vec<Option<usize>>,
}

impl SecondaryStructure {
    /// The open chain, no pairs.
    pub fn empty(sequence: Arc<PrimarySequence>) -> Self {
        let n = sequence.len();
        SecondaryStructure { sequence, pairs: Vec::new(), partner: vec![None; n] }
    }

    /// Builds a structure without validating it.
    pub fn from_pairs_unchecked(sequence: Arc<PrimarySequence>, pairs: impl IntoIterator<Item = BasePair>) -> Self {
        let pairs: Vec<BasePair> = pairs.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let n = sequence.len();
        let mut partner = vec![None; n];
        for p in &pairs {
            if p.j < n {
                partner[p.i] = Some(p.j);
                partner[p.j] = Some(p.i);
            }
        }
        SecondaryStructure { sequence, pairs, partner }
    }

    pub fn from_pairs(
        sequence: Arc<PrimarySequence>,
        pairs: impl IntoIterator<Item = BasePair>,
        min_hairpin: usize,
    ) -> Result<Self, StructureError> {
        let s = Self::from_pairs_unchecked(sequence, pairs);
        let report = s.validate(min_hairpin);
        if report.is_pass() {
            Ok(s)
        } else {
            Err(StructureError::Invalid(report))
        }
    }

    pub fn sequence(&self) -> &Arc<PrimarySequence> {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Sorted by `(i, j)`.
    pub fn pairs(&self) -> &[BasePair] {
        &self.pairs
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn partner(&self, k: usize) -> Option<usize> {
        self.partner[k]
    }

    pub fn is_paired(&self, k: usize) -> bool {
        self.partner[k].is_some()
    }

    pub fn contains(&self, pair: BasePair) -> bool {
        self.pairs.binary_search(&pair).is_ok()
    }

    pub fn validate(&self, min_hairpin: usize) -> ValidationReport {
        validate_structure(self, min_hairpin)
    }

    pub fn dot_bracket(&self) -> String {
        emit_dot_bracket(self)
    }

    pub fn key(&self) -> StructureKey {
        StructureKey(self.dot_bracket())
    }

    /// Returns a new structure with `added` on top of this one; `self` is
    /// left untouched. Fails on the first added pair that breaks a
    /// constraint.
    pub fn with_pairs_added(&self, added: &[BasePair], min_hairpin: usize) -> Result<Self, StructureError> {
        let n = self.len();
        let mut taken = vec![false; n];
        for &pair in added {
            let reject = |violation| Err(StructureError::Rejected { pair, violation });
            if pair.i >= pair.j || pair.j >= n {
                return reject(Violation::IndexOutOfRange { pair });
            }
            let (left, right) = (self.sequence.base(pair.i), self.sequence.base(pair.j));
            if !is_admissible_pair(left, right) {
                return reject(Violation::InadmissiblePair { pair, left, right });
            }
            for position in [pair.i, pair.j] {
                if self.is_paired(position) || taken[position] {
                    return reject(Violation::PairedTwice { position });
                }
                taken[position] = true;
            }
        }
        let next = Self::from_pairs_unchecked(self.sequence.clone(), self.pairs.iter().chain(added.iter()).copied());
        let report = next.validate(min_hairpin);
        if let Some(violation) = report.violations.into_iter().next() {
            let pair = match &violation {
                Violation::Crossing { a, b } => {
                    if added.contains(a) {
                        *a
                    } else {
                        *b
                    }
                }
                Violation::HairpinTooSmall { pair, .. } => *pair,
                _ => added[0],
            };
            return Err(StructureError::Rejected { pair, violation });
        }
        Ok(next)
    }

    /// Returns a new structure without `removed`.
    pub fn with_pairs_removed(&self, removed: &[BasePair]) -> Result<Self, StructureError> {
        if let Some(&missing) = removed.iter().find(|p| !self.contains(**p)) {
            return Err(StructureError::PairNotPresent(missing));
        }
        Ok(Self::from_pairs_unchecked(
            self.sequence.clone(),
            self.pairs.iter().copied().filter(|p| !removed.contains(p)),
        ))
    }
}

/// Lists every constraint violation of `s`; an empty report means valid.
pub fn validate_structure(s: &SecondaryStructure, min_hairpin: usize) -> ValidationReport {
    let n = s.len();
    let mut violations = Vec::new();
    let mut seen = vec![false; n];
    let mut twice = BTreeSet::new();
    let in_range: Vec<BasePair> = s.pairs.iter().copied().filter(|p| p.i < p.j && p.j < n).collect();

    for &pair in &s.pairs {
        if !(pair.i < pair.j && pair.j < n) {
            violations.push(Violation::IndexOutOfRange { pair });
        }
    }
    for &pair in &in_range {
        let (left, right) = (s.sequence.base(pair.i), s.sequence.base(pair.j));
        if !is_admissible_pair(left, right) {
            violations.push(Violation::InadmissiblePair { pair, left, right });
        }
        for k in [pair.i, pair.j] {
            if seen[k] {
                twice.insert(k);
            }
            seen[k] = true;
        }
    }
    violations.extend(twice.into_iter().map(|position| Violation::PairedTwice { position }));
    for (x, &a) in in_range.iter().enumerate() {
        for &b in &in_range[x + 1..] {
            if a.crosses(b) {
                violations.push(Violation::Crossing { a, b });
            }
        }
    }
    for &pair in &in_range {
        let innermost = !in_range.iter().any(|&other| pair.encloses(other));
        let enclosed = pair.j - pair.i - 1;
        if innermost && enclosed < min_hairpin {
            violations.push(Violation::HairpinTooSmall { pair, enclosed, min: min_hairpin });
        }
    }
    ValidationReport { violations }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DotBracketOptions {
    pub min_hairpin: usize,
    /// Reject structures that fail validation. Off only for fixtures.
    pub strict: bool,
}

impl Default for DotBracketOptions {
    fn default() -> Self {
        DotBracketOptions { min_hairpin: crate::DEFAULT_MIN_HAIRPIN, strict: true }
    }
}

pub fn parse_dot_bracket(
    sequence: Arc<PrimarySequence>,
    db: &str,
    options: DotBracketOptions,
) -> Result<SecondaryStructure, StructureError> {
    let chars: Vec<char> = db.trim().chars().collect();
    if chars.len() != sequence.len() {
        return Err(StructureError::LengthMismatch { expected: sequence.len(), found: chars.len() });
    }
    let mut stack = Vec::new();
    let mut pairs = Vec::new();
    for (position, &ch) in chars.iter().enumerate() {
        match ch {
            '.' => {}
            '(' => stack.push(position),
            ')' => {
                let open = stack.pop().ok_or(StructureError::Unbalanced { position })?;
                pairs.push(BasePair { i: open, j: position });
            }
            _ => return Err(StructureError::InvalidBracket { ch, position }),
        }
    }
    if let Some(&position) = stack.last() {
        return Err(StructureError::Unbalanced { position });
    }
    if options.strict {
        SecondaryStructure::from_pairs(sequence, pairs, options.min_hairpin)
    } else {
        Ok(SecondaryStructure::from_pairs_unchecked(sequence, pairs))
    }
}

pub fn emit_dot_bracket(s: &SecondaryStructure) -> String {
    let mut out = vec!['.'; s.len()];
    for p in &s.pairs {
        if p.j < out.len() {
            out[p.i] = '(';
            out[p.j] = ')';
        }
    }
    out.into_iter().collect()
}
