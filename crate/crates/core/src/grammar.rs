//! The RNA graph grammar: eleven additive productions over secondary
//! structures.
//!
//! Every production adds one or two base pairs. Because nothing is ever
//! deleted, the dangling and identification conditions of a double-pushout
//! step are vacuous and a direct derivation reduces to "check the site,
//! then add the pairs". What remains of the gluing conditions is base-pair
//! admissibility, unpaired endpoints, non-crossing, the minimum hairpin size
//! and the per-rule site predicate.
//!
//! Site predicates, with `(i,j)` the outer pair and `(k,l)` the inner one:
//!
//! | rule | adds | site |
//! |------|------|------|
//! | Hairpin-Rule1 | `(i,j)` | `i+1..j-1` unpaired, `j-i-1 >= min_hairpin` |
//! | Helix-Rule1 | `(i,j),(i+1,j-1)` | `i+1 < j-1` |
//! | Helix-Rule2 | one pair | stacks directly on an existing pair, inside or outside |
//! | BulgeR-Rule1 | `(i,j),(i+1,l)` | `l < j-1`, `l+1..j-1` unpaired |
//! | BulgeL-Rule1 | `(i,j),(k,j-1)` | `k > i+1`, `i+1..k-1` unpaired |
//! | InternalLoop-Rule1 | `(i,j),(k,l)` | both gaps non-empty and unpaired |
//! | *-Rule2 (bulge, internal) | one pair | the other pair of the loop already exists |
//! | MultiBranch-Rule1 | `(i,j)` | directly encloses exactly two pairs |
//! | MultiBranch-Rule2 | `(i,j)` | directly encloses three or more pairs |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structure::{is_admissible_pair, BasePair, SecondaryStructure, StructureError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LoopKind {
    Hairpin,
    BulgeR,
    BulgeL,
    Helix,
    InternalLoop,
    MultiBranch,
}

impl LoopKind {
    pub const ALL: [LoopKind; 6] = [
        LoopKind::Hairpin,
        LoopKind::BulgeR,
        LoopKind::BulgeL,
        LoopKind::Helix,
        LoopKind::InternalLoop,
        LoopKind::MultiBranch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LoopKind::Hairpin => "Hairpin",
            LoopKind::BulgeR => "BulgeR",
            LoopKind::BulgeL => "BulgeL",
            LoopKind::Helix => "Helix",
            LoopKind::InternalLoop => "InternalLoop",
            LoopKind::MultiBranch => "MultiBranch",
        }
    }
}

impl FromStr for LoopKind {
    type Err = String;

    /// Case-insensitive; `-` and `_` are ignored (`bulge-r`, `internal_loop`).
    fn from_str(s: &str) -> Result<Self, String> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').map(|c| c.to_ascii_lowercase()).collect();
        LoopKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == norm || (norm == "internal" && *k == LoopKind::InternalLoop))
            .ok_or_else(|| format!("unknown loop kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Rule1,
    Rule2,
}

/// One production of the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId {
    pub kind: LoopKind,
    pub variant: Variant,
}

impl RuleId {
    /// The eleven productions, in match order.
    pub const ALL: [RuleId; 11] = [
        RuleId::of(LoopKind::Hairpin, Variant::Rule1),
        RuleId::of(LoopKind::BulgeR, Variant::Rule1),
        RuleId::of(LoopKind::BulgeR, Variant::Rule2),
        RuleId::of(LoopKind::BulgeL, Variant::Rule1),
        RuleId::of(LoopKind::BulgeL, Variant::Rule2),
        RuleId::of(LoopKind::Helix, Variant::Rule1),
        RuleId::of(LoopKind::Helix, Variant::Rule2),
        RuleId::of(LoopKind::InternalLoop, Variant::Rule1),
        RuleId::of(LoopKind::InternalLoop, Variant::Rule2),
        RuleId::of(LoopKind::MultiBranch, Variant::Rule1),
        RuleId::of(LoopKind::MultiBranch, Variant::Rule2),
    ];

    const fn of(kind: LoopKind, variant: Variant) -> Self {
        RuleId { kind, variant }
    }

    /// `None` for the hairpin second variant, which does not exist.
    pub fn new(kind: LoopKind, variant: Variant) -> Option<Self> {
        (kind != LoopKind::Hairpin || variant == Variant::Rule1).then_some(RuleId { kind, variant })
    }

    pub fn name(self) -> String {
        self.to_string()
    }

    /// Number of pairs the production adds.
    pub fn arity(self) -> usize {
        match (self.kind, self.variant) {
            (LoopKind::Hairpin | LoopKind::MultiBranch, _) => 1,
            (_, Variant::Rule1) => 2,
            (_, Variant::Rule2) => 1,
        }
    }

    pub fn site_description(self) -> &'static str {
        use LoopKind::*;
        use Variant::*;
        match (self.kind, self.variant) {
            (Hairpin, _) => "add (i,j); i+1..j-1 unpaired; j-i-1 >= min_hairpin",
            (BulgeR, Rule1) => "add (i,j),(i+1,l); l < j-1; l+1..j-1 unpaired",
            (BulgeR, Rule2) => "one of (i,j),(i+1,l) exists, add the other; l < j-1; l+1..j-1 unpaired",
            (BulgeL, Rule1) => "add (i,j),(k,j-1); k > i+1; i+1..k-1 unpaired",
            (BulgeL, Rule2) => "one of (i,j),(k,j-1) exists, add the other; k > i+1; i+1..k-1 unpaired",
            (Helix, Rule1) => "add (i,j),(i+1,j-1); i+1 < j-1",
            (Helix, Rule2) => "given (p,q), add (p+1,q-1) or (p-1,q+1)",
            (InternalLoop, Rule1) => "add (i,j),(k,l); k > i+1; l < j-1; i+1..k-1 and l+1..j-1 unpaired",
            (InternalLoop, Rule2) => "one of (i,j),(k,l) exists, add the other; k > i+1; l < j-1; both gaps unpaired",
            (MultiBranch, Rule1) => "add (i,j) directly enclosing exactly 2 pairs; separators >= 0 unpaired",
            (MultiBranch, Rule2) => "add (i,j) directly enclosing 3 or more pairs; separators >= 0 unpaired",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.variant {
            Variant::Rule1 => "Rule1",
            Variant::Rule2 => "Rule2",
        };
        write!(f, "{}-{}", self.kind.name(), v)
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        RuleId::ALL.into_iter().find(|r| r.to_string() == s).ok_or_else(|| format!("unknown rule {s:?}"))
    }
}

impl Serialize for RuleId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RuleId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A concrete site for a production.
///
/// `added` is sorted (outer pair first for the two-pair rules); `context`
/// holds the pre-existing pairs the site refers to: the neighbouring pair
/// for the single-pair loop rules, the direct branches for multi-branch
/// closings, nothing for the other Rule1 productions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Match {
    pub rule: RuleId,
    pub added: Vec<BasePair>,
    pub context: Vec<BasePair>,
}

impl fmt::Display for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} +", self.rule)?;
        for p in &self.added {
            write!(f, " {}", p)?;
        }
        if !self.context.is_empty() {
            write!(f, " @")?;
            for p in &self.context {
                write!(f, " {}", p)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    pub min_hairpin: usize,
    /// Inverse productions may be used during adaptation.
    pub allow_inverse: bool,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar { min_hairpin: crate::DEFAULT_MIN_HAIRPIN, allow_inverse: false }
    }
}

impl Grammar {
    pub fn new(min_hairpin: usize) -> Self {
        Grammar { min_hairpin, ..Grammar::default() }
    }

    /// Hairpins need only one enclosed nucleotide.
    pub fn relaxed() -> Self {
        Grammar::new(crate::RELAXED_MIN_HAIRPIN)
    }

    pub fn with_inverse(self, allow_inverse: bool) -> Self {
        Grammar { allow_inverse, ..self }
    }

    pub fn rules(&self) -> &'static [RuleId] {
        &RuleId::ALL
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GluingFailure {
    #[error("{rule} takes {expected} added pair(s), got {found}")]
    AddedArity { rule: RuleId, expected: usize, found: usize },
    #[error("{rule} cannot take {found} context pair(s)")]
    ContextArity { rule: RuleId, found: usize },
    #[error("context pair {0} is not in the structure")]
    ContextMissing(BasePair),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("site predicate of {rule} fails: {reason}")]
    Site { rule: RuleId, reason: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("match {m} is not applicable: {failure}")]
    Gluing { m: Match, failure: GluingFailure },
    #[error("cannot invert {m}: {source}")]
    NotInvertible { m: Match, source: StructureError },
    #[error("derivation step {step} failed: {source}")]
    Derivation { step: usize, source: Box<GrammarError> },
}

/// Gap lengths between an outer pair and its single direct branch.
fn gaps(outer: BasePair, inner: BasePair) -> (usize, usize) {
    (inner.i - outer.i - 1, outer.j - inner.j - 1)
}

fn single_branch_kind(left: usize, right: usize) -> LoopKind {
    match (left > 0, right > 0) {
        (false, false) => LoopKind::Helix,
        (false, true) => LoopKind::BulgeR,
        (true, false) => LoopKind::BulgeL,
        (true, true) => LoopKind::InternalLoop,
    }
}

fn all_unpaired(s: &SecondaryStructure, from: usize, to_exclusive: usize) -> bool {
    (from..to_exclusive).all(|k| !s.is_paired(k))
}

/// Pairs directly inside `(i, j)`, left to right. Assumes `(i, j)` is not
/// crossed by any pair of `s`.
pub(crate) fn direct_branches(s: &SecondaryStructure, i: usize, j: usize) -> Vec<BasePair> {
    let mut out = Vec::new();
    let mut k = i + 1;
    while k < j {
        match s.partner(k) {
            Some(l) if l > k => {
                out.push(BasePair { i: k, j: l });
                k = l + 1;
            }
            _ => k += 1,
        }
    }
    out
}

/// Checks `m` against `s` and returns the derived structure.
pub fn gluing_diagnose(s: &SecondaryStructure, m: &Match, g: &Grammar) -> Result<SecondaryStructure, GluingFailure> {
    let rule = m.rule;
    if m.added.len() != rule.arity() {
        return Err(GluingFailure::AddedArity { rule, expected: rule.arity(), found: m.added.len() });
    }
    let context_ok = match (rule.kind, rule.variant) {
        (LoopKind::MultiBranch, Variant::Rule1) => m.context.len() == 2,
        (LoopKind::MultiBranch, Variant::Rule2) => m.context.len() >= 3,
        (_, Variant::Rule1) => m.context.is_empty(),
        (_, Variant::Rule2) => m.context.len() == 1,
    };
    if !context_ok {
        return Err(GluingFailure::ContextArity { rule, found: m.context.len() });
    }
    if let Some(&missing) = m.context.iter().find(|p| !s.contains(**p)) {
        return Err(GluingFailure::ContextMissing(missing));
    }
    let h = s.with_pairs_added(&m.added, g.min_hairpin)?;
    let site = |reason| Err(GluingFailure::Site { rule, reason });

    match (rule.kind, rule.variant) {
        (LoopKind::Hairpin, _) => {
            let p = m.added[0];
            if !all_unpaired(s, p.i + 1, p.j) {
                return site("enclosed positions must be unpaired");
            }
            if p.j - p.i - 1 < g.min_hairpin {
                return site("hairpin shorter than the minimum");
            }
        }
        (LoopKind::MultiBranch, _) => {
            let p = m.added[0];
            if direct_branches(&h, p.i, p.j) != m.context {
                return site("context must be exactly the directly enclosed pairs");
            }
        }
        (kind, variant) => {
            let (outer, inner) = match variant {
                Variant::Rule1 => (m.added[0].min(m.added[1]), m.added[0].max(m.added[1])),
                Variant::Rule2 => {
                    let (a, c) = (m.added[0], m.context[0]);
                    if a.encloses(c) {
                        (a, c)
                    } else {
                        (c, a)
                    }
                }
            };
            if !outer.encloses(inner) {
                return site("the two pairs must be nested");
            }
            if !all_unpaired(s, outer.i + 1, inner.i) || !all_unpaired(s, inner.j + 1, outer.j) {
                return site("gap positions must be unpaired");
            }
            let (left, right) = gaps(outer, inner);
            if single_branch_kind(left, right) != kind {
                return site("gap shape does not match the loop kind");
            }
        }
    }
    Ok(h)
}

pub fn gluing_check(s: &SecondaryStructure, m: &Match, g: &Grammar) -> bool {
    gluing_diagnose(s, m, g).is_ok()
}

/// Every single pair whose addition to `s` leaves a valid structure.
fn addable_pairs(s: &SecondaryStructure, g: &Grammar) -> Vec<BasePair> {
    let n = s.len();
    let seq = s.sequence();
    let mut out = Vec::new();
    for i in 0..n {
        if s.is_paired(i) {
            continue;
        }
        // Furthest partner of a pair opened inside i+1..j-1; the interval is
        // closed (no pair leaves it) iff that partner is already behind j.
        let mut reach: Option<usize> = None;
        let mut holds_pair = false;
        for j in i + 1..n {
            let closed = reach.is_none_or(|r| r < j);
            if closed
                && !s.is_paired(j)
                && is_admissible_pair(seq.base(i), seq.base(j))
                && (holds_pair || j - i > g.min_hairpin)
            {
                out.push(BasePair { i, j });
            }
            if let Some(p) = s.partner(j) {
                if p < i {
                    break;
                }
                holds_pair = true;
                reach = Some(reach.map_or(p, |r| r.max(p)));
            }
        }
    }
    out
}

/// Innermost pair of `s` enclosing the (addable) pair `p`.
fn enclosing_pair(s: &SecondaryStructure, p: BasePair) -> Option<BasePair> {
    let mut k = p.i;
    while k > 0 {
        k -= 1;
        match s.partner(k) {
            Some(l) if l > k => return Some(BasePair { i: k, j: l }),
            Some(l) => k = l,
            None => {}
        }
    }
    None
}

/// All matches of all productions on `s`, sorted by rule, then added pairs,
/// then context.
pub fn enumerate_matches(s: &SecondaryStructure, g: &Grammar) -> Vec<Match> {
    let n = s.len();
    let seq = s.sequence();
    let mut out = Vec::new();
    let rule2 = |kind| RuleId { kind, variant: Variant::Rule2 };

    for p in addable_pairs(s, g) {
        // Loop closed by the new pair.
        let branches = direct_branches(s, p.i, p.j);
        match branches.len() {
            0 => out.push(Match {
                rule: RuleId { kind: LoopKind::Hairpin, variant: Variant::Rule1 },
                added: vec![p],
                context: vec![],
            }),
            1 => {
                let (left, right) = gaps(p, branches[0]);
                out.push(Match { rule: rule2(single_branch_kind(left, right)), added: vec![p], context: branches });
            }
            2 => out.push(Match {
                rule: RuleId { kind: LoopKind::MultiBranch, variant: Variant::Rule1 },
                added: vec![p],
                context: branches,
            }),
            _ => out.push(Match { rule: rule2(LoopKind::MultiBranch), added: vec![p], context: branches }),
        }

        // Loop the new pair becomes the sole branch of.
        if let Some(parent) = enclosing_pair(s, p) {
            if all_unpaired(s, parent.i + 1, p.i) && all_unpaired(s, p.j + 1, parent.j) {
                let (left, right) = gaps(parent, p);
                out.push(Match { rule: rule2(single_branch_kind(left, right)), added: vec![p], context: vec![parent] });
            }
        }

        // Two-pair productions with `p` as the inner pair.
        let mut i = p.i;
        while i > 0 && !s.is_paired(i - 1) {
            i -= 1;
            let mut j = p.j + 1;
            while j < n && !s.is_paired(j) {
                if is_admissible_pair(seq.base(i), seq.base(j)) {
                    let outer = BasePair { i, j };
                    let (left, right) = gaps(outer, p);
                    out.push(Match {
                        rule: RuleId { kind: single_branch_kind(left, right), variant: Variant::Rule1 },
                        added: vec![outer, p],
                        context: vec![],
                    });
                }
                j += 1;
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// One direct derivation step `s => h`.
pub fn apply_match(s: &SecondaryStructure, m: &Match, g: &Grammar) -> Result<SecondaryStructure, GrammarError> {
    gluing_diagnose(s, m, g).map_err(|failure| GrammarError::Gluing { m: m.clone(), failure })
}

/// Removes the pairs `m` added.
pub fn invert_match(s: &SecondaryStructure, m: &Match) -> Result<SecondaryStructure, GrammarError> {
    s.with_pairs_removed(&m.added).map_err(|source| GrammarError::NotInvertible { m: m.clone(), source })
}

/// Every `(m, r)` such that `r => s` by `m`: the inverse moves out of `s`.
/// Sorted by match.
pub fn inverse_matches(s: &SecondaryStructure, g: &Grammar) -> Vec<(Match, SecondaryStructure)> {
    let mut removable: Vec<Vec<BasePair>> = s.pairs().iter().map(|&p| vec![p]).collect();
    for &outer in s.pairs() {
        if let [inner] = direct_branches(s, outer.i, outer.j)[..] {
            removable.push(vec![outer, inner]);
        }
    }
    let mut out = Vec::new();
    for removed in removable {
        let Ok(r) = s.with_pairs_removed(&removed) else { continue };
        for m in enumerate_matches(&r, g) {
            if m.added == removed {
                out.push((m, r.clone()));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// `G_0 =>* G_n`: the structures after each step of `script`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub start: SecondaryStructure,
    pub steps: Vec<SecondaryStructure>,
}

impl Derivation {
    pub fn last(&self) -> &SecondaryStructure {
        self.steps.last().unwrap_or(&self.start)
    }
}

pub fn derive(s0: &SecondaryStructure, g: &Grammar, script: &[Match]) -> Result<Derivation, GrammarError> {
    let mut steps: Vec<SecondaryStructure> = Vec::with_capacity(script.len());
    for (step, m) in script.iter().enumerate() {
        let current = steps.last().unwrap_or(s0);
        let next = apply_match(current, m, g).map_err(|e| GrammarError::Derivation { step, source: Box::new(e) })?;
        steps.push(next);
    }
    Ok(Derivation { start: s0.clone(), steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{parse_dot_bracket, parse_sequence, DotBracketOptions};
    use std::sync::Arc;

    fn structure(seq: &str, db: &str, min_hairpin: usize) -> SecondaryStructure {
        let seq = Arc::new(parse_sequence(seq).unwrap());
        parse_dot_bracket(seq, db, DotBracketOptions { min_hairpin, strict: true }).unwrap()
    }

    fn rule(kind: LoopKind, variant: Variant) -> RuleId {
        RuleId::new(kind, variant).unwrap()
    }

    fn bp(i: usize, j: usize) -> BasePair {
        BasePair::new(i, j)
    }

    #[test]
    fn eleven_rules() {
        assert_eq!(RuleId::ALL.len(), 11);
        assert!(RuleId::new(LoopKind::Hairpin, Variant::Rule2).is_none());
        let mut sorted = RuleId::ALL.to_vec();
        sorted.sort();
        assert_eq!(sorted, RuleId::ALL.to_vec());
        for r in RuleId::ALL {
            assert_eq!(r.to_string().parse::<RuleId>().unwrap(), r);
        }
        assert_eq!(rule(LoopKind::Hairpin, Variant::Rule1).to_string(), "Hairpin-Rule1");
    }

    #[test]
    fn loop_kind_names() {
        assert_eq!("bulge-r".parse::<LoopKind>(), Ok(LoopKind::BulgeR));
        assert_eq!("internal".parse::<LoopKind>(), Ok(LoopKind::InternalLoop));
        assert_eq!("MultiBranch".parse::<LoopKind>(), Ok(LoopKind::MultiBranch));
        assert!("unknown".parse::<LoopKind>().is_err());
    }

    #[test]
    fn gluing_examples() {
        let g = Grammar::default();
        let hairpin = Match { rule: rule(LoopKind::Hairpin, Variant::Rule1), added: vec![bp(0, 4)], context: vec![] };
        assert!(gluing_check(&structure("GAAAC", ".....", 3), &hairpin, &g));
        assert!(!gluing_check(&structure("GAAAC", "(...)", 3), &hairpin, &g));

        let helix =
            Match { rule: rule(LoopKind::Helix, Variant::Rule1), added: vec![bp(0, 6), bp(1, 5)], context: vec![] };
        assert!(gluing_check(&structure("GGAAACC", ".......", 3), &helix, &g));
    }

    #[test]
    fn gluing_rejects_wrong_shapes() {
        let g = Grammar::new(1);
        let s = structure("GGGAAACCC", ".(.....).", 1);
        // Stacked outside (1,7): a helix, not a bulge.
        let m = Match { rule: rule(LoopKind::BulgeR, Variant::Rule2), added: vec![bp(0, 8)], context: vec![bp(1, 7)] };
        assert!(matches!(gluing_diagnose(&s, &m, &g), Err(GluingFailure::Site { .. })));
        let m = Match { rule: rule(LoopKind::Helix, Variant::Rule2), added: vec![bp(0, 8)], context: vec![bp(1, 7)] };
        assert!(gluing_check(&s, &m, &g));
        let m = Match { rule: rule(LoopKind::Helix, Variant::Rule2), added: vec![bp(0, 8)], context: vec![bp(2, 6)] };
        assert!(matches!(gluing_diagnose(&s, &m, &g), Err(GluingFailure::ContextMissing(_))));
        let m = Match { rule: rule(LoopKind::Helix, Variant::Rule1), added: vec![bp(0, 8)], context: vec![] };
        assert!(matches!(gluing_diagnose(&s, &m, &g), Err(GluingFailure::AddedArity { .. })));
        let m =
            Match { rule: rule(LoopKind::MultiBranch, Variant::Rule1), added: vec![bp(0, 8)], context: vec![bp(1, 7)] };
        assert!(matches!(gluing_diagnose(&s, &m, &g), Err(GluingFailure::ContextArity { .. })));
    }

    #[test]
    fn enumerate_small_cases() {
        let g = Grammar::default();
        let m = enumerate_matches(&structure("GAAAC", ".....", 3), &g);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].rule.to_string(), "Hairpin-Rule1");
        assert_eq!(m[0].added, vec![bp(0, 4)]);

        assert!(enumerate_matches(&structure("AAAA", "....", 3), &g).is_empty());
        assert!(enumerate_matches(&structure("GAAAC", "(...)", 3), &g).is_empty());
    }

    #[test]
    fn enumerate_gggaaaccc() {
        // 9 hairpins, 4 helix, 2+2 bulge, 1 internal; counted by hand in
        // the grammar docs and cross-checked against the oracle in tests/.
        let g = Grammar::default();
        let m = enumerate_matches(&structure("GGGAAACCC", ".........", 3), &g);
        let count = |k: LoopKind| m.iter().filter(|x| x.rule.kind == k).count();
        assert_eq!(count(LoopKind::Hairpin), 9);
        assert_eq!(count(LoopKind::Helix), 4);
        assert_eq!(count(LoopKind::BulgeR), 2);
        assert_eq!(count(LoopKind::BulgeL), 2);
        assert_eq!(count(LoopKind::InternalLoop), 1);
        assert_eq!(m.len(), 18);
        let mut sorted = m.clone();
        sorted.sort();
        assert_eq!(sorted, m);
    }

    #[test]
    fn multibranch_closing() {
        let g = Grammar::new(1);
        let s = structure("GGACGACGACC", ".(.)(.)(.).", 1);
        let m = enumerate_matches(&s, &g);
        let mb: Vec<_> = m.iter().filter(|x| x.rule.kind == LoopKind::MultiBranch).collect();
        assert_eq!(mb.len(), 1);
        assert_eq!(mb[0].rule.variant, Variant::Rule2);
        assert_eq!(mb[0].added, vec![bp(0, 10)]);
        assert_eq!(mb[0].context.len(), 3);

        let s = structure("GGACGACC", ".(.)(.).", 1);
        let m = enumerate_matches(&s, &g);
        assert!(m.iter().any(|x| x.rule == rule(LoopKind::MultiBranch, Variant::Rule1) && x.added == vec![bp(0, 7)]));
    }

    #[test]
    fn apply_and_invert() {
        let g = Grammar::default();
        let s0 = structure("GAAAC", ".....", 3);
        let m = enumerate_matches(&s0, &g).remove(0);
        let h = apply_match(&s0, &m, &g).unwrap();
        assert_eq!(h.dot_bracket(), "(...)");
        assert_eq!(s0.dot_bracket(), ".....");
        assert_eq!(invert_match(&h, &m).unwrap(), s0);
        assert!(apply_match(&h, &m, &g).is_err());

        let s0 = structure("GGAAACC", ".......", 3);
        let helix =
            Match { rule: rule(LoopKind::Helix, Variant::Rule1), added: vec![bp(0, 6), bp(1, 5)], context: vec![] };
        let h = apply_match(&s0, &helix, &g).unwrap();
        assert_eq!(h.dot_bracket(), "((...))");
        assert_eq!(invert_match(&h, &helix).unwrap().dot_bracket(), ".......");
        assert!(matches!(invert_match(&s0, &helix), Err(GrammarError::NotInvertible { .. })));
    }

    #[test]
    fn derivation_reports_failing_step() {
        let g = Grammar::default();
        let s0 = structure("GGGAAACCC", ".........", 3);
        let d = derive(&s0, &g, &[]).unwrap();
        assert_eq!(d.last(), &s0);

        let a = Match { rule: rule(LoopKind::Hairpin, Variant::Rule1), added: vec![bp(0, 8)], context: vec![] };
        let b = Match { rule: rule(LoopKind::Hairpin, Variant::Rule1), added: vec![bp(0, 7)], context: vec![] };
        match derive(&s0, &g, &[a.clone(), b]) {
            Err(GrammarError::Derivation { step, .. }) => assert_eq!(step, 1),
            other => panic!("unexpected {other:?}"),
        }
        let c = Match { rule: rule(LoopKind::Helix, Variant::Rule2), added: vec![bp(1, 7)], context: vec![bp(0, 8)] };
        let d = derive(&s0, &g, &[a, c]).unwrap();
        assert_eq!(d.steps.len(), 2);
        assert_eq!(d.last().dot_bracket(), "((.....))");
    }

    #[test]
    fn inverse_moves_lead_back() {
        let g = Grammar::default();
        let s = structure("GGGAAACCC", "((.....))", 3);
        let inv = inverse_matches(&s, &g);
        let keys: Vec<String> = inv.iter().map(|(_, r)| r.dot_bracket()).collect();
        assert!(keys.contains(&".(.....).".to_string()));
        assert!(keys.contains(&"(.......)".to_string()));
        assert!(keys.contains(&".........".to_string()));
        for (m, r) in &inv {
            assert_eq!(&apply_match(r, m, &g).unwrap(), &s);
        }
    }
}
