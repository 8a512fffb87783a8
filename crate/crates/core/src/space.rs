//! The folding space: every structure derivable from the open chain,
//! organised as a labelled transition system.
//!
//! States are identified by their dot-bracket key. Parallel edges with the
//! same source, target and rule are merged and keep a match count.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel, Observable};
use crate::grammar::{apply_match, enumerate_matches, Grammar, Match, RuleId};
use crate::scalar::{format_energy, Energy};
use crate::structure::{PrimarySequence, SecondaryStructure, StructureKey};

/// The growth rate quoted for unconstrained folding spaces, kept for
/// comparison in sweep reports.
pub const REFERENCE_BASE: f64 = 1.8;

/// Base of the default sweep family: the repeat `GCAU`, whose prefixes
/// pair in every register.
pub const SWEEP_BASE: &str = "GCAUGCAUGCAUGCAUGCAU";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExploreLimits {
    pub max_states: usize,
    pub max_depth: usize,
    pub time_budget: Option<Duration>,
    /// States above this energy are kept but not expanded. The unfolded
    /// chain is always expanded.
    pub energy_ceiling: Option<f64>,
}

impl Default for ExploreLimits {
    fn default() -> Self {
        ExploreLimits { max_states: 1_000_000, max_depth: usize::MAX, time_budget: None, energy_ceiling: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Truncation {
    MaxStates,
    MaxDepth,
    TimeBudget,
    EnergyCeiling,
}

impl Truncation {
    pub fn as_str(self) -> &'static str {
        match self {
            Truncation::MaxStates => "max_states",
            Truncation::MaxDepth => "max_depth",
            Truncation::TimeBudget => "time_budget",
            Truncation::EnergyCeiling => "energy_ceiling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Truncation::MaxStates, Truncation::MaxDepth, Truncation::TimeBudget, Truncation::EnergyCeiling]
            .into_iter()
            .find(|t| t.as_str() == s)
    }
}

#[derive(Clone, Debug)]
pub struct LtsState<T> {
    pub key: StructureKey,
    pub structure: SecondaryStructure,
    pub observable: Observable<T>,
    /// BFS distance from the open chain.
    pub depth: usize,
    pub expanded: bool,
    /// Expanded and without any match.
    pub terminal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rule: RuleId,
    pub matches: usize,
}

#[derive(Clone, Debug)]
pub struct Lts<T> {
    pub sequence: Arc<PrimarySequence>,
    pub grammar: Grammar,
    pub energy_mode: &'static str,
    pub states: Vec<LtsState<T>>,
    /// Grouped by source, then sorted by `(to, rule)`.
    pub transitions: Vec<Transition>,
    pub initial: usize,
    pub truncated_by: Option<Truncation>,
    index: HashMap<StructureKey, usize>,
}

impl<T: Energy> Lts<T> {
    pub fn is_complete(&self) -> bool {
        self.truncated_by.is_none()
    }

    pub fn state(&self, key: &str) -> Option<&LtsState<T>> {
        self.index_of(key).map(|i| &self.states[i])
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(&StructureKey::from_raw(key)).copied()
    }

    pub fn outgoing(&self, from: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.from == from)
    }
}

/// One entry per match on `s`, in match order.
pub fn successors(s: &SecondaryStructure, g: &Grammar) -> Vec<(Match, SecondaryStructure)> {
    enumerate_matches(s, g)
        .into_iter()
        .map(|m| {
            let h = apply_match(s, &m, g).expect("enumerated matches satisfy their gluing conditions");
            (m, h)
        })
        .collect()
}

/// Breadth-first closure from the open chain.
///
/// Levels are expanded in parallel and merged in frontier order, so the
/// result (state indices included) does not depend on the thread count.
pub fn build_lts<T: Energy>(
    seq: Arc<PrimarySequence>,
    g: &Grammar,
    em: &EnergyModel<T>,
    lim: &ExploreLimits,
) -> Result<Lts<T>, EnergyError> {
    let started = Instant::now();
    let g0 = SecondaryStructure::empty(seq.clone());
    let mut lts = Lts {
        sequence: seq,
        grammar: *g,
        energy_mode: em.mode_name(),
        states: Vec::new(),
        transitions: Vec::new(),
        initial: 0,
        truncated_by: None,
        index: HashMap::new(),
    };
    let key = g0.key();
    lts.index.insert(key.clone(), 0);
    lts.states.push(LtsState {
        key,
        observable: em.observable(&g0)?,
        structure: g0,
        depth: 0,
        expanded: false,
        terminal: false,
    });

    let mut truncations = Vec::new();
    let mut frontier = vec![0usize];
    let mut depth = 0;
    while !frontier.is_empty() {
        if lim.time_budget.is_some_and(|b| started.elapsed() >= b) {
            truncations.push(Truncation::TimeBudget);
            break;
        }
        let ceiling = lim.energy_ceiling.map(T::lit);
        frontier.retain(|&idx| {
            let st = &lts.states[idx];
            let pruned = match ceiling {
                Some(c) => st.observable.is_finite() && st.observable.value() > c,
                None => false,
            };
            if pruned {
                truncations.push(Truncation::EnergyCeiling);
            }
            !pruned
        });
        if depth >= lim.max_depth {
            if frontier.iter().any(|&idx| !enumerate_matches(&lts.states[idx].structure, g).is_empty()) {
                truncations.push(Truncation::MaxDepth);
            }
            break;
        }

        let expanded: Vec<Vec<(Match, SecondaryStructure)>> =
            frontier.par_iter().map(|&idx| successors(&lts.states[idx].structure, g)).collect();

        let first_new = lts.states.len();
        let mut next = Vec::new();
        for (&from, succs) in frontier.iter().zip(expanded) {
            lts.states[from].expanded = true;
            lts.states[from].terminal = succs.is_empty();
            let mut edges: BTreeMap<(usize, RuleId), usize> = BTreeMap::new();
            for (m, h) in succs {
                let key = h.key();
                let to = match lts.index.get(&key) {
                    Some(&to) => to,
                    None if lts.states.len() >= lim.max_states => {
                        truncations.push(Truncation::MaxStates);
                        continue;
                    }
                    None => {
                        let to = lts.states.len();
                        lts.index.insert(key.clone(), to);
                        lts.states.push(LtsState {
                            key,
                            structure: h,
                            observable: Observable::unfolded(),
                            depth: depth + 1,
                            expanded: false,
                            terminal: false,
                        });
                        next.push(to);
                        to
                    }
                };
                *edges.entry((to, m.rule)).or_insert(0) += 1;
            }
            lts.transitions.extend(edges.into_iter().map(|((to, rule), matches)| Transition {
                from,
                to,
                rule,
                matches,
            }));
        }

        let observables: Result<Vec<Observable<T>>, EnergyError> =
            lts.states[first_new..].par_iter().map(|st| em.observable(&st.structure)).collect();
        for (st, obs) in lts.states[first_new..].iter_mut().zip(observables?) {
            st.observable = obs;
        }

        frontier = next;
        depth += 1;
    }
    lts.truncated_by = truncations.into_iter().min();
    Ok(lts)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("no folded state: every explored structure is unpaired")]
    NoFoldedState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinState<T> {
    pub index: usize,
    pub observable: Observable<T>,
    /// False when the LTS was truncated: the value is then only an upper
    /// bound on the true minimum.
    pub exact: bool,
}

/// State with the lowest finite observable; ties go to the smaller key.
pub fn min_energy_state<T: Energy>(lts: &Lts<T>) -> Result<MinState<T>, SpaceError> {
    lts.states
        .iter()
        .enumerate()
        .filter(|(_, st)| st.observable.is_finite())
        .min_by(|(_, a), (_, b)| a.observable.total_cmp(&b.observable).then_with(|| a.key.cmp(&b.key)))
        .map(|(index, st)| MinState { index, observable: st.observable, exact: lts.is_complete() })
        .ok_or(SpaceError::NoFoldedState)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LtsStats {
    pub states: usize,
    pub transitions: usize,
    pub matches: usize,
    pub terminals: usize,
    /// `depth_histogram[d]` states at BFS depth `d`.
    pub depth_histogram: Vec<usize>,
    /// Merged transitions per rule.
    pub per_rule: BTreeMap<String, usize>,
    pub truncated_by: Option<String>,
}

pub fn stats<T: Energy>(lts: &Lts<T>) -> LtsStats {
    let max_depth = lts.states.iter().map(|s| s.depth).max().unwrap_or(0);
    let mut depth_histogram = vec![0; max_depth + 1];
    for st in &lts.states {
        depth_histogram[st.depth] += 1;
    }
    let mut per_rule = BTreeMap::new();
    for t in &lts.transitions {
        *per_rule.entry(t.rule.to_string()).or_insert(0) += 1;
    }
    LtsStats {
        states: lts.states.len(),
        transitions: lts.transitions.len(),
        matches: lts.transitions.iter().map(|t| t.matches).sum(),
        terminals: lts.states.iter().filter(|s| s.terminal).count(),
        depth_histogram,
        per_rule,
        truncated_by: lts.truncated_by.map(|t| t.as_str().to_string()),
    }
}

/// Least-squares slope of `ln(count)` against `n`, exponentiated. `None`
/// with fewer than two distinct lengths.
pub fn fit_exponential_base(points: &[(usize, usize)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(_, c)| *c > 0).map(|&(n, c)| (n as f64, (c as f64).ln())).collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let base = (sxy / sxx).exp();
    base.is_finite().then_some(base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub sequence: String,
    pub states: usize,
    pub truncated_by: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub fitted_base: Option<f64>,
    pub reference_base: f64,
}

impl SweepReport {
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[0].states <= w[1].states)
    }
}

/// State counts over a family of sequences and the fitted growth base.
pub fn sweep<T: Energy>(
    family: &[PrimarySequence],
    g: &Grammar,
    em: &EnergyModel<T>,
    lim: &ExploreLimits,
) -> Result<SweepReport, EnergyError> {
    let mut points = Vec::with_capacity(family.len());
    for seq in family {
        let lts = build_lts(Arc::new(seq.clone()), g, em, lim)?;
        points.push(SweepPoint {
            n: seq.len(),
            sequence: seq.to_string(),
            states: lts.states.len(),
            truncated_by: lts.truncated_by.map(|t| t.as_str().to_string()),
        });
    }
    let xy: Vec<(usize, usize)> = points.iter().map(|p| (p.n, p.states)).collect();
    Ok(SweepReport { fitted_base: fit_exponential_base(&xy), points, reference_base: REFERENCE_BASE })
}

/// Prefixes of `base` with lengths `lengths`; every structure of a prefix is
/// a structure of any longer prefix, so state counts never decrease.
pub fn prefix_family(base: &PrimarySequence, lengths: std::ops::RangeInclusive<usize>) -> Vec<PrimarySequence> {
    lengths
        .filter(|&n| n >= 1 && n <= base.len())
        .map(|n| PrimarySequence::new(base.bases()[..n].to_vec(), base.name().map(str::to_string)).expect("n >= 1"))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarDoc {
    pub min_hairpin: usize,
    pub allow_inverse: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub id: usize,
    pub db: String,
    pub energy: Observable<f64>,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDoc {
    pub from: usize,
    pub to: usize,
    pub rule: String,
    pub matches: usize,
}

/// JSON form of an LTS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtsDocument {
    pub sequence: String,
    pub grammar: GrammarDoc,
    pub energy_mode: String,
    pub states: Vec<StateDoc>,
    pub transitions: Vec<TransitionDoc>,
    pub initial: usize,
    pub truncated_by: Option<String>,
}

fn to_f64<T: Energy>(o: Observable<T>) -> Observable<f64> {
    if o.is_finite() {
        Observable::finite(o.value().to_f64_lossy())
    } else {
        Observable::unfolded()
    }
}

impl LtsDocument {
    pub fn from_lts<T: Energy>(lts: &Lts<T>) -> Self {
        LtsDocument {
            sequence: lts.sequence.to_string(),
            grammar: GrammarDoc { min_hairpin: lts.grammar.min_hairpin, allow_inverse: lts.grammar.allow_inverse },
            energy_mode: lts.energy_mode.to_string(),
            states: lts
                .states
                .iter()
                .enumerate()
                .map(|(id, st)| StateDoc {
                    id,
                    db: st.key.to_string(),
                    energy: to_f64(st.observable),
                    terminal: st.terminal,
                })
                .collect(),
            transitions: lts
                .transitions
                .iter()
                .map(|t| TransitionDoc { from: t.from, to: t.to, rule: t.rule.to_string(), matches: t.matches })
                .collect(),
            initial: lts.initial,
            truncated_by: lts.truncated_by.map(|t| t.as_str().to_string()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("LTS document does not match the schema: {0}")]
pub struct SchemaError(pub String);

/// Parses an exported JSON LTS and checks it against the schema.
pub fn validate_lts_json(text: &str) -> Result<LtsDocument, SchemaError> {
    let doc: LtsDocument = serde_json::from_str(text).map_err(|e| SchemaError(e.to_string()))?;
    let err = |m: String| Err(SchemaError(m));
    let n = doc.sequence.len();
    if n == 0 || !doc.sequence.chars().all(|c| "ACGU".contains(c)) {
        return err(format!("bad sequence {:?}", doc.sequence));
    }
    if !["nussinov", "loop-table", "external"].contains(&doc.energy_mode.as_str()) {
        return err(format!("unknown energy_mode {:?}", doc.energy_mode));
    }
    let mut seen = std::collections::HashSet::new();
    for (k, st) in doc.states.iter().enumerate() {
        if st.id != k {
            return err(format!("state {k} has id {}", st.id));
        }
        if st.db.len() != n || !st.db.chars().all(|c| ".()".contains(c)) {
            return err(format!("state {k}: bad dot-bracket {:?}", st.db));
        }
        if !seen.insert(st.db.as_str()) {
            return err(format!("duplicate state {:?}", st.db));
        }
    }
    if doc.initial >= doc.states.len() {
        return err(format!("initial {} out of range", doc.initial));
    }
    for t in &doc.transitions {
        if t.from >= doc.states.len() || t.to >= doc.states.len() {
            return err(format!("transition {}->{} out of range", t.from, t.to));
        }
        if t.rule.parse::<RuleId>().is_err() {
            return err(format!("unknown rule {:?}", t.rule));
        }
        if t.matches == 0 {
            return err("transition with zero matches".into());
        }
    }
    if let Some(t) = &doc.truncated_by {
        if Truncation::parse(t).is_none() {
            return err(format!("unknown truncation {t:?}"));
        }
    }
    Ok(doc)
}

pub fn export_lts<T: Energy>(lts: &Lts<T>, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&LtsDocument::from_lts(lts)).expect("serializable");
            s.push('\n');
            s
        }
        ExportFormat::Dot => {
            let mut s = String::new();
            writeln!(s, "digraph lts {{").unwrap();
            writeln!(s, "  node [shape=box, fontname=\"monospace\"];").unwrap();
            for (id, st) in lts.states.iter().enumerate() {
                let extra = if id == lts.initial { ", peripheries=2" } else { "" };
                writeln!(s, "  s{id} [label=\"{}\\n{}\"{extra}];", st.key, format_energy(st.observable.value()))
                    .unwrap();
            }
            for t in &lts.transitions {
                let label = if t.matches > 1 { format!("{} x{}", t.rule, t.matches) } else { t.rule.to_string() };
                writeln!(s, "  s{} -> s{} [label=\"{label}\"];", t.from, t.to).unwrap();
            }
            writeln!(s, "}}").unwrap();
            s
        }
    }
}
