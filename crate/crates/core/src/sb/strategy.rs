//! Pluggable constraints.
//!
//! Two reference strategies are registered by default. `lookahead` holds
//! when a structure strictly below the current one is reachable within
//! `depth` forward steps (default 2). `restart-best` holds when the best
//! structure seen so far still has an unvisited successor and jumps there.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::energy::{EnergyModel, Observable};
use crate::grammar::{Grammar, Match};
use crate::scalar::Energy;
use crate::space::successors;
use crate::structure::{SecondaryStructure, StructureKey};

use super::SbError;

/// A candidate move of the controller.
#[derive(Clone, Debug, PartialEq)]
pub struct Move<T> {
    /// `None` for jumps that are not grammar moves.
    pub m: Option<Match>,
    pub inverse: bool,
    pub structure: SecondaryStructure,
    pub observable: Observable<T>,
}

impl<T: Energy> Move<T> {
    pub fn label(&self) -> String {
        match (&self.m, self.inverse) {
            (Some(m), false) => m.rule.to_string(),
            (Some(m), true) => format!("inverse {}", m.rule),
            (None, _) => "jump".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict<T> {
    Unsatisfied,
    /// Satisfied; the witness is the move to take, if the constraint names one.
    Satisfied(Option<Move<T>>),
}

impl<T> Verdict<T> {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Satisfied(_))
    }
}

/// What a constraint may look at.
pub struct Context<'a, T> {
    pub structure: &'a SecondaryStructure,
    pub observable: Observable<T>,
    /// Forward successors not yet visited in this run, in match order.
    pub successors: &'a [Move<T>],
    pub visited: &'a HashSet<StructureKey>,
    pub best: (&'a SecondaryStructure, Observable<T>),
    pub grammar: &'a Grammar,
    pub energy: &'a EnergyModel<T>,
    /// Reserved for randomised strategies; the built-in ones ignore it.
    pub seed: u64,
}

pub trait Strategy<T: Energy>: Send + Sync {
    fn check(&self, ctx: &Context<'_, T>, params: &BTreeMap<String, f64>) -> Result<Verdict<T>, SbError>;
}

pub struct StrategyRegistry<T> {
    entries: BTreeMap<String, Arc<dyn Strategy<T>>>,
}

impl<T: Energy> Default for StrategyRegistry<T> {
    fn default() -> Self {
        let mut r = StrategyRegistry::empty();
        r.register("lookahead", Arc::new(Lookahead));
        r.register("restart-best", Arc::new(RestartBest));
        r
    }
}

impl<T: Energy> StrategyRegistry<T> {
    pub fn empty() -> Self {
        StrategyRegistry { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, s: Arc<dyn Strategy<T>>) {
        self.entries.insert(name.to_string(), s);
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn Strategy<T>>, SbError> {
        self.entries.get(name).ok_or_else(|| SbError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Forward successors of `s` outside `visited`, with observables.
pub(crate) fn unvisited_moves<T: Energy>(
    s: &SecondaryStructure,
    g: &Grammar,
    em: &EnergyModel<T>,
    visited: &HashSet<StructureKey>,
) -> Result<Vec<Move<T>>, SbError> {
    let mut out = Vec::new();
    for (m, h) in successors(s, g) {
        if visited.contains(&h.key()) {
            continue;
        }
        let observable = em.observable(&h)?;
        out.push(Move { m: Some(m), inverse: false, structure: h, observable });
    }
    Ok(out)
}

pub struct Lookahead;

impl<T: Energy> Strategy<T> for Lookahead {
    fn check(&self, ctx: &Context<'_, T>, params: &BTreeMap<String, f64>) -> Result<Verdict<T>, SbError> {
        let depth = params.get("depth").copied().unwrap_or(2.0).max(1.0) as usize;
        // (structure, index of the first step from ctx.successors)
        let mut queue: VecDeque<(SecondaryStructure, usize, usize)> = VecDeque::new();
        let mut seen: HashSet<StructureKey> = HashSet::new();
        let mut best: Option<(Observable<T>, StructureKey, usize)> = None;
        let mut consider = |obs: Observable<T>, key: StructureKey, first: usize| {
            if obs.total_cmp(&ctx.observable).is_lt() {
                let better = match &best {
                    None => true,
                    Some((o, k, _)) => obs.total_cmp(o).then_with(|| key.cmp(k)).is_lt(),
                };
                if better {
                    best = Some((obs, key, first));
                }
            }
        };
        for (first, mv) in ctx.successors.iter().enumerate() {
            let key = mv.structure.key();
            if seen.insert(key.clone()) {
                consider(mv.observable, key, first);
                queue.push_back((mv.structure.clone(), first, 1));
            }
        }
        while let Some((s, first, d)) = queue.pop_front() {
            if d >= depth {
                continue;
            }
            for (_, h) in successors(&s, ctx.grammar) {
                let key = h.key();
                if ctx.visited.contains(&key) || !seen.insert(key.clone()) {
                    continue;
                }
                consider(ctx.energy.observable(&h)?, key, first);
                queue.push_back((h, first, d + 1));
            }
        }
        Ok(match best {
            Some((_, _, first)) => Verdict::Satisfied(Some(ctx.successors[first].clone())),
            None => Verdict::Unsatisfied,
        })
    }
}

pub struct RestartBest;

impl<T: Energy> Strategy<T> for RestartBest {
    fn check(&self, ctx: &Context<'_, T>, _params: &BTreeMap<String, f64>) -> Result<Verdict<T>, SbError> {
        let moves = unvisited_moves(ctx.best.0, ctx.grammar, ctx.energy, ctx.visited)?;
        let pick = moves.into_iter().min_by(|a, b| {
            a.observable.total_cmp(&b.observable).then_with(|| a.structure.key().cmp(&b.structure.key()))
        });
        Ok(match pick {
            Some(mut mv) => {
                if ctx.best.0 != ctx.structure {
                    mv.m = None;
                }
                Verdict::Satisfied(Some(mv))
            }
            None => Verdict::Unsatisfied,
        })
    }
}
