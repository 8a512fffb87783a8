//! The run loop, adaptation search and traces.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyModel, Observable};
use crate::grammar::{inverse_matches, Grammar};
use crate::scalar::Energy;
use crate::space::successors;
use crate::structure::{PrimarySequence, SecondaryStructure, StructureKey};

use super::strategy::unvisited_moves;
use super::{Constraint, Context, Move, SbError, SbModel, StrategyRegistry, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdaptLimits {
    /// B-steps from the stuck structure. Zero only inspects the stuck
    /// structure itself.
    pub max_depth: usize,
    pub max_nodes: usize,
}

impl Default for AdaptLimits {
    fn default() -> Self {
        AdaptLimits { max_depth: 64, max_nodes: 200_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLimits {
    /// Controller iterations (steady steps plus adaptation phases).
    pub max_steps: usize,
    pub adapt: AdaptLimits,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits { max_steps: 10_000, adapt: AdaptLimits::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Steady,
    /// Originating S state and the admissible targets.
    Adapting {
        from: usize,
        candidates: Vec<usize>,
    },
}

impl Mode {
    fn name(&self) -> &'static str {
        match self {
            Mode::Steady => "steady",
            Mode::Adapting { .. } => "adapting",
        }
    }
}

/// `w[q]`: the coupled runtime state.
#[derive(Clone, Debug, PartialEq)]
pub struct SbConfiguration<T> {
    pub s_state: usize,
    pub structure: SecondaryStructure,
    pub observable: Observable<T>,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome<T> {
    Moved(Move<T>),
    AdaptationNeeded,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AdaptOutcome<T> {
    /// B-steps taken and the S state to resume in.
    Found {
        path: Vec<Move<T>>,
        target: usize,
    },
    Exhausted {
        limit_hit: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Adaptation searched everything reachable without finding a target.
    Exhausted,
    AdaptationLimit,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Energy")]
pub struct TraceRecord<T: Energy> {
    pub step: usize,
    pub s_state: String,
    pub structure: String,
    pub observable: Observable<T>,
    pub mode: String,
    /// Rule of the move that produced this structure.
    pub rule: Option<String>,
    #[serde(rename = "match")]
    pub site: Option<String>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Energy")]
pub struct TraceSummary<T: Energy> {
    pub sequence: String,
    pub final_s_state: String,
    pub final_structure: String,
    pub final_observable: Observable<T>,
    pub best_structure: String,
    pub best_observable: Observable<T>,
    pub steps: usize,
    pub adaptations: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace<T: Energy> {
    pub records: Vec<TraceRecord<T>>,
    pub summary: TraceSummary<T>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase", bound = "T: Energy")]
enum Line<'a, T: Energy> {
    Step(&'a TraceRecord<T>),
    Summary(&'a TraceSummary<T>),
}

impl<T: Energy> Trace<T> {
    /// One JSON object per line: the step records, then the summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let lines = self.records.iter().map(Line::Step).chain(std::iter::once(Line::Summary(&self.summary)));
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }
}

/// Greedy choice: the successor with the lowest observable (smallest key
/// on ties), provided it is no higher than `current`.
pub fn phi0_select<T: Energy>(current: Observable<T>, succs: &[Move<T>]) -> Option<&Move<T>> {
    succs
        .iter()
        .min_by(|a, b| a.observable.total_cmp(&b.observable).then_with(|| a.structure.key().cmp(&b.structure.key())))
        .filter(|best| best.observable.total_cmp(&current).is_le())
}

pub struct SbController<T: Energy> {
    pub model: SbModel,
    pub grammar: Grammar,
    pub energy: EnergyModel<T>,
    pub limits: RunLimits,
    pub seed: u64,
    registry: StrategyRegistry<T>,
}

struct RunState {
    visited: HashSet<StructureKey>,
    best: SecondaryStructure,
}

struct Node<T> {
    mv: Option<Move<T>>,
    structure: SecondaryStructure,
    observable: Observable<T>,
    parent: Option<usize>,
    depth: usize,
    psi_ok: Vec<bool>,
}

impl<T: Energy> SbController<T> {
    /// Fails if the machine names a strategy the default registry lacks.
    pub fn new(model: SbModel, grammar: Grammar, energy: EnergyModel<T>) -> Result<Self, SbError> {
        Self::with_registry(model, grammar, energy, StrategyRegistry::default())
    }

    pub fn with_registry(
        model: SbModel,
        grammar: Grammar,
        energy: EnergyModel<T>,
        registry: StrategyRegistry<T>,
    ) -> Result<Self, SbError> {
        for c in model.constraints() {
            if let Constraint::Strategy { name, .. } = c {
                registry.get(name)?;
            }
        }
        Ok(SbController { model, grammar, energy, limits: RunLimits::default(), seed: 0, registry })
    }

    pub fn with_limits(mut self, limits: RunLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn context<'a>(
        &'a self,
        structure: &'a SecondaryStructure,
        observable: Observable<T>,
        successors: &'a [Move<T>],
        run: &'a RunState,
        best_obs: Observable<T>,
    ) -> Context<'a, T> {
        Context {
            structure,
            observable,
            successors,
            visited: &run.visited,
            best: (&run.best, best_obs),
            grammar: &self.grammar,
            energy: &self.energy,
            seed: self.seed,
        }
    }

    pub fn check_constraint(&self, c: &Constraint, ctx: &Context<'_, T>) -> Result<Verdict<T>, SbError> {
        match c {
            Constraint::True => Ok(Verdict::Satisfied(None)),
            Constraint::Phi0Greedy => Ok(match phi0_select(ctx.observable, ctx.successors) {
                Some(mv) => Verdict::Satisfied(Some(mv.clone())),
                None => Verdict::Unsatisfied,
            }),
            Constraint::Strategy { name, params } => self.registry.get(name)?.check(ctx, params),
        }
    }

    fn steady_step(
        &self,
        cfg: &SbConfiguration<T>,
        run: &RunState,
        best_obs: Observable<T>,
    ) -> Result<StepOutcome<T>, SbError> {
        let succs = unvisited_moves(&cfg.structure, &self.grammar, &self.energy, &run.visited)?;
        let ctx = self.context(&cfg.structure, cfg.observable, &succs, run, best_obs);
        let c = &self.model.states[cfg.s_state].constraint;
        Ok(match self.check_constraint(c, &ctx)? {
            Verdict::Satisfied(Some(mv)) => StepOutcome::Moved(mv),
            Verdict::Satisfied(None) => match succs.into_iter().next() {
                Some(mv) => StepOutcome::Moved(mv),
                None => StepOutcome::AdaptationNeeded,
            },
            Verdict::Unsatisfied => StepOutcome::AdaptationNeeded,
        })
    }

    /// Breadth-first search from the stuck structure for the first
    /// unvisited structure where some S successor's constraint holds.
    fn adaptation_phase(
        &self,
        cfg: &SbConfiguration<T>,
        run: &RunState,
        best_obs: Observable<T>,
    ) -> Result<AdaptOutcome<T>, SbError> {
        let w = cfg.s_state;
        let candidates = &self.model.states[w].successors;
        let lim = self.limits.adapt;
        let mut nodes = vec![Node {
            mv: None,
            structure: cfg.structure.clone(),
            observable: cfg.observable,
            parent: None,
            depth: 0,
            psi_ok: vec![true; candidates.len()],
        }];
        let mut seen: HashSet<StructureKey> = HashSet::from([cfg.structure.key()]);
        let mut limit_hit = false;
        let mut head = 0;
        while head < nodes.len() {
            let x = head;
            head += 1;
            let depth = nodes[x].depth;
            let structure = nodes[x].structure.clone();
            let moves = unvisited_moves(&structure, &self.grammar, &self.energy, &run.visited)?;
            let ctx = self.context(&structure, nodes[x].observable, &moves, run, best_obs);

            if depth > 0 {
                for (ci, (_, psi)) in candidates.iter().enumerate() {
                    if nodes[x].psi_ok[ci] && !self.check_constraint(psi, &ctx)?.holds() {
                        nodes[x].psi_ok[ci] = false;
                    }
                }
                if !nodes[x].psi_ok.iter().any(|&ok| ok) {
                    continue;
                }
            }
            if depth == 0 || !run.visited.contains(&structure.key()) {
                for (ci, (target, _)) in candidates.iter().enumerate() {
                    if !nodes[x].psi_ok[ci] || (depth == 0 && *target == w) {
                        continue;
                    }
                    if self.check_constraint(&self.model.states[*target].constraint, &ctx)?.holds() {
                        let mut path = Vec::new();
                        let mut k = Some(x);
                        while let Some(i) = k {
                            path.extend(nodes[i].mv.clone());
                            k = nodes[i].parent;
                        }
                        path.reverse();
                        return Ok(AdaptOutcome::Found { path, target: *target });
                    }
                }
            }

            let mut children: Vec<Move<T>> = Vec::new();
            let forward = successors(&structure, &self.grammar);
            let inverse =
                if self.grammar.allow_inverse { inverse_matches(&structure, &self.grammar) } else { Vec::new() };
            if depth >= lim.max_depth {
                limit_hit |= !forward.is_empty() || !inverse.is_empty();
                continue;
            }
            for (m, h, inv) in
                forward.into_iter().map(|(m, h)| (m, h, false)).chain(inverse.into_iter().map(|(m, h)| (m, h, true)))
            {
                if !seen.insert(h.key()) {
                    continue;
                }
                if nodes.len() >= lim.max_nodes {
                    limit_hit = true;
                    break;
                }
                let observable = self.energy.observable(&h)?;
                children.push(Move { m: Some(m), inverse: inv, structure: h, observable });
            }
            let psi_ok = nodes[x].psi_ok.clone();
            for mv in children {
                nodes.push(Node {
                    structure: mv.structure.clone(),
                    observable: mv.observable,
                    mv: Some(mv),
                    parent: Some(x),
                    depth: depth + 1,
                    psi_ok: psi_ok.clone(),
                });
            }
        }
        Ok(AdaptOutcome::Exhausted { limit_hit })
    }

    pub fn run(&self, seq: Arc<PrimarySequence>) -> Result<Trace<T>, SbError> {
        let g0 = SecondaryStructure::empty(seq.clone());
        let mut cfg = SbConfiguration {
            s_state: self.model.initial,
            observable: self.energy.observable(&g0)?,
            structure: g0.clone(),
            mode: Mode::Steady,
        };
        let mut run = RunState { visited: HashSet::from([g0.key()]), best: g0 };
        let mut best_obs = cfg.observable;
        let mut records = vec![self.record(0, &cfg, None, Some("start".into()))];
        let mut adaptations = 0;
        let mut iterations = 0;

        let termination = loop {
            if iterations >= self.limits.max_steps {
                break Termination::StepLimit;
            }
            iterations += 1;
            match self.steady_step(&cfg, &run, best_obs)? {
                StepOutcome::Moved(mv) => {
                    self.enter(&mut cfg, &mut run, &mut best_obs, &mv);
                    records.push(self.record(records.len(), &cfg, Some(&mv), None));
                    continue;
                }
                StepOutcome::AdaptationNeeded => {}
            }
            let from = cfg.s_state;
            cfg.mode = Mode::Adapting {
                from,
                candidates: self.model.states[from].successors.iter().map(|(t, _)| *t).collect(),
            };
            match self.adaptation_phase(&cfg, &run, best_obs)? {
                AdaptOutcome::Found { path, target } => {
                    adaptations += 1;
                    let note = format!("adaptation {} -> {}", self.model.states[from].id, self.model.states[target].id);
                    if path.is_empty() {
                        cfg.s_state = target;
                        records.push(self.record(records.len(), &cfg, None, Some(note.clone())));
                    }
                    for (k, mv) in path.iter().enumerate() {
                        self.enter(&mut cfg, &mut run, &mut best_obs, mv);
                        if k + 1 == path.len() {
                            cfg.s_state = target;
                        }
                        let note = (k == 0).then(|| note.clone());
                        records.push(self.record(records.len(), &cfg, Some(mv), note));
                    }
                    cfg.mode = Mode::Steady;
                }
                AdaptOutcome::Exhausted { limit_hit } => {
                    break if limit_hit { Termination::AdaptationLimit } else { Termination::Exhausted };
                }
            }
        };

        let summary = TraceSummary {
            sequence: seq.to_string(),
            final_s_state: self.model.states[cfg.s_state].id.clone(),
            final_structure: cfg.structure.dot_bracket(),
            final_observable: cfg.observable,
            best_structure: run.best.dot_bracket(),
            best_observable: best_obs,
            steps: records.len() - 1,
            adaptations,
            termination,
        };
        Ok(Trace { records, summary })
    }

    fn enter(&self, cfg: &mut SbConfiguration<T>, run: &mut RunState, best_obs: &mut Observable<T>, mv: &Move<T>) {
        cfg.structure = mv.structure.clone();
        cfg.observable = mv.observable;
        run.visited.insert(mv.structure.key());
        if mv.observable.total_cmp(best_obs).is_lt() {
            *best_obs = mv.observable;
            run.best = mv.structure.clone();
        }
    }

    fn record(
        &self,
        step: usize,
        cfg: &SbConfiguration<T>,
        mv: Option<&Move<T>>,
        note: Option<String>,
    ) -> TraceRecord<T> {
        TraceRecord {
            step,
            s_state: self.model.states[cfg.s_state].id.clone(),
            structure: cfg.structure.dot_bracket(),
            observable: cfg.observable,
            mode: cfg.mode.name().to_string(),
            rule: mv.map(Move::label),
            site: mv.and_then(|mv| mv.m.as_ref()).map(|m| m.to_string()),
            note,
        }
    }
}

/// One run with the default strategy registry.
pub fn run<T: Energy>(
    sb: &SbModel,
    seq: Arc<PrimarySequence>,
    g: &Grammar,
    em: &EnergyModel<T>,
    lim: &RunLimits,
) -> Result<Trace<T>, SbError> {
    SbController::new(sb.clone(), *g, em.clone())?.with_limits(*lim).run(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::parse_sequence;
    use std::collections::BTreeMap;

    fn fold(seq: &str) -> Trace<f64> {
        let seq = Arc::new(parse_sequence(seq).unwrap());
        run(&SbModel::default(), seq, &Grammar::default(), &EnergyModel::Nussinov, &RunLimits::default()).unwrap()
    }

    #[test]
    fn gggaaaccc_greedy_and_adaptation() {
        // The lexicographic tie-break among the -2 successors picks
        // "((....)).", a terminal structure, so forward-only runs stop there.
        let t = fold("GGGAAACCC");
        assert_eq!(t.records[1].observable.value(), -2.0);
        assert_eq!(t.summary.final_structure, "((....)).");
        assert_eq!(t.summary.termination, Termination::Exhausted);

        // Inverse moves during adaptation escape it and visit the optimum.
        let seq = Arc::new(parse_sequence("GGGAAACCC").unwrap());
        let g = Grammar::default().with_inverse(true);
        let t = run(&SbModel::default(), seq, &g, &EnergyModel::<f64>::Nussinov, &RunLimits::default()).unwrap();
        assert_eq!(t.summary.best_structure, "(((...)))");
        assert_eq!(t.summary.best_observable.value(), -3.0);
        assert!(t
            .records
            .iter()
            .any(|r| r.mode == "adapting" && r.rule.as_deref().is_some_and(|r| r.starts_with("inverse"))));
    }

    #[test]
    fn trivial_runs() {
        let t = fold("AAAA");
        assert_eq!(t.records.len(), 1);
        assert!(!t.summary.best_observable.is_finite());

        let t = fold("GAAAC");
        let keys: Vec<&str> = t.records.iter().map(|r| r.structure.as_str()).collect();
        assert_eq!(keys, [".....", "(...)"]);
        assert_eq!(t.summary.best_observable.value(), -1.0);
    }

    #[test]
    fn phi0_examples() {
        let seq = Arc::new(parse_sequence("GAAAC").unwrap());
        let s = SecondaryStructure::empty(seq);
        let mv = |v: f64| Move { m: None, inverse: false, structure: s.clone(), observable: Observable::finite(v) };
        let succs = [mv(4.8), mv(2.6)];
        assert_eq!(phi0_select(Observable::unfolded(), &succs).unwrap().observable.value(), 2.6);
        assert!(phi0_select(Observable::finite(2.6), &[mv(3.9)]).is_none());
        assert!(phi0_select::<f64>(Observable::unfolded(), &[]).is_none());
    }

    #[test]
    fn constraints_and_registry() {
        let seq = Arc::new(parse_sequence("GAAAC").unwrap());
        let s = SecondaryStructure::empty(seq);
        let c = SbController::<f64>::new(SbModel::default(), Grammar::default(), EnergyModel::Nussinov).unwrap();
        let visited = HashSet::new();
        let ctx = Context {
            structure: &s,
            observable: Observable::unfolded(),
            successors: &[],
            visited: &visited,
            best: (&s, Observable::unfolded()),
            grammar: &c.grammar,
            energy: &c.energy,
            seed: 0,
        };
        assert!(c.check_constraint(&Constraint::True, &ctx).unwrap().holds());
        assert!(!c.check_constraint(&Constraint::Phi0Greedy, &ctx).unwrap().holds());
        let bogus = Constraint::Strategy { name: "frobnicate".into(), params: BTreeMap::new() };
        assert_eq!(c.check_constraint(&bogus, &ctx), Err(SbError::UnknownStrategy("frobnicate".into())));

        let mut model = SbModel::default();
        model.states[0].constraint = bogus;
        assert!(SbController::<f64>::new(model, Grammar::default(), EnergyModel::Nussinov).is_err());
    }

    #[test]
    fn jsonl_shape() {
        let t = fold("GAAAC");
        let text = t.to_jsonl();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0]["type"], "step");
        assert_eq!(lines[0]["observable"], "+inf");
        assert_eq!(lines[1]["rule"], "Hairpin-Rule1");
        assert_eq!(lines[2]["type"], "summary");
        assert_eq!(lines[2]["termination"], "exhausted");
        assert_eq!(text, fold("GAAAC").to_jsonl());
    }

    #[test]
    fn zero_depth_adaptation_terminates() {
        let seq = Arc::new(parse_sequence("GGGAAACCC").unwrap());
        let lim = RunLimits { adapt: AdaptLimits { max_depth: 0, ..Default::default() }, ..Default::default() };
        let g = Grammar::default().with_inverse(true);
        let t = run(&SbModel::default(), seq, &g, &EnergyModel::<f64>::Nussinov, &lim).unwrap();
        assert_eq!(t.summary.termination, Termination::AdaptationLimit);
        assert_eq!(t.summary.best_structure, "((....)).");
    }
}
