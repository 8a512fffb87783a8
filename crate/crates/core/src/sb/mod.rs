//! The two-level controller.
//!
//! An S machine is a small automaton over named states `w0, w1, ...`, each
//! carrying a [`Constraint`]. The controlled B level is the folding space.
//! While the constraint of the current S state is satisfiable the
//! controller takes steady steps; otherwise it runs a breadth-first
//! adaptation search for a structure where some S successor's constraint
//! holds, keeping each transition's `psi` satisfied on the way.
//!
//! Machine files are TOML:
//!
//! ```toml
//! initial = "w0"
//!
//! [[state]]
//! id = "w0"
//! constraint = "phi0"
//!
//! [[state]]
//! id = "w1"
//! constraint = { strategy = "lookahead", depth = 3 }
//!
//! [[transition]]
//! from = "w0"
//! to = "w1"
//! psi = "true"
//! ```
//!
//! A constraint is `"phi0"`, `"true"`, or a table naming a registered
//! strategy plus numeric parameters.

mod controller;
mod strategy;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyError;

pub use controller::{
    phi0_select, run, AdaptLimits, AdaptOutcome, Mode, RunLimits, SbConfiguration, SbController, StepOutcome,
    Termination, Trace, TraceRecord, TraceSummary,
};
pub use strategy::{Context, Lookahead, Move, RestartBest, Strategy, StrategyRegistry, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbError {
    #[error("unregistered strategy {0:?}")]
    UnknownStrategy(String),
    #[error("S machine: {0}")]
    Config(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// Greedy descent: a successor whose observable is minimal and no
    /// higher than the current one.
    Phi0Greedy,
    True,
    Strategy {
        name: String,
        params: BTreeMap<String, f64>,
    },
}

impl Constraint {
    pub fn label(&self) -> String {
        match self {
            Constraint::Phi0Greedy => "phi0".into(),
            Constraint::True => "true".into(),
            Constraint::Strategy { name, .. } => name.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SState {
    pub id: String,
    pub constraint: Constraint,
    /// `(target index, psi)` in file order.
    pub successors: Vec<(usize, Constraint)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SbModel {
    pub states: Vec<SState>,
    pub initial: usize,
}

impl Default for SbModel {
    /// `w0` with the greedy constraint and an unrestricted self-loop.
    fn default() -> Self {
        SbModel {
            states: vec![SState {
                id: "w0".into(),
                constraint: Constraint::Phi0Greedy,
                successors: vec![(0, Constraint::True)],
            }],
            initial: 0,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConstraintSpec {
    Named(String),
    Strategy {
        strategy: String,
        #[serde(flatten)]
        params: BTreeMap<String, f64>,
    },
}

impl ConstraintSpec {
    fn resolve(self) -> Constraint {
        match self {
            ConstraintSpec::Named(s) if s == "phi0" => Constraint::Phi0Greedy,
            ConstraintSpec::Named(s) if s == "true" => Constraint::True,
            ConstraintSpec::Named(name) => Constraint::Strategy { name, params: BTreeMap::new() },
            ConstraintSpec::Strategy { strategy, params } => Constraint::Strategy { name: strategy, params },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSpec {
    id: String,
    constraint: ConstraintSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionSpec {
    from: String,
    to: String,
    psi: Option<ConstraintSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineSpec {
    initial: Option<String>,
    #[serde(default, rename = "state")]
    states: Vec<StateSpec>,
    #[serde(default, rename = "transition")]
    transitions: Vec<TransitionSpec>,
}

/// Serializable view used in trace headers and reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SStateSummary {
    pub id: String,
    pub constraint: String,
}

impl SbModel {
    pub fn from_toml(text: &str) -> Result<Self, SbError> {
        let spec: MachineSpec = toml::from_str(text).map_err(|e| SbError::Config(e.message().to_string()))?;
        if spec.states.is_empty() {
            return Err(SbError::Config("no [[state]] entries".into()));
        }
        let mut states: Vec<SState> = Vec::with_capacity(spec.states.len());
        for st in spec.states {
            if states.iter().any(|s| s.id == st.id) {
                return Err(SbError::Config(format!("duplicate state {:?}", st.id)));
            }
            states.push(SState { id: st.id, constraint: st.constraint.resolve(), successors: Vec::new() });
        }
        let find = |id: &str, states: &[SState]| {
            states.iter().position(|s| s.id == id).ok_or_else(|| SbError::Config(format!("unknown state {id:?}")))
        };
        for t in spec.transitions {
            let from = find(&t.from, &states)?;
            let to = find(&t.to, &states)?;
            let psi = t.psi.map(ConstraintSpec::resolve).unwrap_or(Constraint::True);
            states[from].successors.push((to, psi));
        }
        let initial = match spec.initial {
            Some(id) => find(&id, &states)?,
            None => 0,
        };
        Ok(SbModel { states, initial })
    }

    pub fn load(path: &Path) -> Result<Self, SbError> {
        let text = std::fs::read_to_string(path).map_err(|e| SbError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    /// Every constraint in the machine, states first.
    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.states
            .iter()
            .map(|s| &s.constraint)
            .chain(self.states.iter().flat_map(|s| s.successors.iter().map(|(_, psi)| psi)))
    }

    pub fn summary(&self) -> Vec<SStateSummary> {
        self.states.iter().map(|s| SStateSummary { id: s.id.clone(), constraint: s.constraint.label() }).collect()
    }
}
