//! Free-energy evaluation: the observable the controller reacts to.
//!
//! Three interchangeable models. Nussinov scores `-1` per pair. LoopTable
//! sums per-loop contributions over [`decompose_loops`]. External delegates
//! to a command.

mod external;
mod loops;
mod params;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{external_evaluate, ExternalError, ExternalEvaluator, COMMAND_ENV, DEFAULT_TIMEOUT};
pub use loops::{decompose_loops, Loop, LoopDecomposition, LoopType};
pub use params::{
    length_energy, load_parameters, LoopTableParams, MultiBranchParams, ParamError, EXTRAPOLATION_SLOPE, MAX_TABLE_LEN,
};

use crate::scalar::{format_energy, Energy};
use crate::structure::{PrimarySequence, SecondaryStructure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("external value {0} is not representable in the energy scalar")]
    Unrepresentable(f64),
}

#[derive(Clone, Debug, Default)]
pub enum EnergyModel<T> {
    #[default]
    Nussinov,
    LoopTable(LoopTableParams<T>),
    External(Arc<ExternalEvaluator>),
}

impl<T: Energy> EnergyModel<T> {
    pub fn mode_name(&self) -> &'static str {
        match self {
            EnergyModel::Nussinov => "nussinov",
            EnergyModel::LoopTable(_) => "loop-table",
            EnergyModel::External(_) => "external",
        }
    }

    /// Contribution of one loop. Zero for every loop under Nussinov and
    /// External, whose totals are not loop-additive.
    pub fn loop_energy(&self, seq: &PrimarySequence, l: &Loop) -> T {
        let EnergyModel::LoopTable(p) = self else {
            return T::zero();
        };
        match l.kind {
            LoopType::Exterior => T::zero(),
            LoopType::Hairpin => p.hairpin_energy(l.unpaired()),
            LoopType::Stack => {
                let outer = seq.pair_type(l.closing.expect("closed loop")).expect("valid pair");
                let inner = seq.pair_type(l.branches[0]).expect("valid pair");
                p.stack_energy(outer, inner)
            }
            LoopType::Bulge => p.bulge_energy(l.unpaired()),
            LoopType::Internal => p.internal_energy(l.unpaired()),
            LoopType::MultiBranch => p.multibranch_energy(l.branches.len(), l.unpaired()),
        }
    }

    /// Free energy of a valid structure, kcal/mol.
    pub fn energy(&self, s: &SecondaryStructure) -> Result<T, EnergyError> {
        match self {
            EnergyModel::Nussinov => Ok(-T::lit(s.pair_count() as f64)),
            EnergyModel::LoopTable(_) => {
                let d = decompose_loops(s);
                Ok(d.loops.iter().fold(T::zero(), |acc, l| acc + self.loop_energy(s.sequence(), l)))
            }
            EnergyModel::External(adapter) => {
                let v = external_evaluate(adapter, s.sequence(), s)?;
                T::from_f64(v).ok_or(EnergyError::Unrepresentable(v))
            }
        }
    }

    /// `+inf` for a structure without pairs, the energy otherwise.
    pub fn observable(&self, s: &SecondaryStructure) -> Result<Observable<T>, EnergyError> {
        if s.pair_count() == 0 {
            Ok(Observable::unfolded())
        } else {
            self.energy(s).map(Observable::finite)
        }
    }
}

pub fn energy<T: Energy>(s: &SecondaryStructure, m: &EnergyModel<T>) -> Result<T, EnergyError> {
    m.energy(s)
}

pub fn observable<T: Energy>(s: &SecondaryStructure, m: &EnergyModel<T>) -> Result<Observable<T>, EnergyError> {
    m.observable(s)
}

/// An extended-real energy: finite, or `+inf` for the unfolded chain.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Observable<T>(T);

impl<T: Energy> Observable<T> {
    pub fn unfolded() -> Self {
        Observable(T::infinity())
    }

    pub fn finite(v: T) -> Self {
        Observable(v)
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// Total order; values are never NaN.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal)
    }
}

impl<T: Energy> fmt::Display for Observable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_energy(self.0))
    }
}

/// Finite values as JSON numbers, infinity as the string `"+inf"`.
impl<T: Energy> Serialize for Observable<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0.to_f64_lossy())
        } else {
            serializer.serialize_str("+inf")
        }
    }
}

impl<'de, T: Energy> Deserialize<'de> for Observable<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => {
                T::from_f64(v).map(Observable).ok_or_else(|| serde::de::Error::custom("energy out of range"))
            }
            Repr::Text(t) if t == "+inf" => Ok(Observable::unfolded()),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad energy {t:?}"))),
        }
    }
}
