//! RNA secondary-structure folding as graph rewriting.
//!
//! Structures are built from the open chain by an eleven-rule additive
//! grammar ([`grammar`]). The reachable structures form a labelled
//! transition system ([`space`]) whose states carry a free-energy observable
//! ([`energy`]). A two-level controller ([`sb`]) walks that system greedily
//! and switches into an adaptation search when the greedy invariant breaks.
//!
//! Energy-carrying types are generic over the scalar (`f32` or `f64`, see
//! [`Energy`]); the `*F64` aliases below are what the CLI uses.

pub mod energy;
pub mod grammar;
pub mod sb;
pub mod scalar;
pub mod space;
pub mod structure;

pub use energy::{
    decompose_loops, energy, load_parameters, observable, EnergyError, EnergyModel, ExternalEvaluator, Loop,
    LoopDecomposition, LoopTableParams, LoopType, Observable,
};
pub use grammar::{
    apply_match, derive, enumerate_matches, gluing_check, invert_match, Grammar, GrammarError, LoopKind, Match, RuleId,
    Variant,
};
pub use scalar::{format_energy, Energy};
pub use structure::{
    emit_dot_bracket, is_admissible_pair, parse_dot_bracket, parse_sequence, validate_structure, BasePair,
    DotBracketOptions, Nucleotide, PrimarySequence, SecondaryStructure, StructureError, StructureKey, ValidationReport,
    Violation,
};

/// Biological minimum number of unpaired nucleotides in a hairpin.
pub const DEFAULT_MIN_HAIRPIN: usize = 3;

/// Weakest hairpin bound the grammar's rule shapes allow: one nucleotide.
pub const RELAXED_MIN_HAIRPIN: usize = 1;

pub type ObservableF64 = Observable<f64>;
pub type ObservableF32 = Observable<f32>;
pub type EnergyModelF64 = EnergyModel<f64>;
pub type EnergyModelF32 = EnergyModel<f32>;
pub type LoopTableParamsF64 = LoopTableParams<f64>;
pub type LoopTableParamsF32 = LoopTableParams<f32>;
pub type LtsF64 = space::Lts<f64>;
pub type LtsF32 = space::Lts<f32>;
pub type TraceF64 = sb::Trace<f64>;
pub type TraceF32 = sb::Trace<f32>;
pub type SbControllerF64 = sb::SbController<f64>;
