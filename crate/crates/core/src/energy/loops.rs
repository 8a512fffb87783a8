use serde::{Deserialize, Serialize};

use crate::grammar::direct_branches;
use crate::structure::{BasePair, SecondaryStructure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LoopType {
    Hairpin,
    Stack,
    Bulge,
    Internal,
    MultiBranch,
    Exterior,
}

impl LoopType {
    pub fn name(self) -> &'static str {
        match self {
            LoopType::Hairpin => "hairpin",
            LoopType::Stack => "stack",
            LoopType::Bulge => "bulge",
            LoopType::Internal => "internal",
            LoopType::MultiBranch => "multibranch",
            LoopType::Exterior => "exterior",
        }
    }
}

/// The region closed by one pair (or the top level, for the exterior loop).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Loop {
    pub kind: LoopType,
    pub closing: Option<BasePair>,
    /// Pairs directly inside, left to right.
    pub branches: Vec<BasePair>,
    /// Unpaired run lengths between consecutive boundaries, left to right;
    /// always `branches.len() + 1` entries.
    pub gaps: Vec<usize>,
}

impl Loop {
    pub fn unpaired(&self) -> usize {
        self.gaps.iter().sum()
    }
}

/// Exterior loop first, then one loop per pair in pair order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopDecomposition {
    pub loops: Vec<Loop>,
}

impl LoopDecomposition {
    pub fn exterior(&self) -> &Loop {
        &self.loops[0]
    }

    pub fn closed_by(&self, pair: BasePair) -> Option<&Loop> {
        self.loops.iter().find(|l| l.closing == Some(pair))
    }

    pub fn count(&self, kind: LoopType) -> usize {
        self.loops.iter().filter(|l| l.kind == kind).count()
    }
}

fn gap_runs(start: usize, end: usize, branches: &[BasePair]) -> Vec<usize> {
    let mut gaps = Vec::with_capacity(branches.len() + 1);
    let mut cursor = start;
    for b in branches {
        gaps.push(b.i - cursor);
        cursor = b.j + 1;
    }
    gaps.push(end - cursor);
    gaps
}

/// Classifies the loop closed by each pair by its direct interior.
///
/// `s` must be valid (non-crossing, no shared positions).
pub fn decompose_loops(s: &SecondaryStructure) -> LoopDecomposition {
    let n = s.len();
    let mut loops = Vec::with_capacity(s.pair_count() + 1);

    let mut top = Vec::new();
    let mut k = 0;
    while k < n {
        match s.partner(k) {
            Some(l) if l > k => {
                top.push(BasePair { i: k, j: l });
                k = l + 1;
            }
            _ => k += 1,
        }
    }
    loops.push(Loop { kind: LoopType::Exterior, closing: None, gaps: gap_runs(0, n, &top), branches: top });

    for &pair in s.pairs() {
        let branches = direct_branches(s, pair.i, pair.j);
        let gaps = gap_runs(pair.i + 1, pair.j, &branches);
        let kind = match branches.len() {
            0 => LoopType::Hairpin,
            1 => match (gaps[0] > 0, gaps[1] > 0) {
                (false, false) => LoopType::Stack,
                (true, true) => LoopType::Internal,
                _ => LoopType::Bulge,
            },
            _ => LoopType::MultiBranch,
        };
        loops.push(Loop { kind, closing: Some(pair), branches, gaps });
    }
    LoopDecomposition { loops }
}
