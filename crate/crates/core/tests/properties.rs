use std::sync::Arc;

use proptest::prelude::*;
use rnafold::grammar::inverse_matches;
use rnafold::space::successors;
use rnafold::{
    decompose_loops, emit_dot_bracket, invert_match, parse_dot_bracket, BasePair, DotBracketOptions, Grammar,
    Nucleotide, PrimarySequence, SecondaryStructure,
};

fn sequence() -> impl Strategy<Value = Arc<PrimarySequence>> {
    prop::collection::vec(prop::sample::select(Nucleotide::ALL.to_vec()), 4..=13)
        .prop_map(|b| Arc::new(PrimarySequence::new(b, None).unwrap()))
}

/// A random structure grown by applying a random successor a few times.
fn structure(min_hairpin: usize) -> impl Strategy<Value = SecondaryStructure> {
    (sequence(), prop::collection::vec(any::<prop::sample::Index>(), 0..6)).prop_map(move |(seq, picks)| {
        let g = Grammar::new(min_hairpin);
        let mut s = SecondaryStructure::empty(seq);
        for pick in picks {
            let succ = successors(&s, &g);
            if succ.is_empty() {
                break;
            }
            s = succ[pick.index(succ.len())].1.clone();
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dot_bracket_round_trip(s in structure(3)) {
        let db = emit_dot_bracket(&s);
        let back = parse_dot_bracket(s.sequence().clone(), &db, DotBracketOptions::default()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn adding_pairs_leaves_the_original_alone(s in structure(1), i in 0usize..13, j in 0usize..13) {
        let before = s.clone();
        let n = s.len();
        if i < n && j < n && i != j {
            let _ = s.with_pairs_added(&[BasePair::new(i, j)], 1);
        }
        prop_assert_eq!(before, s);
    }

    #[test]
    fn moves_are_valid_and_invertible(s in structure(1)) {
        let g = Grammar::relaxed();
        for (m, h) in successors(&s, &g) {
            prop_assert!(h.validate(1).is_pass());
            prop_assert_eq!(h.pair_count(), s.pair_count() + m.added.len());
            prop_assert_eq!(&invert_match(&h, &m).unwrap(), &s);
            prop_assert!(inverse_matches(&h, &g).iter().any(|(im, r)| im == &m && r == &s));
        }
    }

    #[test]
    fn loops_partition_the_sequence(s in structure(3)) {
        let d = decompose_loops(&s);
        let unpaired: usize = d.loops.iter().map(|l| l.unpaired()).sum();
        prop_assert_eq!(unpaired + 2 * s.pair_count(), s.len());
        prop_assert_eq!(d.loops.len(), s.pair_count() + 1);
    }
}
