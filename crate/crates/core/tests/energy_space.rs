use std::collections::BTreeSet;
use std::sync::Arc;

use rnafold::space::{
    build_lts, export_lts, min_energy_state, prefix_family, stats, sweep, validate_lts_json, ExploreLimits,
    ExportFormat,
};
use rnafold::{
    decompose_loops, parse_dot_bracket, parse_sequence, DotBracketOptions, EnergyModel, Grammar, LoopTableParams,
    PrimarySequence,
};
use rnafold_oracle as oracle;

fn seq(s: &str) -> Arc<PrimarySequence> {
    Arc::new(parse_sequence(s).unwrap())
}

#[test]
fn nussinov_minimum_matches_dynamic_programming() {
    for s in oracle::MEDIUM_FIXTURES {
        let lts =
            build_lts(seq(s), &Grammar::default(), &EnergyModel::<f64>::Nussinov, &ExploreLimits::default()).unwrap();
        let best = min_energy_state(&lts).unwrap();
        let optimum = oracle::nussinov_max_pairs(s.as_bytes(), 3);
        assert_eq!(-best.observable.value(), optimum as f64, "{s}");
        assert!(best.exact);
        let co_optimal: BTreeSet<String> = oracle::all_structures(s.as_bytes(), 3)
            .into_iter()
            .filter(|db| oracle::from_db(db).len() == optimum)
            .collect();
        assert!(co_optimal.contains(lts.states[best.index].key.as_str()), "{s}");
    }
}

#[test]
fn loops_partition_every_small_structure() {
    for s in oracle::SMALL_FIXTURES.iter().filter(|s| s.len() <= 10) {
        let sq = seq(s);
        for db in oracle::all_structures(s.as_bytes(), 1) {
            let st = parse_dot_bracket(sq.clone(), &db, DotBracketOptions { min_hairpin: 1, strict: true }).unwrap();
            let d = decompose_loops(&st);
            let unpaired: usize = d.loops.iter().map(|l| l.unpaired()).sum();
            assert_eq!(unpaired + 2 * st.pair_count(), s.len(), "{s} {db}");
            for &p in st.pairs() {
                assert_eq!(d.loops.iter().filter(|l| l.closing == Some(p)).count(), 1, "{s} {db} {p}");
            }
            assert_eq!(d.loops.iter().filter(|l| l.closing.is_none()).count(), 1);
        }
    }
}

#[test]
fn loop_table_space_is_deterministic_and_exports_validate() {
    let em = EnergyModel::<f64>::LoopTable(LoopTableParams::example());
    let build = || build_lts(seq("GGGAAAUCCCGAUC"), &Grammar::default(), &em, &ExploreLimits::default()).unwrap();
    let (a, b) = (build(), build());
    for fmt in [ExportFormat::Json, ExportFormat::Dot] {
        assert_eq!(export_lts(&a, fmt), export_lts(&b, fmt));
    }
    let doc = validate_lts_json(&export_lts(&a, ExportFormat::Json)).unwrap();
    assert_eq!(doc.states.len(), a.states.len());
    assert_eq!(doc.energy_mode, "loop-table");
    let st = stats(&a);
    assert_eq!(st.depth_histogram.iter().sum::<usize>(), st.states);
    assert!(st.terminals > 0);
}

#[test]
fn f32_and_f64_spaces_agree() {
    let em64 = EnergyModel::<f64>::LoopTable(LoopTableParams::example());
    let em32 = EnergyModel::<f32>::LoopTable(LoopTableParams::example());
    let g = Grammar::default();
    let a = build_lts(seq("GCGCAAAGCGC"), &g, &em64, &ExploreLimits::default()).unwrap();
    let b = build_lts(seq("GCGCAAAGCGC"), &g, &em32, &ExploreLimits::default()).unwrap();
    assert_eq!(a.states.len(), b.states.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.key, y.key);
        if x.observable.is_finite() {
            assert!((x.observable.value() - y.observable.value() as f64).abs() < 1e-4);
        }
    }
}

#[test]
fn prefix_sweep_is_monotone() {
    let base = parse_sequence("GGGAAACCCAGGGAAACCC").unwrap();
    let family = prefix_family(&base, 8..=12);
    let r = sweep(&family, &Grammar::default(), &EnergyModel::<f64>::Nussinov, &ExploreLimits::default()).unwrap();
    assert_eq!(r.points.len(), 5);
    assert!(r.is_monotone());
    assert!(r.fitted_base.unwrap().is_finite());
    assert_eq!(r.reference_base, 1.8);
}
