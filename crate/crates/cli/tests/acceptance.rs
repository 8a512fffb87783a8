//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Oracles come from `rnafold-oracle`, which shares no code with the
//! library. The process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnafold::sb::{run, RunLimits, SbModel};
use rnafold::space::{build_lts, min_energy_state, ExploreLimits};
use rnafold::{
    decompose_loops, parse_dot_bracket, parse_sequence, DotBracketOptions, EnergyModel, ExternalEvaluator, Grammar,
    LoopTableParams, Nucleotide, PrimarySequence, SecondaryStructure,
};
use rnafold_oracle as oracle;

type Outcome = Result<String, String>;

fn seq(s: &str) -> Arc<PrimarySequence> {
    Arc::new(parse_sequence(s).unwrap())
}

fn parse(seq: &Arc<PrimarySequence>, db: &str) -> SecondaryStructure {
    parse_dot_bracket(seq.clone(), db, DotBracketOptions { min_hairpin: 0, strict: true }).unwrap()
}

fn within(started: Instant, budget: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    if took <= budget {
        Ok(format!("{detail}; {:.2}s", took.as_secs_f64()))
    } else {
        Err(format!("{detail}; took {:.1}s, budget {}s", took.as_secs_f64(), budget.as_secs()))
    }
}

fn soundness() -> Outcome {
    let started = Instant::now();
    let mut states = 0;
    for s in oracle::SMALL_FIXTURES {
        for min in [1, 3] {
            let lts = build_lts(seq(s), &Grammar::new(min), &EnergyModel::<f64>::Nussinov, &ExploreLimits::default())
                .map_err(|e| e.to_string())?;
            for st in &lts.states {
                let ok = st.structure.validate(min).is_pass()
                    && oracle::is_valid(s.as_bytes(), &oracle::from_db(st.key.as_str()), min);
                if !ok {
                    return Err(format!("{s} min_hairpin={min}: {} is invalid", st.key));
                }
            }
            states += lts.states.len();
        }
    }
    within(started, Duration::from_secs(60), format!("{states} reachable states valid"))
}

fn completeness() -> Outcome {
    let started = Instant::now();
    let mut problems = Vec::new();
    let mut checked = 0;
    for s in oracle::SMALL_FIXTURES.iter().filter(|s| s.len() <= 10) {
        for min in [1, 3] {
            let lts = build_lts(seq(s), &Grammar::new(min), &EnergyModel::<f64>::Nussinov, &ExploreLimits::default())
                .map_err(|e| e.to_string())?;
            let ours: BTreeSet<String> = lts.states.iter().map(|st| st.key.to_string()).collect();
            let all = oracle::all_structures(s.as_bytes(), min);
            for db in all.difference(&ours) {
                problems.push(format!("{s} min={min}: unreachable {db}"));
            }
            for db in ours.difference(&all) {
                problems.push(format!("{s} min={min}: spurious {db}"));
            }
            checked += 1;
        }
    }
    let lts =
        build_lts(seq("GGGAAACCC"), &Grammar::default(), &EnergyModel::<f64>::Nussinov, &ExploreLimits::default())
            .map_err(|e| e.to_string())?;
    if lts.states.len() != 20 {
        problems.push(format!("GGGAAACCC has {} states, expected 20", lts.states.len()));
    }
    if !problems.is_empty() {
        return Err(format!("counterexamples: {}", problems.join(", ")));
    }
    within(started, Duration::from_secs(120), format!("{checked} (sequence, min_hairpin) cases, GGGAAACCC = 20"))
}

fn nussinov_optimum() -> Outcome {
    let started = Instant::now();
    for s in oracle::MEDIUM_FIXTURES {
        let lts = build_lts(seq(s), &Grammar::default(), &EnergyModel::<f64>::Nussinov, &ExploreLimits::default())
            .map_err(|e| e.to_string())?;
        let best = min_energy_state(&lts).map_err(|e| format!("{s}: {e}"))?;
        let optimum = oracle::nussinov_max_pairs(s.as_bytes(), 3);
        if best.observable.value() != -(optimum as f64) || !best.exact {
            return Err(format!("{s}: LTS minimum {} vs DP -{optimum}", best.observable));
        }
        let key = lts.states[best.index].key.to_string();
        let co_optimal = oracle::all_structures(s.as_bytes(), 3)
            .into_iter()
            .any(|db| db == key && oracle::from_db(&db).len() == optimum);
        if !co_optimal {
            return Err(format!("{s}: {key} is not co-optimal"));
        }
    }
    within(started, Duration::from_secs(60), format!("{} sequences", oracle::MEDIUM_FIXTURES.len()))
}

/// Successors computed from the geometric site classifier, not the grammar.
fn oracle_successors(s: &str, db: &str, min: usize) -> Vec<String> {
    let base = oracle::from_db(db);
    oracle::sites(s.as_bytes(), db, min)
        .into_iter()
        .map(|site| {
            let mut pairs = base.clone();
            pairs.extend(site.added);
            oracle::to_db(s.len(), &pairs)
        })
        .collect()
}

fn phi0_semantics() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = Grammar::default();
    let mut steps = 0;
    for k in 0..200 {
        let n = rng.gen_range(6..=14);
        let bases: Vec<Nucleotide> = (0..n).map(|_| Nucleotide::ALL[rng.gen_range(0..4)]).collect();
        let sq = Arc::new(PrimarySequence::new(bases, None).unwrap());
        let text = sq.to_string();
        let em =
            if k % 2 == 0 { EnergyModel::<f64>::Nussinov } else { EnergyModel::LoopTable(LoopTableParams::example()) };
        let trace = run(&SbModel::default(), sq.clone(), &g, &em, &RunLimits::default()).map_err(|e| e.to_string())?;
        let lowest = |db: &str| {
            oracle_successors(&text, db, 3)
                .iter()
                .map(|d| em.observable(&parse(&sq, d)).unwrap())
                .min_by(|a, b| a.total_cmp(b))
        };
        for w in trace.records.windows(2) {
            if w[1].mode != "steady" {
                continue;
            }
            steps += 1;
            let min = lowest(&w[0].structure).ok_or(format!("{text}: step from a terminal {}", w[0].structure))?;
            if w[1].observable != min || min > w[0].observable {
                return Err(format!(
                    "{text}: {} ({}) -> {} ({}), exhaustive minimum {min}",
                    w[0].structure, w[0].observable, w[1].structure, w[1].observable
                ));
            }
        }
        let last = &trace.summary.final_structure;
        if let Some(min) = lowest(last) {
            if min < trace.summary.final_observable {
                return Err(format!("{text}: final {last} has a successor at {min}"));
            }
        }
    }
    within(started, Duration::from_secs(120), format!("200 runs, {steps} steady steps"))
}

fn adaptation() -> Outcome {
    let sq = seq(oracle::ADAPTATION_SEQUENCE);
    let em = EnergyModel::<f64>::External(Arc::new(ExternalEvaluator::new(oracle::adaptation_command())));
    let t = run(&SbModel::default(), sq, &Grammar::default(), &em, &RunLimits::default()).map_err(|e| e.to_string())?;
    let modes: Vec<&str> = t.records.iter().map(|r| r.mode.as_str()).collect();
    let first = modes.iter().position(|m| *m == "adapting").ok_or("never adapted")?;
    let len = modes[first..].iter().take_while(|m| **m == "adapting").count();
    if len != 1 || modes.get(first + 1) != Some(&"steady") {
        return Err(format!("modes {modes:?}"));
    }
    Ok(format!("modes {}", modes.join(" ")))
}

fn loop_partition() -> Outcome {
    let mut structures = 0;
    for s in oracle::SMALL_FIXTURES.iter().filter(|s| s.len() <= 10) {
        let sq = seq(s);
        for db in oracle::all_structures(s.as_bytes(), 1) {
            let st = parse(&sq, &db);
            let d = decompose_loops(&st);
            let unpaired: usize = d.loops.iter().map(|l| l.unpaired()).sum();
            if unpaired + 2 * st.pair_count() != s.len() {
                return Err(format!("{s} {db}: {unpaired} unpaired + {} pairs", st.pair_count()));
            }
            for &p in st.pairs() {
                let closing = d.loops.iter().filter(|l| l.closing == Some(p)).count();
                if closing != 1 {
                    return Err(format!("{s} {db}: {p} closes {closing} loops"));
                }
            }
            structures += 1;
        }
    }
    Ok(format!("{structures} structures"))
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rnafold")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("rnafold {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let runs: Vec<Vec<&str>> = vec![
        vec!["fold", "GGGAAAUCCCGAUC", "--energy", "loop-table", "--allow-inverse", "--trace"],
        vec!["fold", "GCGCAAAGCGC", "--trace"],
        vec!["enumerate", "GGGAAAUCCCGAUC", "--energy", "loop-table", "--out"],
        vec!["enumerate", "GGGAAAUCCCGAUC", "--export", "dot", "--out"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let file = path(&format!("{k}-{rep}"));
            let mut full = args.clone();
            full.push(&file);
            let stdout = cli(&full)?;
            let written = std::fs::read(&file).map_err(|e| e.to_string())?;
            outputs.push((stdout, written));
        }
        if outputs[0] != outputs[1] {
            return Err(format!("rnafold {} differs between runs", args.join(" ")));
        }
    }
    Ok(format!("{} commands byte-identical", runs.len()))
}

fn scale_sweep() -> Outcome {
    let started = Instant::now();
    let json = cli(&["sweep", "--from", "8", "--to", "14", "--json"])?;
    let report: serde_json::Value = serde_json::from_slice(&json).map_err(|e| e.to_string())?;
    let counts: Vec<u64> =
        report["points"].as_array().ok_or("no points")?.iter().map(|p| p["states"].as_u64().unwrap()).collect();
    if counts.len() != 7 || counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(format!("counts {counts:?}"));
    }
    let base = report["fitted_base"].as_f64().filter(|b| b.is_finite()).ok_or("no finite fitted base")?;
    let text = String::from_utf8(cli(&["sweep", "--from", "8", "--to", "14"])?).unwrap();
    if report["reference_base"].as_f64() != Some(1.8) || !text.contains("reference 1.8") {
        return Err("report does not quote 1.8".into());
    }
    within(started, Duration::from_secs(300), format!("counts {counts:?}, fitted base {base:.3}, reference 1.8"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("grammar soundness", soundness),
        ("grammar completeness", completeness),
        ("nussinov optimum", nussinov_optimum),
        ("phi0 semantics", phi0_semantics),
        ("adaptation", adaptation),
        ("loop partition", loop_partition),
        ("determinism", determinism),
        ("scale sweep", scale_sweep),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
