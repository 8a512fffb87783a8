use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rnafold::energy::{COMMAND_ENV, DEFAULT_TIMEOUT};
use rnafold::grammar::LoopKind;
use rnafold::sb::{AdaptLimits, RunLimits, SbController, SbModel, Trace};
use rnafold::space::{
    build_lts, export_lts, min_energy_state, prefix_family, stats, sweep, ExploreLimits, ExportFormat, SWEEP_BASE,
};
use rnafold::structure::parse_fasta_records;
use rnafold::{
    decompose_loops, format_energy, parse_dot_bracket, parse_sequence, DotBracketOptions, Energy, EnergyModel,
    ExternalEvaluator, Grammar, LoopTableParams, PrimarySequence, RuleId, SecondaryStructure,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_TRUNCATED: u8 = 3;

/// Errors in user input; they exit with status 2.
#[derive(Debug)]
struct ConfigError(String);

impl Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config(e: impl Display) -> anyhow::Error {
    anyhow!(ConfigError(e.to_string()))
}

#[derive(Parser)]
#[command(name = "rnafold", version, about = "RNA secondary-structure folding by graph rewriting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the controller on one sequence or a batch
    Fold(FoldArgs),
    /// Build the folding space and export it
    Enumerate(EnumerateArgs),
    /// Evaluate one structure loop by loop
    Eval(EvalArgs),
    /// List the production rules
    Rules(RulesArgs),
    /// State counts over a family of prefixes
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Nussinov,
    LoopTable,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Energy model
    #[arg(long, value_enum, default_value = "nussinov")]
    energy: Mode,
    /// Loop-table parameter file (TOML); the bundled example when absent
    #[arg(long)]
    params: Option<PathBuf>,
    /// Command for the external evaluator; falls back to $RNAFOLD_EXTERNAL_CMD
    #[arg(long)]
    external_cmd: Option<String>,
    /// Seconds before an external evaluation is abandoned
    #[arg(long)]
    external_timeout: Option<f64>,
    /// Allow overlapping external evaluations
    #[arg(long)]
    external_concurrent: bool,
    /// Minimum unpaired nucleotides in a hairpin
    #[arg(long)]
    min_hairpin: Option<usize>,
    /// Hairpins of a single nucleotide are allowed
    #[arg(long, conflicts_with = "min_hairpin")]
    relaxed: bool,
    /// Energy scalar
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

impl ModelArgs {
    fn grammar(&self) -> Grammar {
        if self.relaxed {
            Grammar::relaxed()
        } else {
            self.min_hairpin.map(Grammar::new).unwrap_or_default()
        }
    }

    fn model<T: Energy>(&self) -> Result<EnergyModel<T>> {
        Ok(match self.energy {
            Mode::Nussinov => EnergyModel::Nussinov,
            Mode::LoopTable => match &self.params {
                Some(path) => EnergyModel::LoopTable(LoopTableParams::from_file(path).map_err(config)?),
                None => EnergyModel::LoopTable(LoopTableParams::example()),
            },
            Mode::External => {
                let cmd = match &self.external_cmd {
                    Some(c) => c.clone(),
                    None => std::env::var(COMMAND_ENV)
                        .map_err(|_| config(format!("external mode needs --external-cmd or ${COMMAND_ENV}")))?,
                };
                let timeout = match self.external_timeout {
                    Some(s) if s.is_finite() && s > 0.0 => Duration::from_secs_f64(s),
                    Some(s) => return Err(config(format!("bad --external-timeout {s}"))),
                    None => DEFAULT_TIMEOUT,
                };
                let adapter =
                    ExternalEvaluator::new(cmd).with_timeout(timeout).concurrent_safe(self.external_concurrent);
                EnergyModel::External(Arc::new(adapter))
            }
        })
    }
}

#[derive(Args)]
struct SeqArg {
    /// Sequence, or @FILE for the first record of a FASTA file
    #[arg(value_name = "SEQ")]
    positional: Option<String>,
    /// Same as the positional argument
    #[arg(long = "seq", value_name = "SEQ", conflicts_with = "positional")]
    flag: Option<String>,
}

impl SeqArg {
    fn get(&self) -> Option<&str> {
        self.positional.as_deref().or(self.flag.as_deref())
    }

    fn read(&self) -> Result<PrimarySequence> {
        read_sequence(self.get().ok_or_else(|| config("no sequence given"))?)
    }
}

#[derive(Args)]
struct FoldArgs {
    #[command(flatten)]
    sequence: SeqArg,
    /// Fold every record of a FASTA file
    #[arg(long, conflicts_with_all = ["positional", "flag"])]
    seq_file: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Inverse moves during adaptation
    #[arg(long)]
    allow_inverse: bool,
    /// S-machine file (TOML); a single greedy state with a self-loop when absent
    #[arg(long)]
    machine: Option<PathBuf>,
    /// Write the JSON-lines trace here
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = RunLimits::default().max_steps)]
    max_steps: usize,
    /// Adaptation search depth in B-steps
    #[arg(long, default_value_t = AdaptLimits::default().max_depth)]
    adapt_depth: usize,
    #[arg(long, default_value_t = AdaptLimits::default().max_nodes)]
    adapt_nodes: usize,
    /// Seed handed to strategies; the built-in ones are deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Seconds
    #[arg(long)]
    time_budget: Option<f64>,
    /// States above this energy are not expanded
    #[arg(long, allow_negative_numbers = true)]
    energy_ceiling: Option<f64>,
}

impl LimitArgs {
    fn limits(&self) -> Result<ExploreLimits> {
        let mut lim = ExploreLimits::default();
        if let Some(m) = self.max_states {
            lim.max_states = m.max(1);
        }
        if let Some(d) = self.max_depth {
            lim.max_depth = d;
        }
        if let Some(t) = self.time_budget {
            if !(t.is_finite() && t >= 0.0) {
                return Err(config(format!("bad --time-budget {t}")));
            }
            lim.time_budget = Some(Duration::from_secs_f64(t));
        }
        lim.energy_ceiling = self.energy_ceiling;
        Ok(lim)
    }
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    sequence: SeqArg,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long, value_enum, default_value = "json")]
    export: Format,
    /// Output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    sequence: SeqArg,
    /// Dot-bracket structure
    #[arg(long)]
    structure: String,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct RulesArgs {
    /// One line per rule (the default)
    #[arg(long)]
    list: bool,
    /// Only rules for this loop kind
    #[arg(long = "loop")]
    loop_kind: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sequence whose prefixes form the family
    #[arg(long, default_value = SWEEP_BASE)]
    base: String,
    #[arg(long, default_value_t = 8)]
    from: usize,
    #[arg(long, default_value_t = 14)]
    to: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    limits: LimitArgs,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
}

fn read_sequence(arg: &str) -> Result<PrimarySequence> {
    match arg.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config(format!("{path}: {e}")))?;
            parse_sequence(&text).map_err(config)
        }
        None => parse_sequence(arg).map_err(config),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fold<T: Energy>(args: &FoldArgs) -> Result<u8> {
    let sequences = match (args.sequence.get(), &args.seq_file) {
        (Some(s), _) => vec![read_sequence(s)?],
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
            parse_fasta_records(&text).map_err(config)?
        }
        (None, None) => return Err(config("no sequence given")),
    };
    let model = match &args.machine {
        Some(path) => SbModel::load(path).map_err(config)?,
        None => SbModel::default(),
    };
    let grammar = args.model.grammar().with_inverse(args.allow_inverse);
    let limits = RunLimits {
        max_steps: args.max_steps,
        adapt: AdaptLimits { max_depth: args.adapt_depth, max_nodes: args.adapt_nodes },
    };
    let controller = SbController::new(model, grammar, args.model.model::<T>()?)
        .map_err(config)?
        .with_limits(limits)
        .with_seed(args.seed);

    let traces: Vec<Trace<T>> =
        sequences.par_iter().map(|s| controller.run(Arc::new(s.clone()))).collect::<Result<_, _>>()?;

    let mut out = String::new();
    let mut jsonl = String::new();
    for (seq, trace) in sequences.iter().zip(&traces) {
        if let Some(name) = seq.name() {
            out.push_str(&format!(">{name}\n"));
        }
        let s = &trace.summary;
        let note = if s.best_observable.is_finite() { "" } else { " (no fold possible)" };
        out.push_str(&format!("{seq}\n{}  {}{note}\n", s.best_structure, s.best_observable));
        jsonl.push_str(&trace.to_jsonl());
    }
    print!("{out}");
    if let Some(path) = &args.trace {
        write_output(Some(path), &jsonl)?;
    }
    Ok(0)
}

fn enumerate<T: Energy>(args: &EnumerateArgs) -> Result<u8> {
    let seq = Arc::new(args.sequence.read()?);
    let em = args.model.model::<T>()?;
    let lts = build_lts(seq, &args.model.grammar(), &em, &args.limits.limits()?)?;
    let format = match args.export {
        Format::Json => ExportFormat::Json,
        Format::Dot => ExportFormat::Dot,
    };
    write_output(args.out.as_deref(), &export_lts(&lts, format))?;

    let st = stats(&lts);
    let best = match min_energy_state(&lts) {
        Ok(m) => format!("{}  {}", lts.states[m.index].key, m.observable),
        Err(_) => "none".into(),
    };
    eprintln!("states {}  transitions {}  terminals {}  minimum {best}", st.states, st.transitions, st.terminals);
    match lts.truncated_by {
        Some(t) => {
            eprintln!("truncated by {}; the minimum is an upper bound", t.as_str());
            Ok(EXIT_TRUNCATED)
        }
        None => Ok(0),
    }
}

fn eval<T: Energy>(args: &EvalArgs) -> Result<u8> {
    let seq = Arc::new(args.sequence.read()?);
    let grammar = args.model.grammar();
    let s: SecondaryStructure =
        parse_dot_bracket(seq, &args.structure, DotBracketOptions { min_hairpin: grammar.min_hairpin, strict: false })
            .map_err(config)?;
    let report = s.validate(grammar.min_hairpin);
    if !report.is_pass() {
        eprintln!("invalid structure:");
        for v in &report.violations {
            eprintln!("  {v}");
        }
        return Ok(EXIT_CONFIG);
    }
    let em = args.model.model::<T>()?;
    let additive = matches!(em, EnergyModel::LoopTable(_));
    println!("{:<12} {:<9} {:>8} {:>8} {:>8}", "loop", "closing", "unpaired", "branches", "energy");
    for l in decompose_loops(&s).loops {
        let closing = l.closing.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        let e = if additive { format_energy(em.loop_energy(s.sequence(), &l)) } else { "-".into() };
        println!("{:<12} {:<9} {:>8} {:>8} {:>8}", l.kind.name(), closing, l.unpaired(), l.branches.len(), e);
    }
    println!("total {}", em.observable(&s)?);
    Ok(0)
}

fn rules(args: &RulesArgs) -> Result<u8> {
    let kind = match &args.loop_kind {
        Some(k) => Some(k.parse::<LoopKind>().map_err(|_| config(format!("unknown loop kind {k:?}")))?),
        None => None,
    };
    for r in RuleId::ALL.iter().filter(|r| kind.is_none_or(|k| r.kind == k)) {
        println!("{:<20} adds {}  {}", r.to_string(), r.arity(), r.site_description());
    }
    Ok(0)
}

fn sweep_cmd<T: Energy>(args: &SweepArgs) -> Result<u8> {
    let base = parse_sequence(&args.base).map_err(config)?;
    if args.from > args.to || args.to > base.len() {
        return Err(config(format!("range {}..={} does not fit a base of length {}", args.from, args.to, base.len())));
    }
    let family = prefix_family(&base, args.from..=args.to);
    let report = sweep(&family, &args.model.grammar(), &args.model.model::<T>()?, &args.limits.limits()?)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{:>3} {:>9}  {:<14} sequence", "n", "states", "truncated");
        for p in &report.points {
            println!("{:>3} {:>9}  {:<14} {}", p.n, p.states, p.truncated_by.as_deref().unwrap_or("-"), p.sequence);
        }
        let fitted = report.fitted_base.map(|b| format!("{b:.3}")).unwrap_or_else(|| "n/a".into());
        println!("fitted base {fitted} (reference {})", report.reference_base);
        if !report.is_monotone() {
            println!("warning: state counts are not monotone");
        }
    }
    Ok(if report.points.iter().any(|p| p.truncated_by.is_some()) { EXIT_TRUNCATED } else { 0 })
}

fn dispatch(cli: Cli) -> Result<u8> {
    macro_rules! by_precision {
        ($f:ident, $args:expr) => {
            match $args.model.precision {
                Precision::F64 => $f::<f64>($args),
                Precision::F32 => $f::<f32>($args),
            }
        };
    }
    match &cli.command {
        Command::Fold(a) => by_precision!(fold, a),
        Command::Enumerate(a) => by_precision!(enumerate, a),
        Command::Eval(a) => by_precision!(eval, a),
        Command::Rules(a) => rules(a),
        Command::Sweep(a) => by_precision!(sweep_cmd, a),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
