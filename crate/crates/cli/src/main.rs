mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bdm_core::exec::set_worker_threads;
use bdm_core::oracle::{
    battery_trace, complexity_profile, exhaustive_distribution_with, monte_carlo_with, Engine, MultiSequence,
    PrimeField, DEFAULT_ENUMERATION_CAP,
};
use bdm_core::solver::{
    horizon_analysis, stationary_exact, stationary_power, ChainDistribution, ConvergenceNorm, PowerOptions,
    DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE,
};
use bdm_core::stats::{series_coefficients, stat_report, SeriesOptions, SeriesStat};
use bdm_core::{
    class_deviation_histogram, partition_count, BdmState, BoundedModel, Execution, FieldParam, Probability,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use report::{Cell, Report, Table, Value};

#[derive(Parser, Debug)]
#[command(
    name = "bdm",
    version,
    about = "Battery-discharge model: bounded chains, statistics and the linear-complexity oracle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the bounded model: states with classes and merged transitions.
    Model {
        #[command(flatten)]
        bound: Bound,
    },
    /// Stationary per-layer distribution.
    Stationary {
        #[command(flatten)]
        bound: Bound,
        #[command(flatten)]
        num: Numeric,
    },
    /// Deviation and jump statistics of the stationary distribution.
    Stats {
        #[command(flatten)]
        bound: Bound,
        #[command(flatten)]
        num: Numeric,
    },
    /// Complexity, jump-count and jump-height laws after `n` steps from the origin.
    Horizon {
        #[arg(long, value_parser = m_parser())]
        m: usize,
        /// Class bound; defaults to M*n, the smallest bound that is exact at horizon n.
        #[arg(long)]
        k0: Option<u32>,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        num: Numeric,
    },
    /// Enumerate every M x n input over F_q and compare with the model (exit 4 on mismatch).
    Enumerate {
        #[arg(long, value_parser = m_parser())]
        m: usize,
        /// Prime field order.
        #[arg(long)]
        q: u32,
        #[arg(long)]
        n: usize,
        /// Class bound; defaults to M*n.
        #[arg(long)]
        k0: Option<u32>,
        #[arg(long, value_enum, default_value_t = EngineArg::Linear)]
        engine: EngineArg,
        /// Refuse to enumerate more than this many inputs.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
        cap: u64,
    },
    /// Monte Carlo estimates of jump rate, jump heights and final-window deviation law.
    Mc {
        #[arg(long, value_parser = m_parser())]
        m: usize,
        /// Prime field order.
        #[arg(long)]
        q: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EngineArg::Register)]
        engine: EngineArg,
    },
    /// Integer coefficients of the mean deviation in layer T as a series in 1/q.
    Series {
        #[arg(long, value_parser = m_parser())]
        m: usize,
        #[arg(long, default_value_t = 0)]
        t: usize,
        #[arg(long)]
        depth: usize,
        /// Evaluate at q = 10^w (cross-checked at 10^(w+2)).
        #[arg(long, default_value_t = SeriesOptions::default().w)]
        w: u32,
    },
    /// States per class and drain value in one layer, with p_K(M).
    Appendix {
        #[arg(long, value_parser = m_parser())]
        m: usize,
        #[arg(long)]
        kmax: u32,
        #[arg(long, default_value_t = 0)]
        t: usize,
    },
    /// Complexity profile of a multisequence file, replayed through the model.
    Profile {
        /// File with header `q M N` and one row of symbols per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Linear)]
        engine: EngineArg,
    },
}

#[derive(Args, Debug)]
struct Bound {
    #[arg(long, value_parser = m_parser())]
    m: usize,
    #[arg(long)]
    k0: u32,
}

#[derive(Args, Debug)]
struct Numeric {
    /// Field size: integer, `num/den` or decimal.
    #[arg(long)]
    q: String,
    #[arg(long, value_enum, conflicts_with = "exact")]
    mode: Option<Mode>,
    /// Shorthand for `--mode exact`.
    #[arg(long)]
    exact: bool,
    /// Power-iteration tolerance (float mode).
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Power-iteration round-trip limit (float mode).
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    norm: NormArg,
}

impl Numeric {
    fn mode(&self) -> Mode {
        if self.exact {
            Mode::Exact
        } else {
            self.mode.unwrap_or(Mode::Float)
        }
    }

    fn field(&self) -> Result<FieldParam> {
        Ok(self.q.parse::<FieldParam>()?)
    }

    fn power(&self) -> Result<PowerOptions> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(bdm_core::Error::InvalidArgument(format!("--tol must be positive, got {}", self.tol)).into());
        }
        let norm = match self.norm {
            NormArg::L1 => ConvergenceNorm::L1,
            NormArg::MaxRelative => ConvergenceNorm::MaxRelative,
        };
        Ok(PowerOptions { tol: self.tol, max_iters: self.max_iters, norm })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NormArg {
    L1,
    MaxRelative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    /// Gaussian elimination per substep.
    Linear,
    /// Incremental shift-register synthesis.
    Register,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Linear => Engine::LinearSystem,
            EngineArg::Register => Engine::ShiftRegister,
        }
    }
}

fn m_parser() -> clap::builder::RangedU64ValueParser<usize> {
    clap::builder::RangedU64ValueParser::new().range(1..=64)
}

/// Raised after the report is written when oracle and model disagree.
#[derive(Debug)]
struct Mismatch(String);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification mismatch: {}", self.0)
    }
}

impl std::error::Error for Mismatch {}

/// 2: invalid arguments, 3: numerical failure, 4: verification mismatch.
fn exit_code(err: &anyhow::Error) -> u8 {
    use bdm_core::Error as E;
    if err.downcast_ref::<Mismatch>().is_some() {
        return 4;
    }
    match err.downcast_ref::<E>() {
        Some(E::NotConverged { .. } | E::NullspaceDimension | E::SeriesBoundary { .. } | E::SeriesUnstable { .. }) => 3,
        Some(E::TraceMismatch(_)) => 4,
        Some(
            E::ZeroSequences
            | E::FieldParamTooSmall(_)
            | E::InvalidState(_)
            | E::NotPrime(_)
            | E::FieldTooLarge(_)
            | E::SymbolOutOfRange { .. }
            | E::EnumerationCap { .. }
            | E::ClassCapExceeded { .. }
            | E::InvalidArgument(_)
            | E::Parse(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        set_worker_threads(n as usize);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let exec = Execution::Parallel;
    let outcome = match &cli.command {
        Command::Model { bound } => {
            let model = BoundedModel::build(bound.m, bound.k0)?;
            if cli.format == Format::Json {
                let mut s = serde_json::to_string(&model.dump())?;
                s.push('\n');
                return emit(cli, &s);
            }
            Ok(model_report(&model))
        }
        Command::Stationary { bound, num } => {
            let model = BoundedModel::build(bound.m, bound.k0)?;
            let q = num.field()?;
            match num.mode() {
                Mode::Exact => Ok(stationary_report(&model, &q, "exact", &stationary_exact(&model, &q)?)),
                Mode::Float => {
                    Ok(stationary_report(&model, &q, "float", &stationary_power(&model, &q, num.power()?, exec)?))
                }
            }
        }
        Command::Stats { bound, num } => {
            let model = BoundedModel::build(bound.m, bound.k0)?;
            let q = num.field()?;
            match num.mode() {
                Mode::Exact => stats_report(&model, &q, "exact", &stationary_exact(&model, &q)?),
                Mode::Float => stats_report(&model, &q, "float", &stationary_power(&model, &q, num.power()?, exec)?),
            }
        }
        Command::Horizon { m, k0, n, num } => {
            let k0 = k0.unwrap_or((m * n) as u32);
            let model = BoundedModel::build(*m, k0)?;
            let q = num.field()?;
            Ok(match num.mode() {
                Mode::Exact => horizon_report::<BigRational>(&model, &q, *n, "exact"),
                Mode::Float => horizon_report::<f64>(&model, &q, *n, "float"),
            })
        }
        Command::Enumerate { m, q, n, k0, engine, cap } => enumerate(*m, *q, *n, *k0, *engine, *cap, exec),
        Command::Mc { m, q, n, samples, seed, engine } => {
            if *samples == 0 {
                bail!(bdm_core::Error::InvalidArgument("--samples must be positive".into()));
            }
            let field = PrimeField::new(*q)?;
            let r = monte_carlo_with(field, *m, *n, *samples, *seed, (*engine).into(), exec)?;
            Ok(mc_report(&r))
        }
        Command::Series { m, t, depth, w } => {
            let opts = SeriesOptions { w: *w, ..SeriesOptions::default() };
            let coeffs = series_coefficients(SeriesStat::MeanDeviation { layer: *t }, *m, *depth, opts)?;
            let mut r = Report::new("series");
            r.meta("m", *m).meta("t", *t).meta("depth", *depth).meta("statistic", "mean deviation");
            let mut table = Table::new("coefficients", ["k", "c_k"]);
            for (k, c) in coeffs.into_iter().enumerate() {
                table.push(vec![(k + 1).into(), c.into()]);
            }
            r.table(table);
            Ok(r)
        }
        Command::Appendix { m, kmax, t } => {
            if *t > *m {
                bail!(bdm_core::Error::InvalidArgument(format!("--t {t} exceeds M={m}")));
            }
            let model = BoundedModel::build(*m, *kmax)?;
            Ok(appendix_report(&model, *t))
        }
        Command::Profile { input, engine } => profile(input, *engine),
    };
    match outcome {
        Ok(report) => write_report(cli, &report),
        Err(err) => {
            // A mismatch still prints its evidence before failing.
            if let Some(Failed { report, reason }) = err.downcast_ref::<Failed>() {
                write_report(cli, report)?;
                return Err(Mismatch(reason.clone()).into());
            }
            Err(err)
        }
    }
}

/// A finished report whose verification failed.
#[derive(Debug)]
struct Failed {
    report: Report,
    reason: String,
}

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.reason)
    }
}

impl std::error::Error for Failed {}

fn write_report(cli: &Cli, report: &Report) -> Result<()> {
    let text = match cli.format {
        Format::Tsv => report.to_tsv(),
        Format::Json => report.to_json(),
    };
    emit(cli, &text)
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// `(b_1,...,b_M;d)`; the layer is reported in its own column.
fn state_label(s: &BdmState) -> String {
    let b: Vec<String> = s.batteries().iter().map(i32::to_string).collect();
    format!("({};{})", b.join(","), s.drain())
}

fn model_report(model: &BoundedModel) -> Report {
    let mut r = Report::new("model");
    r.meta("m", model.m()).meta("k0", model.k0()).meta("states", model.total_states());
    let mut states = Table::new("states", ["T", "idx", "K", "state"]);
    let mut edges = Table::new("transitions", ["T", "K", "state", "successor", "weight"]);
    for (t, layer) in model.layers().iter().enumerate() {
        let next = model.layer((t + 1) % model.period());
        for (i, s) in layer.states.iter().enumerate() {
            states.push(vec![t.into(), i.into(), layer.classes[i].into(), state_label(s).into()]);
            for (to, w) in layer.merged_edges(i) {
                edges.push(vec![
                    t.into(),
                    layer.classes[i].into(),
                    state_label(s).into(),
                    state_label(&next.states[to]).into(),
                    w.to_string().into(),
                ]);
            }
        }
    }
    r.table(states).table(edges);
    r
}

fn stationary_report<P: Probability + Cell>(
    model: &BoundedModel,
    q: &FieldParam,
    mode: &str,
    dist: &ChainDistribution<P>,
) -> Report {
    let mut r = Report::new("stationary");
    r.meta("m", model.m()).meta("k0", model.k0()).meta("q", q.exact().clone()).meta("mode", mode);
    r.meta("iterations", dist.iterations.map_or(Value::Missing, Value::from));
    r.meta("residual", dist.residual);
    let mut table = Table::new("distribution", ["T", "idx", "K", "state", "pr"]);
    for (t, (layer, probs)) in model.layers().iter().zip(&dist.per_layer).enumerate() {
        for (i, (s, p)) in layer.states.iter().zip(probs).enumerate() {
            table.push(vec![t.into(), i.into(), layer.classes[i].into(), state_label(s).into(), p.cell()]);
        }
    }
    r.table(table);
    r
}

fn stats_report<P: Probability + Cell>(
    model: &BoundedModel,
    q: &FieldParam,
    mode: &str,
    dist: &ChainDistribution<P>,
) -> Result<Report> {
    let s = stat_report(model, q, dist)?;
    let m = model.m();
    let mut r = Report::new("stats");
    r.meta("m", m).meta("k0", model.k0()).meta("q", q.exact().clone()).meta("mode", mode);
    r.meta("iterations", dist.iterations.map_or(Value::Missing, Value::from));
    r.meta("d_bar", s.d_bar.cell()).meta("jump_rate", s.jump_rate.cell());
    r.meta("drain_support", format!("{}..{}", s.drain_support.0, s.drain_support.1));

    let mut layers = Table::new("layers", ["T", "d_bar(T)", "J(T)"]);
    for t in 0..=m {
        layers.push(vec![t.into(), s.d_bar_per_layer[t].cell(), s.jump_rate_per_layer[t].cell()]);
    }
    let mut columns = vec!["d".to_string()];
    columns.extend((0..=m).map(|t| format!("pr(T={t})")));
    columns.push("pr".into());
    let mut pmf = Table::new("deviation_pmf", columns);
    for (d, p) in &s.dev_pmf {
        let mut row = vec![Value::from(*d as i64)];
        row.extend(s.dev_pmf_per_layer.iter().map(|l| l.get(d).map_or(P::zero().cell(), Cell::cell)));
        row.push(p.cell());
        pmf.push(row);
    }
    let mut heights = Table::new("jump_heights", ["h", "JH(h)"]);
    for (h, v) in &s.jump_heights {
        heights.push(vec![(*h).into(), v.cell()]);
    }
    r.table(layers).table(pmf).table(heights);
    Ok(r)
}

fn horizon_report<P: Probability + Cell>(model: &BoundedModel, q: &FieldParam, n: usize, mode: &str) -> Report {
    let h = horizon_analysis::<P>(model, q, n);
    let exact_bound = model.k0() as usize >= model.m() * n;
    if !exact_bound {
        eprintln!("note: K0 < M*n; probabilities near the bound are distorted by forced discharges");
    }
    let mut r = Report::new("horizon");
    r.meta("m", model.m()).meta("k0", model.k0()).meta("q", q.exact().clone()).meta("mode", mode);
    r.meta("n", n).meta("layer", h.layer).meta("bound_is_exact", if exact_bound { "yes" } else { "no" });
    r.table(pmf_table("complexity", "L", h.complexity_pmf.iter().map(|(k, v)| (*k, v.cell()))));
    r.table(pmf_table("jump_count", "jumps", h.jump_count_pmf.iter().map(|(k, v)| (*k as i64, v.cell()))));
    r.table(pmf_table("jump_heights", "h", h.height_histogram.iter().map(|(k, v)| (*k as i64, v.cell()))));
    r
}

fn pmf_table(name: &str, key: &str, rows: impl Iterator<Item = (i64, Value)>) -> Table {
    let mut t = Table::new(name, [key, "pr"]);
    for (k, v) in rows {
        t.push(vec![k.into(), v]);
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    m: usize,
    p: u32,
    n: usize,
    k0: Option<u32>,
    engine: EngineArg,
    cap: u64,
    exec: Execution,
) -> Result<Report> {
    let field = PrimeField::new(p)?;
    let ex = exhaustive_distribution_with(field, m, n, engine.into(), cap as u128, exec)?;
    let k0 = k0.unwrap_or((m * n) as u32);
    let model = BoundedModel::build(m, k0)?;
    let h = horizon_analysis::<BigRational>(&model, &FieldParam::from_integer(p as i64)?, n);
    let total = BigRational::from_integer(BigInt::from(ex.total));

    let mut r = Report::new("enumerate");
    r.meta("q", p).meta("m", m).meta("n", n).meta("k0", k0).meta("inputs", ex.total);
    let mut worst = BigRational::zero();
    let mut compare = |name: &str, key: &str, oracle: BTreeMap<i64, u64>, model: BTreeMap<i64, BigRational>| {
        let keys: std::collections::BTreeSet<i64> = oracle.keys().chain(model.keys()).copied().collect();
        let mut t = Table::new(name, [key, "count", "oracle", "model", "diff"]);
        for k in keys {
            let count = oracle.get(&k).copied().unwrap_or(0);
            let o = BigRational::from_integer(BigInt::from(count)) / &total;
            let b = model.get(&k).cloned().unwrap_or_else(BigRational::zero);
            let diff = &o - &b;
            if diff.abs() > worst {
                worst = diff.abs();
            }
            t.push(vec![k.into(), count.into(), o.into(), b.into(), diff.into()]);
        }
        t
    };
    let l = compare(
        "complexity",
        "L",
        ex.complexity_counts.iter().map(|(k, v)| (*k as i64, *v)).collect(),
        h.complexity_pmf.clone(),
    );
    let j = compare(
        "jump_count",
        "jumps",
        ex.jump_count_counts.iter().map(|(k, v)| (*k as i64, *v)).collect(),
        h.jump_count_pmf.iter().map(|(k, v)| (*k as i64, v.clone())).collect(),
    );
    let hh = compare(
        "jump_heights",
        "h",
        ex.height_counts.iter().map(|(k, v)| (*k as i64, *v)).collect(),
        h.height_histogram.iter().map(|(k, v)| (*k as i64, v.clone())).collect(),
    );
    r.meta("max_abs_diff", worst.clone());
    r.table(l).table(j).table(hh);
    if worst.is_zero() {
        Ok(r)
    } else {
        let reason = format!("oracle and model differ by up to {worst} (K0={k0}, M*n={})", m * n);
        Err(Failed { report: r, reason }.into())
    }
}

fn mc_report(mc: &bdm_core::oracle::MonteCarloReport) -> Report {
    let mut r = Report::new("mc");
    r.meta("q", mc.p).meta("m", mc.m).meta("n", mc.n).meta("samples", mc.samples).meta("seed", mc.seed);
    r.meta("rng", "ChaCha8, seed_from_u64(seed), stream = sample index");
    r.meta("deviation_window", format!("{}..={}", mc.deviation_window.0, mc.deviation_window.1));
    let mut rate = Table::new("jump_rate", ["statistic", "mean", "se"]);
    rate.push(vec!["jumps per step".into(), mc.jump_rate.mean.into(), mc.jump_rate.se.into()]);
    let mut heights = Table::new("jump_heights", ["h", "mean", "se"]);
    for (h, e) in &mc.height_rates {
        heights.push(vec![(*h).into(), e.mean.into(), e.se.into()]);
    }
    let mut pmf = Table::new("deviation_pmf", ["d", "mean", "se"]);
    for (d, e) in &mc.deviation_pmf {
        pmf.push(vec![(*d).into(), e.mean.into(), e.se.into()]);
    }
    r.table(rate).table(heights).table(pmf);
    r
}

fn appendix_report(model: &BoundedModel, t: usize) -> Report {
    let hist = class_deviation_histogram(model, t);
    let (lo, hi) = hist.keys().fold((i32::MAX, i32::MIN), |(lo, hi), &(_, d)| (lo.min(d), hi.max(d)));
    let mut columns = vec!["K".to_string()];
    columns.extend((lo..=hi).map(|d| format!("d={d}")));
    columns.push("p_K".into());
    let mut table = Table::new("class_deviation", columns);
    for k in 0..=model.k0() {
        let mut row = vec![Value::from(k)];
        row.extend((lo..=hi).map(|d| Value::from(hist.get(&(k, d)).copied().unwrap_or(0))));
        row.push(partition_count(k as usize, model.m()).to_string().into());
        table.push(row);
    }
    let mut r = Report::new("appendix");
    r.meta("m", model.m()).meta("kmax", model.k0()).meta("t", t);
    r.table(table);
    r
}

fn profile(input: &PathBuf, engine: EngineArg) -> Result<Report> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let (field, seq) = MultiSequence::parse(&text)?;
    let prof = complexity_profile(field, &seq, engine.into())?;
    let trace = battery_trace(&prof);

    let mut r = Report::new("profile");
    r.meta("q", field.p()).meta("m", seq.m()).meta("n", seq.n());
    r.meta("final_complexity", prof.final_complexity()).meta("jumps", prof.jump_count);
    r.meta("battery_trace", if trace.is_ok() { "consistent" } else { "MISMATCH" });
    let mut subs = Table::new("substeps", ["n", "t", "L", "jump"]);
    for rec in &prof.records {
        subs.push(vec![rec.n.into(), rec.t.into(), rec.l.into(), rec.jump_height.into()]);
    }
    let mut cols = Table::new("columns", ["n", "d", "state"]);
    let states = trace.as_ref().ok();
    for (i, d) in prof.deviations.iter().enumerate() {
        let state = states.map_or(Value::Missing, |s| s[i].to_string().into());
        cols.push(vec![(i + 1).into(), (*d).into(), state]);
    }
    r.table(subs).table(cols);
    match trace {
        Ok(_) => Ok(r),
        Err(e) => Err(Failed { report: r, reason: e.to_string() }.into()),
    }
}
