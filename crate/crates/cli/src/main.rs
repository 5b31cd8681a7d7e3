use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nosignal_core::datasets::{self, Dataset, FixtureData};
use nosignal_core::nosig::{
    detector_asymmetry_check, outcome_efficiency_check, product_condition_check,
    three_party_battery, two_party_battery, BatteryOptions, CausalGraph, CausalStatus,
    EfficiencyModel, EqualitySpec, MultiBin, TestBatteryReport,
};
use nosignal_core::simulator::{self, presets, Battery, SimulationConfig};
use nosignal_core::stats::CorrectionPolicy;
use nosignal_core::tables::eventlog::{parse_event_log, EventLogWriter};
use nosignal_core::tables::format::TableFile;
use nosignal_core::tables::{Marginals, TableViews};

/// Exit status when an analysis ran and flagged a finding. Errors exit with 1.
const FINDING: u8 = 2;

#[derive(Parser)]
#[command(
    name = "nosignal",
    version,
    about = "No-signaling tests for Bell-test coincidence data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a test battery on a count table, fixture or event log.
    Analyze(AnalyzeArgs),
    /// Generate synthetic data as an event log or count table.
    Simulate(SimulateArgs),
    /// Estimate rejection rates of a battery over replicated simulations.
    Calibrate(CalibrateArgs),
    /// Recompute the published chi-square values of an experiment.
    Reproduce(ReproduceArgs),
    /// List embedded fixtures, or print one.
    Fixtures(FixturesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BatteryKind {
    /// Two-party battery, or three-party battery for three parties.
    Auto,
    TwoParty,
    ThreeParty,
    /// B against Y at fixed X.
    Asymmetry,
    /// Ideal-model equality on a subtable (--rows, --cols).
    Equality,
    /// Product identity on setting totals (--settings).
    Product,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// File path, dataset id, fixture id, or `-` for stdin.
    input: String,
    /// Detection-efficiency model.
    #[arg(long, default_value = "setting-local")]
    model: EfficiencyModel,
    #[arg(long, value_enum, default_value_t = BatteryKind::Auto)]
    battery: BatteryKind,
    /// Bonferroni multiplier (default: number of tests).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    correction: Option<u32>,
    /// Exit with status 2 if a forbidden test has corrected p below this.
    #[arg(long, value_name = "P")]
    fail_on_signal: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Causal edges for the three-party battery, e.g. `X>A,A>B`.
    #[arg(long, value_delimiter = ',')]
    edges: Vec<String>,
    /// Setting tuples of the equality subtable.
    #[arg(long, value_delimiter = ',')]
    rows: Vec<String>,
    /// Outcome tuples of the equality subtable.
    #[arg(long, value_delimiter = ',')]
    cols: Vec<String>,
    /// Setting quadruple s1,s2,s3,s4 for N(s1)N(s4) = N(s2)N(s3).
    #[arg(long, value_delimiter = ',')]
    settings: Vec<String>,
    /// Reference label for per-bin tests on multi-label outcomes.
    #[arg(long)]
    reference: Option<String>,
    /// One 2×k test per pair instead of per-bin tests.
    #[arg(long)]
    full_bins: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Ideal singlet at CHSH angles, perfect detection.
    Singlet,
    /// Independent parties with setting-local efficiencies.
    Null,
    /// Singlet with Bob's efficiency depending on Alice's setting.
    Signal,
    /// Local hidden-variable model at CHSH angles.
    Lhv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Events,
    Table,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Preset::Singlet)]
    preset: Preset,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of parties (null preset only).
    #[arg(long, default_value_t = 2)]
    parties: usize,
    /// Relative efficiency skew (signal preset only).
    #[arg(long, default_value_t = 0.05)]
    skew: f64,
    #[arg(long, value_enum, default_value_t = Emit::Events)]
    emit: Emit,
    /// Output file (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_enum, default_value_t = Preset::Null)]
    preset: Preset,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 200)]
    replications: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    parties: usize,
    #[arg(long, default_value_t = 0.05)]
    skew: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    correction: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Experiment number or dataset id, e.g. `4`, `exp4`, `exp4.hrn1`.
    experiment: String,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct FixturesArgs {
    /// Dataset or fixture id to print.
    id: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::Reproduce(a) => reproduce(&a),
        Command::Fixtures(a) => fixtures(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Writes to stdout; a closed pipe ends the process quietly.
fn emit(text: std::fmt::Arguments, newline: bool) -> Result<()> {
    let mut out = io::stdout().lock();
    let res = out.write_fmt(text).and_then(|_| {
        if newline {
            out.write_all(b"\n")
        } else {
            Ok(())
        }
    });
    match res {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

struct Input {
    views: TableViews,
    graph: Option<CausalGraph>,
}

fn looks_like_toml(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with('[') || l.contains('='))
}

fn from_dataset(d: &Dataset) -> Result<Input> {
    let views = d
        .canonical_views()
        .with_context(|| format!("{} has no count tables to analyze", d.id()))?;
    let graph = d.causal_graph().transpose()?;
    Ok(Input { views, graph })
}

fn parse_text(name: &str, text: &str) -> Result<Input> {
    if looks_like_toml(text) {
        let d = Dataset::parse(name, text).with_context(|| format!("cannot parse {name}"))?;
        return from_dataset(&d);
    }
    let log = parse_event_log(text, None).with_context(|| format!("cannot parse {name}"))?;
    eprintln!(
        "{name}: {} trials, {} coincidences, {} without coincidence",
        log.trials,
        log.table.total(),
        log.non_coincidences
    );
    Ok(Input {
        views: log.table.into(),
        graph: None,
    })
}

fn load_input(input: &str) -> Result<Input> {
    if input == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
        return parse_text("<stdin>", &text);
    }
    let path = Path::new(input);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {input}"))?;
        return parse_text(input, &text);
    }
    if datasets::dataset_source(input).is_some() {
        return from_dataset(&datasets::load_dataset(input)?);
    }
    match datasets::load_fixture(input) {
        Ok(f) => match f.data {
            FixtureData::Counts(t) => Ok(Input {
                views: t.into(),
                graph: None,
            }),
            _ => bail!("fixture {input} holds no count table; try `nosignal reproduce`"),
        },
        Err(_) => bail!(
            "{input:?} is not a file, dataset id or fixture id (datasets: {})",
            datasets::dataset_ids().join(", ")
        ),
    }
}

fn parse_edges(edges: &[String]) -> Result<Vec<(String, String)>> {
    edges
        .iter()
        .map(|e| {
            let (a, b) = e
                .split_once("->")
                .or_else(|| e.split_once('>'))
                .with_context(|| format!("edge {e:?} must look like X>A"))?;
            Ok((a.trim().to_string(), b.trim().to_string()))
        })
        .collect()
}

fn run_battery(input: &Input, args: &AnalyzeArgs) -> Result<TestBatteryReport> {
    let views = &input.views;
    let layout = views.layout();
    let opts = BatteryOptions {
        multibin: if args.full_bins {
            MultiBin::Full
        } else {
            MultiBin::PerBin {
                reference: args.reference.clone(),
            }
        },
        correction: args.correction,
    };
    let kind = match args.battery {
        BatteryKind::Auto if layout.arity() == 2 && args.model != EfficiencyModel::SettingLocal => {
            BatteryKind::Equality
        }
        BatteryKind::Auto if layout.arity() == 2 => BatteryKind::TwoParty,
        BatteryKind::Auto => BatteryKind::ThreeParty,
        k => k,
    };
    let mut report = match kind {
        BatteryKind::TwoParty => two_party_battery(views, args.model, &opts)?,
        BatteryKind::ThreeParty => {
            if args.model != EfficiencyModel::SettingLocal {
                bail!(
                    "the three-party battery assumes setting-local efficiencies (got {})",
                    args.model
                );
            }
            let graph = if !args.edges.is_empty() {
                let mut nodes: Vec<&str> = Vec::new();
                for p in layout.parties() {
                    nodes.push(&p.setting);
                    nodes.push(&p.name);
                }
                let edges = parse_edges(&args.edges)?;
                let e: Vec<(&str, &str)> = edges
                    .iter()
                    .map(|(a, b)| (a.as_str(), b.as_str()))
                    .collect();
                CausalGraph::new(&nodes, &e)?
            } else {
                input
                    .graph
                    .clone()
                    .unwrap_or_else(|| CausalGraph::local(layout))
            };
            three_party_battery(views, &graph, &opts)?
        }
        BatteryKind::Asymmetry => detector_asymmetry_check(views)?,
        BatteryKind::Equality => {
            let spec = if args.rows.is_empty() && args.cols.is_empty() {
                EqualitySpec::ideal_chsh()
            } else {
                let r: Vec<&str> = args.rows.iter().map(String::as_str).collect();
                let c: Vec<&str> = args.cols.iter().map(String::as_str).collect();
                EqualitySpec::new(&r, &c)
            };
            let r = outcome_efficiency_check(views, &spec)?;
            TestBatteryReport::from_checks(
                &format!("outcome efficiency check ({})", args.model),
                vec![r],
                CausalStatus::Forbidden,
                args.correction,
            )?
        }
        BatteryKind::Product => {
            let q: Vec<String> = if args.settings.is_empty() {
                layout
                    .enumerate_settings()
                    .iter()
                    .map(|s| {
                        layout
                            .settings_label(s)
                            .split('=')
                            .nth(1)
                            .unwrap_or_default()
                            .to_string()
                    })
                    .collect()
            } else {
                args.settings.clone()
            };
            let [a, b, c, d] = q.as_slice() else {
                bail!(
                    "--settings needs exactly four setting tuples, got {}",
                    q.len()
                );
            };
            let r = product_condition_check(views, [a, b, c, d])?;
            TestBatteryReport::from_checks(
                "setting-total product check",
                vec![r],
                CausalStatus::Forbidden,
                args.correction,
            )?
        }
        BatteryKind::Auto => unreachable!("resolved above"),
    };
    if let Some(m) = args.correction {
        report.apply_correction(CorrectionPolicy::new(m)?);
    }
    Ok(report)
}

fn min_forbidden_p(report: &TestBatteryReport) -> Option<f64> {
    report
        .entries
        .iter()
        .filter(|e| e.status == CausalStatus::Forbidden)
        .filter_map(|e| e.chi2())
        .map(|r| r.p_corrected)
        .reduce(f64::min)
}

fn analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let input = load_input(&args.input)?;
    let report = run_battery(&input, args)?;
    match args.format {
        Format::Table => emit(format_args!("{report}"), false)?,
        Format::Json => emit(format_args!("{}", report.to_json()), true)?,
    }
    if let Some(threshold) = args.fail_on_signal {
        if let Some(p) = min_forbidden_p(&report).filter(|&p| p < threshold) {
            eprintln!("signal: smallest corrected p-value {p:.3e} is below {threshold}");
            return Ok(ExitCode::from(FINDING));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn preset_config(
    preset: Preset,
    trials: u64,
    seed: u64,
    parties: usize,
    skew: f64,
) -> Result<SimulationConfig> {
    if preset != Preset::Null && parties != 2 {
        bail!("only the null preset supports --parties other than 2");
    }
    if !(2..=4).contains(&parties) {
        bail!("--parties must be between 2 and 4");
    }
    let config = match preset {
        Preset::Singlet => presets::singlet(trials, seed),
        Preset::Null => presets::factorized_null(parties, trials, seed),
        Preset::Signal => presets::signaling(trials, seed, skew),
        Preset::Lhv => presets::lhv(trials, seed),
    };
    config
        .validate()
        .context("invalid simulation configuration")?;
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let config = preset_config(args.preset, args.trials, args.seed, args.parties, args.skew)?;
    let out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let out = BufWriter::new(out);
    let sim = match args.emit {
        Emit::Events => {
            let mut writer = EventLogWriter::new(out, &config.layout)?;
            let mut failed: Option<io::Error> = None;
            let sim = simulator::simulate_with(&config, |s, o| {
                if failed.is_none() {
                    failed = writer.write(s, o).err();
                }
            })?;
            if let Some(e) = failed {
                if e.kind() == io::ErrorKind::BrokenPipe {
                    std::process::exit(0);
                }
                return Err(e).context("writing event log");
            }
            writer.finish()?;
            sim
        }
        Emit::Table => {
            let sim = simulator::simulate(&config)?;
            let caption = format!(
                "simulated coincidences, preset {}, {} trials, seed {}",
                preset_name(args.preset),
                args.trials,
                args.seed
            );
            let text = TableFile::single(
                &format!("sim.{}", preset_name(args.preset)),
                &caption,
                &sim.table,
            )
            .to_toml()?;
            let mut out = out;
            out.write_all(text.as_bytes())?;
            out.flush()?;
            sim
        }
    };
    eprintln!(
        "simulated {} trials: {} coincidences, {} partial, {} lost",
        args.trials,
        sim.coincidences(),
        sim.partial,
        sim.lost
    );
    Ok(ExitCode::SUCCESS)
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::Singlet => "singlet",
        Preset::Null => "null",
        Preset::Signal => "signal",
        Preset::Lhv => "lhv",
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<ExitCode> {
    let config = preset_config(args.preset, args.trials, args.seed, args.parties, args.skew)?;
    let opts = BatteryOptions {
        correction: args.correction,
        ..BatteryOptions::default()
    };
    let battery = match args.parties {
        2 => Battery::TwoParty(opts),
        3 => Battery::ThreeParty(CausalGraph::local(&config.layout), opts),
        n => bail!("no battery for {n} parties"),
    };
    let report = simulator::calibrate(&config, &battery, args.alpha, args.replications)?;
    match args.format {
        Format::Json => emit(
            format_args!("{}", serde_json::to_string_pretty(&report)?),
            true,
        )?,
        Format::Table => {
            emit(
                format_args!(
                    "{} replications of {} trials, preset {}, alpha {}",
                    report.replications,
                    args.trials,
                    preset_name(args.preset),
                    report.alpha
                ),
                true,
            )?;
            emit(
                format_args!(
                    "{:<28} {:>10} {:>8} {:>8}",
                    "test", "rejected", "aborted", "rate"
                ),
                true,
            )?;
            for t in &report.tests {
                emit(
                    format_args!(
                        "{:<28} {:>10} {:>8} {:>8.4}",
                        t.descriptor, t.rejections, t.aborted, t.rate
                    ),
                    true,
                )?;
            }
            emit(
                format_args!("family-wise rate (corrected): {:.4}", report.family_rate),
                true,
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn reproduce(args: &ReproduceArgs) -> Result<ExitCode> {
    let report = datasets::reproduce_report(&args.experiment)?;
    match args.format {
        Format::Table => emit(format_args!("{report}"), false)?,
        Format::Json => emit(format_args!("{}", report.to_json()), true)?,
    }
    if !report.passed() {
        eprintln!(
            "{} published value(s) outside tolerance",
            report.count(datasets::ComparisonStatus::Fail)
        );
        return Ok(ExitCode::from(FINDING));
    }
    Ok(ExitCode::SUCCESS)
}

fn fixtures(args: &FixturesArgs) -> Result<ExitCode> {
    let Some(id) = &args.id else {
        for id in datasets::fixture_ids() {
            let f = datasets::load_fixture(&id)?;
            let role = match f.role {
                nosignal_core::tables::format::TableRole::Canonical => "canonical",
                nosignal_core::tables::format::TableRole::Printed => "printed",
            };
            let mut caption = f.caption.clone();
            if caption.chars().count() > 72 {
                caption = caption.chars().take(69).collect::<String>() + "...";
            }
            emit(format_args!("{id:<20} {role:<10} {caption}"), true)?;
        }
        return Ok(ExitCode::SUCCESS);
    };
    if let Some(text) = datasets::dataset_source(id) {
        emit(format_args!("{text}"), false)?;
        return Ok(ExitCode::SUCCESS);
    }
    let f = datasets::load_fixture(id)?;
    match &f.data {
        FixtureData::Counts(t) => emit(
            format_args!("{}", TableFile::single(id, &f.caption, t).to_toml()?),
            false,
        )?,
        _ => {
            let ds = id.rsplit_once('.').map_or(id.as_str(), |(d, _)| d);
            emit(
                format_args!("{}", datasets::dataset_source(ds).unwrap_or_default()),
                false,
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
