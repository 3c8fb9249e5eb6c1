//! The `pdsim` command line: matches, populations and analyses.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, pool::BenchmarkSearch, AnalysisError, AnalysisReport, PopulationModel};
use crate::ftpd::run_match;
use crate::game::{format_payoff, GameConfig, GameError, GameFile, GameMode, PayoffTable};
use crate::library::{self, LibraryError};
use crate::opd::{parse_population, run_population};
use crate::vm::StrategyProgram;

#[derive(Debug, Parser)]
#[command(name = "pdsim", version, about = "Finite-time repeated Prisoner's Dilemma with bounded players")]
pub struct Cli {
    /// Print the builtin strategies and exit.
    #[arg(long)]
    pub list_strategies: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play two strategies against each other.
    Match {
        /// Builtin name or `.pdstrat` file.
        first: String,
        second: String,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Run an opt-out population from a `count x strategy` file.
    Population {
        file: PathBuf,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Security level, benchmark and competitive ratio in an open pool.
    Analyze {
        strategy: Option<String>,
        #[command(flatten)]
        game: GameArgs,
        /// Chance that a new partner is cooperative (OFT).
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        /// Expected rematch delay in ticks; 0 means instantaneous rematch.
        #[arg(long)]
        r: Option<u64>,
        /// Adversary populations, e.g. `all-AllD`; repeatable.
        #[arg(long)]
        gamma: Vec<String>,
        /// Monte-Carlo trials per population.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Sweep `a:b:step` over N and emit (N, CR) rows.
        #[arg(long = "sweep-N")]
        sweep_n: Option<String>,
        /// Print the OFT constant for --q and --r and exit.
        #[arg(long)]
        oft_constant: bool,
    },
}

#[derive(Debug, Args, Clone)]
pub struct GameArgs {
    /// Clock ticks.
    #[arg(long = "N")]
    pub n: Option<u64>,
    /// Preset (`intro`, `intro-eps`) or a `key=value` game file.
    #[arg(long)]
    pub table: Option<String>,
    /// A `key=value` game file with the base configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// XOR-units of comparison work per tick.
    #[arg(long)]
    pub k: Option<u32>,
    /// Ticks between rematches.
    #[arg(long)]
    pub t: Option<u64>,
    /// Number of pairs.
    #[arg(long = "K")]
    pub k_pairs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `ftpd` or `opd`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub instantaneous_rematch: bool,
    /// Directory for CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Located(String),
    #[error("{0}")]
    Usage(String),
}

impl From<LibraryError> for CliError {
    fn from(e: LibraryError) -> Self {
        match e {
            LibraryError::Io { path, source } => CliError::Located(format!("{path}:1:1: cannot read file: {source}")),
            LibraryError::Compile { path, source } => CliError::Located(format!("{path}:1:1: {source}")),
            LibraryError::Parse(d) => CliError::Located(d),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn located(path: &Path, e: GameError) -> CliError {
    match e {
        GameError::ConfigSyntax { line, message } => CliError::Located(format!("{}:{line}:1: {message}", path.display())),
        other => CliError::Game(other),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Located(format!("{}:1:1: cannot read file: {e}", path.display())))
}

/// Resolved configuration plus the text its hash is taken over.
struct Setup {
    config: GameConfig,
    table: PayoffTable,
    spec: String,
}

impl GameArgs {
    fn setup(&self, default_mode: GameMode) -> Result<Setup, CliError> {
        let mut spec = String::new();
        let (mut config, mut table) = match &self.config {
            Some(path) => {
                let text = read(path)?;
                spec.push_str(&text);
                let file = GameFile::parse(&text).map_err(|e| located(path, e))?;
                (file.config, file.table)
            }
            None => (
                GameConfig {
                    mode: default_mode,
                    ..GameConfig::default()
                },
                PayoffTable::intro(),
            ),
        };
        if let Some(name) = &self.table {
            table = match PayoffTable::preset(name) {
                Some(t) => t,
                None => {
                    let path = Path::new(name);
                    let text = read(path)?;
                    spec.push_str(&text);
                    GameFile::parse(&text).map_err(|e| located(path, e))?.table
                }
            };
        }
        if let Some(m) = &self.mode {
            config.mode = m.parse()?;
        }
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(t) = self.t {
            config.t = t;
        }
        if let Some(k) = self.k_pairs {
            config.k_pairs = k;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if self.instantaneous_rematch {
            config.instantaneous_rematch = true;
        }
        Ok(Setup { config, table, spec })
    }
}

impl Setup {
    fn finish(&mut self, extra: &str) -> Result<String, CliError> {
        self.config.validate()?;
        let _ = write!(self.spec, "\n{:?}\n{:?}\n{extra}", self.config, self.table);
        let digest = hex::encode(Sha256::digest(self.spec.as_bytes()));
        Ok(format!("spec_sha256={digest} seed={}", self.config.seed))
    }
}

fn write_out(dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn source_of(program: &StrategyProgram, spec: &str) -> String {
    format!("{spec}:{}:{:?}", program.name, program.instructions)
}

pub fn cmd_match(first: &str, second: &str, game: &GameArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut setup = game.setup(GameMode::Ftpd)?;
    let p1 = library::resolve(first, &setup.config)?;
    let p2 = library::resolve(second, &setup.config)?;
    let header = setup.finish(&format!("match\n{}\n{}", source_of(&p1, first), source_of(&p2, second)))?;
    let trace = run_match(&p1, &p2, &setup.config, &setup.table)?;
    write_out(&game.out, "match.csv", &trace.to_csv(Some(&header)))?;
    writeln!(out, "{} {}", format_payoff(&trace.totals[0]), format_payoff(&trace.totals[1])).ok();
    Ok(())
}

pub fn cmd_population(file: &Path, game: &GameArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut setup = game.setup(GameMode::Opd)?;
    setup.config.mode = GameMode::Opd;
    let text = read(file)?;
    let entries = parse_population(&text).map_err(|e| located(file, e))?;
    let players: usize = entries.iter().map(|e| e.count).sum();
    if players == 0 || players % 2 == 1 {
        return Err(CliError::Located(format!(
            "{}:1:1: a population needs an even, nonzero number of players (found {players})",
            file.display()
        )));
    }
    if game.k_pairs.is_some_and(|k| k * 2 != players) {
        return Err(CliError::Usage(format!("--K {} does not match {players} players", game.k_pairs.unwrap_or(0))));
    }
    setup.config.k_pairs = players / 2;
    let mut programs = Vec::new();
    let mut extra = format!("population\n{text}");
    for e in &entries {
        let p = library::resolve(&e.strategy, &setup.config)?;
        extra.push_str(&source_of(&p, &e.strategy));
        programs.push((p, e.count));
    }
    let header = setup.finish(&extra)?;
    let trace = run_population(&programs, &setup.config, &setup.table)?;
    write_out(&game.out, "population.csv", &trace.to_csv(Some(&header)))?;
    let summary = trace.summary_csv(Some(&header));
    write_out(&game.out, "summary.csv", &summary)?;
    out.write_all(summary.as_bytes()).ok();
    Ok(())
}

/// Parses `a:b:step` into the values `a, a+step, ..` up to `b`.
pub fn parse_sweep(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad sweep `{text}`; expected a:b:step"));
    let parts: Vec<u64> = text.split(':').map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if step == 0 || a > b || a == 0 {
        return Err(bad());
    }
    Ok((a..=b).step_by(step as usize).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_analyze(
    strategy: Option<&str>,
    game: &GameArgs,
    q: f64,
    r: Option<u64>,
    gamma: &[String],
    trials: usize,
    sweep: Option<&str>,
    oft_constant: bool,
    out: &mut dyn std::io::Write,
) -> Result<(), CliError> {
    let mut setup = game.setup(GameMode::Opd)?;
    if let Some(r) = r {
        if r == 0 {
            setup.config.instantaneous_rematch = true;
        } else {
            setup.config.instantaneous_rematch = false;
            setup.config.t = 2 * r + 1;
        }
    }
    let delay = crate::opd::expected_rematch_delay(&setup.config);
    if oft_constant {
        let c = analysis::oft_constant(q, delay, &setup.table)?;
        writeln!(out, "{c}").ok();
        return Ok(());
    }
    let name = strategy.ok_or_else(|| CliError::Usage("analyze needs a strategy (or --oft-constant)".into()))?;
    let gamma: Vec<&str> = if gamma.is_empty() {
        vec!["all-AllD", "all-AllW"]
    } else {
        gamma.iter().map(String::as_str).collect()
    };
    let ns = match sweep {
        Some(s) => parse_sweep(s)?,
        None => vec![setup.config.n],
    };
    let header = setup.finish(&format!("analyze\n{name}\nq={q}\ngamma={gamma:?}\ntrials={trials}\nsweep={sweep:?}"))?;
    let mut reports: Vec<AnalysisReport> = Vec::new();
    for n in ns {
        let config = GameConfig { n, ..setup.config.clone() };
        let subject = library::resolve(name, &config)?;
        let model = PopulationModel::new(q, &config).with_gamma(&gamma, &config)?;
        reports.push(analysis::competitive_ratio(
            &subject,
            &model,
            &config,
            &setup.table,
            trials,
            &BenchmarkSearch::default(),
        )?);
    }
    let mut csv = format!("# {header}\n{}\n", AnalysisReport::CSV_HEADER);
    for rep in &reports {
        csv.push_str(&rep.csv_row());
        csv.push('\n');
    }
    write_out(&game.out, "analysis.csv", &csv)?;
    if sweep.is_some() {
        let mut rows = format!("# {header}\nN,SL,h,CR\n");
        for rep in &reports {
            let cr = rep.cr.map(|c| format!("{c:.6}")).unwrap_or_else(|| "undefined".into());
            let _ = writeln!(rows, "{},{:.6},{:.6},{cr}", rep.n, rep.sl.mean, rep.h.mean);
        }
        write_out(&game.out, "sweep.csv", &rows)?;
        out.write_all(rows.as_bytes()).ok();
    } else {
        write!(out, "{}", reports[0]).ok();
    }
    Ok(())
}

/// Runs a parsed command line, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    if cli.list_strategies {
        out.write_all(library::listing(&GameConfig::default()).as_bytes()).ok();
        return Ok(());
    }
    match &cli.command {
        None => Err(CliError::Usage("no command given; see --help".into())),
        Some(Command::Match { first, second, game }) => cmd_match(first, second, game, out),
        Some(Command::Population { file, game }) => cmd_population(file, game, out),
        Some(Command::Analyze {
            strategy,
            game,
            q,
            r,
            gamma,
            trials,
            sweep_n,
            oft_constant,
        }) => cmd_analyze(
            strategy.as_deref(),
            game,
            *q,
            *r,
            gamma,
            *trials,
            sweep_n.as_deref(),
            *oft_constant,
            out,
        ),
    }
}

/// Entry point for the binary: parses `args`, returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}
