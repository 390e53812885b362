use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mevkit_core::scenario::{load_scenario, Scenario};
use mevkit_core::{Ratio, SearchBudget, SearchMode};

mod commands;

#[derive(Parser)]
#[command(name = "mevkit", version, about = "Transaction-ordering value analysis over AMM, Maker and Pricebet models")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an event log and diff against an expected snapshot.
    Replay(ReplayArgs),
    /// Best miner value over the ordering space.
    Mev(RunArgs),
    /// High and low valued balance of the beneficiary.
    Spread(SpreadArgs),
    /// Value before and after deploying the scenario's new contract.
    ComposeCheck(RunArgs),
    /// Tune the inserted trade size over the mempool order.
    OptimizeInsert(InsertArgs),
    /// Probability-weighted value over consecutive blocks.
    Wmev(WmevArgs),
    /// Seeded random scenario suite.
    GenCorpus(CorpusArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ValuationArg {
    Primary,
    Priced,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// `exhaustive`, `auto`, or a path count for randomized sampling.
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long)]
    pub epsilon: Option<Ratio>,
    #[arg(long, value_enum)]
    pub valuation: Option<ValuationArg>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long, value_enum)]
    pub censor: Option<Switch>,
    #[arg(long, value_enum)]
    pub insert: Option<Switch>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Initial state.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Snapshot JSON with the recorded final reserves and books.
    #[arg(long)]
    pub expected: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub units_per_swap: u64,
    #[arg(long)]
    pub relative: Option<Ratio>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SpreadArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Defaults to the scenario's beneficiary.
    #[arg(long)]
    pub account: Option<String>,
}

#[derive(Args)]
pub struct InsertArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Points in the profit curve CSV.
    #[arg(long, default_value_t = 256)]
    pub points: usize,
}

#[derive(Args)]
pub struct WmevArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 64)]
    pub horizon: usize,
    /// Hash fraction; overrides the scenario.
    #[arg(long)]
    pub f: Option<Ratio>,
    /// Constant per-block increment instead of searching.
    #[arg(long)]
    pub increment: Option<String>,
    #[arg(long)]
    pub mining_cost: Option<String>,
}

#[derive(Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub txs: usize,
    /// Draw the size from `txs..=max-txs`.
    #[arg(long)]
    pub max_txs: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub pools: usize,
    #[arg(long)]
    pub out: PathBuf,
}

impl RunArgs {
    /// Scenario with every override applied.
    pub fn load(&self) -> Result<Scenario> {
        let mut sc = load_scenario(&self.scenario)?;
        sc.validate()?;
        if let Some(b) = &self.budget {
            sc.budget = parse_budget(b, &sc.budget)?;
        }
        if let Some(s) = self.seed {
            sc.budget.seed = s;
        }
        if let Some(w) = self.workers {
            sc.budget.workers = w.max(1);
        }
        if let Some(e) = &self.epsilon {
            sc.epsilon = e.clone();
        }
        match self.valuation {
            Some(ValuationArg::Primary) => sc.valuation.mode = mevkit_core::metrics::ValuationMode::PrimaryOnly,
            Some(ValuationArg::Priced) => sc.valuation.mode = mevkit_core::metrics::ValuationMode::OraclePriced,
            None => {}
        }
        if let Some(k) = self.k {
            if k == 0 {
                bail!("--k must be at least 1");
            }
            sc.miner.k = k;
        }
        if let Some(c) = self.censor {
            sc.miner.allow_censor = c.on();
        }
        if let Some(i) = self.insert {
            sc.miner.allow_insert = i.on();
        }
        Ok(sc)
    }
}

fn parse_budget(s: &str, base: &SearchBudget) -> Result<SearchBudget> {
    Ok(match s {
        "exhaustive" => SearchBudget { mode: SearchMode::Exhaustive, ..base.clone() },
        "auto" => SearchBudget { mode: SearchMode::Auto, ..base.clone() },
        n => {
            let paths: u64 = n.parse().with_context(|| format!("--budget {n:?}: expected exhaustive, auto or a path count"))?;
            if paths == 0 {
                bail!("--budget must be positive");
            }
            SearchBudget { mode: SearchMode::Randomized, max_paths: paths, ..base.clone() }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Replay(a) => commands::replay(a),
        Command::Mev(a) => commands::mev(a),
        Command::Spread(a) => commands::spread(a),
        Command::ComposeCheck(a) => commands::compose_check(a),
        Command::OptimizeInsert(a) => commands::optimize_insert(a),
        Command::Wmev(a) => commands::wmev(a),
        Command::GenCorpus(a) => commands::gen_corpus(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
