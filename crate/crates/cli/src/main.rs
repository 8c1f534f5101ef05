use std::path::PathBuf;
use std::process::ExitCode;

use alignet::{run, Stage};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alignet", version, about = "Sentiment-aware alignment analysis of message corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, instead of the config's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Pipeline(Common),
    #[command(flatten)]
    Stage(StageCommand),
}

#[derive(Subcommand)]
enum StageCommand {
    Synth(Common),
    Ingest(Common),
    Score(Common),
    Graph(Common),
    Aggregate(Common),
    Nulltest(Common),
    Communities(Common),
    Intersect(Common),
    Cluster(Common),
    Report(Common),
}

impl StageCommand {
    fn split(self) -> (Stage, Common) {
        match self {
            StageCommand::Synth(c) => (Stage::Synth, c),
            StageCommand::Ingest(c) => (Stage::Ingest, c),
            StageCommand::Score(c) => (Stage::Score, c),
            StageCommand::Graph(c) => (Stage::Graph, c),
            StageCommand::Aggregate(c) => (Stage::Aggregate, c),
            StageCommand::Nulltest(c) => (Stage::Nulltest, c),
            StageCommand::Communities(c) => (Stage::Communities, c),
            StageCommand::Intersect(c) => (Stage::Intersect, c),
            StageCommand::Cluster(c) => (Stage::Cluster, c),
            StageCommand::Report(c) => (Stage::Report, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, common) = match cli.command {
        Command::Pipeline(c) => (None, c),
        Command::Stage(s) => {
            let (stage, c) = s.split();
            (Some(stage), c)
        }
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("alignet: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&common.config, stage, common.seed, common.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alignet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
