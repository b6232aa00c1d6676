mod commands;
mod manifest;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use graphcaps::corpus::DEFAULT_GRAPH_WINDOW;

#[derive(Parser, Debug)]
#[command(
    name = "graphcaps",
    version,
    about = "Graph-of-words capsule networks for multi-label text classification"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Seed for every stochastic stage.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Keep all work on the calling thread.
    #[arg(long, global = true)]
    pub serial: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory receiving every artifact.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Fail as soon as any layer produces NaN or infinity.
    #[arg(long, global = true)]
    pub check_finite: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic toy corpus and its label taxonomy.
    Toy(commands::ToyArgs),
    /// Corpus → arranged word matrices (and tensors when vectors are given).
    Prep(commands::PrepArgs),
    /// Train (or import) skip-gram word vectors.
    EmbedWords(commands::EmbedWordsArgs),
    /// Embed taxonomy labels via meta-path walks and score reconstruction.
    EmbedLabels(commands::EmbedLabelsArgs),
    /// Train one model variant.
    Train(commands::TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(commands::EvalArgs),
    /// Predict label sets for a corpus.
    Predict(commands::EvalArgs),
    /// Train all thirteen variants of the ablation grid.
    Ablate(commands::AblateArgs),
    /// Export attention scalars and capsule lengths as CSV.
    AttnDump(commands::EvalArgs),
    /// Finite-difference check of every layer and full model.
    Gradcheck(commands::GradcheckArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TextArgs {
    /// Stopword list, one word per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Lemma map, `surface<TAB>lemma` per line.
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    /// Co-occurrence window of the document graph.
    #[arg(long, default_value_t = DEFAULT_GRAPH_WINDOW)]
    pub graph_window: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
pub enum Distance {
    Unit,
    InverseWeight,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ArrangeArgs {
    /// Maximum subgraph size around each central word.
    #[arg(long, default_value_t = 25)]
    pub subgraph_size: usize,
    /// Edge length for closeness centrality.
    #[arg(long, value_enum, default_value_t = Distance::Unit)]
    pub distance: Distance,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    graphcaps::numerics::set_check_finite(cli.global.check_finite);
    let g = &cli.global;
    let result = match cli.command {
        Command::Toy(a) => commands::toy(g, &a),
        Command::Prep(a) => commands::prep(g, &a),
        Command::EmbedWords(a) => commands::embed_words(g, &a),
        Command::EmbedLabels(a) => commands::embed_labels(g, &a),
        Command::Train(a) => commands::train(g, &a),
        Command::Eval(a) => commands::eval(g, &a),
        Command::Predict(a) => commands::predict(g, &a),
        Command::Ablate(a) => commands::ablate(g, &a),
        Command::AttnDump(a) => commands::attn_dump(g, &a),
        Command::Gradcheck(a) => commands::gradcheck(g, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
