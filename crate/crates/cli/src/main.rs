mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const FORMATS: &str = "\
File formats (one example line each):
  corpus      one sentence per line, UTF-8         le chat dort .
  vocabulary  one token per line, line k = id k    <pad>
  model       binary BTXM file, see the docs       (binary)
  testset dir source.txt, target.txt, gold.tsv, meta.txt; gold line: 12\t12
  scores      pairs.tsv: i<TAB>j<TAB>p              3\t17\t0.999230
  curve CSV   rho,precision,recall,f1,extracted    0.990000,0.912000,0.880000,0.895714,289
  lex table   e<TAB>f<TAB>t(f|e)                    chat\tcat\t8.5e-1
  classifier  key=value lines                      bias=-3.2e0
  run config  key=value, keys are long flag names  epochs=10";

#[derive(Parser, Debug)]
#[command(name = "bitext", version, about = "Parallel sentence extraction from comparable corpora")]
#[command(args_override_self = true, after_help = FORMATS)]
pub struct Cli {
    /// Worker threads for scoring and training (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Read `key=value` defaults for the subcommand from FILE; flags given on
    /// the command line override them.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 512)]
    pub d_e: usize,
    #[arg(long, default_value_t = 512)]
    pub d_h: usize,
    #[arg(long, default_value_t = 256)]
    pub d_f: usize,
    /// lstm or gru.
    #[arg(long, default_value = "lstm")]
    pub cell: String,
    #[arg(long, default_value_t = 0.2)]
    pub dropout_in: f64,
    #[arg(long, default_value_t = 0.3)]
    pub dropout_out: f64,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Negative pairs per positive pair.
    #[arg(long, default_value_t = 6)]
    pub m: usize,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.0002)]
    pub lr: f64,
    /// Global gradient-norm cap.
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct BaselineArgs {
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    /// Minimum t(f|e) for a word to count as translated.
    #[arg(long, default_value_t = 0.1)]
    pub tau_lex: f64,
    /// Filter-passing negatives per positive for the classifier.
    #[arg(long, default_value_t = 6)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Selection {
    /// Keep pairs with probability at least RHO.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Keep the K best pairs.
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct SystemArgs {
    /// BTXM model file (needs --src-vocab and --tgt-vocab).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory written by baseline-train.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VocabPaths {
    #[arg(long)]
    pub src_vocab: Option<PathBuf>,
    #[arg(long)]
    pub tgt_vocab: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a frequency-ranked vocabulary from a corpus file.
    BuildVocab {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Cap including <pad> and <unk>.
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Train the siamese classifier.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value = "model.btxm")]
        out: PathBuf,
        /// Training-log CSV (default: <out>.log.csv).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also store optimizer state so training can be resumed.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Continue from a checkpoint written by --checkpoint.
        #[arg(long, value_name = "FILE")]
        resume: Option<PathBuf>,
    },
    /// Score every source/target pair and keep the best ones.
    Extract {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        select: Selection,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build a noisy test set from parallel and held-out sentences.
    SynthNoise {
        #[arg(long)]
        parallel_src: PathBuf,
        #[arg(long)]
        parallel_tgt: PathBuf,
        #[arg(long)]
        heldout_tgt: PathBuf,
        /// Fraction of targets replaced.
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Precision/recall/F1 at the best threshold, plus the full curve.
    Evaluate {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        vocab: VocabPaths,
        #[arg(long)]
        testset_dir: PathBuf,
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
    /// Evaluate one system across noise ratios and seeds.
    NoiseSweep {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        vocab: VocabPaths,
        #[arg(long)]
        parallel_src: PathBuf,
        #[arg(long)]
        parallel_tgt: PathBuf,
        #[arg(long)]
        heldout_tgt: PathBuf,
        #[arg(long, default_value_t = 1000)]
        p: usize,
        /// Comma-separated noise ratios.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        ratios: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per negative count and evaluate each.
    MSweep {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        ms: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Test-set directories, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        testset_dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train lexical tables and the feature classifier.
    BaselineTrain {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[command(flatten)]
        args: BaselineArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Filter and classify every pair with a trained baseline.
    BaselineExtract {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[command(flatten)]
        select: Selection,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic toy language pair for experiments.
    GenToy {
        #[arg(long, default_value_t = 5000)]
        train: usize,
        #[arg(long, default_value_t = 1000)]
        test: usize,
        #[arg(long, default_value_t = 2000)]
        heldout: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
