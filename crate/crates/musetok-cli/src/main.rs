//! Command-line surface for the tokenization pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! stderr; data goes to files or stdout only.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Remi,
    Midilike,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bpe,
    Unigram,
}

/// Tokenizer bin settings shared by the musical schemes.
#[derive(Debug, Args)]
pub struct BinArgs {
    /// Position cells per bar for REMI and the groove grid.
    #[arg(long, default_value_t = 16)]
    pub positions: u32,
    /// Number of velocity bins.
    #[arg(long, default_value_t = 32)]
    pub velocity_bins: u32,
    /// Number of duration bins (thirty-second-note multiples 1..=N).
    #[arg(long, default_value_t = 64)]
    pub duration_bins: u32,
}

#[derive(Debug, Parser)]
#[command(
    name = "musetok",
    version,
    about = "Symbolic-music subword tokenization pipeline and evaluation suite"
)]
pub struct Cli {
    /// Worker threads (default: MUSETOK_JOBS or all cores). Results are
    /// byte-identical for any value.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert MIDI files (or token text) to a one-song-per-line corpus.
    Tokenize {
        /// MIDI directory, single MIDI file, or token-text file.
        input: PathBuf,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Output corpus file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        bins: BinArgs,
    },
    /// Convert a token corpus back to MIDI files.
    Detokenize {
        corpus: PathBuf,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Output directory for the reconstructed MIDI files.
        #[arg(long)]
        out: PathBuf,
        /// Skip broken notes instead of failing on malformed sequences.
        #[arg(long)]
        recover: bool,
        #[command(flatten)]
        bins: BinArgs,
    },
    /// Train a subword vocabulary over a token corpus.
    VocabTrain {
        corpus: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Target vocabulary size (base alphabet + learned pieces).
        #[arg(long)]
        vocab_size: usize,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also write the token-to-symbol alphabet table.
        #[arg(long)]
        alphabet_out: Option<PathBuf>,
        /// Unigram: longest candidate piece, in symbols.
        #[arg(long, default_value_t = 8)]
        max_piece_len: usize,
        /// Unigram: seed vocabulary size as a multiple of the target.
        #[arg(long, default_value_t = 8)]
        seed_factor: usize,
        /// Unigram: EM iterations per pruning round.
        #[arg(long, default_value_t = 2)]
        em_iters: usize,
        /// Unigram: fraction of pieces kept per pruning round.
        #[arg(long, default_value_t = 0.75)]
        shrink_factor: f64,
    },
    /// Encode a token corpus into subword pieces with a trained model.
    Encode {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the intermediate symbol corpus (one song per line).
        #[arg(long)]
        symbols_out: Option<PathBuf>,
    },
    /// Decode a subword-piece corpus back to token text.
    Decode {
        encoded: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate musical quality and structure metrics over MIDI files.
    Eval {
        /// MIDI directory or single MIDI file.
        input: PathBuf,
        /// JSON report path.
        #[arg(long)]
        report: PathBuf,
        /// Frame hop for the self-similarity features, in seconds.
        #[arg(long, default_value_t = 0.5)]
        frame_hop: f64,
        /// Frame cap for the scape-plot computation.
        #[arg(long, default_value_t = 256)]
        max_frames: usize,
        /// Segment-duration bands in seconds as `lo:hi` pairs; an empty `hi`
        /// is unbounded.
        #[arg(long, default_value = "3:8,8:15,15:")]
        si_bands: String,
        #[command(flatten)]
        bins: BinArgs,
    },
    /// Token-efficiency statistics for a corpus (and optional encoding).
    Stats {
        corpus: PathBuf,
        /// Encoded corpus to compare against, song by song.
        #[arg(long)]
        encoded: Option<PathBuf>,
        /// JSON output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fitness scape plot (CSV + PPM image) for one MIDI file.
    Scapeplot {
        input: PathBuf,
        /// Output prefix; writes `<prefix>.csv` and `<prefix>.ppm`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        frame_hop: f64,
        #[arg(long, default_value_t = 256)]
        max_frames: usize,
    },
    /// Generate a seeded synthetic folk-style MIDI corpus.
    Gen {
        /// Output directory.
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        songs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let jobs = cli.jobs.or_else(|| {
        std::env::var("MUSETOK_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
