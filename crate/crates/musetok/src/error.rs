use thiserror::Error;

/// Errors surfaced by the tokenization and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    // Standard MIDI file I/O
    #[error("malformed SMF header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("unsupported SMF input: {0}")]
    UnsupportedFormat(String),
    #[error("truncated chunk at byte {offset}: {reason}")]
    TruncatedChunk { offset: usize, reason: String },

    // Musical tokenization
    #[error("onset tick {tick} is off the position grid ({grid_ticks} ticks)")]
    UnquantizedInput { tick: u64, grid_ticks: f64 },
    #[error("malformed token sequence at token {index}: {reason}")]
    MalformedSequence { index: usize, reason: String },
    #[error("corpus contains no non-blank lines")]
    EmptyCorpus,

    // Symbol alphabet
    #[error("alphabet overflow: {0} distinct tokens exceeds the {max} codepoint budget", max = crate::symbol::MAX_ALPHABET)]
    AlphabetOverflow(usize),
    #[error("unknown token {token:?} in song {song_id} at index {index}")]
    UnknownToken {
        token: String,
        song_id: String,
        index: usize,
    },
    #[error("symbol U+{0:04X} is not in the alphabet")]
    UnknownSymbol(u32),

    // Subword models
    #[error("target vocabulary {target} is below the base alphabet size {base}")]
    TargetBelowBase { target: usize, base: usize },
    #[error("piece id {0} is not in the model")]
    UnknownPiece(usize),
    #[error("lattice probability underflowed to zero in song {0}")]
    NumericalUnderflow(String),

    // Metrics
    #[error("score has no pitched (non-percussion) notes")]
    NoPitchedNotes,
    #[error("bar {bar} out of range: score spans {bars} bars")]
    BarOutOfRange { bar: usize, bars: usize },
    #[error("score spans {0} bar(s); groove similarity needs at least 2")]
    TooFewBars(usize),
    #[error("score has no notes")]
    EmptyScore,
    #[error("similarity matrix has no frames")]
    DegenerateMatrix,
    #[error("invalid band: lower {lower} must be below upper {upper}")]
    InvalidBand { lower: f64, upper: f64 },

    // Configuration / files
    #[error("invalid tokenizer config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
