use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use musetok::{
    bpe_decode, bpe_encode, compute_ssm, decode_symbols, detokenize_midilike, detokenize_remi,
    encode_symbols, feature_sequence, fitness_scape_plot, groove_similarity, parse_midi,
    pitch_class_entropy, pitch_class_histogram, quantize, read_token_text, render_scape_plot,
    stats_table, structureness_indicator, synth, tokenize_midilike, tokenize_remi, train_bpe,
    train_unigram, unigram_decode, viterbi_encode, write_corpus, write_midi, Alphabet, BpeModel,
    CorpusStats, PieceId, RecoveryMode, Scheme, SiBand, SubwordSequence, SymbolString,
    TokenSequence, TokenizerConfig, UnigramModel, UnigramTrainConfig,
};

use crate::{BinArgs, Command, MethodArg, SchemeArg};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Tokenize {
            input,
            scheme,
            out,
            bins,
        } => tokenize(&input, scheme, &out, &bins),
        Command::Detokenize {
            corpus,
            scheme,
            out,
            recover,
            bins,
        } => detokenize(&corpus, scheme, &out, recover, &bins),
        Command::VocabTrain {
            corpus,
            method,
            vocab_size,
            out,
            alphabet_out,
            max_piece_len,
            seed_factor,
            em_iters,
            shrink_factor,
        } => {
            let cfg = UnigramTrainConfig {
                max_piece_len,
                seed_size_factor: seed_factor,
                em_iters_per_round: em_iters,
                shrink_factor,
            };
            vocab_train(
                &corpus,
                method,
                vocab_size,
                &out,
                alphabet_out.as_deref(),
                &cfg,
            )
        }
        Command::Encode {
            corpus,
            model,
            out,
            symbols_out,
        } => encode(&corpus, &model, &out, symbols_out.as_deref()),
        Command::Decode {
            encoded,
            model,
            out,
        } => decode(&encoded, &model, &out),
        Command::Eval {
            input,
            report,
            frame_hop,
            max_frames,
            si_bands,
            bins,
        } => eval(&input, &report, frame_hop, max_frames, &si_bands, &bins),
        Command::Stats {
            corpus,
            encoded,
            out,
        } => stats(&corpus, encoded.as_deref(), &out),
        Command::Scapeplot {
            input,
            out,
            frame_hop,
            max_frames,
        } => scapeplot(&input, &out, frame_hop, max_frames),
        Command::Gen { out, songs, seed } => gen(&out, songs, seed),
    }
}

fn tokenizer_config(bins: &BinArgs) -> Result<TokenizerConfig> {
    let cfg = TokenizerConfig {
        positions_per_bar: bins.positions,
        velocity_bins: bins.velocity_bins,
        duration_bins: (1..=bins.duration_bins).collect(),
        ..TokenizerConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// MIDI inputs sorted by file name; song ids are the file stems.
fn midi_files(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    if input.is_dir() {
        for entry in fs::read_dir(input).with_context(|| format!("reading {}", input.display()))? {
            let path = entry?.path();
            let is_midi = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
            if path.is_file() && is_midi {
                files.push(path);
            }
        }
        files.sort();
    } else {
        files.push(input.to_path_buf());
    }
    if files.is_empty() {
        bail!("no MIDI files under {}", input.display());
    }
    Ok(files
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "song".into());
            (id, p)
        })
        .collect())
}

fn load_score(path: &Path) -> Result<musetok::Score> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_midi(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn tokenize(input: &Path, scheme: SchemeArg, out: &Path, bins: &BinArgs) -> Result<()> {
    let songs: Vec<TokenSequence> = match scheme {
        SchemeArg::Text => {
            let text = fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))?;
            read_token_text(&text)?
        }
        SchemeArg::Remi | SchemeArg::Midilike => {
            let cfg = tokenizer_config(bins)?;
            let files = midi_files(input)?;
            let songs: Vec<Result<TokenSequence>> = files
                .par_iter()
                .map(|(id, path)| {
                    let score = load_score(path)?;
                    let seq = match scheme {
                        SchemeArg::Remi => {
                            let q = quantize(&score, &cfg)?;
                            tokenize_remi(&q, &cfg)
                        }
                        _ => tokenize_midilike(&score, &cfg),
                    };
                    seq.with_context(|| format!("tokenizing song {id}"))
                })
                .collect();
            songs.into_iter().collect::<Result<Vec<_>>>()?
        }
    };
    fs::write(out, write_corpus(&songs)).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("tokenized {} song(s) -> {}", songs.len(), out.display());
    Ok(())
}

fn detokenize(
    corpus: &Path,
    scheme: SchemeArg,
    out: &Path,
    recover: bool,
    bins: &BinArgs,
) -> Result<()> {
    let cfg = tokenizer_config(bins)?;
    let mode = if recover {
        RecoveryMode::Skip
    } else {
        RecoveryMode::Strict
    };
    let text =
        fs::read_to_string(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let songs = match scheme {
        SchemeArg::Remi => musetok::read_corpus(&text, Scheme::Remi)?,
        SchemeArg::Midilike => musetok::read_corpus(&text, Scheme::MidiLike)?,
        SchemeArg::Text => bail!("text corpora carry no musical timing; choose remi or midilike"),
    };
    fs::create_dir_all(out)?;
    for (i, seq) in songs.iter().enumerate() {
        let score = match scheme {
            SchemeArg::Remi => detokenize_remi(seq, &cfg, mode),
            _ => detokenize_midilike(seq, &cfg, mode),
        }
        .with_context(|| format!("decoding song {}", i + 1))?;
        let path = out.join(format!("song-{:06}.mid", i + 1));
        fs::write(&path, write_midi(&score))?;
    }
    eprintln!("wrote {} MIDI file(s) under {}", songs.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Subword models
// ---------------------------------------------------------------------------

enum SubwordModel {
    Bpe(BpeModel),
    Unigram(UnigramModel),
}

impl SubwordModel {
    fn load(path: &Path) -> Result<SubwordModel> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if value.get("merges").is_some() {
            Ok(SubwordModel::Bpe(BpeModel::from_json(&text)?))
        } else if value.get("pieces").is_some() {
            Ok(SubwordModel::Unigram(UnigramModel::from_json(&text)?))
        } else {
            bail!(
                "{} is neither a BPE nor a Unigram model file",
                path.display()
            )
        }
    }

    fn alphabet(&self) -> &Alphabet {
        match self {
            SubwordModel::Bpe(m) => m.alphabet(),
            SubwordModel::Unigram(m) => m.alphabet(),
        }
    }

    fn encode(&self, s: &SymbolString) -> musetok::Result<SubwordSequence> {
        match self {
            SubwordModel::Bpe(m) => bpe_encode(s, m),
            SubwordModel::Unigram(m) => viterbi_encode(s, m),
        }
    }

    fn decode(&self, seq: &SubwordSequence) -> musetok::Result<SymbolString> {
        match self {
            SubwordModel::Bpe(m) => bpe_decode(seq, m),
            SubwordModel::Unigram(m) => unigram_decode(seq, m),
        }
    }

    fn surface(&self, id: PieceId) -> Option<&str> {
        match self {
            SubwordModel::Bpe(m) => m.surface(id),
            SubwordModel::Unigram(m) => m.surface(id),
        }
    }

    fn piece_id(&self, surface: &str) -> Option<PieceId> {
        match self {
            SubwordModel::Bpe(m) => m.piece_id(surface),
            SubwordModel::Unigram(m) => m.piece_id(surface),
        }
    }
}

fn read_opaque_corpus(path: &Path) -> Result<Vec<TokenSequence>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_token_text(&text)?)
}

fn vocab_train(
    corpus_path: &Path,
    method: MethodArg,
    vocab_size: usize,
    out: &Path,
    alphabet_out: Option<&Path>,
    unigram_cfg: &UnigramTrainConfig,
) -> Result<()> {
    let songs = read_opaque_corpus(corpus_path)?;
    let alphabet = Alphabet::build(&songs)?;
    let corpus = musetok::encode_corpus(&songs, &alphabet, None)?;
    let json = match method {
        MethodArg::Bpe => {
            let model = train_bpe(&corpus, &alphabet, vocab_size)?;
            eprintln!(
                "bpe: {} base symbols + {} merges = vocabulary {}",
                alphabet.len(),
                model.merges().len(),
                model.vocab_size()
            );
            model.to_json()
        }
        MethodArg::Unigram => {
            let model = train_unigram(&corpus, &alphabet, vocab_size, unigram_cfg)?;
            eprintln!(
                "unigram: {} base symbols, vocabulary {}",
                alphabet.len(),
                model.vocab_size()
            );
            model.to_json()
        }
    };
    fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = alphabet_out {
        fs::write(path, alphabet.to_file_string())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn encode(
    corpus_path: &Path,
    model_path: &Path,
    out: &Path,
    symbols_out: Option<&Path>,
) -> Result<()> {
    let model = SubwordModel::load(model_path)?;
    let songs = read_opaque_corpus(corpus_path)?;

    let mut piece_lines = String::new();
    let mut symbol_lines = String::new();
    for (i, seq) in songs.iter().enumerate() {
        let s = encode_symbols(seq, model.alphabet(), &format!("song-{i:06}"))?;
        let enc = model.encode(&s)?;
        let line: Vec<&str> = enc
            .pieces
            .iter()
            .map(|&id| model.surface(id).expect("piece from this model"))
            .collect();
        piece_lines.push_str(&line.join(" "));
        piece_lines.push('\n');
        symbol_lines.push_str(&s.as_string());
        symbol_lines.push('\n');
    }
    fs::write(out, piece_lines).with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = symbols_out {
        fs::write(path, symbol_lines).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!("encoded {} song(s) -> {}", songs.len(), out.display());
    Ok(())
}

fn decode(encoded_path: &Path, model_path: &Path, out: &Path) -> Result<()> {
    let model = SubwordModel::load(model_path)?;
    let text = fs::read_to_string(encoded_path)
        .with_context(|| format!("reading {}", encoded_path.display()))?;

    let mut decoded: Vec<TokenSequence> = Vec::new();
    for (lineno, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let mut pieces = Vec::new();
        for surface in line.split_whitespace() {
            let id = model.piece_id(surface).ok_or_else(|| {
                anyhow::anyhow!("song {}: piece {surface:?} is not in the model", lineno + 1)
            })?;
            pieces.push(id);
        }
        let seq = SubwordSequence {
            pieces,
            song_id: format!("song-{lineno:06}"),
        };
        let symbols = model.decode(&seq)?;
        decoded.push(decode_symbols(&symbols, model.alphabet())?);
    }
    if decoded.is_empty() {
        bail!("{} has no non-blank lines", encoded_path.display());
    }
    fs::write(out, write_corpus(&decoded)).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("decoded {} song(s) -> {}", decoded.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ReportConfig {
    frame_hop_s: f64,
    max_frames: usize,
    positions_per_bar: u32,
    si_bands: [[Option<f64>; 2]; 3],
    /// Tempo assumed for scores without tempo information.
    default_tempo_bpm: u32,
}

#[derive(Serialize, Clone)]
struct SongMetrics {
    song_id: String,
    #[serde(rename = "H")]
    h: Option<f64>,
    #[serde(rename = "GS")]
    gs: Option<f64>,
    #[serde(rename = "SI_short")]
    si_short: Option<f64>,
    #[serde(rename = "SI_medium")]
    si_medium: Option<f64>,
    #[serde(rename = "SI_long")]
    si_long: Option<f64>,
}

#[derive(Serialize)]
struct Means {
    #[serde(rename = "H")]
    h: Option<f64>,
    #[serde(rename = "GS")]
    gs: Option<f64>,
    #[serde(rename = "SI_short")]
    si_short: Option<f64>,
    #[serde(rename = "SI_medium")]
    si_medium: Option<f64>,
    #[serde(rename = "SI_long")]
    si_long: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    config: ReportConfig,
    songs: Vec<SongMetrics>,
    corpus_means: Means,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Bands given as comma-separated `lo:hi` pairs; an empty `hi` means
/// unbounded.
fn parse_si_bands(text: &str) -> Result<Vec<SiBand>> {
    let mut bands = Vec::new();
    for part in text.split(',') {
        let (lo, hi) = part
            .split_once(':')
            .with_context(|| format!("band {part:?} is not lo:hi"))?;
        let lower: f64 = lo
            .trim()
            .parse()
            .with_context(|| format!("band {part:?}"))?;
        let upper: Option<f64> = match hi.trim() {
            "" => None,
            v => Some(v.parse().with_context(|| format!("band {part:?}"))?),
        };
        bands.push(SiBand::new(lower, upper)?);
    }
    if bands.is_empty() {
        bail!("no bands given");
    }
    Ok(bands)
}

fn eval(
    input: &Path,
    report_path: &Path,
    frame_hop: f64,
    max_frames: usize,
    si_bands: &str,
    bins: &BinArgs,
) -> Result<()> {
    let cfg = tokenizer_config(bins)?;
    let files = midi_files(input)?;
    let bands = parse_si_bands(si_bands)?;
    if bands.len() != 3 {
        bail!("expected exactly three bands (short, medium, long)");
    }

    let rows: Vec<Result<(SongMetrics, Vec<String>)>> = files
        .par_iter()
        .map(|(id, path)| {
            let score = load_score(path)?;
            let mut warnings = Vec::new();

            let h = match pitch_class_histogram(&score) {
                Ok(hist) => Some(pitch_class_entropy(&hist)),
                Err(e) => {
                    warnings.push(format!("{id}: H skipped ({e})"));
                    None
                }
            };
            let gs = match groove_similarity(&score, cfg.positions_per_bar) {
                Ok(gs) => Some(gs),
                Err(e) => {
                    warnings.push(format!("{id}: GS skipped ({e})"));
                    None
                }
            };
            let si = match feature_sequence(&score, frame_hop) {
                Ok(features) => {
                    let plot = fitness_scape_plot(&compute_ssm(&features), max_frames)?;
                    let mut out = [None; 3];
                    for (slot, band) in out.iter_mut().zip(bands.iter()) {
                        *slot = Some(structureness_indicator(&plot, band)?);
                    }
                    out
                }
                Err(e) => {
                    warnings.push(format!("{id}: SI skipped ({e})"));
                    [None; 3]
                }
            };
            Ok((
                SongMetrics {
                    song_id: id.clone(),
                    h,
                    gs,
                    si_short: si[0],
                    si_medium: si[1],
                    si_long: si[2],
                },
                warnings,
            ))
        })
        .collect();

    let mut songs = Vec::with_capacity(rows.len());
    for row in rows {
        let (metrics, warnings) = row?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        songs.push(metrics);
    }
    songs.sort_by(|a, b| a.song_id.cmp(&b.song_id));

    let means = Means {
        h: mean_of(songs.iter().map(|s| s.h)),
        gs: mean_of(songs.iter().map(|s| s.gs)),
        si_short: mean_of(songs.iter().map(|s| s.si_short)),
        si_medium: mean_of(songs.iter().map(|s| s.si_medium)),
        si_long: mean_of(songs.iter().map(|s| s.si_long)),
    };
    let table = {
        let fmt = |v: &Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "-".into(),
        };
        let mut t = format!("{:<10} {:>8}\n", "metric", "mean");
        t.push_str(&format!("{:<10} {:>8}\n", "SI-short", fmt(&means.si_short)));
        t.push_str(&format!(
            "{:<10} {:>8}\n",
            "SI-medium",
            fmt(&means.si_medium)
        ));
        t.push_str(&format!("{:<10} {:>8}\n", "SI-long", fmt(&means.si_long)));
        t.push_str(&format!("{:<10} {:>8}\n", "H", fmt(&means.h)));
        t.push_str(&format!("{:<10} {:>8}\n", "GS", fmt(&means.gs)));
        t
    };

    let report = Report {
        config: ReportConfig {
            frame_hop_s: frame_hop,
            max_frames,
            positions_per_bar: cfg.positions_per_bar,
            si_bands: [
                [Some(bands[0].lower_s), bands[0].upper_s],
                [Some(bands[1].lower_s), bands[1].upper_s],
                [Some(bands[2].lower_s), bands[2].upper_s],
            ],
            default_tempo_bpm: 120,
        },
        songs,
        corpus_means: means,
    };
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(report_path, json + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct StatsFile {
    base: CorpusStats,
    encoded: Option<CorpusStats>,
}

fn stats(corpus_path: &Path, encoded_path: Option<&Path>, out: &Path) -> Result<()> {
    let base_songs = read_opaque_corpus(corpus_path)?;
    let base = musetok::avg_tokens_per_song(&base_songs)?;

    let encoded = match encoded_path {
        Some(path) => {
            let enc_songs = read_opaque_corpus(path)?;
            Some(musetok::paired_stats(&base_songs, &enc_songs)?)
        }
        None => None,
    };

    let mut rows: Vec<(&str, &CorpusStats)> = vec![("base", &base)];
    if let Some(enc) = &encoded {
        rows.push(("encoded", enc));
    }
    print!("{}", stats_table(&rows));

    let json = serde_json::to_string_pretty(&StatsFile { base, encoded })?;
    fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn scapeplot(input: &Path, out: &Path, frame_hop: f64, max_frames: usize) -> Result<()> {
    let score = load_score(input)?;
    let features = feature_sequence(&score, frame_hop)?;
    let plot = fitness_scape_plot(&compute_ssm(&features), max_frames)?;
    let (csv, ppm) = render_scape_plot(&plot, out)?;
    eprintln!("wrote {} and {}", csv.display(), ppm.display());
    Ok(())
}

fn gen(out: &Path, songs: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(out)?;
    let corpus = synth::folk_corpus(seed, songs);
    for (i, score) in corpus.iter().enumerate() {
        let path = out.join(format!("folk-{i:04}.mid"));
        fs::write(&path, write_midi(score))?;
    }
    eprintln!("wrote {songs} song(s) under {}", out.display());
    Ok(())
}
