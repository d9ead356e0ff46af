//! Property tests over the full encode/decode pipeline.

use musetok::*;
use proptest::prelude::*;

fn external_seq(words: &[String]) -> TokenSequence {
    TokenSequence {
        scheme: Scheme::ExternalText,
        tokens: words
            .iter()
            .map(|w| MusicToken::External(w.clone()))
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smf_round_trip(seed in 0u64..10_000) {
        let score = synth::random_score(seed);
        let parsed = parse_midi(&write_midi(&score)).unwrap();
        prop_assert_eq!(parsed, score);
    }

    #[test]
    fn remi_round_trip(seed in 0u64..10_000) {
        let cfg = TokenizerConfig::default();
        let q = synth::random_quantized_score(seed, &cfg);
        let seq = tokenize_remi(&q, &cfg).unwrap();
        let back = detokenize_remi(&seq, &cfg, RecoveryMode::Strict).unwrap();
        prop_assert_eq!(back.notes, q.notes);
    }

    #[test]
    fn midilike_round_trip_within_5ms(seed in 0u64..10_000) {
        let cfg = TokenizerConfig::default();
        let score = synth::random_score(seed);
        let seq = tokenize_midilike(&score, &cfg).unwrap();
        let back = detokenize_midilike(&seq, &cfg, RecoveryMode::Strict).unwrap();
        prop_assert_eq!(back.notes.len(), score.notes.len());

        let mut orig: Vec<(u8, f64, f64)> = score
            .notes
            .iter()
            .map(|n| {
                (
                    n.pitch,
                    ticks_to_seconds(&score, n.onset_tick) * 1000.0,
                    ticks_to_seconds(&score, n.onset_tick + n.duration_tick) * 1000.0,
                )
            })
            .collect();
        // Decoded scores put one tick per millisecond.
        let mut dec: Vec<(u8, f64, f64)> = back
            .notes
            .iter()
            .map(|n| {
                (
                    n.pitch,
                    n.onset_tick as f64,
                    (n.onset_tick + n.duration_tick) as f64,
                )
            })
            .collect();
        let key = |t: &(u8, f64, f64)| (t.0, t.1 as i64, t.2 as i64);
        orig.sort_by_key(key);
        dec.sort_by_key(key);
        for (o, d) in orig.iter().zip(&dec) {
            prop_assert_eq!(o.0, d.0);
            prop_assert!((o.1 - d.1).abs() <= 5.0, "onset {} vs {}", o.1, d.1);
            prop_assert!((o.2 - d.2).abs() <= 5.0 + 1.0, "offset {} vs {}", o.2, d.2);
        }
    }

    #[test]
    fn symbol_round_trip(words in proptest::collection::vec("[a-f]{1,3}", 1..60)) {
        let seq = external_seq(&words);
        let alphabet = Alphabet::build(std::slice::from_ref(&seq)).unwrap();
        let encoded = encode_symbols(&seq, &alphabet, "p").unwrap();
        prop_assert_eq!(encoded.len(), seq.len());
        let decoded = decode_symbols(&encoded, &alphabet).unwrap();
        prop_assert_eq!(decoded, seq);
    }

    #[test]
    fn bpe_round_trip_and_compression_bound(
        songs in proptest::collection::vec("[ab]{1,40}", 1..8),
        target in 2usize..12,
    ) {
        let seqs: Vec<TokenSequence> = songs
            .iter()
            .map(|s| external_seq(&s.chars().map(|c| c.to_string()).collect::<Vec<_>>()))
            .collect();
        let alphabet = Alphabet::build(&seqs).unwrap();
        let corpus = encode_corpus(&seqs, &alphabet, None).unwrap();
        prop_assume!(target >= alphabet.len());
        let model = train_bpe(&corpus, &alphabet, target).unwrap();
        for s in &corpus {
            let enc = bpe_encode(s, &model).unwrap();
            prop_assert!(enc.pieces.len() <= s.len());
            let dec = bpe_decode(&enc, &model).unwrap();
            prop_assert_eq!(&dec.symbols, &s.symbols);
        }
    }

    #[test]
    fn unigram_round_trip(songs in proptest::collection::vec("[ab]{1,30}", 1..6)) {
        let seqs: Vec<TokenSequence> = songs
            .iter()
            .map(|s| external_seq(&s.chars().map(|c| c.to_string()).collect::<Vec<_>>()))
            .collect();
        let alphabet = Alphabet::build(&seqs).unwrap();
        let corpus = encode_corpus(&seqs, &alphabet, None).unwrap();
        let model = train_unigram(
            &corpus,
            &alphabet,
            (alphabet.len() + 4).min(12),
            &UnigramTrainConfig::default(),
        )
        .unwrap();
        for s in &corpus {
            let enc = viterbi_encode(s, &model).unwrap();
            let dec = unigram_decode(&enc, &model).unwrap();
            prop_assert_eq!(&dec.symbols, &s.symbols);
        }
    }

    #[test]
    fn tick_clock_is_monotone(seed in 0u64..10_000, a in 0u64..100_000, b in 0u64..100_000) {
        let score = synth::random_score(seed);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(ticks_to_seconds(&score, lo) <= ticks_to_seconds(&score, hi));
    }

    #[test]
    fn midi_parser_never_panics_on_junk(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let _ = parse_midi(&bytes);
    }

    #[test]
    fn midi_parser_never_panics_on_truncations(seed in 0u64..500, cut in 0usize..100) {
        let bytes = write_midi(&synth::random_score(seed));
        let cut = cut.min(bytes.len());
        let _ = parse_midi(&bytes[..bytes.len() - cut]);
    }

    #[test]
    fn quantize_idempotent(seed in 0u64..10_000) {
        let cfg = TokenizerConfig::default();
        let s = synth::random_score(seed);
        let q1 = quantize(&s, &cfg).unwrap();
        let q2 = quantize(&q1, &cfg).unwrap();
        prop_assert_eq!(q1, q2);
    }
}

#[test]
fn bpe_training_corpus_piece_count_is_monotone_in_merges() {
    let songs = ["abababab", "aabbaabb", "abba", "babab"];
    let seqs: Vec<TokenSequence> = songs
        .iter()
        .map(|s| external_seq(&s.chars().map(|c| c.to_string()).collect::<Vec<_>>()))
        .collect();
    let alphabet = Alphabet::build(&seqs).unwrap();
    let corpus = encode_corpus(&seqs, &alphabet, None).unwrap();
    let full = train_bpe(&corpus, &alphabet, 12).unwrap();
    let json_full = full.to_json();

    let mut prev_total = usize::MAX;
    for k in 0..=full.merges().len() {
        // A model truncated to the first k merges encodes at least as many
        // pieces as one with k + 1.
        let mut file: serde_json::Value = serde_json::from_str(&json_full).unwrap();
        let merges = file["merges"].as_array().unwrap()[..k].to_vec();
        file["merges"] = serde_json::Value::Array(merges);
        let truncated = BpeModel::from_json(&file.to_string()).unwrap();
        let total: usize = corpus
            .iter()
            .map(|s| bpe_encode(s, &truncated).unwrap().pieces.len())
            .sum();
        assert!(total <= prev_total, "merge {k} grew the corpus");
        prev_total = total;
    }
}

#[test]
fn symbol_round_trip_over_1000_random_sequences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let vocab: Vec<String> = (0..40).map(|i| format!("tok{i}")).collect();
    let alphabet = Alphabet::build(&[external_seq(&vocab)]).unwrap();
    for case in 0..1000 {
        let len = rng.random_range(0..80usize);
        let words: Vec<String> = (0..len)
            .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
            .collect();
        let seq = external_seq(&words);
        let encoded = encode_symbols(&seq, &alphabet, "case").unwrap();
        let decoded = decode_symbols(&encoded, &alphabet).unwrap();
        assert_eq!(decoded, seq, "case {case}");
    }
}

#[test]
fn corpus_file_canonical_form_is_stable() {
    let text = "a  b   c\n\nD e\n";
    let songs = read_token_text(text).unwrap();
    let canonical = write_corpus(&songs);
    assert_eq!(canonical, "a b c\nD e\n");
    let reread = read_token_text(&canonical).unwrap();
    assert_eq!(reread, songs);
    assert_eq!(write_corpus(&reread), canonical);
}
