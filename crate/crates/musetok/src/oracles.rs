//! Independent brute-force reference implementations used only by tests.
//!
//! Everything here recomputes results from first principles over primitive
//! data (strings, tick lists, raw matrices) and never calls into the library
//! implementation it cross-checks. Compiled only for tests and the
//! `test-oracles` feature.

use std::collections::BTreeMap;

/// Greedy BPE merge list by full recount every iteration, over string pieces.
/// Tie order: highest count, earliest first occurrence in scan order, then
/// lexicographic pair order. Stops below pair count 2.
type PairChoice = ((String, String), u64, (usize, usize));

pub fn naive_bpe_merges(
    songs: &[Vec<String>],
    base_size: usize,
    target_vocab: usize,
) -> Vec<(String, String)> {
    let mut songs: Vec<Vec<String>> = songs.to_vec();
    let mut merges = Vec::new();
    let mut vocab = base_size;
    while vocab < target_vocab {
        let mut counts: BTreeMap<(String, String), (u64, (usize, usize))> = BTreeMap::new();
        for (song_idx, song) in songs.iter().enumerate() {
            for i in 0..song.len().saturating_sub(1) {
                let key = (song[i].clone(), song[i + 1].clone());
                counts
                    .entry(key)
                    .and_modify(|(c, _)| *c += 1)
                    .or_insert((1, (song_idx, i)));
            }
        }
        let mut best: Option<PairChoice> = None;
        for (pair, &(count, first)) in &counts {
            let take = match &best {
                None => true,
                Some((bp, bc, bf)) => {
                    count > *bc
                        || (count == *bc && first < *bf)
                        || (count == *bc && first == *bf && pair < bp)
                }
            };
            if take {
                best = Some((pair.clone(), count, first));
            }
        }
        let Some((pair, count, _)) = best else { break };
        if count < 2 {
            break;
        }
        let merged = format!("{}{}", pair.0, pair.1);
        for song in &mut songs {
            let mut out = Vec::with_capacity(song.len());
            let mut i = 0;
            while i < song.len() {
                if i + 1 < song.len() && song[i] == pair.0 && song[i + 1] == pair.1 {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(song[i].clone());
                    i += 1;
                }
            }
            *song = out;
        }
        merges.push(pair);
        vocab += 1;
    }
    merges
}

/// Best segmentation log-probability by exhaustive enumeration. `None` when
/// the string cannot be segmented.
pub fn exhaustive_best_logprob(s: &[char], pieces: &BTreeMap<String, f64>) -> Option<f64> {
    if s.is_empty() {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    for len in 1..=s.len() {
        let prefix: String = s[..len].iter().collect();
        if let Some(&lp) = pieces.get(&prefix) {
            if let Some(rest) = exhaustive_best_logprob(&s[len..], pieces) {
                let cand = lp + rest;
                best = Some(best.map_or(cand, |b: f64| b.max(cand)));
            }
        }
    }
    best
}

/// Exhaustive removal comparison: Viterbi corpus log-likelihood loss of
/// removing `removed`, survivors renormalized, both sides enumerated.
pub fn exhaustive_removal_loss(
    corpus: &[Vec<char>],
    pieces: &BTreeMap<String, f64>,
    removed: &str,
) -> f64 {
    let base: f64 = corpus
        .iter()
        .map(|s| exhaustive_best_logprob(s, pieces).expect("segmentable"))
        .sum();
    let survivor_mass: f64 = pieces
        .iter()
        .filter(|(k, _)| k.as_str() != removed)
        .map(|(_, lp)| lp.exp())
        .sum();
    let minus: BTreeMap<String, f64> = pieces
        .iter()
        .filter(|(k, _)| k.as_str() != removed)
        .map(|(k, lp)| (k.clone(), lp - survivor_mass.ln()))
        .collect();
    let minus_ll: f64 = corpus
        .iter()
        .map(|s| exhaustive_best_logprob(s, &minus).expect("segmentable"))
        .sum();
    base - minus_ll
}

/// Pitch class entropy recomputed from raw (pitch, channel) pairs; `None`
/// without pitched notes.
pub fn naive_pitch_class_entropy(notes: &[(u8, u8)]) -> Option<f64> {
    let pitched: Vec<u8> = notes
        .iter()
        .filter(|(_, ch)| *ch != 9)
        .map(|(p, _)| *p)
        .collect();
    if pitched.is_empty() {
        return None;
    }
    let mut h = 0.0;
    for class in 0..12u8 {
        let count = pitched.iter().filter(|p| *p % 12 == class).count();
        if count > 0 {
            let w = count as f64 / pitched.len() as f64;
            h -= w * w.log2();
        }
    }
    Some(h)
}

/// Groove similarity recomputed from onset ticks under fixed 4/4 bars.
/// `None` for fewer than two bars.
pub fn naive_groove_similarity(onsets: &[u64], division: u16, positions: u32) -> Option<f64> {
    if onsets.is_empty() {
        return None;
    }
    let bar_len = u64::from(division) * 4;
    let cell_w = bar_len as f64 / f64::from(positions);
    let mut cells: Vec<(u64, u32)> = Vec::new();
    for &onset in onsets {
        let bar = onset / bar_len;
        let rel = onset - bar * bar_len;
        let cell = (rel as f64 / cell_w + 0.5).floor() as u32;
        let (bar, cell) = if cell >= positions {
            (bar + 1, 0)
        } else {
            (bar, cell)
        };
        cells.push((bar, cell));
    }
    let n_bars = cells.iter().map(|(b, _)| b + 1).max().unwrap() as usize;
    if n_bars < 2 {
        return None;
    }
    let mut grids = vec![vec![false; positions as usize]; n_bars];
    for (bar, cell) in cells {
        grids[bar as usize][cell as usize] = true;
    }
    let mut total = 0.0;
    let mut pairs = 0u64;
    for a in 0..n_bars {
        for b in a + 1..n_bars {
            let d = grids[a]
                .iter()
                .zip(&grids[b])
                .filter(|(x, y)| x != y)
                .count();
            total += 1.0 - d as f64 / f64::from(positions);
            pairs += 1;
        }
    }
    Some(total / pairs as f64)
}

/// A repetition path over segment columns `[seg_start, seg_start + seg_len)`:
/// covered rows and the similarity its cells collect.
#[derive(Debug, Clone)]
struct BrutePath {
    row_start: usize,
    row_end: usize,
    cells: usize,
    sigma: f64,
}

fn enumerate_paths(s: &[f64], n: usize, seg_start: usize, seg_len: usize) -> Vec<BrutePath> {
    // Depth-first over step sequences (1,1), (1,2), (2,1) from every start
    // row; a path enters at the first column and must reach the last.
    let mut out = Vec::new();
    let last_col = seg_start + seg_len - 1;
    let mut stack: Vec<(usize, usize, usize, f64, usize)> = Vec::new(); // row, col, cells, sigma, row_start
    for row_start in 0..n {
        stack.push((
            row_start,
            seg_start,
            1,
            s[row_start * n + seg_start],
            row_start,
        ));
    }
    while let Some((row, col, cells, sigma, row_start)) = stack.pop() {
        if col == last_col {
            out.push(BrutePath {
                row_start,
                row_end: row,
                cells,
                sigma,
            });
            continue;
        }
        for (dr, dc) in [(1usize, 1usize), (1, 2), (2, 1)] {
            let (nr, nc) = (row + dr, col + dc);
            if nr < n && nc <= last_col {
                stack.push((nr, nc, cells + 1, sigma + s[nr * n + nc], row_start));
            }
        }
    }
    out
}

/// Fitness of every optimal path family of a segment, by exhaustive
/// enumeration of row-disjoint path sets: returns the optimal score and all
/// distinct (cells, covered-rows) profiles that attain it.
pub fn exhaustive_optimal_families(
    values: &[f64],
    n: usize,
    seg_start: usize,
    seg_len: usize,
) -> (f64, Vec<(u64, u64)>) {
    let mut paths = enumerate_paths(values, n, seg_start, seg_len);
    paths.sort_by_key(|p| (p.row_start, p.row_end));

    // DFS over families: pick paths with strictly increasing, disjoint row
    // spans. Start from the empty family (score 0).
    struct Search {
        best_sigma: f64,
        profiles: Vec<(u64, u64)>,
    }

    impl Search {
        fn visit(&mut self, sigma: f64, cells: u64, gamma: u64) {
            const EPS: f64 = 1e-9;
            if sigma > self.best_sigma + EPS {
                self.best_sigma = sigma;
                self.profiles.clear();
                self.profiles.push((cells, gamma));
            } else if (sigma - self.best_sigma).abs() <= EPS {
                let profile = (cells, gamma);
                if !self.profiles.contains(&profile) {
                    self.profiles.push(profile);
                }
            }
        }

        fn recurse(
            &mut self,
            paths: &[BrutePath],
            from: usize,
            min_row: usize,
            sigma: f64,
            cells: u64,
            gamma: u64,
        ) {
            self.visit(sigma, cells, gamma);
            for (i, p) in paths.iter().enumerate().skip(from) {
                if p.row_start < min_row {
                    continue;
                }
                self.recurse(
                    paths,
                    i + 1,
                    p.row_end + 1,
                    sigma + p.sigma,
                    cells + p.cells as u64,
                    gamma + (p.row_end - p.row_start + 1) as u64,
                );
            }
        }
    }

    let mut search = Search {
        best_sigma: 0.0,
        profiles: vec![(0, 0)],
    };
    search.recurse(&paths, 0, 0, 0.0, 0, 0);
    (search.best_sigma, search.profiles)
}

/// Fitness from a family profile per the normalized score and coverage
/// definitions.
pub fn fitness_from_profile(sigma: f64, cells: u64, gamma: u64, seg_len: usize, n: usize) -> f64 {
    if cells == 0 {
        return 0.0;
    }
    let score_norm = (sigma - seg_len as f64) / cells as f64;
    let coverage_norm = (gamma as f64 - seg_len as f64) / n as f64;
    if score_norm <= 0.0 || coverage_norm <= 0.0 {
        return 0.0;
    }
    (2.0 * score_norm * coverage_norm / (score_norm + coverage_norm)).clamp(0.0, 1.0)
}
