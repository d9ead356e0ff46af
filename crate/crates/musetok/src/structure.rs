//! Structure analysis: self-similarity matrix, fitness scape plot, and
//! structureness indicators.
//!
//! Each song becomes a sequence of duration-weighted pitch-class frames; the
//! cosine self-similarity matrix of those frames feeds a per-segment dynamic
//! program that finds an optimal family of repetition paths. A segment's
//! fitness combines how well its repetitions score and how much of the song
//! they cover, with the segment's trivial self-match subtracted out. The
//! structureness indicator of a band [l, u] is the best fitness among
//! segments lasting between l and u seconds.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::smf::{ticks_to_seconds, Score};

pub const DEFAULT_FRAME_HOP_S: f64 = 0.5;
pub const DEFAULT_MAX_FRAMES: usize = 256;

/// Per-frame pitch-class activation, rows L2-normalized (silent frames are
/// zero rows).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: Vec<[f64; 12]>,
    frame_hop_s: f64,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.frame_hop_s
    }

    pub fn frames(&self) -> &[[f64; 12]] {
        &self.frames
    }

    pub fn from_frames(frames: Vec<[f64; 12]>, frame_hop_s: f64) -> FeatureMatrix {
        FeatureMatrix {
            frames,
            frame_hop_s,
        }
    }

    /// Permute frames in place; used by shuffled-control experiments.
    pub fn permute(&mut self, order: &[usize]) {
        let old = self.frames.clone();
        for (i, &src) in order.iter().enumerate() {
            self.frames[i] = old[src];
        }
    }
}

/// Accumulate, per pitch class, the seconds each sounding note overlaps each
/// frame window, then normalize rows. Percussion notes are skipped.
pub fn feature_sequence(score: &Score, frame_hop_s: f64) -> Result<FeatureMatrix> {
    if score.notes.is_empty() {
        return Err(Error::EmptyScore);
    }
    if frame_hop_s.is_nan() || frame_hop_s <= 0.0 {
        return Err(Error::InvalidConfig("frame hop must be positive".into()));
    }
    let end_s = ticks_to_seconds(score, score.end_tick());
    let n = (end_s / frame_hop_s).ceil().max(1.0) as usize;
    let mut frames = vec![[0.0f64; 12]; n];
    for note in score.pitched_notes() {
        let on = ticks_to_seconds(score, note.onset_tick);
        let off = ticks_to_seconds(score, note.onset_tick + note.duration_tick);
        let class = usize::from(note.pitch % 12);
        let first = (on / frame_hop_s).floor() as usize;
        let last = ((off / frame_hop_s).ceil() as usize).min(n);
        for (f, frame) in frames.iter_mut().enumerate().take(last).skip(first) {
            let lo = on.max(f as f64 * frame_hop_s);
            let hi = off.min((f + 1) as f64 * frame_hop_s);
            if hi > lo {
                frame[class] += hi - lo;
            }
        }
    }
    for frame in &mut frames {
        let norm = frame.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in frame.iter_mut() {
                *x /= norm;
            }
        }
    }
    Ok(FeatureMatrix {
        frames,
        frame_hop_s,
    })
}

/// Symmetric cosine self-similarity matrix. Silent (zero) rows are similar
/// to nothing, themselves included.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>, // row-major n x n
    frame_hop_s: f64,
}

impl SimilarityMatrix {
    pub fn from_values(n: usize, values: Vec<f64>, frame_hop_s: f64) -> SimilarityMatrix {
        assert_eq!(values.len(), n * n, "similarity matrix must be n x n");
        SimilarityMatrix {
            n,
            values,
            frame_hop_s,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.frame_hop_s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

pub fn compute_ssm(features: &FeatureMatrix) -> SimilarityMatrix {
    let n = features.n_frames();
    let rows = features.frames();
    let silent: Vec<bool> = rows.iter().map(|r| r.iter().all(|&x| x == 0.0)).collect();
    let mut values = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = if silent[i] || silent[j] {
                0.0
            } else if i == j {
                1.0
            } else {
                let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                dot.clamp(-1.0, 1.0)
            };
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix {
        n,
        values,
        frame_hop_s: features.frame_hop_s,
    }
}

/// Mean-pool `ssm` down to at most `max_frames` frames; the effective frame
/// hop grows by the pooling factor.
fn downsample(ssm: &SimilarityMatrix, max_frames: usize) -> SimilarityMatrix {
    let n = ssm.n;
    if n <= max_frames {
        return ssm.clone();
    }
    let factor = n.div_ceil(max_frames);
    let m = n.div_ceil(factor);
    let mut values = vec![0.0f64; m * m];
    for bi in 0..m {
        for bj in 0..m {
            let rows = bi * factor..((bi + 1) * factor).min(n);
            let cols = bj * factor..((bj + 1) * factor).min(n);
            let count = (rows.len() * cols.len()) as f64;
            let mut sum = 0.0;
            for i in rows.clone() {
                for j in cols.clone() {
                    sum += ssm.get(i, j);
                }
            }
            values[bi * m + bj] = sum / count;
        }
    }
    SimilarityMatrix {
        n: m,
        values,
        frame_hop_s: ssm.frame_hop_s * factor as f64,
    }
}

/// Triangular fitness(center, length) array read off by the structureness
/// indicators and rendered as the scape plot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScapePlot {
    n: usize,
    /// rows[len - 1][start] for len in 1..=n.
    rows: Vec<Vec<f64>>,
    frame_hop_s: f64,
}

impl ScapePlot {
    pub fn n_frames(&self) -> usize {
        self.n
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.frame_hop_s
    }

    pub fn fitness_at(&self, start: usize, len: usize) -> Option<f64> {
        self.rows.get(len.checked_sub(1)?)?.get(start).copied()
    }

    /// All `(start, len, fitness)` entries, longest segments first.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..=self.n).rev().flat_map(move |len| {
            self.rows[len - 1]
                .iter()
                .enumerate()
                .map(move |(start, &f)| (start, len, f))
        })
    }

    pub fn center_s(&self, start: usize, len: usize) -> f64 {
        (start as f64 + len as f64 / 2.0) * self.frame_hop_s
    }

    pub fn length_s(&self, len: usize) -> f64 {
        len as f64 * self.frame_hop_s
    }

    /// Song duration covered by the plot, in seconds.
    pub fn duration_s(&self) -> f64 {
        self.n as f64 * self.frame_hop_s
    }
}

/// Score, total cell count, and covered rows of an optimal path family over
/// the segment starting at `start` with `len` columns.
fn path_family_stats(s: &SimilarityMatrix, start: usize, len: usize) -> (f64, u64, u64) {
    let n = s.n;
    let m = len;
    let w = m + 1; // column 0 is the escape state
    let neg = f64::NEG_INFINITY;
    let mut d = vec![neg; n * w];
    d[0] = 0.0;
    d[1] = s.get(0, start);
    for row in 1..n {
        let base = row * w;
        let prev = (row - 1) * w;
        d[base] = d[prev].max(d[prev + m]);
        d[base + 1] = d[base] + s.get(row, start);
        for col in 2..=m {
            // Steps within a path: (1,1), (1,2), (2,1). A path enters the
            // segment at its first column only, so (1,2) needs col >= 3.
            let mut best = d[prev + col - 1];
            if col >= 3 {
                best = best.max(d[prev + col - 2]);
            }
            if row >= 2 {
                best = best.max(d[(row - 2) * w + col - 1]);
            }
            d[base + col] = best + s.get(row, start + col - 1);
        }
    }

    let last = (n - 1) * w;
    let (mut row, mut col);
    if m >= 1 && d[last + m] >= d[last] {
        row = n - 1;
        col = m;
    } else {
        row = n - 1;
        col = 0;
    }

    let sigma = d[last + col.min(m)].max(0.0);
    if col == 0 && d[last] <= 0.0 {
        // Empty family: nothing explains anything.
        return (0.0, 0, 0);
    }

    let mut cells = 0u64;
    let mut gamma = 0u64;
    let mut path_end: Option<usize> = if col == m { Some(row) } else { None };
    loop {
        if col == 0 {
            if row == 0 {
                break;
            }
            let prev = (row - 1) * w;
            if d[prev + m] >= d[prev] {
                col = m;
                path_end = Some(row - 1);
            }
            row -= 1;
        } else if col == 1 {
            cells += 1;
            gamma += (path_end.expect("inside a path") - row + 1) as u64;
            path_end = None;
            col = 0;
            if row == 0 {
                break;
            }
        } else {
            cells += 1;
            let prev = (row - 1) * w;
            let c11 = d[prev + col - 1];
            let c12 = if col >= 3 { d[prev + col - 2] } else { neg };
            let c21 = if row >= 2 {
                d[(row - 2) * w + col - 1]
            } else {
                neg
            };
            if c11 >= c12 && c11 >= c21 {
                row -= 1;
                col -= 1;
            } else if c12 >= c21 {
                row -= 1;
                col -= 2;
            } else {
                row -= 2;
                col -= 1;
            }
        }
    }
    (sigma, cells, gamma)
}

fn fitness_value(sigma: f64, cells: u64, gamma: u64, len: usize, n: usize) -> f64 {
    if cells == 0 {
        return 0.0;
    }
    let score_norm = (sigma - len as f64) / cells as f64;
    let coverage_norm = (gamma as f64 - len as f64) / n as f64;
    if score_norm <= 0.0 || coverage_norm <= 0.0 {
        return 0.0;
    }
    (2.0 * score_norm * coverage_norm / (score_norm + coverage_norm)).clamp(0.0, 1.0)
}

/// Compute the fitness of every segment. Matrices larger than `max_frames`
/// are mean-pooled first. Per-segment computations are independent, so the
/// result is identical under any parallel schedule.
pub fn fitness_scape_plot(ssm: &SimilarityMatrix, max_frames: usize) -> Result<ScapePlot> {
    if ssm.n == 0 {
        return Err(Error::DegenerateMatrix);
    }
    let s = downsample(ssm, max_frames.max(1));
    let n = s.n;

    let jobs: Vec<(usize, usize)> = (1..=n)
        .flat_map(|len| (0..=n - len).map(move |start| (start, len)))
        .collect();
    let fitness: Vec<f64> = jobs
        .par_iter()
        .map(|&(start, len)| {
            let (sigma, cells, gamma) = path_family_stats(&s, start, len);
            fitness_value(sigma, cells, gamma, len, n)
        })
        .collect();

    let mut rows: Vec<Vec<f64>> = (1..=n).map(|len| vec![0.0; n - len + 1]).collect();
    for (&(start, len), &f) in jobs.iter().zip(&fitness) {
        rows[len - 1][start] = f;
    }
    Ok(ScapePlot {
        n,
        rows,
        frame_hop_s: s.frame_hop_s,
    })
}

/// Band of segment durations, in seconds; `upper_s = None` means unbounded
/// (capped by the song duration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiBand {
    pub lower_s: f64,
    pub upper_s: Option<f64>,
}

impl SiBand {
    pub fn new(lower_s: f64, upper_s: Option<f64>) -> Result<SiBand> {
        let upper = upper_s.unwrap_or(f64::INFINITY);
        if lower_s.is_nan() || lower_s <= 0.0 || lower_s >= upper {
            return Err(Error::InvalidBand {
                lower: lower_s,
                upper,
            });
        }
        Ok(SiBand { lower_s, upper_s })
    }

    pub fn short() -> SiBand {
        SiBand {
            lower_s: 3.0,
            upper_s: Some(8.0),
        }
    }

    pub fn medium() -> SiBand {
        SiBand {
            lower_s: 8.0,
            upper_s: Some(15.0),
        }
    }

    pub fn long() -> SiBand {
        SiBand {
            lower_s: 15.0,
            upper_s: None,
        }
    }
}

/// Maximum fitness among segments whose duration falls inside the band;
/// 0 when the song is too short to contain one.
pub fn structureness_indicator(plot: &ScapePlot, band: &SiBand) -> Result<f64> {
    let upper = band.upper_s.unwrap_or(f64::INFINITY);
    if band.lower_s.is_nan() || band.lower_s <= 0.0 || band.lower_s >= upper {
        return Err(Error::InvalidBand {
            lower: band.lower_s,
            upper,
        });
    }
    let mut best: Option<f64> = None;
    for (_, len, fitness) in plot.entries() {
        let len_s = plot.length_s(len);
        if len_s >= band.lower_s && len_s <= upper {
            best = Some(best.map_or(fitness, |b: f64| b.max(fitness)));
        }
    }
    Ok(best.unwrap_or(0.0))
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// CSV rendering: `center_s,length_s,fitness`, six decimals, longest
/// segments first.
pub fn scape_plot_csv(plot: &ScapePlot) -> String {
    let mut out = String::from("center_s,length_s,fitness\n");
    for (start, len, fitness) in plot.entries() {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6}\n",
            plot.center_s(start, len),
            plot.length_s(len),
            fitness
        ));
    }
    out
}

/// Fixed dark-to-yellow color ramp over [0, 1].
fn color_ramp(x: f64) -> [u8; 3] {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.00, [0.0, 0.0, 4.0]),
        (0.25, [87.0, 16.0, 110.0]),
        (0.50, [188.0, 55.0, 84.0]),
        (0.75, [249.0, 142.0, 9.0]),
        (1.00, [252.0, 255.0, 164.0]),
    ];
    let x = x.clamp(0.0, 1.0);
    let mut lo = STOPS[0];
    let mut hi = STOPS[STOPS.len() - 1];
    for pair in STOPS.windows(2) {
        if x >= pair[0].0 && x <= pair[1].0 {
            lo = pair[0];
            hi = pair[1];
            break;
        }
    }
    let t = if hi.0 > lo.0 {
        (x - lo.0) / (hi.0 - lo.0)
    } else {
        0.0
    };
    let mut rgb = [0u8; 3];
    for (out, (a, b)) in rgb.iter_mut().zip(lo.1.iter().zip(hi.1.iter())) {
        *out = (a + (b - a) * t).round() as u8;
    }
    rgb
}

/// Binary PPM (P6) rendering: x is segment center, y is segment length with
/// the longest segments on the top row; cells outside the triangle are white.
pub fn scape_plot_ppm(plot: &ScapePlot) -> Vec<u8> {
    let n = plot.n_frames();
    let mut pixels = vec![255u8; n * n * 3];
    for (start, len, fitness) in plot.entries() {
        let y = n - len;
        let x = start + (len - 1) / 2;
        let rgb = color_ramp(fitness);
        let at = (y * n + x) * 3;
        pixels[at..at + 3].copy_from_slice(&rgb);
    }
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    out
}

/// Write `<prefix>.csv` and `<prefix>.ppm`; byte-identical for identical
/// plots.
pub fn render_scape_plot(plot: &ScapePlot, out_prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = out_prefix.with_extension("csv");
    let ppm_path = out_prefix.with_extension("ppm");
    std::fs::write(&csv_path, scape_plot_csv(plot))?;
    std::fs::write(&ppm_path, scape_plot_ppm(plot))?;
    Ok((csv_path, ppm_path))
}
