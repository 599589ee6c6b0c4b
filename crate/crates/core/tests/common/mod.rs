#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeSet;

use dwa_core::dwa::AugmentationPool;
use dwa_core::{Matrix, Segment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| normal(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// A labeled window with Gaussian frames and uniform labels in [-1, 1].
pub fn random_segment(rng: &mut ChaCha8Rng, source: &str, start: usize, winlen: usize, dim: usize) -> Segment {
    let frames = random_matrix(rng, winlen, dim);
    let labels = (0..winlen * 2).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Segment {
        source_id: source.to_string(),
        start_index: start,
        frames,
        label_frames: Some(Matrix::from_vec(winlen, 2, labels).unwrap()),
    }
}

pub fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| normal(rng)).collect()
}

/// Pool of `size` segments spread over `sources` source ids. With
/// `duplicates`, some segments are exact copies of earlier ones to force ties.
pub fn random_pool(
    rng: &mut ChaCha8Rng,
    size: usize,
    sources: usize,
    winlen: usize,
    dim: usize,
    duplicates: bool,
) -> AugmentationPool {
    let mut segments: Vec<Segment> = Vec::with_capacity(size);
    for i in 0..size {
        let source = format!("g{:02}", i % sources);
        let seg = if duplicates && i > 0 && rng.random_bool(0.4) {
            let j = rng.random_range(0..i);
            Segment {
                source_id: source,
                start_index: i,
                ..segments[j].clone()
            }
        } else {
            random_segment(rng, &source, i, winlen, dim)
        };
        segments.push(seg);
    }
    AugmentationPool::from_segments(segments, "test-pool".into()).unwrap()
}

pub fn random_exclusions(rng: &mut ChaCha8Rng, sources: usize) -> BTreeSet<String> {
    (0..sources)
        .filter(|_| rng.random_bool(0.2))
        .map(|i| format!("g{i:02}"))
        .collect()
}
