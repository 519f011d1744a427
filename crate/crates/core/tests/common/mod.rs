#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use stc_core::{Corpus, Document};

pub const PLANTED_K: usize = 5;
pub const BLOCK: usize = 10;

pub struct Planted {
    pub corpus: Corpus,
    /// Index of the heavier topic of each document.
    pub labels: Vec<usize>,
    /// Planted topics: uniform over one 10-word block each.
    pub topics: Vec<Vec<f64>>,
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    Poisson::new(mean).unwrap().sample(rng) as u32
}

/// Five disjoint-block topics over 50 words; each document mixes one or two
/// of them.
pub fn planted(num_docs: usize, seed: u64) -> Planted {
    let n = PLANTED_K * BLOCK;
    let topics: Vec<Vec<f64>> = (0..PLANTED_K)
        .map(|t| {
            (0..n)
                .map(|w| if w / BLOCK == t { 1.0 / BLOCK as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(num_docs);
    let mut labels = Vec::with_capacity(num_docs);
    while docs.len() < num_docs {
        let length = 40.0;
        let main = rng.gen_range(0..PLANTED_K);
        let mut weights = [0.0; PLANTED_K];
        if rng.gen_bool(0.5) {
            let other = (main + rng.gen_range(1..PLANTED_K)) % PLANTED_K;
            weights[main] = 0.7 * length;
            weights[other] = 0.3 * length;
        } else {
            weights[main] = length;
        }
        let entries: Vec<(usize, u32)> = (0..n)
            .filter_map(|w| {
                let mean: f64 = (0..PLANTED_K).map(|t| weights[t] * topics[t][w]).sum();
                if mean == 0.0 {
                    return None;
                }
                let c = poisson(&mut rng, mean);
                (c > 0).then_some((w, c))
            })
            .collect();
        if entries.is_empty() {
            continue;
        }
        docs.push(Document::new(entries).unwrap());
        labels.push(main);
    }
    Planted {
        corpus: Corpus::new(n, docs).unwrap(),
        labels,
        topics,
    }
}

/// Documents with Zipf-distributed word frequencies.
pub fn zipf(num_docs: usize, num_words: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=num_words).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut docs = Vec::with_capacity(num_docs);
    while docs.len() < num_docs {
        let length = rng.gen_range(20.0..80.0);
        // Each document reshuffles the ranks a little so documents differ.
        let shift = rng.gen_range(0..num_words);
        let entries: Vec<(usize, u32)> = (0..num_words)
            .filter_map(|w| {
                let rank = (w + shift) % num_words;
                let c = poisson(&mut rng, length * weights[rank] / total);
                (c > 0).then_some((w, c))
            })
            .collect();
        if !entries.is_empty() {
            docs.push(Document::new(entries).unwrap());
        }
    }
    Corpus::new(num_words, docs).unwrap()
}

/// Mean L1 distance between greedily matched rows.
pub fn greedy_matched_l1(learned: &[&[f64]], planted: &[Vec<f64>]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in learned.iter().enumerate() {
        for (j, b) in planted.iter().enumerate() {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            pairs.push((d, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut used_i, mut used_j) = (vec![false; learned.len()], vec![false; planted.len()]);
    let (mut sum, mut count) = (0.0, 0);
    for (d, i, j) in pairs {
        if !used_i[i] && !used_j[j] {
            used_i[i] = true;
            used_j[j] = true;
            sum += d;
            count += 1;
        }
    }
    sum / count as f64
}
