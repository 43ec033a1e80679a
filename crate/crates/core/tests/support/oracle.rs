//! Brute-force reference implementation of candidate selection, written
//! from the definitions without sharing code with the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nearest-rank quantile by counting: the value `v` whose rank window
/// `[#{x < v}, #{x <= v})` contains `min(floor(ratio * n), n - 1)`.
pub fn quantile(values: &[f64], ratio: f64) -> f64 {
    let n = values.len();
    let k = ((ratio * n as f64).floor() as usize).min(n - 1);
    for &v in values {
        let below = values.iter().filter(|&&x| x < v).count();
        let at_most = values.iter().filter(|&&x| x <= v).count();
        if below <= k && k < at_most {
            return v;
        }
    }
    unreachable!("rank window always contains k")
}

/// Sum in descending value order so every subset is added the same way.
fn subset_sum(row: &[f64], subset: &[usize]) -> f64 {
    let mut v: Vec<f64> = subset.iter().map(|&c| row[c]).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter().sum()
}

/// Smallest subset whose mass reaches `tau`, enumerating all `2^C` subsets.
/// Among minimal subsets the largest mass wins, then the lexicographically
/// smallest index list. No feasible subset means every class.
pub fn intra(row: &[f64], tau: f64) -> Vec<usize> {
    let c = row.len();
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for mask in 1u32..(1 << c) {
        let subset: Vec<usize> = (0..c).filter(|&k| mask & (1 << k) != 0).collect();
        let mass = subset_sum(row, &subset);
        if mass < tau {
            continue;
        }
        let better = match &best {
            None => true,
            Some((size, best_mass, best_set)) => {
                subset.len() < *size
                    || (subset.len() == *size && (mass > *best_mass || (mass == *best_mass && subset < *best_set)))
            }
        };
        if better {
            best = Some((subset.len(), mass, subset));
        }
    }
    best.map_or_else(|| (0..c).collect(), |(_, _, s)| s)
}

pub fn inter(p: &[Vec<f64>], beta: f64) -> Vec<Vec<usize>> {
    let c = p[0].len();
    let thresholds: Vec<f64> = (0..c)
        .map(|k| quantile(&p.iter().map(|r| r[k]).collect::<Vec<_>>(), beta))
        .collect();
    p.iter()
        .map(|r| (0..c).filter(|&k| r[k] > thresholds[k]).collect())
        .collect()
}

pub struct OracleSets {
    pub tau: f64,
    pub intra: Vec<Vec<usize>>,
    pub inter: Option<Vec<Vec<usize>>>,
    pub sets: Vec<Vec<usize>>,
}

pub fn candidates(p: &[Vec<f64>], alpha: f64, beta: Option<f64>) -> OracleSets {
    let maxima: Vec<f64> = p.iter().map(|r| r.iter().cloned().fold(f64::MIN, f64::max)).collect();
    let tau = quantile(&maxima, alpha);
    let intra: Vec<Vec<usize>> = p.iter().map(|r| intra(r, tau)).collect();
    let inter = beta.map(|b| inter(p, b));
    let sets = match &inter {
        None => intra.clone(),
        Some(inter) => intra
            .iter()
            .zip(inter)
            .map(|(a, b)| a.iter().copied().filter(|k| b.contains(k)).collect())
            .collect(),
    };
    OracleSets {
        tau,
        intra,
        inter,
        sets,
    }
}

/// Random row-stochastic matrix. `style` picks flat, peaked or tied rows.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, c: usize, style: u8) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = match style {
                0 => (0..c).map(|_| rng.random::<f64>() + 1e-3).collect(),
                1 => (0..c).map(|_| (rng.random::<f64>() * 6.0).exp()).collect(),
                _ => (0..c).map(|_| rng.random_range(1..=4) as f64).collect(),
            };
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        })
        .collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn flatten(p: &[Vec<f64>]) -> Vec<f64> {
    p.iter().flatten().copied().collect()
}
