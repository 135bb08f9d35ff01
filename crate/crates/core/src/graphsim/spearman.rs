//! Spearman rank-order correlation with a permutation-test p-value, used to
//! validate the similarity scale against an external reference ranking.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GraphSimError;

const PERMUTATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
}

/// Average ranks (1-based), ties averaged.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Spearman correlation between two rankings of the same community set.
///
/// Each ranking is an ordered list (best first). The p-value comes from a
/// two-sided permutation test with 10^4 seeded shuffles.
pub fn spearman_validation(
    ranking_a: &[String],
    ranking_b: &[String],
) -> Result<SpearmanResult, GraphSimError> {
    if ranking_a.is_empty() || ranking_a.len() != ranking_b.len() {
        return Err(GraphSimError::MismatchedRankings);
    }
    let pos_b: BTreeMap<&str, usize> =
        ranking_b.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    if pos_b.len() != ranking_b.len() {
        return Err(GraphSimError::MismatchedRankings);
    }
    let mut rank_b_of_a = Vec::with_capacity(ranking_a.len());
    for community in ranking_a {
        let &pos = pos_b
            .get(community.as_str())
            .ok_or(GraphSimError::MismatchedRankings)?;
        rank_b_of_a.push(pos as f64);
    }
    let rank_a: Vec<f64> = (0..ranking_a.len()).map(|i| i as f64).collect();
    let ranks_a = average_ranks(&rank_a);
    let ranks_b = average_ranks(&rank_b_of_a);
    let rho = pearson(&ranks_a, &ranks_b);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5EA5_0155);
    let mut shuffled = ranks_b.clone();
    let mut extreme = 0usize;
    for _ in 0..PERMUTATIONS {
        shuffled.shuffle(&mut rng);
        if pearson(&ranks_a, &shuffled).abs() >= rho.abs() - 1e-12 {
            extreme += 1;
        }
    }
    let p_value = (extreme + 1) as f64 / (PERMUTATIONS + 1) as f64;
    Ok(SpearmanResult { rho, p_value })
}
