//! Normalized scores and the Wilcoxon rank-sum test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Samples with at most this many pooled observations get the exact test.
pub const EXACT_LIMIT: usize = 12;

/// Min-max scaling onto `[0, 100]` over a pooled set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Normalizer {
    /// Pools the finite values. Panics when there are none.
    pub fn from_pool(pool: &[f64]) -> Self {
        let finite = pool.iter().copied().filter(|v| v.is_finite());
        let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        assert!(min <= max, "normalization needs at least one finite value");
        Self { min, max }
    }

    /// `100·(f − min)/(max − min)`, or 0 for a degenerate pool.
    pub fn score(&self, f: f64) -> f64 {
        if self.max > self.min {
            ((f - self.min) / (self.max - self.min) * 100.0).clamp(0.0, 100.0)
        } else {
            0.0
        }
    }
}

/// Scores every value against the pool formed by all of them.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let n = Normalizer::from_pool(values);
    values.iter().map(|v| n.score(*v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample, with midranks for ties.
    pub statistic: f64,
    /// Two-sided p-value in `(0, 1]`.
    pub p_value: f64,
    /// Exact p as `numerator / denominator` when the exact test was used.
    pub exact: Option<(u64, u64)>,
}

/// Ranks of `values` (1-based) with ties sharing their average rank,
/// returned doubled so they stay integral.
pub fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // average of ranks start+1..=end+1, doubled
        let doubled = (start + end + 2) as u64;
        for &k in &order[start..=end] {
            ranks[k] = doubled;
        }
        start = end + 1;
    }
    ranks
}

/// Exact two-sided p of the doubled rank sum `w2` of `n` items drawn from
/// `ranks`, as an unreduced fraction `(count, C(N, n))`.
fn exact_p(ranks: &[u64], n: usize, w2: u64) -> (u64, u64) {
    let max_sum: u64 = ranks.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0u64; max_sum as usize + 1]; n + 1];
    ways[0][0] = 1;
    for &r in ranks {
        for k in (1..=n).rev() {
            for s in (r as usize..=max_sum as usize).rev() {
                ways[k][s] += ways[k - 1][s - r as usize];
            }
        }
    }
    let total: u64 = ways[n].iter().sum();
    let le: u64 = ways[n][..=w2 as usize].iter().sum();
    let ge: u64 = ways[n][w2 as usize..].iter().sum();
    ((2 * le.min(ge)).min(total), total)
}

/// Two-sided Wilcoxon rank-sum test of `a` against `b`.
///
/// Uses the exact permutation distribution (ties kept as midranks) when
/// `a.len() + b.len() <= 12`, and otherwise the normal approximation with tie
/// and continuity corrections. Panics when either sample is empty.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> RankSumTest {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "rank-sum test needs two non-empty samples"
    );
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let (n, m) = (a.len(), b.len());
    let big_n = n + m;
    let w2: u64 = ranks[..n].iter().sum();
    let statistic = w2 as f64 / 2.0;

    if big_n <= EXACT_LIMIT {
        let (num, den) = exact_p(&ranks, n, w2);
        return RankSumTest {
            statistic,
            p_value: num as f64 / den as f64,
            exact: Some((num, den)),
        };
    }

    let (nf, mf, nn) = (n as f64, m as f64, big_n as f64);
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = nf * (nn + 1.0) / 2.0;
    let var = nf * mf / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    let p = if var > 0.0 {
        let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2)
    } else {
        1.0
    };
    RankSumTest {
        statistic,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        exact: None,
    }
}

/// Significance mark of a method against the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    /// The compared method is significantly worse.
    #[serde(rename = "+")]
    Worse,
    /// The compared method is significantly better.
    #[serde(rename = "−")]
    Better,
    #[serde(rename = "≈")]
    Similar,
}

impl Mark {
    pub const ALPHA: f64 = 0.05;

    /// Mark for losses (lower is better) of `method` against `reference`.
    pub fn from_test(p_value: f64, method_mean_loss: f64, reference_mean_loss: f64) -> Self {
        if p_value >= Self::ALPHA || method_mean_loss == reference_mean_loss {
            Mark::Similar
        } else if method_mean_loss > reference_mean_loss {
            Mark::Worse
        } else {
            Mark::Better
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Mark::Worse => "+",
            Mark::Better => "−",
            Mark::Similar => "≈",
        }
    }
}
