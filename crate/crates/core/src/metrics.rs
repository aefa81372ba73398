//! Guessing entropy, traces-to-success and box-plot summaries.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::rng::rng_for;
use crate::template::{rank_of_scores, LogLikelihoodTable, TemplateModel};
use crate::trace::{LeakageModel, TraceSet};
use crate::Scalar;

/// Mean 0-indexed rank of the true key after `t = 1..=T` attack traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeCurve {
    /// `mean_rank[t - 1]` is the average rank after `t` traces.
    pub mean_rank: Vec<f64>,
    pub n_repetitions: usize,
    /// Rank after the last trace, one per repetition.
    pub final_ranks: Vec<usize>,
}

impl GeCurve {
    pub fn final_mean_rank(&self) -> f64 {
        *self.mean_rank.last().expect("curve has at least one point")
    }

    /// Area under the curve divided by its length.
    pub fn normalized_area(&self) -> f64 {
        self.mean_rank.iter().sum::<f64>() / self.mean_rank.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,mean_rank")?;
        for (i, r) in self.mean_rank.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, r)?;
        }
        Ok(())
    }
}

/// Attack subsets for each repetition.
///
/// One seeded permutation of the pool is cut into disjoint windows of
/// `n_traces` while it lasts; later repetitions draw their own permutation
/// from `(seed, repetition)`.
pub fn attack_subsets(pool: usize, n_traces: usize, reps: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut base: Vec<usize> = (0..pool).collect();
    base.shuffle(&mut rng_for(seed, &[0]));
    let disjoint = pool / n_traces.max(1);
    (0..reps)
        .map(|r| {
            if r < disjoint {
                base[r * n_traces..(r + 1) * n_traces].to_vec()
            } else {
                let mut order: Vec<usize> = (0..pool).collect();
                order.shuffle(&mut rng_for(seed, &[1, r as u64]));
                order.truncate(n_traces);
                order
            }
        })
        .collect()
}

/// Rank trajectory of `true_key` while accumulating the traces of `subset`
/// in order.
pub fn rank_trajectory<T: Scalar>(
    table: &LogLikelihoodTable<T>,
    plaintexts: &[u8],
    leakage_model: LeakageModel,
    true_key: u8,
    subset: &[usize],
) -> Vec<usize> {
    let mut scores = vec![T::zero(); 256];
    subset
        .iter()
        .map(|&i| {
            table.accumulate(i, &leakage_model.hypothesis_labels(plaintexts[i]), &mut scores);
            rank_of_scores(&scores, true_key)
        })
        .collect()
}

/// Guessing-entropy curve from precomputed per-class log-likelihoods.
pub fn guessing_entropy_from_table<T: Scalar>(
    table: &LogLikelihoodTable<T>,
    plaintexts: &[u8],
    leakage_model: LeakageModel,
    true_key: u8,
    n_traces: usize,
    reps: usize,
    seed: u64,
) -> Result<GeCurve> {
    if n_traces < 1 || reps < 1 {
        return arg("attack trace count and repetitions must both be at least 1");
    }
    if plaintexts.len() != table.n_traces() {
        return arg("plaintexts and likelihood table disagree on trace count");
    }
    if n_traces > table.n_traces() {
        return arg(format!(
            "attack pool holds {} traces, {n_traces} requested",
            table.n_traces()
        ));
    }
    let subsets = attack_subsets(table.n_traces(), n_traces, reps, seed);
    let trajectories: Vec<Vec<usize>> = subsets
        .par_iter()
        .map(|s| rank_trajectory(table, plaintexts, leakage_model, true_key, s))
        .collect();
    let mean_rank = (0..n_traces)
        .map(|t| trajectories.iter().map(|tr| tr[t] as f64).sum::<f64>() / reps as f64)
        .collect();
    Ok(GeCurve {
        mean_rank,
        n_repetitions: reps,
        final_ranks: trajectories.iter().map(|tr| tr[n_traces - 1]).collect(),
    })
}

/// Averages `reps` attacks of `n_traces` traces drawn from `attack_pool`,
/// whose traces must all share one key.
pub fn guessing_entropy<T: Scalar>(
    model: &TemplateModel<T>,
    attack_pool: &TraceSet,
    n_traces: usize,
    reps: usize,
    seed: u64,
) -> Result<GeCurve> {
    let Some(key) = attack_pool.fixed_key() else {
        return arg("attack traces must share a single key");
    };
    if n_traces > attack_pool.n_traces() {
        return arg(format!(
            "attack pool holds {} traces, {n_traces} requested",
            attack_pool.n_traces()
        ));
    }
    let table = model.class_log_likelihoods(attack_pool)?;
    guessing_entropy_from_table(
        &table,
        attack_pool.plaintexts(),
        model.leakage_model(),
        key,
        n_traces,
        reps,
        seed,
    )
}

/// Smallest `t` from which the mean rank stays at exactly 0.
pub fn q_tge(curve: &GeCurve) -> Option<usize> {
    match curve.mean_rank.iter().rposition(|&r| r != 0.0) {
        None if curve.mean_rank.is_empty() => None,
        None => Some(1),
        Some(last) if last + 1 < curve.mean_rank.len() => Some(last + 2),
        Some(_) => None,
    }
}

/// Tukey box-plot summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quartiles by linear interpolation; whiskers reach the most extreme
/// values within 1.5 IQR of the quartiles.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return arg("box plot of an empty sample");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return arg("box plot input must be finite");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let median = quantile(&v, 0.5);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence);
    let whisker_low = inside.clone().fold(f64::INFINITY, f64::min);
    let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max);
    Ok(BoxStats {
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers: v.into_iter().filter(|&x| x < lo_fence || x > hi_fence).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(v: &[f64]) -> GeCurve {
        GeCurve { mean_rank: v.to_vec(), n_repetitions: 1, final_ranks: vec![*v.last().unwrap() as usize] }
    }

    #[test]
    fn q_tge_examples() {
        assert_eq!(q_tge(&curve(&[5.0, 2.0, 0.0, 0.0, 0.0])), Some(3));
        assert_eq!(q_tge(&curve(&[3.0, 0.0, 1.0, 0.0, 0.0])), Some(4));
        assert_eq!(q_tge(&curve(&[2.0, 1.0, 1.0])), None);
        assert_eq!(q_tge(&curve(&[0.0, 0.0])), Some(1));
        assert_eq!(q_tge(&curve(&[0.0, 0.1])), None);
    }

    #[test]
    fn boxplot_examples() {
        let b = boxplot_stats(&[0.0; 4]).unwrap();
        assert_eq!((b.median, b.q3 - b.q1), (0.0, 0.0));
        assert!(b.outliers.is_empty());
        let b = boxplot_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 5.0));
        let mut v = vec![0.0; 9];
        v.push(200.0);
        let b = boxplot_stats(&v).unwrap();
        assert_eq!(b.outliers, vec![200.0]);
        assert_eq!(b.whisker_high, 0.0);
        assert!(boxplot_stats(&[]).is_err());
    }

    #[test]
    fn subsets_are_disjoint_while_pool_lasts() {
        let s = attack_subsets(10, 3, 5, 1);
        let mut first: Vec<usize> = s[..3].concat();
        first.sort_unstable();
        first.dedup();
        assert_eq!(first.len(), 9);
        assert!(s.iter().all(|x| x.len() == 3));
        assert_eq!(s, attack_subsets(10, 3, 5, 1));
    }

    #[test]
    fn key_independent_tied_scores_rank_zero_for_key_zero() {
        let table = LogLikelihoodTable::from_rows(9, vec![-1.0f64; 9 * 20]).unwrap();
        let pts: Vec<u8> = (0..20).collect();
        let c = guessing_entropy_from_table(&table, &pts, LeakageModel::HammingWeight, 0, 10, 4, 3).unwrap();
        assert!(c.mean_rank.iter().all(|&r| r == 0.0));
        assert_eq!(q_tge(&c), Some(1));
    }

    #[test]
    fn pool_smaller_than_request_is_rejected() {
        let table = LogLikelihoodTable::from_rows(9, vec![0.0f64; 9 * 5]).unwrap();
        let pts = [0u8; 5];
        assert!(guessing_entropy_from_table(&table, &pts, LeakageModel::HammingWeight, 0, 6, 1, 0).is_err());
        assert!(guessing_entropy_from_table(&table, &pts, LeakageModel::HammingWeight, 0, 5, 0, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        curve(&[2.0, 0.5]).write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,mean_rank\n1,2\n2,0.5\n");
    }

    proptest! {
        #[test]
        fn quartiles_ordered(v in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let b = boxplot_stats(&v).unwrap();
            prop_assert!(b.q1 <= b.median && b.median <= b.q3);
            prop_assert!(b.whisker_low >= b.q1 - 1.5 * (b.q3 - b.q1));
            prop_assert!(b.whisker_high <= b.q3 + 1.5 * (b.q3 - b.q1));
            prop_assert!(b.whisker_low <= b.whisker_high);
            for o in &b.outliers {
                prop_assert!(*o < b.whisker_low || *o > b.whisker_high);
            }
            prop_assert_eq!(b.outliers.len() + v.iter().filter(|&&x| x >= b.whisker_low && x <= b.whisker_high).count(), v.len());
        }
    }
}
