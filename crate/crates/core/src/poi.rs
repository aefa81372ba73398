//! POI scoring and greedy top-k selection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::sim::estimate_snr;
use crate::trace::TraceSet;
use crate::Scalar;

/// Binary inclusion mask over the time samples of a trace.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PoiCandidate {
    mask: Vec<bool>,
}

impl PoiCandidate {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn from_indices(n_samples: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n_samples];
        for &i in indices {
            if i >= n_samples {
                return arg(format!("POI index {i} out of range for {n_samples} samples"));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn selected_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Selected sample indices, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask.get(index).copied().unwrap_or(false)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    #[default]
    AbsPearson,
    Snr,
}

/// Non-negative per-sample leakage scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PoiScores<T> {
    pub scores: Vec<T>,
    pub method: ScoreMethod,
}

impl<T: Scalar> PoiScores<T> {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Element-wise maximum, e.g. to merge scores computed against each share.
    pub fn max_with(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return arg("cannot merge score vectors of different lengths");
        }
        Ok(Self {
            scores: self.scores.iter().zip(&other.scores).map(|(&a, &b)| a.max(b)).collect(),
            method: self.method,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,score")?;
        for (i, s) in self.scores.iter().enumerate() {
            writeln!(w, "{i},{s}")?;
        }
        Ok(())
    }
}

/// `|r|` between every sample column and the numeric label.
pub fn correlation_ranking<T: Scalar>(ts: &TraceSet, labels: &[u8]) -> Result<PoiScores<T>> {
    let n = ts.n_traces();
    if n < 3 {
        return arg(format!("correlation needs at least 3 traces, got {n}"));
    }
    if labels.len() != n {
        return arg(format!("{} labels for {n} traces", labels.len()));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return arg("all labels are equal; correlation is undefined");
    }
    let nf = T::from_count(n);
    let y: Vec<T> = labels.iter().map(|&l| T::from_count(l as usize)).collect();
    let my = y.iter().copied().sum::<T>() / nf;
    let yc: Vec<T> = y.iter().map(|&v| v - my).collect();
    let syy: T = yc.iter().map(|&v| v * v).sum();

    let s = ts.n_samples();
    let mut mean = vec![T::zero(); s];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(ts.trace(i)) {
            *m += T::from_sample(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut sxy = vec![T::zero(); s];
    let mut sxx = vec![T::zero(); s];
    for (i, &dy) in yc.iter().enumerate() {
        for (j, &x) in ts.trace(i).iter().enumerate() {
            let dx = T::from_sample(x) - mean[j];
            sxy[j] += dx * dy;
            sxx[j] += dx * dx;
        }
    }
    let scores = sxy
        .iter()
        .zip(&sxx)
        .map(|(&xy, &xx)| {
            if xx > T::zero() {
                (xy / (xx * syy).sqrt()).abs().min(T::one())
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(PoiScores { scores, method: ScoreMethod::AbsPearson })
}

pub fn snr_ranking<T: Scalar>(ts: &TraceSet, labels: &[u8]) -> Result<PoiScores<T>> {
    Ok(PoiScores { scores: estimate_snr(ts, labels)?, method: ScoreMethod::Snr })
}

/// Result of [`select_top_k`]; `truncated` is set when spacing prevented
/// picking all `k` samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopK {
    pub candidate: PoiCandidate,
    pub truncated: bool,
}

/// Greedy selection in descending score order (ties to the lower index),
/// skipping any sample closer than `min_spacing` to one already chosen.
pub fn select_top_k<T: Scalar>(scores: &PoiScores<T>, k: usize, min_spacing: usize) -> Result<TopK> {
    let n = scores.len();
    if k < 1 || k > n {
        return arg(format!("k must lie in [1, {n}], got {k}"));
    }
    if min_spacing < 1 {
        return arg("min_spacing must be at least 1");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .partial_cmp(&scores.scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for i in order {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&c| c.abs_diff(i) >= min_spacing) {
            chosen.push(i);
        }
    }
    Ok(TopK {
        truncated: chosen.len() < k,
        candidate: PoiCandidate::from_indices(n, &chosen)?,
    })
}
