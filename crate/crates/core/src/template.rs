//! Gaussian templates over a POI selection, and the attack that turns them
//! into a key guessing vector.
//!
//! Scores are always accumulated as sums of log-densities, never as
//! products of densities, so hundreds of attack traces cannot underflow.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::linalg::Cholesky;
use crate::poi::PoiCandidate;
use crate::trace::{LeakageModel, TraceSet};
use crate::Scalar;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateOptions {
    /// One covariance shared by all classes (default) or one per class.
    #[serde(default = "default_pooled")]
    pub pooled: bool,
    /// Ridge added to the diagonal, relative to the mean diagonal entry.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_pooled() -> bool {
    true
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for TemplateOptions {
    fn default() -> Self {
        Self { pooled: true, epsilon: DEFAULT_EPSILON }
    }
}

/// Profiled leakage model: per-class means and (pooled or per-class)
/// covariance over the selected samples.
#[derive(Clone, Debug)]
pub struct TemplateModel<T> {
    n_samples: usize,
    poi: PoiCandidate,
    poi_indices: Vec<usize>,
    leakage_model: LeakageModel,
    epsilon: f64,
    pooled: bool,
    profiling_traces: usize,
    /// `n_classes × n_poi`, row-major.
    class_means: Vec<T>,
    /// Regularised covariances: one if pooled, otherwise one per class.
    covariances: Vec<Vec<T>>,
    factors: Vec<Cholesky<T>>,
    /// `-½ ln det C - (d/2) ln 2π` per covariance.
    log_norms: Vec<T>,
}

fn log_norm<T: Scalar>(chol: &Cholesky<T>) -> T {
    let half = T::from_f64_lossy(0.5);
    let d = T::from_count(chol.dim());
    -half * chol.log_det() - half * d * T::from_f64_lossy(std::f64::consts::TAU).ln()
}

/// Adds `epsilon · mean(diag)` to the diagonal, or plain `epsilon` when
/// the diagonal is identically zero.
fn regularize<T: Scalar>(cov: &mut [T], d: usize, epsilon: f64) {
    let mean_diag = (0..d).map(|i| cov[i * d + i]).sum::<T>() / T::from_count(d);
    let eps = T::from_f64_lossy(epsilon);
    let ridge = if mean_diag > T::zero() { eps * mean_diag } else { eps };
    for i in 0..d {
        cov[i * d + i] += ridge;
    }
}

fn class_counts(labels: &[u8], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        let c = l as usize;
        if c >= n_classes {
            return arg(format!("label {c} out of range for {n_classes} classes"));
        }
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::InsufficientData { class: c, count: counts[c], needed: 2 });
    }
    Ok(counts)
}

fn gather<T: Scalar>(ts: &TraceSet, row: usize, idx: &[usize], out: &mut [T]) {
    let trace = ts.trace(row);
    for (o, &j) in out.iter_mut().zip(idx) {
        *o = T::from_sample(trace[j]);
    }
}

/// Class means and the unregularised covariance(s) over `poi`.
///
/// Pooled: total within-class scatter `/ (n - n_classes)`.
/// Per class: each class scatter `/ (n_c - 1)`.
pub fn estimate_moments<T: Scalar>(
    profiling: &TraceSet,
    labels: &[u8],
    poi: &[usize],
    n_classes: usize,
    pooled: bool,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    if labels.len() != profiling.n_traces() {
        return arg(format!("{} labels for {} traces", labels.len(), profiling.n_traces()));
    }
    let counts = class_counts(labels, n_classes)?;
    let d = poi.len();
    let mut means = vec![T::zero(); n_classes * d];
    let mut x = vec![T::zero(); d];
    for (i, &l) in labels.iter().enumerate() {
        gather(profiling, i, poi, &mut x);
        let m = &mut means[l as usize * d..(l as usize + 1) * d];
        m.iter_mut().zip(&x).for_each(|(a, &b)| *a += b);
    }
    for (c, &n) in counts.iter().enumerate() {
        let n = T::from_count(n);
        means[c * d..(c + 1) * d].iter_mut().for_each(|a| *a /= n);
    }
    let n_cov = if pooled { 1 } else { n_classes };
    let mut scatter = vec![vec![T::zero(); d * d]; n_cov];
    for (i, &l) in labels.iter().enumerate() {
        let c = l as usize;
        gather(profiling, i, poi, &mut x);
        x.iter_mut().zip(&means[c * d..(c + 1) * d]).for_each(|(a, &m)| *a -= m);
        let s = &mut scatter[if pooled { 0 } else { c }];
        for r in 0..d {
            for col in 0..=r {
                s[r * d + col] += x[r] * x[col];
            }
        }
    }
    for (ci, s) in scatter.iter_mut().enumerate() {
        let div = if pooled {
            T::from_count(labels.len() - n_classes)
        } else {
            T::from_count(counts[ci] - 1)
        };
        for r in 0..d {
            for col in 0..=r {
                let v = s[r * d + col] / div;
                s[r * d + col] = v;
                s[col * d + r] = v;
            }
        }
    }
    Ok((means, scatter))
}

pub fn build_templates<T: Scalar>(
    profiling: &TraceSet,
    labels: &[u8],
    poi: &PoiCandidate,
    leakage_model: LeakageModel,
    options: TemplateOptions,
) -> Result<TemplateModel<T>> {
    if poi.len() != profiling.n_samples() {
        return arg(format!(
            "POI mask covers {} samples, traces have {}",
            poi.len(),
            profiling.n_samples()
        ));
    }
    if poi.selected_count() == 0 {
        return arg("POI candidate selects no samples");
    }
    if !(options.epsilon >= 0.0 && options.epsilon.is_finite()) {
        return arg(format!("epsilon must be finite and >= 0, got {}", options.epsilon));
    }
    let idx = poi.indices();
    let n_classes = leakage_model.class_count();
    let (class_means, mut covariances) =
        estimate_moments::<T>(profiling, labels, &idx, n_classes, options.pooled)?;
    let d = idx.len();
    let mut factors = Vec::with_capacity(covariances.len());
    for (ci, cov) in covariances.iter_mut().enumerate() {
        regularize(cov, d, options.epsilon);
        let f = Cholesky::factor(cov, d).map_err(|e| match e {
            Error::Conditioning(msg) if !options.pooled => {
                Error::Conditioning(format!("class {ci}: {msg}"))
            }
            other => other,
        })?;
        factors.push(f);
    }
    let log_norms = factors.iter().map(log_norm).collect();
    Ok(TemplateModel {
        n_samples: profiling.n_samples(),
        poi: poi.clone(),
        poi_indices: idx,
        leakage_model,
        epsilon: options.epsilon,
        pooled: options.pooled,
        profiling_traces: profiling.n_traces(),
        class_means,
        covariances,
        factors,
        log_norms,
    })
}

impl<T: Scalar> TemplateModel<T> {
    pub fn n_classes(&self) -> usize {
        self.leakage_model.class_count()
    }

    pub fn n_poi(&self) -> usize {
        self.poi_indices.len()
    }

    /// One mean per selected sample, the usual accounting for template
    /// attacks.
    pub fn trainable_parameters(&self) -> usize {
        self.n_poi()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn poi(&self) -> &PoiCandidate {
        &self.poi
    }

    pub fn leakage_model(&self) -> LeakageModel {
        self.leakage_model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_pooled(&self) -> bool {
        self.pooled
    }

    /// Fewer profiling traces than `n_poi + n_classes`.
    pub fn below_recommended_size(&self) -> bool {
        self.profiling_traces < self.n_poi() + self.n_classes()
    }

    pub fn class_mean(&self, class: usize) -> &[T] {
        let d = self.n_poi();
        &self.class_means[class * d..(class + 1) * d]
    }

    /// Regularised covariance used for `class`.
    pub fn covariance(&self, class: usize) -> &[T] {
        &self.covariances[if self.pooled { 0 } else { class }]
    }

    fn cov_slot(&self, class: usize) -> usize {
        if self.pooled {
            0
        } else {
            class
        }
    }

    fn score_unchecked(&self, values: &[T], class: usize, dev: &mut [T], scratch: &mut [T]) -> T {
        let slot = self.cov_slot(class);
        dev.iter_mut()
            .zip(values.iter().zip(self.class_mean(class)))
            .for_each(|(o, (&v, &m))| *o = v - m);
        let q = self.factors[slot].mahalanobis_sq(dev, scratch);
        self.log_norms[slot] - T::from_f64_lossy(0.5) * q
    }

    /// Log-density of `values` (already restricted to the POIs) under the
    /// Gaussian template of `class`.
    pub fn discriminant_score(&self, values: &[T], class: usize) -> Result<T> {
        let d = self.n_poi();
        if values.len() != d {
            return arg(format!("expected {d} POI values, got {}", values.len()));
        }
        if class >= self.n_classes() {
            return arg(format!("class {class} out of range for {} classes", self.n_classes()));
        }
        let mut dev = vec![T::zero(); d];
        let mut scratch = vec![T::zero(); d];
        Ok(self.score_unchecked(values, class, &mut dev, &mut scratch))
    }

    /// Log-density of every trace under every class template.
    pub fn class_log_likelihoods(&self, traces: &TraceSet) -> Result<LogLikelihoodTable<T>> {
        if traces.n_samples() != self.n_samples {
            return arg(format!(
                "model was profiled on {} samples per trace, attack traces have {}",
                self.n_samples,
                traces.n_samples()
            ));
        }
        let c = self.n_classes();
        let d = self.n_poi();
        let mut values = vec![T::zero(); traces.n_traces() * c];
        values.par_chunks_mut(c).enumerate().for_each_init(
            || (vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]),
            |(x, dev, scratch), (i, row)| {
                gather(traces, i, &self.poi_indices, x);
                for (class, out) in row.iter_mut().enumerate() {
                    *out = self.score_unchecked(x, class, dev, scratch);
                }
            },
        );
        Ok(LogLikelihoodTable { n_classes: c, values })
    }
}

/// `n_traces × n_classes` log-densities, computed once per (model, traces)
/// and reused for every key hypothesis.
#[derive(Clone, Debug)]
pub struct LogLikelihoodTable<T> {
    n_classes: usize,
    values: Vec<T>,
}

impl<T: Scalar> LogLikelihoodTable<T> {
    pub fn from_rows(n_classes: usize, values: Vec<T>) -> Result<Self> {
        if n_classes == 0 || !values.len().is_multiple_of(n_classes) {
            return arg("table size is not a multiple of the class count");
        }
        Ok(Self { n_classes, values })
    }

    pub fn n_traces(&self) -> usize {
        self.values.len() / self.n_classes
    }

    #[inline]
    pub fn row(&self, trace: usize) -> &[T] {
        &self.values[trace * self.n_classes..(trace + 1) * self.n_classes]
    }

    /// Adds trace `trace`'s contribution to all 256 hypothesis scores.
    #[inline]
    pub fn accumulate(&self, trace: usize, hypothesis_labels: &[u8; 256], scores: &mut [T]) {
        let row = self.row(trace);
        for (s, &l) in scores.iter_mut().zip(hypothesis_labels) {
            *s += row[l as usize];
        }
    }
}

/// Accumulated log-scores of the 256 key hypotheses, with the hypotheses
/// sorted best first.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyGuessingVector<T> {
    pub scores: Vec<T>,
    pub ranking: Vec<u8>,
}

impl<T: Scalar> KeyGuessingVector<T> {
    pub fn from_scores(scores: Vec<T>) -> Result<Self> {
        if scores.len() != 256 {
            return arg(format!("expected 256 hypothesis scores, got {}", scores.len()));
        }
        let mut ranking: Vec<u8> = (0..=255).collect();
        ranking.sort_by(|&a, &b| {
            scores[b as usize]
                .partial_cmp(&scores[a as usize])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Ok(Self { scores, ranking })
    }

    pub fn best(&self) -> u8 {
        self.ranking[0]
    }
}

/// Keys scoring strictly higher, plus tied keys with a smaller byte value.
pub fn rank_of_scores<T: Scalar>(scores: &[T], key: u8) -> usize {
    let target = scores[key as usize];
    scores
        .iter()
        .enumerate()
        .filter(|&(k, &s)| s > target || (s == target && k < key as usize))
        .count()
}

pub fn rank_of_key<T: Scalar>(kgv: &KeyGuessingVector<T>, true_key: u8) -> usize {
    rank_of_scores(&kgv.scores, true_key)
}

/// Scores every key hypothesis over all attack traces.
pub fn attack<T: Scalar>(model: &TemplateModel<T>, attack_traces: &TraceSet) -> Result<KeyGuessingVector<T>> {
    let table = model.class_log_likelihoods(attack_traces)?;
    let mut scores = vec![T::zero(); 256];
    for (i, &p) in attack_traces.plaintexts().iter().enumerate() {
        table.accumulate(i, &model.leakage_model.hypothesis_labels(p), &mut scores);
    }
    KeyGuessingVector::from_scores(scores)
}

#[derive(Serialize, Deserialize)]
struct TemplateHeader {
    format: String,
    version: u32,
    leakage_model: LeakageModel,
    pooled: bool,
    epsilon: f64,
    n_samples: usize,
    profiling_traces: usize,
    poi: Vec<usize>,
    n_classes: usize,
    n_poi: usize,
    n_covariances: usize,
    blob: String,
    blob_layout: String,
}

const TEMPLATE_FORMAT: &str = "poisearch-template";

impl<T: Scalar> TemplateModel<T> {
    /// Writes `<stem>.json` and the `<stem>.bin` sidecar holding class
    /// means then covariances as f64 little-endian.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let stem = stem.as_ref();
        let json_path = stem.with_extension("json");
        let bin_path = stem.with_extension("bin");
        let header = TemplateHeader {
            format: TEMPLATE_FORMAT.into(),
            version: 1,
            leakage_model: self.leakage_model,
            pooled: self.pooled,
            epsilon: self.epsilon,
            n_samples: self.n_samples,
            profiling_traces: self.profiling_traces,
            poi: self.poi_indices.clone(),
            n_classes: self.n_classes(),
            n_poi: self.n_poi(),
            n_covariances: self.covariances.len(),
            blob: bin_path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            blob_layout: "class_means[n_classes][n_poi] then covariances[n_covariances][n_poi][n_poi], f64 LE".into(),
        };
        let mut blob = Vec::with_capacity(8 * (self.class_means.len() + self.covariances.len() * self.n_poi().pow(2)));
        for v in self.class_means.iter().chain(self.covariances.iter().flatten()) {
            blob.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        fs::write(&json_path, serde_json::to_vec_pretty(&header)?)?;
        fs::write(&bin_path, blob)?;
        Ok((json_path, bin_path))
    }

    /// Reads a model written by [`TemplateModel::save`]; `path` is the JSON file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let header: TemplateHeader = serde_json::from_slice(&fs::read(path)?)
            .map_err(|e| Error::Format(format!("bad template header: {e}")))?;
        if header.format != TEMPLATE_FORMAT || header.version != 1 {
            return Err(Error::Format(format!("unsupported template format {} v{}", header.format, header.version)));
        }
        let d = header.n_poi;
        if header.n_classes != header.leakage_model.class_count()
            || header.poi.len() != d
            || d == 0
            || header.n_covariances != if header.pooled { 1 } else { header.n_classes }
        {
            return Err(Error::Integrity("template header dimensions are inconsistent".into()));
        }
        let blob_path = path.with_file_name(&header.blob);
        let blob = fs::read(blob_path)?;
        let n_means = header.n_classes * d;
        let expected = 8 * (n_means + header.n_covariances * d * d);
        if blob.len() != expected {
            return Err(Error::Integrity(format!("template blob holds {} bytes, expected {expected}", blob.len())));
        }
        let vals: Vec<T> = blob
            .chunks_exact(8)
            .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let class_means = vals[..n_means].to_vec();
        let covariances: Vec<Vec<T>> = vals[n_means..].chunks_exact(d * d).map(<[T]>::to_vec).collect();
        let factors = covariances
            .iter()
            .map(|c| Cholesky::factor(c, d))
            .collect::<Result<Vec<_>>>()?;
        let log_norms = factors.iter().map(log_norm).collect();
        Ok(Self {
            n_samples: header.n_samples,
            poi: PoiCandidate::from_indices(header.n_samples, &header.poi)?,
            poi_indices: header.poi,
            leakage_model: header.leakage_model,
            epsilon: header.epsilon,
            pooled: header.pooled,
            profiling_traces: header.profiling_traces,
            class_means,
            covariances,
            factors,
            log_norms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::SchemeTag;
    use approx::assert_relative_eq;

    fn two_class_set(rows: &[(f32, f32)]) -> TraceSet {
        let n = rows.len();
        let samples = rows.iter().flat_map(|&(a, b)| [a, b]).collect();
        TraceSet::new(samples, 2, vec![0; n], vec![0; n], None, SchemeTag::External).unwrap()
    }

    /// Identity-model model whose classes 2.. are filled with copies so
    /// every class is present.
    fn padded(rows: &[(f32, f32)], labels: &[u8]) -> (TraceSet, Vec<u8>) {
        let mut rows = rows.to_vec();
        let mut labels = labels.to_vec();
        for c in 2..=255u8 {
            rows.extend([(0.0, 0.0), (0.0, 0.0)]);
            labels.extend([c, c]);
        }
        (two_class_set(&rows), labels)
    }

    #[test]
    fn pooled_moments_hand_computed() {
        let ts = two_class_set(&[(0.0, 0.0), (2.0, 2.0), (4.0, 4.0), (6.0, 6.0)]);
        let (means, cov) = estimate_moments::<f64>(&ts, &[0, 0, 1, 1], &[0, 1], 2, true).unwrap();
        assert_eq!(means, vec![1.0, 1.0, 5.0, 5.0]);
        assert_eq!(cov, vec![vec![2.0, 2.0, 2.0, 2.0]]);
        let (means, cov) = estimate_moments::<f64>(&ts, &[0, 0, 1, 1], &[0], 2, true).unwrap();
        assert_eq!(means, vec![1.0, 5.0]);
        // within-class scatter 2 + 2 over n - n_classes = 2
        assert_eq!(cov, vec![vec![2.0]]);
        let (_, per_class) = estimate_moments::<f64>(&ts, &[0, 0, 1, 1], &[0], 2, false).unwrap();
        assert_eq!(per_class, vec![vec![2.0], vec![2.0]]);
    }

    #[test]
    fn singular_pooled_needs_regularization() {
        let (ts, labels) = padded(&[(0.0, 0.0), (2.0, 2.0), (4.0, 4.0), (6.0, 6.0)], &[0, 0, 1, 1]);
        let poi = PoiCandidate::from_indices(2, &[0, 1]).unwrap();
        let unreg = TemplateOptions { pooled: true, epsilon: 0.0 };
        assert!(matches!(
            build_templates::<f64>(&ts, &labels, &poi, LeakageModel::Identity, unreg),
            Err(Error::Conditioning(_))
        ));
        let m = build_templates::<f64>(&ts, &labels, &poi, LeakageModel::Identity, TemplateOptions::default()).unwrap();
        assert_eq!(m.class_mean(0), &[1.0, 1.0]);
        assert_eq!(m.class_mean(1), &[5.0, 5.0]);
        assert_eq!(m.trainable_parameters(), 2);
        let cov = m.covariance(0);
        assert_relative_eq!(cov[1], cov[2]);
        assert!(cov[0] > cov[1]);
    }

    #[test]
    fn class_with_one_trace_is_rejected() {
        let ts = two_class_set(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        let poi = PoiCandidate::from_indices(2, &[0]).unwrap();
        let err = build_templates::<f64>(&ts, &[0, 0, 1], &poi, LeakageModel::HammingWeight, TemplateOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::InsufficientData { class: 1, count: 1, .. }));
    }

    fn identity_model(d: usize) -> TemplateModel<f64> {
        let mut cov = vec![0.0; d * d];
        (0..d).for_each(|i| cov[i * d + i] = 1.0);
        let f = Cholesky::factor(&cov, d).unwrap();
        TemplateModel {
            n_samples: d,
            poi: PoiCandidate::from_mask(vec![true; d]),
            poi_indices: (0..d).collect(),
            leakage_model: LeakageModel::HammingWeight,
            epsilon: 0.0,
            pooled: true,
            profiling_traces: 0,
            class_means: vec![0.0; 9 * d],
            covariances: vec![cov],
            log_norms: vec![log_norm(&f)],
            factors: vec![f],
        }
    }

    #[test]
    fn discriminant_examples() {
        let m = identity_model(2);
        assert_relative_eq!(m.discriminant_score(&[0.0, 0.0], 0).unwrap(), -1.8378770664093453, epsilon = 1e-12);
        assert_relative_eq!(m.discriminant_score(&[1.0, 0.0], 0).unwrap(), -2.3378770664093453, epsilon = 1e-12);
        assert!(m.discriminant_score(&[0.0], 0).is_err());
        assert!(m.discriminant_score(&[0.0, 0.0], 9).is_err());
    }

    #[test]
    fn ranking_and_rank() {
        let mut scores = vec![0.0f64; 256];
        scores[0] = 0.9;
        scores[1] = 0.5;
        scores[2] = 0.5;
        let kgv = KeyGuessingVector::from_scores(scores).unwrap();
        assert_eq!(&kgv.ranking[..3], &[0, 1, 2]);
        assert_eq!(rank_of_key(&kgv, 0), 0);
        assert_eq!(rank_of_key(&kgv, 2), 2);
        assert_eq!(rank_of_key(&kgv, 3), 3);
        let flat = KeyGuessingVector::from_scores(vec![1.0f64; 256]).unwrap();
        assert_eq!(rank_of_key(&flat, 0), 0);
        assert_eq!(rank_of_key(&flat, 255), 255);
        let mut seen = flat.ranking.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..=255).collect::<Vec<u8>>());
    }

    #[test]
    fn save_load_round_trip() {
        let ts = two_class_set(&[(0.0, 1.0), (2.0, 2.5), (4.0, 3.0), (6.0, 7.0), (1.0, 0.0), (3.0, 1.0)]);
        let labels = [0, 0, 1, 1, 2, 2];
        let padded_labels: Vec<u8> = labels.iter().copied().chain((3..9u8).flat_map(|c| [c, c])).collect();
        let mut rows: Vec<(f32, f32)> = (0..6).map(|i| (ts.trace(i)[0], ts.trace(i)[1])).collect();
        for c in 3..9 {
            rows.extend([(c as f32, 0.5), (c as f32 + 1.0, -0.5)]);
        }
        let ts = two_class_set(&rows);
        let poi = PoiCandidate::from_indices(2, &[0, 1]).unwrap();
        for pooled in [true, false] {
            let opts = TemplateOptions { pooled, epsilon: 1e-3 };
            let m = build_templates::<f64>(&ts, &padded_labels, &poi, LeakageModel::HammingWeight, opts).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let (json, _) = m.save(dir.path().join("model")).unwrap();
            let back = TemplateModel::<f64>::load(json).unwrap();
            for c in 0..9 {
                assert_eq!(back.class_mean(c), m.class_mean(c));
                assert_eq!(back.covariance(c), m.covariance(c));
                let x = [0.3, -0.2];
                assert_eq!(back.discriminant_score(&x, c).unwrap(), m.discriminant_score(&x, c).unwrap());
            }
        }
    }

    #[test]
    fn attack_rejects_mismatched_width() {
        let m = identity_model(2);
        let ts = TraceSet::new(vec![0.0; 3], 3, vec![0], vec![0], None, SchemeTag::External).unwrap();
        assert!(attack(&m, &ts).is_err());
    }
}
