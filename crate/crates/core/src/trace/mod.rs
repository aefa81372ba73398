//! Trace container, class labelling and train/attack splitting.

mod scat;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aes::{compute_intermediate, hamming_weight};
use crate::error::{arg, Error, Result};
use crate::rng::{rng_for, stream};

pub use scat::{load_traceset, save_traceset, read_traceset, write_traceset, FORMAT_VERSION, MAGIC};

/// Which protection scenario produced a trace set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeTag {
    Unprotected,
    Ms1,
    Ms2,
    External,
}

impl SchemeTag {
    pub fn is_masked(self) -> bool {
        matches!(self, SchemeTag::Ms1 | SchemeTag::Ms2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Unprotected => "unprotected",
            SchemeTag::Ms1 => "ms1",
            SchemeTag::Ms2 => "ms2",
            SchemeTag::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unprotected" => Some(SchemeTag::Unprotected),
            "ms1" => Some(SchemeTag::Ms1),
            "ms2" => Some(SchemeTag::Ms2),
            "external" => Some(SchemeTag::External),
            _ => None,
        }
    }
}

impl std::fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How an intermediate byte is mapped to a template class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageModel {
    /// One class per byte value.
    Identity,
    /// One class per Hamming weight, 0..=8.
    #[default]
    HammingWeight,
}

impl LeakageModel {
    pub fn class_count(self) -> usize {
        match self {
            LeakageModel::Identity => 256,
            LeakageModel::HammingWeight => 9,
        }
    }

    #[inline]
    pub fn label(self, value: u8) -> u8 {
        match self {
            LeakageModel::Identity => value,
            LeakageModel::HammingWeight => hamming_weight(value),
        }
    }

    /// Class of every key hypothesis for one plaintext byte.
    pub fn hypothesis_labels(self, plaintext: u8) -> [u8; 256] {
        std::array::from_fn(|k| self.label(compute_intermediate(plaintext, k as u8)))
    }
}

/// Which byte a label is computed from.
///
/// Profiling with known masks lets an evaluator locate the leakage of each
/// share; the attack itself always targets the unmasked intermediate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTarget {
    /// `Sbox[p ^ k]`
    #[default]
    Intermediate,
    /// `Sbox[p ^ k] ^ m`
    MaskedIntermediate,
    /// `m`
    Mask,
}

/// Power traces plus the per-trace metadata of the attacked byte.
///
/// Immutable once built; every constructor validates the invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    samples: Vec<f32>,
    n_traces: usize,
    n_samples: usize,
    plaintexts: Vec<u8>,
    keys: Vec<u8>,
    masks: Option<Vec<u8>>,
    scheme: SchemeTag,
    seed: Option<u64>,
}

impl TraceSet {
    /// `samples` is row-major, `n_traces × n_samples`.
    pub fn new(
        samples: Vec<f32>,
        n_samples: usize,
        plaintexts: Vec<u8>,
        keys: Vec<u8>,
        masks: Option<Vec<u8>>,
        scheme: SchemeTag,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Integrity("n_samples must be at least 1".into()));
        }
        if !samples.len().is_multiple_of(n_samples) {
            return Err(Error::Integrity(format!(
                "sample payload of {} values is not a multiple of n_samples = {n_samples}",
                samples.len()
            )));
        }
        let n_traces = samples.len() / n_samples;
        if n_traces == 0 {
            return Err(Error::Integrity("a trace set needs at least one trace".into()));
        }
        if plaintexts.len() != n_traces || keys.len() != n_traces {
            return Err(Error::Integrity(format!(
                "metadata length mismatch: {n_traces} traces, {} plaintexts, {} keys",
                plaintexts.len(),
                keys.len()
            )));
        }
        match (&masks, scheme.is_masked()) {
            (Some(m), true) if m.len() != n_traces => {
                return Err(Error::Integrity(format!(
                    "metadata length mismatch: {n_traces} traces, {} masks",
                    m.len()
                )))
            }
            (Some(_), false) => {
                return Err(Error::Integrity(format!("scheme {scheme} must not carry masks")))
            }
            (None, true) => return Err(Error::Integrity(format!("scheme {scheme} requires masks"))),
            _ => {}
        }
        if let Some(pos) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Integrity(format!(
                "non-finite sample at trace {}, sample {}",
                pos / n_samples,
                pos % n_samples
            )));
        }
        Ok(Self {
            samples,
            n_traces,
            n_samples,
            plaintexts,
            keys,
            masks,
            scheme,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_traces(&self) -> usize {
        self.n_traces
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    #[inline]
    pub fn trace(&self, i: usize) -> &[f32] {
        &self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn plaintexts(&self) -> &[u8] {
        &self.plaintexts
    }

    pub fn keys(&self) -> &[u8] {
        &self.keys
    }

    pub fn masks(&self) -> Option<&[u8]> {
        self.masks.as_deref()
    }

    pub fn scheme(&self) -> SchemeTag {
        self.scheme
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// The key shared by every trace, if there is one.
    pub fn fixed_key(&self) -> Option<u8> {
        let first = self.keys[0];
        self.keys.iter().all(|&k| k == first).then_some(first)
    }

    /// New set made of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<TraceSet> {
        if rows.is_empty() {
            return arg("cannot select zero traces");
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_traces) {
            return arg(format!("row {bad} out of range for {} traces", self.n_traces));
        }
        let mut samples = Vec::with_capacity(rows.len() * self.n_samples);
        for &r in rows {
            samples.extend_from_slice(self.trace(r));
        }
        Ok(TraceSet {
            samples,
            n_traces: rows.len(),
            n_samples: self.n_samples,
            plaintexts: rows.iter().map(|&r| self.plaintexts[r]).collect(),
            keys: rows.iter().map(|&r| self.keys[r]).collect(),
            masks: self.masks.as_ref().map(|m| rows.iter().map(|&r| m[r]).collect()),
            scheme: self.scheme,
            seed: self.seed,
        })
    }
}

/// Class label of every trace under `model`, computed from `Sbox[p ^ k]`.
pub fn label_traces(ts: &TraceSet, model: LeakageModel) -> Vec<u8> {
    ts.plaintexts
        .iter()
        .zip(&ts.keys)
        .map(|(&p, &k)| model.label(compute_intermediate(p, k)))
        .collect()
}

/// Labels for POI scoring against a chosen share.
pub fn label_traces_for(ts: &TraceSet, model: LeakageModel, target: LabelTarget) -> Result<Vec<u8>> {
    let plain = || ts.plaintexts.iter().zip(&ts.keys).map(|(&p, &k)| compute_intermediate(p, k));
    match target {
        LabelTarget::Intermediate => Ok(label_traces(ts, model)),
        LabelTarget::MaskedIntermediate | LabelTarget::Mask => {
            let Some(masks) = ts.masks() else {
                return arg(format!("label target {target:?} needs masks, scheme {} has none", ts.scheme));
            };
            Ok(match target {
                LabelTarget::Mask => masks.iter().map(|&m| model.label(m)).collect(),
                _ => plain().zip(masks).map(|(v, &m)| model.label(v ^ m)).collect(),
            })
        }
    }
}

/// Seeded shuffle, then the first `n_profiling` rows form the profiling set.
pub fn split_traceset(ts: &TraceSet, n_profiling: usize, seed: u64) -> Result<(TraceSet, TraceSet)> {
    if n_profiling < 1 || n_profiling >= ts.n_traces {
        return arg(format!(
            "n_profiling must lie in [1, {}), got {n_profiling}",
            ts.n_traces
        ));
    }
    let mut order: Vec<usize> = (0..ts.n_traces).collect();
    order.shuffle(&mut rng_for(seed, &[stream::SPLIT]));
    let (prof, att) = order.split_at(n_profiling);
    Ok((ts.select(prof)?, ts.select(att)?))
}
