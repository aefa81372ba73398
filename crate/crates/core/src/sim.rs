//! Synthetic first-round AES leakage.
//!
//! Each trace carries `HW(v) + noise` (unprotected) or `HW(v ^ m) + noise`
//! (masked) at the leak positions, `HW(m) + noise` at the mask positions
//! (MS1 only), and pure noise elsewhere. Every trace draws from its own
//! stream keyed by `(seed, trace_index)`, so generation is parallel and
//! still bit-reproducible.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aes::{compute_intermediate, hamming_weight};
use crate::error::{arg, Error, Result};
use crate::rng::{derive_seed, rng_for, stream};
use crate::trace::{SchemeTag, TraceSet};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_traces: usize,
    pub n_samples: usize,
    pub leak_positions: Vec<usize>,
    #[serde(default)]
    pub mask_leak_positions: Vec<usize>,
    pub noise_sigma: f64,
    #[serde(default)]
    pub fixed_key: Option<u8>,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self, scheme: SchemeTag) -> Result<()> {
        if self.n_traces == 0 || self.n_samples == 0 {
            return arg("n_traces and n_samples must both be at least 1");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return arg(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if self.leak_positions.is_empty() {
            return arg("leak_positions must not be empty");
        }
        let all = self.leak_positions.iter().chain(&self.mask_leak_positions);
        if let Some(p) = all.clone().find(|&&p| p >= self.n_samples) {
            return arg(format!("position {p} out of range for {} samples", self.n_samples));
        }
        if let Some(p) = self.mask_leak_positions.iter().find(|p| self.leak_positions.contains(p)) {
            return arg(format!("position {p} is both a leak and a mask-leak position"));
        }
        match scheme {
            SchemeTag::Ms1 if self.mask_leak_positions.is_empty() => {
                arg("ms1 requires non-empty mask_leak_positions")
            }
            SchemeTag::Ms2 | SchemeTag::Unprotected if !self.mask_leak_positions.is_empty() => {
                arg(format!("{scheme} requires empty mask_leak_positions"))
            }
            SchemeTag::External => arg("the simulator cannot produce external traces"),
            _ => Ok(()),
        }
    }
}

pub fn simulate(cfg: &SimConfig, scheme: SchemeTag) -> Result<TraceSet> {
    cfg.validate(scheme)?;
    let n = cfg.n_traces;
    let s = cfg.n_samples;
    let masked = scheme.is_masked();
    let mut samples = vec![0f32; n * s];
    let mut meta = vec![(0u8, 0u8, 0u8); n];

    samples
        .par_chunks_mut(s)
        .zip(meta.par_iter_mut())
        .enumerate()
        .for_each(|(i, (row, meta))| {
            let mut rng = rng_for(cfg.seed, &[i as u64]);
            let p: u8 = rng.random();
            let k = cfg.fixed_key.unwrap_or_else(|| rng.random());
            let m: u8 = if masked { rng.random() } else { 0 };
            let v = compute_intermediate(p, k);
            for x in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = (cfg.noise_sigma * z) as f32;
            }
            let share = f64::from(hamming_weight(v ^ m));
            for &pos in &cfg.leak_positions {
                row[pos] = (share + f64::from(row[pos])) as f32;
            }
            if scheme == SchemeTag::Ms1 {
                let hm = f64::from(hamming_weight(m));
                for &pos in &cfg.mask_leak_positions {
                    row[pos] = (hm + f64::from(row[pos])) as f32;
                }
            }
            *meta = (p, k, m);
        });

    let plaintexts = meta.iter().map(|m| m.0).collect();
    let keys = meta.iter().map(|m| m.1).collect();
    let masks = masked.then(|| meta.iter().map(|m| m.2).collect());
    Ok(TraceSet::new(samples, s, plaintexts, keys, masks, scheme)?.with_seed(Some(cfg.seed)))
}

/// Profiling, validation and attack sets drawn from one geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedSets {
    /// Per-trace random keys unless `fixed_key` is set in the config.
    pub profiling: TraceSet,
    /// Fixed `attack_key`; absent when zero traces were requested.
    pub validation: Option<TraceSet>,
    pub attack: Option<TraceSet>,
}

/// Simulates the three sets of a campaign from one top-level seed.
///
/// Set seeds are `derive_seed(seed, [tag])` with the tags in
/// [`crate::rng::stream`]; `cfg.seed` is ignored.
pub fn simulate_sets(
    cfg: &SimConfig,
    scheme: SchemeTag,
    n_validation: usize,
    n_attack: usize,
    attack_key: u8,
    seed: u64,
) -> Result<SimulatedSets> {
    let derived = |tag| derive_seed(seed, &[tag]);
    let profiling = simulate(&SimConfig { seed: derived(stream::SIM_PROFILING), ..cfg.clone() }, scheme)?;
    let fixed = |n: usize, tag| -> Result<Option<TraceSet>> {
        if n == 0 {
            return Ok(None);
        }
        let c = SimConfig { n_traces: n, fixed_key: Some(attack_key), seed: derived(tag), ..cfg.clone() };
        simulate(&c, scheme).map(Some)
    };
    Ok(SimulatedSets {
        profiling,
        validation: fixed(n_validation, stream::SIM_VALIDATION)?,
        attack: fixed(n_attack, stream::SIM_ATTACK)?,
    })
}

/// Within-class variance below which SNR is capped instead of divided.
pub const SNR_CAP: f64 = 1e12;

/// Per-sample ratio of the variance of class means to the mean within-class
/// variance. Zero within-class variance caps at [`SNR_CAP`]; a sample with
/// no variation at all scores 0.
pub fn estimate_snr<T: Scalar>(ts: &TraceSet, labels: &[u8]) -> Result<Vec<T>> {
    if labels.len() != ts.n_traces() {
        return arg(format!("{} labels for {} traces", labels.len(), ts.n_traces()));
    }
    let s = ts.n_samples();
    let mut counts = [0usize; 256];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let classes: Vec<usize> = (0..256).filter(|&c| counts[c] > 0).collect();
    if let Some(&c) = classes.iter().find(|&&c| counts[c] < 2) {
        return Err(Error::InsufficientData { class: c, count: counts[c], needed: 2 });
    }
    let mut sums = vec![T::zero(); 256 * s];
    for (i, &l) in labels.iter().enumerate() {
        let acc = &mut sums[l as usize * s..(l as usize + 1) * s];
        for (a, &x) in acc.iter_mut().zip(ts.trace(i)) {
            *a += T::from_sample(x);
        }
    }
    for &c in &classes {
        let n = T::from_count(counts[c]);
        sums[c * s..(c + 1) * s].iter_mut().for_each(|a| *a /= n);
    }
    let means = sums;
    let mut scatter = vec![T::zero(); 256 * s];
    for (i, &l) in labels.iter().enumerate() {
        let c = l as usize;
        for j in 0..s {
            let d = T::from_sample(ts.trace(i)[j]) - means[c * s + j];
            scatter[c * s + j] += d * d;
        }
    }
    let n_classes = T::from_count(classes.len());
    let cap = T::from_f64_lossy(SNR_CAP);
    Ok((0..s)
        .map(|j| {
            let grand = classes.iter().map(|&c| means[c * s + j]).sum::<T>() / n_classes;
            let between = classes
                .iter()
                .map(|&c| (means[c * s + j] - grand).powi(2))
                .sum::<T>()
                / n_classes;
            let within = classes
                .iter()
                .map(|&c| scatter[c * s + j] / T::from_count(counts[c] - 1))
                .sum::<T>()
                / n_classes;
            if within > T::zero() {
                (between / within).min(cap)
            } else if between > T::zero() {
                cap
            } else {
                T::zero()
            }
        })
        .collect())
}
