//! UMDA over binary POI-selection genomes.
//!
//! One generation: evaluate every candidate with a template attack, keep
//! the best `N` of `R`, re-estimate the per-sample inclusion probabilities
//! from them, and resample. The best candidate ever seen is carried into
//! every new population unchanged.
//!
//! All randomness comes from streams keyed by `(seed, generation, index)`;
//! fitness evaluations run in parallel without changing the result.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::metrics::guessing_entropy_from_table;
use crate::poi::{PoiCandidate, PoiScores};
use crate::rng::{derive_seed, rng_for, stream};
use crate::template::{build_templates, TemplateOptions};
use crate::trace::{label_traces, LeakageModel, TraceSet};
use crate::Scalar;

/// Fitness given to candidates whose templates cannot be built.
pub const FAILED_FITNESS: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitStrategy {
    /// Every bit is Bernoulli(`p0`).
    Uniform { p0: f64 },
    /// Bit `i` is Bernoulli(`scale · score_i / mean(score)`), clamped.
    CorrelationWeighted { scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessBudget {
    /// Attack traces per guessing-entropy curve.
    pub traces: usize,
    pub repetitions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UmdaConfig {
    pub population_size: usize,
    pub selection_size: usize,
    pub max_generations: usize,
    pub stagnation_limit: usize,
    pub init: InitStrategy,
    /// `[lo, hi]` bounds on every marginal; `[1/L, 1 - 1/L]` when absent.
    #[serde(default)]
    pub clamp: Option<[f64; 2]>,
    pub fitness_budget: FitnessBudget,
    #[serde(default)]
    pub seed: u64,
    /// Soft cap on the number of selected samples.
    #[serde(default)]
    pub max_poi: Option<usize>,
    /// Fitness penalty per sample above `max_poi`.
    #[serde(default)]
    pub penalty: f64,
}

impl Default for UmdaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            selection_size: 10,
            max_generations: 30,
            stagnation_limit: 10,
            init: InitStrategy::CorrelationWeighted { scale: 0.1 },
            clamp: None,
            fitness_budget: FitnessBudget { traces: 50, repetitions: 5 },
            seed: 0,
            max_poi: None,
            penalty: 0.0,
        }
    }
}

impl UmdaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.selection_size < 1 || self.selection_size >= self.population_size {
            return arg(format!(
                "need 1 <= selection_size < population_size, got N = {} and R = {}",
                self.selection_size, self.population_size
            ));
        }
        if self.max_generations < 1 {
            return arg("max_generations must be at least 1");
        }
        if self.stagnation_limit < 1 {
            return arg("stagnation_limit must be at least 1");
        }
        if let Some([lo, hi]) = self.clamp {
            if !(lo > 0.0 && lo <= hi && hi < 1.0) {
                return arg(format!("clamp must satisfy 0 < lo <= hi < 1, got [{lo}, {hi}]"));
            }
        }
        let p = match self.init {
            InitStrategy::Uniform { p0 } => p0,
            InitStrategy::CorrelationWeighted { scale } => scale,
        };
        if !(p >= 0.0 && p.is_finite()) {
            return arg(format!("initial probability must be finite and >= 0, got {p}"));
        }
        if self.fitness_budget.traces < 1 || self.fitness_budget.repetitions < 1 {
            return arg("fitness budget needs at least one trace and one repetition");
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return arg("penalty must be finite and >= 0");
        }
        Ok(())
    }

    /// Marginal bounds for genomes of length `len`.
    pub fn resolved_clamp(&self, len: usize) -> Result<(f64, f64)> {
        match self.clamp {
            Some([lo, hi]) => Ok((lo, hi)),
            None if len >= 2 => {
                let l = len as f64;
                Ok((1.0 / l, 1.0 - 1.0 / l))
            }
            None => arg("default clamp needs genomes of length >= 2"),
        }
    }
}

/// Evolving model of the search.
#[derive(Clone, Debug, PartialEq)]
pub struct UmdaState {
    pub marginals: Vec<f64>,
    pub population: Vec<PoiCandidate>,
    /// Lower is better; empty until the population is evaluated.
    pub fitness: Vec<f64>,
    pub generation: usize,
    pub best_ever: Option<(PoiCandidate, f64)>,
}

impl UmdaState {
    pub fn select_truncation(&self, n: usize) -> Vec<PoiCandidate> {
        select_truncation(&self.fitness, n)
            .into_iter()
            .map(|i| self.population[i].clone())
            .collect()
    }
}

fn clamp_all(p: &mut [f64], (lo, hi): (f64, f64)) {
    p.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
}

pub fn init_population<T: Scalar>(
    cfg: &UmdaConfig,
    scores: Option<&PoiScores<T>>,
    n_samples: usize,
) -> Result<UmdaState> {
    cfg.validate()?;
    if n_samples == 0 {
        return arg("genomes must have at least one position");
    }
    let bounds = cfg.resolved_clamp(n_samples)?;
    let mut marginals = match (cfg.init, scores) {
        (InitStrategy::Uniform { p0 }, _) => vec![p0; n_samples],
        (InitStrategy::CorrelationWeighted { .. }, None) => {
            return arg("correlation-weighted initialisation needs POI scores")
        }
        (InitStrategy::CorrelationWeighted { scale }, Some(s)) => {
            if s.len() != n_samples {
                return arg(format!("{} scores for {n_samples} samples", s.len()));
            }
            let v: Vec<f64> = s.scores.iter().map(|x| x.to_f64_lossy()).collect();
            let mean = v.iter().sum::<f64>() / n_samples as f64;
            let flat = v.iter().all(|&x| x == v[0]);
            if mean > 0.0 && !flat {
                v.iter().map(|x| scale * x / mean).collect()
            } else {
                vec![scale; n_samples]
            }
        }
    };
    clamp_all(&mut marginals, bounds);
    let population = sample_population(
        &marginals,
        cfg.population_size,
        derive_seed(cfg.seed, &[stream::UMDA, 0]),
    );
    Ok(UmdaState { marginals, population, fitness: Vec::new(), generation: 0, best_ever: None })
}

/// Indices of the `n` lowest fitness values; ties go to the lower index.
pub fn select_truncation(fitness: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// Per-position frequency of ones, clamped to `[lo, hi]`.
pub fn estimate_marginals(selected: &[PoiCandidate], clamp: (f64, f64)) -> Result<Vec<f64>> {
    let Some(first) = selected.first() else {
        return arg("cannot estimate marginals from an empty selection");
    };
    let len = first.len();
    if selected.iter().any(|c| c.len() != len) {
        return arg("selected genomes differ in length");
    }
    let n = selected.len() as f64;
    let mut p = vec![0.0; len];
    for c in selected {
        for (acc, &b) in p.iter_mut().zip(c.mask()) {
            if b {
                *acc += 1.0;
            }
        }
    }
    p.iter_mut().for_each(|x| *x /= n);
    clamp_all(&mut p, clamp);
    Ok(p)
}

/// `count` independent genomes; candidate `i` draws from `(seed, i)`.
/// An all-zero genome gets the highest-marginal position switched on.
pub fn sample_population(marginals: &[f64], count: usize, seed: u64) -> Vec<PoiCandidate> {
    let argmax = marginals
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > marginals[best] { i } else { best });
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, &[i as u64]);
            let mut mask: Vec<bool> = marginals.iter().map(|&p| rng.random::<f64>() < p).collect();
            if !mask.iter().any(|&b| b) && !mask.is_empty() {
                mask[argmax] = true;
            }
            PoiCandidate::from_mask(mask)
        })
        .collect()
}

/// Anything that rates a candidate; lower is better.
pub trait Fitness: Sync {
    fn evaluate(&self, candidate: &PoiCandidate) -> f64;
}

impl<F: Fn(&PoiCandidate) -> f64 + Sync> Fitness for F {
    fn evaluate(&self, candidate: &PoiCandidate) -> f64 {
        self(candidate)
    }
}

/// Leakage model and template options used by attack-based fitness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackSettings {
    #[serde(default)]
    pub leakage_model: LeakageModel,
    #[serde(default)]
    pub template: TemplateOptions,
}

/// Profiles on one set, attacks a held-out validation set.
///
/// Every candidate is attacked with the same trace subsets, so fitness
/// differences come from the POIs alone.
pub struct TemplateFitness<'a, T> {
    profiling: &'a TraceSet,
    validation: &'a TraceSet,
    labels: Vec<u8>,
    true_key: u8,
    settings: AttackSettings,
    budget: FitnessBudget,
    max_poi: Option<usize>,
    penalty: f64,
    ge_seed: u64,
    _scalar: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar> TemplateFitness<'a, T> {
    pub fn new(
        profiling: &'a TraceSet,
        validation: &'a TraceSet,
        cfg: &UmdaConfig,
        settings: AttackSettings,
    ) -> Result<Self> {
        if profiling.n_samples() != validation.n_samples() {
            return arg("profiling and validation traces differ in length");
        }
        let Some(true_key) = validation.fixed_key() else {
            return arg("validation traces must share a single key");
        };
        if cfg.fitness_budget.traces > validation.n_traces() {
            return arg(format!(
                "fitness budget of {} traces exceeds the {} validation traces",
                cfg.fitness_budget.traces,
                validation.n_traces()
            ));
        }
        Ok(Self {
            profiling,
            validation,
            labels: label_traces(profiling, settings.leakage_model),
            true_key,
            settings,
            budget: cfg.fitness_budget,
            max_poi: cfg.max_poi,
            penalty: cfg.penalty,
            ge_seed: derive_seed(cfg.seed, &[stream::FITNESS]),
            _scalar: std::marker::PhantomData,
        })
    }

    fn penalty_for(&self, count: usize) -> f64 {
        self.max_poi
            .map_or(0.0, |m| self.penalty * count.saturating_sub(m) as f64)
    }

    pub fn try_evaluate(&self, candidate: &PoiCandidate) -> Result<f64> {
        if candidate.selected_count() == 0 {
            return arg("candidate selects no samples");
        }
        let model = build_templates::<T>(
            self.profiling,
            &self.labels,
            candidate,
            self.settings.leakage_model,
            self.settings.template,
        )?;
        let table = model.class_log_likelihoods(self.validation)?;
        let curve = guessing_entropy_from_table(
            &table,
            self.validation.plaintexts(),
            self.settings.leakage_model,
            self.true_key,
            self.budget.traces,
            self.budget.repetitions,
            self.ge_seed,
        )?;
        Ok(curve.normalized_area() + self.penalty_for(candidate.selected_count()))
    }
}

impl<T: Scalar> Fitness for TemplateFitness<'_, T> {
    fn evaluate(&self, candidate: &PoiCandidate) -> f64 {
        self.try_evaluate(candidate).unwrap_or(FAILED_FITNESS)
    }
}

/// Normalised area under the validation ge curve plus the POI-count
/// penalty. Template failures map to [`FAILED_FITNESS`].
pub fn evaluate_fitness<T: Scalar>(
    candidate: &PoiCandidate,
    profiling: &TraceSet,
    validation: &TraceSet,
    cfg: &UmdaConfig,
    settings: AttackSettings,
) -> Result<f64> {
    if candidate.selected_count() == 0 {
        return arg("candidate selects no samples");
    }
    Ok(TemplateFitness::<T>::new(profiling, validation, cfg, settings)?.evaluate(candidate))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Best fitness seen so far (elitist, so non-increasing).
    pub best_fitness: f64,
    /// Mean over the candidates of this generation that could be evaluated.
    pub mean_fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UmdaOutcome {
    pub best: PoiCandidate,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
    pub marginals: Vec<f64>,
    pub evaluations: usize,
}

impl UmdaOutcome {
    pub fn generations(&self) -> usize {
        self.history.len()
    }

    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "generation,best_fitness,mean_fitness")?;
        for h in &self.history {
            writeln!(w, "{},{},{}", h.generation, h.best_fitness, h.mean_fitness)?;
        }
        Ok(())
    }

    pub fn write_marginals_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,probability")?;
        for (i, p) in self.marginals.iter().enumerate() {
            writeln!(w, "{i},{p}")?;
        }
        Ok(())
    }

    pub fn write_best_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index")?;
        for i in self.best.indices() {
            writeln!(w, "{i}")?;
        }
        Ok(())
    }
}

/// The full loop against an arbitrary fitness function.
pub fn run_umda_with<T: Scalar, F: Fitness>(
    fitness: &F,
    n_samples: usize,
    cfg: &UmdaConfig,
    scores: Option<&PoiScores<T>>,
) -> Result<UmdaOutcome> {
    let mut state = init_population(cfg, scores, n_samples)?;
    let bounds = cfg.resolved_clamp(n_samples)?;
    let mut history = Vec::new();
    let mut stagnant = 0usize;
    let mut evaluations = 0usize;
    // The elite sits at index 0 of every resampled population.
    let mut elite_fitness: Option<f64> = None;

    loop {
        state.generation += 1;
        let cached = elite_fitness.take();
        let skip = usize::from(cached.is_some());
        let fresh: Vec<f64> = state.population[skip..]
            .par_iter()
            .map(|c| fitness.evaluate(c))
            .collect();
        evaluations += fresh.len();
        state.fitness = cached.into_iter().chain(fresh).collect();

        let best_idx = select_truncation(&state.fitness, 1)[0];
        let gen_best = state.fitness[best_idx];
        match &state.best_ever {
            Some((_, f)) if gen_best >= *f => stagnant += 1,
            _ => {
                state.best_ever = Some((state.population[best_idx].clone(), gen_best));
                stagnant = 0;
            }
        }
        let finite: Vec<f64> = state.fitness.iter().copied().filter(|f| f.is_finite()).collect();
        let mean_fitness = if finite.is_empty() {
            FAILED_FITNESS
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let (best, best_fitness) = state.best_ever.clone().expect("set on first generation");
        history.push(GenerationRecord { generation: state.generation, best_fitness, mean_fitness });

        if state.generation >= cfg.max_generations || stagnant >= cfg.stagnation_limit {
            return Ok(UmdaOutcome {
                best,
                best_fitness,
                history,
                marginals: state.marginals,
                evaluations,
            });
        }

        let selected = state.select_truncation(cfg.selection_size);
        state.marginals = estimate_marginals(&selected, bounds)?;
        let seed = derive_seed(cfg.seed, &[stream::UMDA, state.generation as u64]);
        let mut next = Vec::with_capacity(cfg.population_size);
        next.push(best);
        next.extend(sample_population(&state.marginals, cfg.population_size - 1, seed));
        state.population = next;
        elite_fitness = Some(best_fitness);
    }
}

/// Searches POIs for a template attack profiled on `profiling` and rated on
/// `validation`.
pub fn run_umda<T: Scalar>(
    profiling: &TraceSet,
    validation: &TraceSet,
    cfg: &UmdaConfig,
    settings: AttackSettings,
    scores: Option<&PoiScores<T>>,
) -> Result<UmdaOutcome> {
    cfg.validate()?;
    let fitness = TemplateFitness::<T>::new(profiling, validation, cfg, settings)?;
    run_umda_with(&fitness, profiling.n_samples(), cfg, scores)
}
