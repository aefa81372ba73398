//! The four campaign commands. Each writes its artifacts into `out` and
//! returns the summary it stored as `summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use poisearch::eda::{evaluate_fitness, run_umda, UmdaConfig, UmdaOutcome};
use poisearch::metrics::{boxplot_stats, guessing_entropy, q_tge, BoxStats, GeCurve};
use poisearch::poi::{correlation_ranking, select_top_k, snr_ranking, PoiCandidate, ScoreMethod};
use poisearch::rng::{derive_seed, stream};
use poisearch::sim::simulate_sets;
use poisearch::template::{build_templates, TemplateModel};
use poisearch::trace::{
    label_traces, label_traces_for, load_traceset, save_traceset, LabelTarget, SchemeTag, TraceSet,
};
use poisearch::PoiScoresF64;
use serde::Serialize;

use crate::config::{CampaignConfig, DataSource, MethodKind};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulate,
    Attack,
    EdaSearch,
    Evaluate,
}

pub fn execute(kind: Kind, cfg: &CampaignConfig, out: &Path) -> Result<()> {
    match kind {
        Kind::Simulate => simulate(cfg, out).map(drop),
        Kind::Attack => attack(cfg, out).map(drop),
        Kind::EdaSearch => eda_search(cfg, out).map(drop),
        Kind::Evaluate => evaluate(cfg, out).map(drop),
    }
}

struct Splits {
    scheme: SchemeTag,
    profiling: TraceSet,
    validation: Option<TraceSet>,
    attack: Option<TraceSet>,
}

impl Splits {
    fn validation(&self) -> Result<&TraceSet> {
        self.validation
            .as_ref()
            .ok_or_else(|| CliError::config("this command needs validation traces"))
    }

    fn attack(&self) -> Result<&TraceSet> {
        self.attack
            .as_ref()
            .ok_or_else(|| CliError::config("this command needs attack traces"))
    }
}

fn load_splits(cfg: &CampaignConfig, scheme: Option<SchemeTag>) -> Result<Splits> {
    match &cfg.data {
        DataSource::Sim(s) => {
            let scheme = scheme.unwrap_or(s.scheme);
            let sets = simulate_sets(
                &cfg.sim_config_for(s, scheme),
                scheme,
                s.validation_traces,
                s.attack_traces,
                s.attack_key,
                cfg.seed,
            )
            .map_err(CliError::config)?;
            Ok(Splits { scheme, profiling: sets.profiling, validation: sets.validation, attack: sets.attack })
        }
        DataSource::Files(f) => {
            let load = |p: &Path| {
                load_traceset(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))
            };
            let profiling = load(&f.profiling)?;
            let validation = f.validation.as_deref().map(load).transpose()?;
            let attack = f.attack.as_deref().map(load).transpose()?;
            for other in validation.iter().chain(&attack) {
                if other.n_samples() != profiling.n_samples() {
                    return Err(CliError::config("trace files disagree on samples per trace"));
                }
            }
            Ok(Splits { scheme: profiling.scheme(), profiling, validation, attack })
        }
    }
}

fn poi_scores(cfg: &CampaignConfig, ts: &TraceSet) -> Result<PoiScoresF64> {
    let targets = cfg.poi.targets.clone().unwrap_or_else(|| {
        if ts.masks().is_some() {
            vec![LabelTarget::MaskedIntermediate, LabelTarget::Mask]
        } else {
            vec![LabelTarget::Intermediate]
        }
    });
    let mut merged: Option<PoiScoresF64> = None;
    for t in targets {
        let labels = label_traces_for(ts, cfg.leakage_model, t)?;
        let s = match cfg.poi.method {
            ScoreMethod::AbsPearson => correlation_ranking(ts, &labels)?,
            ScoreMethod::Snr => snr_ranking(ts, &labels)?,
        };
        merged = Some(match merged {
            None => s,
            Some(m) => m.max_with(&s)?,
        });
    }
    merged.ok_or_else(|| CliError::config("poi.targets must not be empty"))
}

fn top_k(cfg: &CampaignConfig, scores: &PoiScoresF64, k: usize) -> Result<PoiCandidate> {
    let t = select_top_k(scores, k, cfg.poi.min_spacing)?;
    if t.truncated {
        eprintln!(
            "warning: min_spacing {} left only {} of {k} POIs",
            cfg.poi.min_spacing,
            t.candidate.selected_count()
        );
    }
    Ok(t.candidate)
}

fn profile(cfg: &CampaignConfig, profiling: &TraceSet, poi: &PoiCandidate) -> Result<TemplateModel<f64>> {
    let labels = label_traces(profiling, cfg.leakage_model);
    let model = build_templates(profiling, &labels, poi, cfg.leakage_model, cfg.template)?;
    if model.below_recommended_size() {
        eprintln!(
            "warning: {} profiling traces for {} POIs and {} classes",
            profiling.n_traces(),
            model.n_poi(),
            model.n_classes()
        );
    }
    Ok(model)
}

fn measure(cfg: &CampaignConfig, model: &TemplateModel<f64>, pool: &TraceSet) -> Result<GeCurve> {
    if cfg.evaluation.traces > pool.n_traces() {
        return Err(CliError::config(format!(
            "evaluation.traces = {} exceeds the {} attack traces",
            cfg.evaluation.traces,
            pool.n_traces()
        )));
    }
    let seed = derive_seed(cfg.seed, &[stream::GUESSING_ENTROPY]);
    Ok(guessing_entropy(model, pool, cfg.evaluation.traces, cfg.evaluation.repetitions, seed)?)
}

fn umda_config(cfg: &CampaignConfig) -> Result<UmdaConfig> {
    let u = cfg.umda.clone().ok_or_else(|| CliError::config("missing umda section"))?;
    Ok(UmdaConfig { seed: derive_seed(cfg.seed, &[stream::UMDA]), ..u })
}

/// The configuration as actually run: UMDA seed replaced by its derived
/// value.
fn resolved(cfg: &CampaignConfig) -> CampaignConfig {
    let mut c = cfg.clone();
    if let Some(u) = &mut c.umda {
        u.seed = derive_seed(cfg.seed, &[stream::UMDA]);
    }
    c
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_with(out: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(out, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<S: Serialize>(out: &Path, name: &str, value: &S) -> Result<()> {
    write_with(out, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetInfo {
    pub file: String,
    pub n_traces: usize,
    pub n_samples: usize,
    pub scheme: SchemeTag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub command: &'static str,
    pub seed: u64,
    pub config: CampaignConfig,
    pub sets: Vec<SetInfo>,
}

pub fn simulate(cfg: &CampaignConfig, out: &Path) -> Result<SimulateSummary> {
    if !matches!(cfg.data, DataSource::Sim(_)) {
        return Err(CliError::config("simulate needs a sim data source"));
    }
    let s = load_splits(cfg, None)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))?;
    let mut sets = Vec::new();
    let named = [("profiling", Some(&s.profiling)), ("validation", s.validation.as_ref()), ("attack", s.attack.as_ref())];
    for (name, ts) in named {
        let Some(ts) = ts else { continue };
        let file = format!("{name}.scat");
        save_traceset(ts, out.join(&file)).map_err(CliError::runtime)?;
        println!("{name}: n_traces={} n_samples={} scheme={}", ts.n_traces(), ts.n_samples(), ts.scheme());
        sets.push(SetInfo { file, n_traces: ts.n_traces(), n_samples: ts.n_samples(), scheme: ts.scheme() });
    }
    let summary = SimulateSummary { command: "simulate", seed: cfg.seed, config: resolved(cfg), sets };
    write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackSummary {
    pub command: &'static str,
    pub seed: u64,
    pub config: CampaignConfig,
    pub scheme: SchemeTag,
    pub poi: Vec<usize>,
    pub n_poi: usize,
    pub trainable_parameters: usize,
    pub q_tge: Option<usize>,
    pub final_mean_rank: f64,
    pub final_ranks: BoxStats,
}

fn attack_summary(cfg: &CampaignConfig, scheme: SchemeTag, model: &TemplateModel<f64>, curve: &GeCurve) -> Result<AttackSummary> {
    let finals: Vec<f64> = curve.final_ranks.iter().map(|&r| r as f64).collect();
    Ok(AttackSummary {
        command: "attack",
        seed: cfg.seed,
        config: resolved(cfg),
        scheme,
        poi: model.poi().indices(),
        n_poi: model.n_poi(),
        trainable_parameters: model.trainable_parameters(),
        q_tge: q_tge(curve),
        final_mean_rank: curve.final_mean_rank(),
        final_ranks: boxplot_stats(&finals)?,
    })
}

pub fn attack(cfg: &CampaignConfig, out: &Path) -> Result<AttackSummary> {
    let s = load_splits(cfg, None)?;
    let pool = s.attack()?;
    let scores = poi_scores(cfg, &s.profiling)?;
    let poi = top_k(cfg, &scores, cfg.poi.k)?;
    let model = profile(cfg, &s.profiling, &poi)?;
    let curve = measure(cfg, &model, pool)?;

    write_with(out, "poi_scores.csv", |w| scores.write_csv(w))?;
    write_with(out, "ge_curve.csv", |w| curve.write_csv(w))?;
    model.save(out.join("template")).map_err(CliError::runtime)?;
    let summary = attack_summary(cfg, s.scheme, &model, &curve)?;
    write_json(out, "summary.json", &summary)?;
    println!(
        "attack: {} POIs {:?}, q_tge {}, final mean rank {:.2}",
        summary.n_poi,
        summary.poi,
        fmt_q(summary.q_tge),
        summary.final_mean_rank
    );
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdaSummary {
    pub command: &'static str,
    pub seed: u64,
    pub config: CampaignConfig,
    pub scheme: SchemeTag,
    pub best_poi: Vec<usize>,
    pub n_poi: usize,
    pub search_fitness: f64,
    /// Fitness of the top-k POIs under the same budget, for reference.
    pub baseline_fitness: f64,
    pub generations: usize,
    pub evaluations: usize,
    pub confirmation_q_tge: Option<usize>,
    pub confirmation_final_mean_rank: f64,
    pub confirmation_final_ranks: BoxStats,
}

fn search(cfg: &CampaignConfig, s: &Splits, scores: &PoiScoresF64) -> Result<UmdaOutcome> {
    let ucfg = umda_config(cfg)?;
    let outcome = run_umda(&s.profiling, s.validation()?, &ucfg, cfg.attack_settings(), Some(scores))?;
    if !outcome.best_fitness.is_finite() {
        return Err(CliError::runtime("no candidate could be profiled; every fitness evaluation failed"));
    }
    Ok(outcome)
}

pub fn eda_search(cfg: &CampaignConfig, out: &Path) -> Result<EdaSummary> {
    let s = load_splits(cfg, None)?;
    let pool = s.attack()?;
    let scores = poi_scores(cfg, &s.profiling)?;
    let outcome = search(cfg, &s, &scores)?;
    let baseline = top_k(cfg, &scores, cfg.poi.k)?;
    let baseline_fitness =
        evaluate_fitness::<f64>(&baseline, &s.profiling, s.validation()?, &umda_config(cfg)?, cfg.attack_settings())?;

    let model = profile(cfg, &s.profiling, &outcome.best)?;
    let curve = measure(cfg, &model, pool)?;
    let finals: Vec<f64> = curve.final_ranks.iter().map(|&r| r as f64).collect();

    write_with(out, "best_poi.csv", |w| outcome.write_best_csv(w))?;
    write_with(out, "history.csv", |w| outcome.write_history_csv(w))?;
    write_with(out, "marginals.csv", |w| outcome.write_marginals_csv(w))?;
    write_with(out, "ge_curve.csv", |w| curve.write_csv(w))?;
    let summary = EdaSummary {
        command: "eda-search",
        seed: cfg.seed,
        config: resolved(cfg),
        scheme: s.scheme,
        best_poi: outcome.best.indices(),
        n_poi: outcome.best.selected_count(),
        search_fitness: outcome.best_fitness,
        baseline_fitness,
        generations: outcome.generations(),
        evaluations: outcome.evaluations,
        confirmation_q_tge: q_tge(&curve),
        confirmation_final_mean_rank: curve.final_mean_rank(),
        confirmation_final_ranks: boxplot_stats(&finals)?,
    };
    write_json(out, "summary.json", &summary)?;
    println!(
        "eda-search: {} POIs {:?} after {} generations, fitness {:.4} (top-{} baseline {:.4}), confirmation q_tge {}",
        summary.n_poi,
        summary.best_poi,
        summary.generations,
        summary.search_fitness,
        cfg.poi.k,
        summary.baseline_fitness,
        fmt_q(summary.confirmation_q_tge)
    );
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub scheme: SchemeTag,
    pub poi: Vec<usize>,
    pub n_poi: usize,
    pub q_tge: Option<usize>,
    pub final_mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateSummary {
    pub command: &'static str,
    pub seed: u64,
    pub config: CampaignConfig,
    pub rows: Vec<ComparisonRow>,
}

pub fn evaluate(cfg: &CampaignConfig, out: &Path) -> Result<EvaluateSummary> {
    let schemes: Vec<Option<SchemeTag>> = match &cfg.data {
        DataSource::Sim(s) if !s.compare_schemes.is_empty() => s.compare_schemes.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let methods = if cfg.methods.is_empty() {
        vec![crate::config::Method { name: "top_k".into(), kind: MethodKind::TopK { k: None } }]
    } else {
        cfg.methods.clone()
    };
    let mut rows = Vec::new();
    for scheme in schemes {
        let s = load_splits(cfg, scheme)?;
        let pool = s.attack()?;
        let scores = poi_scores(cfg, &s.profiling)?;
        for m in &methods {
            let poi = match &m.kind {
                MethodKind::TopK { k } => top_k(cfg, &scores, k.unwrap_or(cfg.poi.k))?,
                MethodKind::Eda => search(cfg, &s, &scores)?.best,
                MethodKind::Fixed { indices } => PoiCandidate::from_indices(s.profiling.n_samples(), indices)?,
            };
            let model = profile(cfg, &s.profiling, &poi)?;
            let curve = measure(cfg, &model, pool)?;
            let row = ComparisonRow {
                method: m.name.clone(),
                scheme: s.scheme,
                poi: poi.indices(),
                n_poi: poi.selected_count(),
                q_tge: q_tge(&curve),
                final_mean_rank: curve.final_mean_rank(),
            };
            println!(
                "{} on {}: {} POIs, q_tge {}, final mean rank {:.2}",
                row.method,
                row.scheme,
                row.n_poi,
                fmt_q(row.q_tge),
                row.final_mean_rank
            );
            rows.push(row);
        }
    }
    write_with(out, "comparison.csv", |w| {
        writeln!(w, "method,scheme,n_poi,q_tge,final_mean_rank")?;
        for r in &rows {
            writeln!(w, "{},{},{},{},{}", r.method, r.scheme, r.n_poi, fmt_q(r.q_tge), r.final_mean_rank)?;
        }
        Ok(())
    })?;
    let summary = EvaluateSummary { command: "evaluate", seed: cfg.seed, config: resolved(cfg), rows };
    write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

fn fmt_q(q: Option<usize>) -> String {
    q.map_or_else(|| "NA".to_string(), |q| q.to_string())
}
