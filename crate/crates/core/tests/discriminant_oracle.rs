//! Template log-densities against a dense textbook evaluation:
//! explicit adjugate inverse and cofactor determinant.

use poisearch::poi::PoiCandidate;
use poisearch::template::{build_templates, TemplateOptions};
use poisearch::trace::{LeakageModel, SchemeTag, TraceSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn det(a: &[f64], d: usize) -> f64 {
    match d {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => unreachable!(),
    }
}

fn inverse(a: &[f64], d: usize) -> Vec<f64> {
    let det = det(a, d);
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            // cofactor C_ji, minor with row j and column i removed
            let minor: Vec<f64> = (0..d)
                .filter(|&r| r != j)
                .flat_map(|r| (0..d).filter(move |&c| c != i).map(move |c| a[r * d + c]))
                .collect();
            let m = if d == 1 { 1.0 } else { self::det(&minor, d - 1) };
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[i * d + j] = sign * m / det;
        }
    }
    inv
}

fn dense_log_pdf(x: &[f64], mean: &[f64], cov: &[f64]) -> f64 {
    let d = x.len();
    let inv = inverse(cov, d);
    let dev: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..d {
        for j in 0..d {
            q += dev[i] * inv[i * d + j] * dev[j];
        }
    }
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + det(cov, d).ln() + q)
}

/// Traces whose POI values follow a random correlated Gaussian around a
/// label-dependent mean.
fn correlated_set(rng: &mut ChaCha8Rng, d: usize, n: usize) -> (TraceSet, Vec<u8>) {
    let mix: Vec<f64> = (0..d * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut samples = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = (i % 9) as u8;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for r in 0..d {
            let v: f64 = (0..d).map(|c| mix[r * d + c] * z[c]).sum::<f64>() + 0.1 * z[r] + l as f64;
            samples.push(v as f32);
        }
        labels.push(l);
    }
    let ts = TraceSet::new(samples, d, vec![0; n], vec![0; n], None, SchemeTag::External).unwrap();
    (ts, labels)
}

#[test]
fn discriminant_matches_dense_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for instance in 0..1000 {
        let d = 1 + instance % 3;
        let pooled = instance % 2 == 0;
        let (ts, labels) = correlated_set(&mut rng, d, 90);
        let poi = PoiCandidate::from_mask(vec![true; d]);
        let opts = TemplateOptions { pooled, ..TemplateOptions::default() };
        let model = build_templates::<f64>(&ts, &labels, &poi, LeakageModel::HammingWeight, opts).unwrap();
        let class = rng.random_range(0..9);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..12.0)).collect();
        let got = model.discriminant_score(&x, class).unwrap();
        let want = dense_log_pdf(&x, model.class_mean(class), model.covariance(class));
        let rel = (got - want).abs() / want.abs().max(1e-300);
        worst = worst.max(rel);
        assert!(rel <= 1e-9, "instance {instance}: {got} vs {want}");
    }
    assert!(worst <= 1e-9);
}

#[test]
fn f32_templates_agree_with_f64_loosely() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (ts, labels) = correlated_set(&mut rng, 3, 180);
    let poi = PoiCandidate::from_mask(vec![true; 3]);
    let opts = TemplateOptions::default();
    let m64 = build_templates::<f64>(&ts, &labels, &poi, LeakageModel::HammingWeight, opts).unwrap();
    let m32 = build_templates::<f32>(&ts, &labels, &poi, LeakageModel::HammingWeight, opts).unwrap();
    let x = [1.0, 2.0, 3.0];
    let a = m64.discriminant_score(&x, 2).unwrap();
    let b = m32.discriminant_score(&x.map(|v| v as f32), 2).unwrap() as f64;
    assert!((a - b).abs() / a.abs() < 1e-3, "{a} vs {b}");
}
