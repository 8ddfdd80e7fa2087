//! Acceptance checks, one line per criterion. Run with
//! `cargo test --test acceptance`; exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ttx::dataset::{load_taxonomy, validate_manifest, ImageSize, PatternRecord, RecordSource};
use ttx::diffusion::{
    build_schedule, ddim_sigma, forward_diffuse, predict_x0, DenoiserModel, MlpDenoiser, MlpSpec, NoiseSchedule, ScheduleKind,
};
use ttx::eval::{
    clip_similarity, perceptual_loss, render_report, EvalReport, FeatureExtractor, JointEmbedder, ReportFormat, ReportRow,
};
use ttx::service::cli::run_cli;
use ttx::{DatasetManifest, Raster};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn ttx(args: &[&str]) -> i32 {
    let mut argv = vec!["ttx"];
    argv.extend_from_slice(args);
    run_cli(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn diffusion_math() -> Outcome {
    let start = Instant::now();
    let mut worst_product: f64 = 0.0;
    for sched in [
        build_schedule(ScheduleKind::Linear, 1000, 1e-4, 0.02).unwrap(),
        NoiseSchedule::linear_scaled(200).unwrap(),
        build_schedule(ScheduleKind::Cosine, 200, 0.0, 0.0).unwrap(),
    ] {
        let mut prod = 1.0;
        for t in 1..=sched.steps() {
            prod *= 1.0 - sched.beta(t);
            worst_product = worst_product.max((sched.alpha_bar(t) - prod).abs());
        }
    }
    check(worst_product <= 1e-12, format!("product identity error {worst_product:e}"))?;

    let sched = NoiseSchedule::linear_scaled(200).unwrap();
    let x0 = [-0.8, -0.3, 0.0, 0.25, 0.5, 0.75, 0.9, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_mc: f64 = 0.0;
    for t in [10, 100, 200] {
        let ab = sched.alpha_bar(t);
        let (mut sum, mut sq) = ([0.0; 8], [0.0; 8]);
        let draws = 10_000;
        for _ in 0..draws {
            let x = forward_diffuse(&x0, t, &normals(&mut rng, 8), &sched).unwrap();
            for i in 0..8 {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
        let (mut z, mut ratio) = (0.0, 0.0);
        for i in 0..8 {
            let mean = sum[i] / draws as f64;
            let var = sq[i] / draws as f64 - mean * mean;
            z += (mean - ab.sqrt() * x0[i]) / (1.0 - ab).sqrt() / 8.0;
            ratio += var / (1.0 - ab) / 8.0;
        }
        worst_mc = worst_mc.max(z.abs()).max((ratio - 1.0).abs());
    }
    check(worst_mc < 0.02, format!("forward marginal off by {:.2}%", worst_mc * 100.0))?;

    let mut worst_x0: f64 = 0.0;
    for t in [1, 50, 150, 200] {
        let eps = normals(&mut rng, 8);
        let xt = forward_diffuse(&x0, t, &eps, &sched).unwrap();
        for (a, b) in predict_x0(&xt, &eps, t, &sched).unwrap().iter().zip(&x0) {
            worst_x0 = worst_x0.max((a - b).abs());
        }
    }
    check(worst_x0 <= 1e-5, format!("x0 recovery error {worst_x0:e}"))?;

    let short = NoiseSchedule::linear_scaled(20).unwrap();
    let mut worst_var: f64 = 0.0;
    for t in 1..=20 {
        let sigma = ddim_sigma(&short, t, t - 1, 1.0);
        worst_var = worst_var.max((sigma * sigma - short.posterior_variance(t)).abs());
    }
    check(worst_var <= 1e-9, format!("eta=1 variance gap {worst_var:e}"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "product {worst_product:.1e}, MC {:.2}%, x0 {worst_x0:.1e}, eta=1 {worst_var:.1e}, {elapsed:.1?}",
        worst_mc * 100.0
    ))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let spec = MlpSpec { latent_dim: 8, cond_dim: 4, hidden: 6, time_dim: 4 };
    let model = MlpDenoiser::new(spec, 99);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = 3;
    let x = Array2::from_shape_vec((b, 8), normals(&mut rng, b * 8)).unwrap();
    let c = Array2::from_shape_vec((b, 4), normals(&mut rng, b * 4)).unwrap();
    let e = Array2::from_shape_vec((b, 8), normals(&mut rng, b * 8)).unwrap();
    let t = [5, 60, 190];
    let loss = |params: &[f64]| {
        let m = MlpDenoiser::from_parameters(spec, params.to_vec()).unwrap();
        let p = m.predict_noise(x.view(), &t, c.view());
        p.iter().zip(e.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
    };
    let pred = model.predict_noise(x.view(), &t, c.view());
    let grad_out = (&pred - &e) * (2.0 / pred.len() as f64);
    let (grad, _) = model.backward(x.view(), &t, c.view(), grad_out.view());
    let base = model.parameters().to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let i = rng.random_range(0..base.len());
        let h = 1e-5;
        let (mut plus, mut minus) = (base.clone(), base.clone());
        plus[i] += h;
        minus[i] -= h;
        let fd = (loss(&plus) - loss(&minus)) / (plus[i] - minus[i]);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8));
    }
    check(worst <= 1e-4, format!("max relative error {worst:e}"))?;
    Ok(format!("{} params, max relative error {worst:.1e}, {:.1?}", base.len(), start.elapsed()))
}

struct PlaneEmbedder(Vec<f64>);

impl JointEmbedder for PlaneEmbedder {
    fn name(&self) -> &str {
        "plane"
    }
    fn embed_image(&self, image: &Raster) -> Vec<f64> {
        let v = [image.get(0, 0, 0), image.get(0, 0, 1)];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        vec![v[0] / n, v[1] / n]
    }
    fn embed_text(&self, _: &str, _: &DatasetManifest) -> Result<Vec<f64>, ttx::eval::EvalError> {
        Ok(self.0.clone())
    }
}

struct TwoLayerIdentity;

impl FeatureExtractor for TwoLayerIdentity {
    fn name(&self) -> &str {
        "identity"
    }
    fn features(&self, image: &Raster) -> Vec<Raster> {
        vec![image.clone(), image.clone()]
    }
}

fn rg(r: f64, g: f64) -> Raster {
    let mut img = Raster::zeros(1, 1, 3);
    img.set(0, 0, 0, r);
    img.set(0, 0, 1, g);
    img
}

fn metric_oracles() -> Outcome {
    let rec = PatternRecord::new(Raster::filled(2, 2, 3, 0.5), "x", vec!["Calico Patterns".into()], RecordSource::Synthetic);
    let m = DatasetManifest::new(vec![rec], load_taxonomy(), ImageSize::square(2));
    let h = 0.5f64.sqrt();
    let fixture = clip_similarity(&[rg(1.0, 0.0)], "Calico Patterns", &m, &PlaneEmbedder(vec![h, h])).unwrap();
    check((fixture - 70.710678).abs() <= 1e-6, format!("2D fixture gave {fixture}"))?;

    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mut text: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let tn = (text[0] * text[0] + text[1] * text[1]).sqrt();
        text = [text[0] / tn, text[1] / tn];
        let imgs: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(0.01..1.0), rng.random_range(0.01..1.0))).collect();
        let rasters: Vec<Raster> = imgs.iter().map(|&(a, b)| rg(a, b)).collect();
        let got = clip_similarity(&rasters, "Calico Patterns", &m, &PlaneEmbedder(text.to_vec())).unwrap();
        let mut total = 0.0;
        for &(a, b) in &imgs {
            let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for (u, v) in [a, b].iter().zip(&text) {
                ab += u * v;
                aa += u * u;
                bb += v * v;
            }
            total += ab / (aa.sqrt() * bb.sqrt());
        }
        worst = worst.max((got - 100.0 * total / 4.0).abs());
    }
    check(worst <= 1e-9, format!("scalar-loop cosine gap {worst:e}"))?;

    let hand = perceptual_loss(&[Raster::filled(4, 4, 3, 0.75)], &[Raster::filled(4, 4, 3, 0.25)], &TwoLayerIdentity, 0).unwrap();
    check(hand == 25.0, format!("hand fixture gave {hand}"))?;

    let zero = [Raster::zeros(3, 3, 3)];
    let delta = Raster::from_vec(3, 3, 3, (0..27).map(|i| ((i * 5) % 7) as f64 / 10.0 - 0.3).collect());
    let one = perceptual_loss(&[delta.clone()], &zero, &TwoLayerIdentity, 0).unwrap();
    for k in [2.0, 3.0] {
        let scaled = perceptual_loss(&[delta.map(|v| v * k)], &zero, &TwoLayerIdentity, 0).unwrap();
        check((scaled - k * k * one).abs() <= 1e-12 * scaled, format!("k={k}: {scaled} vs {}", k * k * one))?;
    }
    Ok(format!("2D fixture {fixture:.6}, loop gap {worst:.1e}, hand 25.0, k^2 scaling holds"))
}

struct DeskRun {
    checkpoint: Vec<u8>,
    baseline: Vec<u8>,
    report: Vec<u8>,
    elapsed: Duration,
}

fn desk_run(root: &Path) -> Result<DeskRun, String> {
    let start = Instant::now();
    let m = root.join("corpus");
    let base = root.join("base.ckpt");
    let tuned = root.join("tuned.ckpt");
    let report = root.join("report.jsonl");
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth-corpus", "--classes", "5", "--per-class", "100", "--size", "32", "--seed", "7", "--out", s(&m)],
        vec!["init", "--manifest", s(&m), "--seed", "7", "--out", s(&base)],
        vec!["train", "--manifest", s(&m), "--epochs", "20", "--seed", "7", "--init", s(&base), "--out", s(&tuned)],
        vec!["evaluate", "--candidate", s(&tuned), "--baseline", s(&base), "--manifest", s(&m), "--keywords", "all", "--seed", "7", "--out", s(&report)],
    ];
    for argv in &steps {
        let code = ttx(argv);
        if code != 0 {
            return Err(format!("`ttx {}` exited {code}", argv[0]));
        }
    }
    let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
    Ok(DeskRun {
        checkpoint: read(&tuned)?,
        baseline: read(&base)?,
        report: read(&report)?,
        elapsed: start.elapsed(),
    })
}

fn determinism_and_direction() -> (Outcome, Outcome) {
    let dirs = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (a, b) = match (desk_run(dirs.0.path()), desk_run(dirs.1.path())) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (Err(e.clone()), Err(e)),
    };
    let determinism = if a.checkpoint == b.checkpoint && a.baseline == b.baseline && a.report == b.report {
        Ok(format!("checkpoints ({} bytes) and reports identical across two runs", a.checkpoint.len()))
    } else {
        Err("runs differ".to_string())
    };
    let direction = (|| {
        let report = EvalReport::from_jsonl(std::str::from_utf8(&a.report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let wins = report.wins();
        let table = render_report(&report, ReportFormat::Text);
        for line in table.lines() {
            println!("    {line}");
        }
        check(report.rows.len() == 5, format!("{} rows", report.rows.len()))?;
        check(a.elapsed < Duration::from_secs(30 * 60), format!("run took {:?}", a.elapsed))?;
        check(wins >= 4, format!("candidate wins both metrics on {wins} of 5"))?;
        Ok(format!("candidate wins both metrics on {wins} of 5 keywords, pipeline {:.1?}", a.elapsed))
    })();
    (determinism, direction)
}

fn report_fidelity() -> Outcome {
    let table: [(&str, [f64; 4]); 9] = [
        ("Calico Pattern", [30.13, 71.08, 65.31, 57.0]),
        ("Traditional Japanese Patterns", [67.042, 175.88, 82.75, 72.0]),
        ("African Pattern fabric", [132.26, 164.88, 79.87, 73.31]),
        ("Turkish Patterns", [40.71, 44.79, 74.12, 68.5]),
        ("Oriental Patterns", [49.70, 115.76, 78.0, 73.87]),
        ("Aboriginal Patterns", [165.04, 189.88, 86.25, 75.37]),
        ("Modern Flower Print Fabric", [80.13, 101.78, 74.75, 73.18]),
        ("Native American Pattern", [66.19, 84.57, 81.0, 70.56]),
        ("Iranian Pattern", [41.91, 47.56, 79.0, 77.31]),
    ];
    let report = EvalReport {
        rows: table.iter().map(|(k, v)| ReportRow::new(*k, *v)).collect(),
        ..Default::default()
    };
    let text = render_report(&report, ReportFormat::Text);
    let calico = text.lines().nth(1).unwrap_or_default();
    check(calico == "Calico Pattern | 30.13 | 71.08 | 65.31 | 57.0", format!("rendered {calico:?}"))?;
    let aboriginal = text.lines().nth(6).unwrap_or_default();
    check(aboriginal == "Aboriginal Patterns | 165.04 | 189.88 | 86.25 | 75.37", format!("rendered {aboriginal:?}"))?;
    check(text == render_report(&report, ReportFormat::Text), "rendering is not deterministic")?;
    Ok(format!("{calico:?}"))
}

fn pipeline_smoke() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let images = root.join("fixture");
    common::write_ingest_fixture(&images);
    let m = root.join("m");
    let base = root.join("base.ckpt");
    let tuned = root.join("tuned.ckpt");
    let gen = root.join("gen");
    let report = root.join("report.jsonl");
    let steps: Vec<Vec<&str>> = vec![
        vec!["ingest", "--dir", s(&images), "--size", "16", "--out", s(&m)],
        vec!["caption", "--manifest", s(&m), "--captioner", "stub"],
        vec!["init", "--manifest", s(&m), "--val-fraction", "0.25", "--out", s(&base)],
        vec!["train", "--manifest", s(&m), "--val-fraction", "0.25", "--epochs", "2", "--init", s(&base), "--out", s(&tuned)],
        vec!["generate", "--ckpt", s(&tuned), "--prompt", "Turkish Patterns", "--seed", "1", "--count", "4", "--out", s(&gen)],
        vec!["evaluate", "--candidate", s(&tuned), "--baseline", s(&base), "--manifest", s(&m), "--out", s(&report)],
        vec!["report", "--in", s(&report), "--format", "markdown"],
    ];
    for argv in &steps {
        let code = ttx(argv);
        check(code == 0, format!("`ttx {}` exited {code}", argv[0]))?;
    }
    let manifest = DatasetManifest::load(&m).map_err(|e| e.to_string())?;
    let violations = validate_manifest(&manifest).violations.len();
    check(violations == 0, format!("{violations} manifest violations"))?;
    Ok(format!("{} records, 0 manifest violations, 7 stages exited 0", manifest.len()))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".to_string());
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("diffusion math suite", guarded(diffusion_math)),
        ("gradient check", guarded(gradient_check)),
        ("metric oracles", guarded(metric_oracles)),
    ];
    let (det, dir) = catch_unwind(determinism_and_direction).unwrap_or_else(|_| (Err("panicked".into()), Err("panicked".into())));
    results.push(("determinism", det));
    results.push(("directional comparison", dir));
    results.push(("report fidelity", guarded(report_fidelity)));
    results.push(("pipeline smoke", guarded(pipeline_smoke)));

    println!();
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
