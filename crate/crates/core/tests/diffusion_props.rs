use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ttx::diffusion::{build_schedule, ddim_sigma, ddim_step, ddpm_step, forward_diffuse, predict_x0, NoiseSchedule, ScheduleKind};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

#[test]
fn forward_marginal_moments_match_closed_form() {
    let s = build_schedule(ScheduleKind::Linear, 200, 1e-4, 0.02).unwrap();
    let x0 = [-0.9, -0.5, -0.1, 0.0, 0.2, 0.4, 0.7, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for t in [1, 100, 200] {
        let ab = s.alpha_bar(t);
        let mut sum = [0.0; 8];
        let mut sq = [0.0; 8];
        let draws = 10_000;
        for _ in 0..draws {
            let x = forward_diffuse(&x0, t, &normals(&mut rng, 8), &s).unwrap();
            for i in 0..8 {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
        // pooled over the 8 pixels: standardized mean error and variance ratio
        let mut z_mean = 0.0;
        let mut var_ratio = 0.0;
        for i in 0..8 {
            let mean = sum[i] / draws as f64;
            let var = sq[i] / draws as f64 - mean * mean;
            z_mean += (mean - ab.sqrt() * x0[i]) / (1.0 - ab).sqrt() / 8.0;
            var_ratio += var / (1.0 - ab) / 8.0;
        }
        assert!(z_mean.abs() < 0.02, "t={t} mean offset {z_mean}");
        assert!((var_ratio - 1.0).abs() < 0.02, "t={t} variance ratio {var_ratio}");
    }
}

#[test]
fn ancestral_step_moments_match_posterior() {
    let s = NoiseSchedule::linear_scaled(50).unwrap();
    let x_t = [0.3, -0.7, 1.2];
    let eps = [0.5, -0.2, 0.1];
    let t = 25;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 10_000;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    for _ in 0..draws {
        let x = ddpm_step(&x_t, &eps, t, &s, &normals(&mut rng, 3)).unwrap();
        for i in 0..3 {
            sum[i] += x[i];
            sq[i] += x[i] * x[i];
        }
    }
    let coef = s.beta(t) / (1.0 - s.alpha_bar(t)).sqrt();
    let var = s.posterior_variance(t);
    for i in 0..3 {
        let mu = (x_t[i] - coef * eps[i]) / s.alpha(t).sqrt();
        let mean = sum[i] / draws as f64;
        let v = sq[i] / draws as f64 - mean * mean;
        assert!((mean - mu).abs() < 4.0 * (var / draws as f64).sqrt(), "mean {mean} vs {mu}");
        assert!((v / var - 1.0).abs() < 0.06, "variance {v} vs {var}");
    }
}

#[test]
fn ddim_eta_one_matches_ancestral_variance_on_short_schedule() {
    let s = NoiseSchedule::linear_scaled(20).unwrap();
    for t in 1..=20 {
        let sigma = ddim_sigma(&s, t, t - 1, 1.0);
        assert!((sigma * sigma - s.posterior_variance(t)).abs() <= 1e-9, "t={t}");
    }
}

fn schedules() -> impl Strategy<Value = NoiseSchedule> {
    prop_oneof![
        (2usize..400, 1e-5f64..1e-3, 1e-3f64..0.05)
            .prop_map(|(t, a, b)| build_schedule(ScheduleKind::Linear, t, a, b).unwrap()),
        (2usize..400).prop_map(|t| build_schedule(ScheduleKind::Cosine, t, 0.0, 0.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_invariants(s in schedules()) {
        let mut prod = 1.0;
        for t in 1..=s.steps() {
            prop_assert!(s.beta(t) > 0.0 && s.beta(t) < 1.0);
            prop_assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            prod *= 1.0 - s.beta(t);
            prop_assert!((s.alpha_bar(t) - prod).abs() <= 1e-12);
        }
    }

    #[test]
    fn x0_recovery(seed in 0u64..10_000, t in 1usize..=200) {
        let s = NoiseSchedule::linear_scaled(200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0: Vec<f64> = (0..16).map(|i| (i as f64 / 7.5) - 1.0).collect();
        let eps = normals(&mut rng, 16);
        let xt = forward_diffuse(&x0, t, &eps, &s).unwrap();
        let back = predict_x0(&xt, &eps, t, &s).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            prop_assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn deterministic_ddim_composes_without_noise(seed in 0u64..1000, t in 2usize..=50, gap in 1usize..10) {
        let s = NoiseSchedule::linear_scaled(50).unwrap();
        let t_prev = t.saturating_sub(gap);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = normals(&mut rng, 4);
        let e = normals(&mut rng, 4);
        let a = ddim_step(&x, &e, t, t_prev, &s, 0.0, &[]).unwrap();
        let b = ddim_step(&x, &e, t, t_prev, &s, 0.0, &[]).unwrap();
        prop_assert_eq!(a, b);
    }
}
