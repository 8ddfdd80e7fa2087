//! Closed-form forward process and the DDPM / DDIM reverse steps, elementwise over flat buffers.

use super::schedule::NoiseSchedule;
use super::DiffusionError;

fn same_len(a: &[f64], b: &[f64]) -> Result<(), DiffusionError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(DiffusionError::ShapeMismatch {
            expected: a.len(),
            actual: b.len(),
        })
    }
}

/// `sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps`.
pub fn forward_diffuse(
    x0: &[f64],
    t: usize,
    eps: &[f64],
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>, DiffusionError> {
    schedule.check_step(t)?;
    same_len(x0, eps)?;
    let ab = schedule.alpha_bar(t);
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| signal * x + noise * e).collect())
}

/// `(x_t - sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_bar_t)`.
pub fn predict_x0(
    x_t: &[f64],
    eps_hat: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>, DiffusionError> {
    schedule.check_step(t)?;
    same_len(x_t, eps_hat)?;
    Ok(predict_x0_unchecked(x_t, eps_hat, schedule.alpha_bar(t)))
}

fn predict_x0_unchecked(x_t: &[f64], eps_hat: &[f64], alpha_bar: f64) -> Vec<f64> {
    let (signal, noise) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    x_t.iter()
        .zip(eps_hat)
        .map(|(x, e)| (x - noise * e) / signal)
        .collect()
}

/// Ancestral step `t -> t - 1` with posterior variance `beta_tilde_t`.
/// `noise` is ignored at `t = 1`.
pub fn ddpm_step(
    x_t: &[f64],
    eps_hat: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    noise: &[f64],
) -> Result<Vec<f64>, DiffusionError> {
    schedule.check_step(t)?;
    same_len(x_t, eps_hat)?;
    let alpha = schedule.alpha(t);
    let coef = schedule.beta(t) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let inv_sqrt_alpha = 1.0 / alpha.sqrt();
    let mean = x_t
        .iter()
        .zip(eps_hat)
        .map(|(x, e)| inv_sqrt_alpha * (x - coef * e));
    if t == 1 {
        return Ok(mean.collect());
    }
    same_len(x_t, noise)?;
    let sigma = schedule.posterior_variance(t).sqrt();
    Ok(mean.zip(noise).map(|(m, z)| m + sigma * z).collect())
}

/// Standard deviation of the DDIM step `t -> t_prev` for a given `eta`.
pub fn ddim_sigma(schedule: &NoiseSchedule, t: usize, t_prev: usize, eta: f64) -> f64 {
    let ab_t = schedule.alpha_bar(t);
    let ab_prev = schedule.alpha_bar(t_prev);
    eta * ((1.0 - ab_prev) / (1.0 - ab_t)).sqrt() * (1.0 - ab_t / ab_prev).sqrt()
}

/// Generalized (DDIM) step `t -> t_prev`; deterministic when `eta = 0`.
pub fn ddim_step(
    x_t: &[f64],
    eps_hat: &[f64],
    t: usize,
    t_prev: usize,
    schedule: &NoiseSchedule,
    eta: f64,
    noise: &[f64],
) -> Result<Vec<f64>, DiffusionError> {
    if t_prev >= t || t > schedule.steps() {
        return Err(DiffusionError::StepOrderViolation { t, t_prev });
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(DiffusionError::InvalidRequest(format!("eta {eta} outside [0, 1]")));
    }
    same_len(x_t, eps_hat)?;
    let x0_hat = predict_x0_unchecked(x_t, eps_hat, schedule.alpha_bar(t));
    let ab_prev = schedule.alpha_bar(t_prev);
    let sigma = ddim_sigma(schedule, t, t_prev, eta);
    let dir = (1.0 - ab_prev - sigma * sigma).max(0.0).sqrt();
    let signal = ab_prev.sqrt();
    if sigma == 0.0 {
        return Ok(x0_hat
            .iter()
            .zip(eps_hat)
            .map(|(x0, e)| signal * x0 + dir * e)
            .collect());
    }
    same_len(x_t, noise)?;
    Ok(x0_hat
        .iter()
        .zip(eps_hat)
        .zip(noise)
        .map(|((x0, e), z)| signal * x0 + dir * e + sigma * z)
        .collect())
}

/// Classifier-free guidance: `eps_uncond + scale * (eps_cond - eps_uncond)`.
pub fn cfg_combine(eps_uncond: &[f64], eps_cond: &[f64], scale: f64) -> Result<Vec<f64>, DiffusionError> {
    same_len(eps_uncond, eps_cond)?;
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(DiffusionError::InvalidRequest(format!("guidance scale {scale} must be finite and >= 0")));
    }
    Ok(eps_uncond
        .iter()
        .zip(eps_cond)
        .map(|(u, c)| u + scale * (c - u))
        .collect())
}
