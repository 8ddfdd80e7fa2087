use serde::{Deserialize, Serialize};

use super::DiffusionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

/// Per-step noise amounts for `t = 1..=T`.
///
/// Stored zero-based: `betas[t - 1]` is `beta_t`. The accessors take the
/// one-based step and define `alpha_bar(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

const COSINE_OFFSET: f64 = 0.008;
const MAX_BETA: f64 = 0.999;

fn cosine_f(u: f64) -> f64 {
    ((u + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * std::f64::consts::FRAC_PI_2)
        .cos()
        .powi(2)
}

pub fn build_schedule(
    kind: ScheduleKind,
    steps: usize,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule, DiffusionError> {
    if steps < 2 {
        return Err(DiffusionError::InvalidBounds(format!("T = {steps}, need at least 2")));
    }
    let betas: Vec<f64> = match kind {
        ScheduleKind::Linear => {
            if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
                return Err(DiffusionError::InvalidBounds(format!(
                    "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
                )));
            }
            let span = (steps - 1) as f64;
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / span)
                .collect()
        }
        ScheduleKind::Cosine => {
            let f0 = cosine_f(0.0);
            let bar = |t: usize| cosine_f(t as f64 / steps as f64) / f0;
            (1..=steps)
                .map(|t| (1.0 - bar(t) / bar(t - 1)).min(MAX_BETA))
                .collect()
        }
    };
    Ok(NoiseSchedule::from_betas(kind, betas))
}

impl NoiseSchedule {
    /// Derives alphas and cumulative products from the betas.
    pub fn from_betas(kind: ScheduleKind, betas: Vec<f64>) -> Self {
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Self {
            kind,
            betas,
            alphas,
            alpha_bars,
        }
    }

    /// Linear schedule whose bounds are the `T = 1000` defaults (`1e-4 .. 0.02`)
    /// rescaled by `1000 / T`, so the total noise stays comparable for short chains.
    pub fn linear_scaled(steps: usize) -> Result<Self, DiffusionError> {
        let scale = 1000.0 / steps as f64;
        build_schedule(
            ScheduleKind::Linear,
            steps,
            1e-4 * scale,
            (0.02 * scale).min(MAX_BETA),
        )
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn check_step(&self, t: usize) -> Result<(), DiffusionError> {
        if t == 0 || t > self.steps() {
            Err(DiffusionError::StepOutOfRange { t, max: self.steps() })
        } else {
            Ok(())
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `alpha_bar(0)` is 1 by definition.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Posterior variance `((1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)) * beta_t`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }

    /// Descending list of `count` steps spread uniformly over `T..=1`.
    ///
    /// Always starts at `T` and ends at `1` (for `count >= 2`); fractional
    /// positions round half up, toward the larger step.
    pub fn strided_steps(&self, count: usize) -> Result<Vec<usize>, DiffusionError> {
        let total = self.steps();
        if count == 0 || count > total {
            return Err(DiffusionError::InvalidRequest(format!(
                "steps must be in 1..={total}, got {count}"
            )));
        }
        if count == 1 {
            return Ok(vec![total]);
        }
        let span = (total - 1) as f64 / (count - 1) as f64;
        Ok((0..count)
            .rev()
            .map(|i| 1 + (i as f64 * span + 0.5).floor() as usize)
            .collect())
    }
}
