use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::diffusion::{build_schedule, DiffusionError, NoiseSchedule, ScheduleKind, DEFAULT_COND_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecChoice {
    Identity,
    AvgPool2x,
    /// Principal-component patch autoencoder fitted on the training images.
    Patch2x { channels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub steps: usize,
    /// `None` rescales the `T = 1000` bounds `1e-4 .. 0.02` by `1000 / steps`.
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Linear,
            steps: 200,
            beta_start: None,
            beta_end: None,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule, DiffusionError> {
        match (self.kind, self.beta_start, self.beta_end) {
            (ScheduleKind::Linear, None, None) => NoiseSchedule::linear_scaled(self.steps),
            (kind, start, end) => {
                let scale = 1000.0 / self.steps as f64;
                build_schedule(
                    kind,
                    self.steps,
                    start.unwrap_or(1e-4 * scale),
                    end.unwrap_or((0.02 * scale).min(0.999)),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The learning rate halves after every this many epochs.
    pub lr_halving_epochs: usize,
    pub cond_dropout_prob: f64,
    /// Probability of conditioning an item on its keywords alone instead of the full caption.
    pub keyword_prompt_prob: f64,
    pub ema_decay: Option<f64>,
    pub seed: u64,
    pub schedule: ScheduleConfig,
    pub hidden: usize,
    pub cond_dim: usize,
    pub codec: CodecChoice,
    pub train_text_encoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_halving_epochs: 10,
            cond_dropout_prob: 0.1,
            keyword_prompt_prob: 0.25,
            ema_decay: Some(0.999),
            seed: 7,
            schedule: ScheduleConfig::default(),
            hidden: 256,
            cond_dim: DEFAULT_COND_DIM,
            codec: CodecChoice::Identity,
            train_text_encoder: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.cond_dropout_prob) {
            return bad(format!("cond_dropout_prob {} outside [0, 1)", self.cond_dropout_prob));
        }
        if !(0.0..1.0).contains(&self.keyword_prompt_prob) {
            return bad(format!("keyword_prompt_prob {} outside [0, 1)", self.keyword_prompt_prob));
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return bad(format!("ema_decay {d} outside [0, 1)"));
            }
        }
        if self.lr_halving_epochs == 0 {
            return bad("lr_halving_epochs must be positive".into());
        }
        if self.hidden == 0 || self.cond_dim == 0 {
            return bad("hidden and cond_dim must be positive".into());
        }
        Ok(())
    }

    /// Learning rate for a zero-based epoch index.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * 0.5f64.powi((epoch / self.lr_halving_epochs) as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.epochs, c.batch_size, c.schedule.steps), (20, 32, 200));
        let s = c.schedule.build().unwrap();
        assert_eq!(s.steps(), 200);
        assert!((s.beta(1) - 5e-4).abs() < 1e-15);
        assert!((s.beta(200) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_rejected() {
        let c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(TrainError::InvalidConfig(_))));
    }

    #[test]
    fn other_invariants() {
        for c in [
            TrainConfig { cond_dropout_prob: 1.0, ..Default::default() },
            TrainConfig { ema_decay: Some(1.0), ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
        assert!(TrainConfig { ema_decay: Some(0.0), ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn learning_rate_halves() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate_at(0), 1e-3);
        assert_eq!(c.learning_rate_at(9), 1e-3);
        assert_eq!(c.learning_rate_at(10), 5e-4);
        assert_eq!(c.learning_rate_at(25), 2.5e-4);
    }
}
