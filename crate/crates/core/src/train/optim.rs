/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update of `params` in place. Updated values are rounded to `f32`
    /// precision, the precision parameters are stored at.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps as i32);
        let c2 = 1.0 - self.beta2.powi(self.steps as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] = f64::from((params[i] - lr * m_hat / (v_hat.sqrt() + self.eps)) as f32);
        }
    }
}

/// Exponential moving average of parameters with the usual warm-up:
/// effective decay `min(decay, (1 + n) / (10 + n))` at update `n`.
#[derive(Debug, Clone)]
pub struct Ema {
    decay: f64,
    updates: u64,
    values: Vec<f64>,
}

impl Ema {
    pub fn new(decay: f64, initial: &[f64]) -> Self {
        Self {
            decay,
            updates: 0,
            values: initial.to_vec(),
        }
    }

    pub fn effective_decay(&self) -> f64 {
        let n = self.updates as f64;
        self.decay.min((1.0 + n) / (10.0 + n))
    }

    pub fn update(&mut self, current: &[f64]) {
        let d = self.effective_decay();
        for (e, c) in self.values.iter_mut().zip(current) {
            *e = d * *e + (1.0 - d) * c;
        }
        self.updates += 1;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_lr() {
        // with bias correction the first update is lr * g / (|g| + eps)
        let mut opt = Adam::new(2);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut p, &[0.5, -2.0], 0.01);
        assert!((p[0] - 0.99).abs() < 1e-6);
        assert!((p[1] + 0.99).abs() < 1e-6);
        assert!(p.iter().all(|&v| f64::from(v as f32) == v));
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut opt = Adam::new(1);
        let mut p = vec![3.0];
        for _ in 0..2000 {
            let g = 2.0 * (p[0] - 1.0);
            opt.step(&mut p, &[g], 0.05);
        }
        assert!((p[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ema_zero_decay_tracks_current() {
        let mut ema = Ema::new(0.0, &[1.0, 2.0]);
        ema.update(&[5.0, -1.0]);
        assert_eq!(ema.values(), &[5.0, -1.0]);
        ema.update(&[0.25, 0.5]);
        assert_eq!(ema.values(), &[0.25, 0.5]);
    }

    #[test]
    fn ema_stays_between_previous_and_current() {
        let mut ema = Ema::new(0.999, &[0.0, 10.0, -3.0]);
        let mut rng = 12345u64;
        for _ in 0..200 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let cur: Vec<f64> = (0..3).map(|i| ((rng >> (10 + i * 8)) % 100) as f64 - 50.0).collect();
            let prev = ema.values().to_vec();
            ema.update(&cur);
            for i in 0..3 {
                let (lo, hi) = (prev[i].min(cur[i]), prev[i].max(cur[i]));
                assert!(ema.values()[i] >= lo - 1e-12 && ema.values()[i] <= hi + 1e-12);
            }
        }
        assert!(ema.effective_decay() <= 0.999);
    }
}
