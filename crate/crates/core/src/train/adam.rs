use std::ops::Range;

use super::config::AdamConfig;

/// Adam over contiguous parameter groups, each with its own step counter so
/// that a group switched on late starts with fresh bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: Vec<u64>,
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize, n_groups: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            steps: vec![0; n_groups],
        }
    }

    /// Updates `params[range]` for group `g` with learning rate `lr`.
    pub fn step_group(
        &mut self,
        g: usize,
        range: Range<usize>,
        lr: f64,
        params: &mut [f64],
        grad: &[f64],
    ) {
        self.steps[g] += 1;
        let t = self.steps[g] as i32;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let m = &mut self.m[range.clone()];
        let v = &mut self.v[range.clone()];
        let p = &mut params[range.clone()];
        let g = &grad[range];
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            p[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_the_learning_rate() {
        let mut adam = Adam::new(AdamConfig::default(), 3, 1);
        let mut p = vec![1.0, 1.0, 1.0];
        adam.step_group(0, 0..3, 0.1, &mut p, &[2.0, -0.5, 0.0]);
        assert!((p[0] - 0.9).abs() < 1e-12);
        assert!((p[1] - 1.1).abs() < 1e-12);
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(
            AdamConfig {
                eps: 1e-8,
                ..Default::default()
            },
            2,
            1,
        );
        let mut p = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            adam.step_group(0, 0..2, 0.01, &mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn groups_count_steps_separately() {
        let mut adam = Adam::new(AdamConfig::default(), 4, 2);
        let mut p = vec![0.0; 4];
        let g = [1.0; 4];
        adam.step_group(0, 0..2, 0.1, &mut p, &g);
        adam.step_group(0, 0..2, 0.1, &mut p, &g);
        adam.step_group(1, 2..4, 0.1, &mut p, &g);
        assert_eq!(adam.steps, vec![2, 1]);
        assert!((p[2] + 0.1).abs() < 1e-12);
    }
}
